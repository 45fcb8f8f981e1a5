//! Empirical distribution machinery: ECDF banks, Kolmogorov–Smirnov
//! distances, DKW bands, tail-dependence and tail-index diagnostics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};

/// Where a bank of samples came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub model: String,
    pub t: Option<f64>,
    pub reps: usize,
}

impl Provenance {
    pub fn new(seed: u64, model: impl Into<String>, t: Option<f64>, reps: usize) -> Self {
        Self {
            seed: Some(seed),
            model: model.into(),
            t,
            reps,
        }
    }
}

/// Sorted sample with provenance. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfBank {
    values: Vec<f64>,
    provenance: Provenance,
}

impl EcdfBank {
    pub fn new(mut values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("ecdf bank"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("NaN in ecdf bank"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, provenance })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Provenance::default())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `F_n(x) = #{v ≤ x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Left-continuous inverse: smallest sample value `v` with `F_n(v) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.values[k - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv_writer(writer);
        w.write_record(["value"])?;
        for v in &self.values {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, provenance: Provenance) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 1 || &headers[0] != "value" {
            return Err(invalid("bank csv must have the single header `value`"));
        }
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let v: f64 = rec[0]
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad value `{}`", &rec[0])))?;
            values.push(v);
        }
        Self::new(values, provenance)
    }
}

pub(crate) fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &EcdfBank, b: &EcdfBank) -> f64 {
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS distance between a bank and a continuous CDF, evaluated at every
/// distinct sample value (the sup is attained there).
pub fn ks_distance_to_cdf<F: Fn(f64) -> f64>(bank: &EcdfBank, cdf: F) -> f64 {
    let xs = bank.values();
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0usize;
    while i < xs.len() {
        let v = xs[i];
        let below = i as f64 / n;
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        let at = i as f64 / n;
        let f = cdf(v);
        d = d.max((at - f).abs()).max((f - below).abs());
    }
    d
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width `sqrt(ln(2/δ) / (2n))`.
pub fn dkw_epsilon(n: f64, delta: f64) -> Result<f64> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(invalid(format!("dkw sample size {n} must be >= 1")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("dkw confidence {delta} outside (0,1)")));
    }
    Ok(((2.0 / delta).ln() / (2.0 * n)).sqrt())
}

/// DKW band for the two-sample statistic, using the effective size
/// `n_a n_b / (n_a + n_b)`.
pub fn dkw_epsilon_two_sample(n_a: usize, n_b: usize, delta: f64) -> Result<f64> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::Empty("two-sample dkw"));
    }
    let (a, b) = (n_a as f64, n_b as f64);
    dkw_epsilon(a * b / (a + b), delta)
}

/// Threshold such that exactly `k = ⌊n(1-q)⌋` sample values lie strictly
/// above it (the k-th largest value is the empirical `q`-quantile). Ties are
/// broken by rank.
fn upper_threshold(values: &[f64], q: f64) -> (usize, Vec<bool>) {
    let n = values.len();
    let k = ((n as f64) * (1.0 - q)).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut above = vec![false; n];
    for &i in order.iter().take(k) {
        above[i] = true;
    }
    (k, above)
}

/// Estimate of `P(X > U_X^←(x) | Y > U_Y^←(x))` at `x = 1/(1-q)`, with the
/// tail quantile transforms replaced by empirical order statistics.
pub fn tail_dependence_estimate(pairs: &[(f64, f64)], q: f64) -> Result<f64> {
    if !(q > 0.9 && q < 1.0) {
        return Err(invalid(format!("quantile level {q} outside (0.9,1)")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ky, y_above) = upper_threshold(&ys, q);
    if ky < 100 {
        return Err(Error::InsufficientExceedances { got: ky, need: 100 });
    }
    let (_, x_above) = upper_threshold(&xs, q);
    let joint = x_above
        .iter()
        .zip(&y_above)
        .filter(|(&a, &b)| a && b)
        .count();
    Ok(joint as f64 / ky as f64)
}

/// `P(X > x | Y exceeds its empirical q_y-quantile)` for each `x` in `xs`.
pub fn conditional_exceedance(pairs: &[(f64, f64)], q_y: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ky, y_above) = upper_threshold(&ys, q_y);
    if ky < 100 {
        return Err(Error::InsufficientExceedances { got: ky, need: 100 });
    }
    let cond: Vec<f64> = pairs
        .iter()
        .zip(&y_above)
        .filter(|(_, &a)| a)
        .map(|(p, _)| p.0)
        .collect();
    Ok(xs
        .iter()
        .map(|&x| cond.iter().filter(|&&v| v > x).count() as f64 / ky as f64)
        .collect())
}

/// Hill estimate of the tail index `α` from the `k` largest values.
pub fn hill_estimate(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= values.len() {
        return Err(invalid(format!("hill k = {k} must be in [1, n)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    if threshold <= 0.0 {
        return Err(invalid("hill threshold must be positive"));
    }
    let mean_log = sorted[..k].iter().map(|v| (v / threshold).ln()).sum::<f64>() / k as f64;
    Ok(1.0 / mean_log)
}

/// Pearson chi-squared uniformity test of values in `[0,1]` over `bins`
/// equal cells; returns `(statistic, p_value)`.
pub fn chi_squared_uniform(values: &[f64], bins: usize) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("chi-squared sample"));
    }
    if bins < 2 {
        return Err(invalid("need at least two bins"));
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(format!("value {v} outside [0,1]")));
        }
        let b = ((v * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let chi = ChiSquared::new((bins - 1) as f64).map_err(|e| invalid(e.to_string()))?;
    Ok((stat, 1.0 - chi.cdf(stat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bank(v: &[f64]) -> EcdfBank {
        EcdfBank::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn ks_basic_cases() {
        let a = bank(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ks_distance(&a, &a), 0.0);
        let shuffled = bank(&[3.0, 1.0, 4.0, 2.0]);
        assert_eq!(ks_distance(&a, &shuffled), 0.0);
        let far = bank(&[10.0, 11.0]);
        assert_eq!(ks_distance(&a, &far), 1.0);
        assert_eq!(ks_distance(&far, &a), 1.0);
    }

    #[test]
    fn ks_with_ties() {
        let a = bank(&[1.0, 1.0, 2.0, 2.0]);
        let b = bank(&[1.0, 2.0, 2.0, 2.0]);
        assert!((ks_distance(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_to_uniform_cdf() {
        let a = bank(&[0.25, 0.75]);
        let d = ks_distance_to_cdf(&a, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_bank_rejected() {
        assert!(matches!(
            EcdfBank::from_values(vec![]),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn dkw_values() {
        let e = dkw_epsilon(20000.0, 0.01).unwrap();
        assert!((e - 0.011_509).abs() < 1e-5, "{e}");
        assert!(dkw_epsilon(0.0, 0.01).is_err());
        assert!(dkw_epsilon(10.0, 1.0).is_err());
        assert!(dkw_epsilon(1e3, 0.01).unwrap() > dkw_epsilon(1e5, 0.01).unwrap());
        let two = dkw_epsilon_two_sample(100, 100, 0.01).unwrap();
        assert!((two - dkw_epsilon(50.0, 0.01).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn quantile_and_cdf() {
        let a = bank(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(a.quantile(0.2), 1.0);
        assert_eq!(a.quantile(0.21), 2.0);
        assert_eq!(a.quantile(1.0), 5.0);
        assert_eq!(a.cdf(3.0), 0.6);
        assert_eq!(a.cdf(0.0), 0.0);
    }

    #[test]
    fn tail_dependence_identical_is_one() {
        let pairs: Vec<(f64, f64)> = (0..20_000).map(|i| (i as f64, i as f64)).collect();
        assert_eq!(tail_dependence_estimate(&pairs, 0.99).unwrap(), 1.0);
        assert!(matches!(
            tail_dependence_estimate(&pairs[..1000], 0.99),
            Err(Error::InsufficientExceedances { .. })
        ));
        assert!(tail_dependence_estimate(&pairs, 0.5).is_err());
    }

    #[test]
    fn tail_dependence_antitone_is_zero() {
        let pairs: Vec<(f64, f64)> = (0..20_000).map(|i| (i as f64, -(i as f64))).collect();
        assert_eq!(tail_dependence_estimate(&pairs, 0.99).unwrap(), 0.0);
    }

    #[test]
    fn hill_on_exact_pareto_quantiles() {
        // deterministic Pareto(1/2) quantiles
        let n = 100_000;
        let v: Vec<f64> = (1..=n)
            .map(|i| ((i as f64 - 0.5) / n as f64).powf(-2.0))
            .collect();
        let a = hill_estimate(&v, 1000).unwrap();
        assert!((a - 0.5).abs() < 0.01, "{a}");
    }

    #[test]
    fn chi_squared_perfect_uniform() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (stat, p) = chi_squared_uniform(&v, 10).unwrap();
        assert!(stat < 1e-9);
        assert!(p > 0.999);
    }

    #[test]
    fn csv_round_trip() {
        let a = bank(&[0.5, -1.25, 3.0]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "value\n-1.25\n0.5\n3\n");
        let b = EcdfBank::read_csv(buf.as_slice(), Provenance::default()).unwrap();
        assert_eq!(a.values(), b.values());
    }

    proptest! {
        #[test]
        fn ks_symmetric_and_triangle(
            a in prop::collection::vec(-5.0f64..5.0, 1..40),
            b in prop::collection::vec(-5.0f64..5.0, 1..40),
            c in prop::collection::vec(-5.0f64..5.0, 1..40),
        ) {
            let (a, b, c) = (bank(&a), bank(&b), bank(&c));
            let ab = ks_distance(&a, &b);
            prop_assert_eq!(ab, ks_distance(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!(ks_distance(&a, &c) <= ab + ks_distance(&b, &c) + 1e-12);
        }

        #[test]
        fn tail_dependence_in_unit_interval(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2000..3000),
        ) {
            let e = tail_dependence_estimate(&pairs, 0.95).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
