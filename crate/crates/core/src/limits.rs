//! Limit laws: Mittag-Leffler mixtures `E[G(x)^W]`, order-statistic and
//! two-largest mixtures, and the largest-jump law, each with its evaluation
//! route and error estimate.
//!
//! `W = W_α(1)` has `E exp(-sW) = E_α(-s/Γ(1-α))`, so every mixture has a
//! series route through the Mittag-Leffler function where that series is
//! numerically reachable and a Monte Carlo route over a bank of `W` draws.

use std::io::Write;
use std::sync::Arc;

use statrs::function::gamma::{gamma, gamma_ur, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::model::MdaSpec;
use crate::rng::{check_alpha, HittingTime, StreamSeed};
use crate::stats::{csv_writer, EcdfBank, Provenance};

/// Largest series term tolerated before cancellation ruins the sum.
const MAX_SERIES_TERM: f64 = 1e8;
const MAX_SERIES_TERMS: usize = 100_000;

/// `E_α(z) = Σ z^n / Γ(1 + nα)` for `z <= 0`.
pub fn mittag_leffler_fn(alpha: f64, z: f64) -> Result<f64> {
    Ok(mittag_leffler_series(alpha, z)?.0)
}

/// Series value with a bound on its rounding and truncation error.
fn mittag_leffler_series(alpha: f64, z: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("mittag-leffler index {alpha} outside (0,1]")));
    }
    if !(z <= 0.0) || !z.is_finite() {
        return Err(invalid(format!("mittag-leffler argument {z} must be <= 0")));
    }
    if z == 0.0 {
        return Ok((1.0, 0.0));
    }
    let ln_abs = (-z).ln();
    let mut sum = 1.0;
    let mut peak = 1.0f64;
    let mut prev = 0.0f64;
    for n in 1..MAX_SERIES_TERMS {
        // terms in log space so large n never overflows
        let mag = (n as f64 * ln_abs - ln_gamma(1.0 + n as f64 * alpha)).exp();
        if mag > MAX_SERIES_TERM {
            return Err(Error::PrecisionUnreachable { alpha, z });
        }
        sum += if n % 2 == 0 { mag } else { -mag };
        peak = peak.max(mag);
        if mag < prev && mag < 1e-18 {
            return Ok((sum, mag + 4.0 * f64::EPSILON * peak * n as f64));
        }
        prev = mag;
    }
    Err(Error::PrecisionUnreachable { alpha, z })
}

/// Bank of `W_α(1)` draws for the Monte Carlo route.
#[derive(Debug, Clone, PartialEq)]
pub struct WBank {
    alpha: f64,
    values: Vec<f64>,
    seed: StreamSeed,
}

impl WBank {
    /// `n` draws from one stream, in order.
    pub fn generate(alpha: f64, n: usize, seed: StreamSeed) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("w bank"));
        }
        let sampler = HittingTime::new(alpha)?;
        let mut stream = seed.stream();
        let values = (0..n).map(|_| sampler.sample(1.0, &mut stream)).collect();
        Ok(Self {
            alpha,
            values,
            seed,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
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

    pub fn seed(&self) -> StreamSeed {
        self.seed
    }

    pub fn to_ecdf(&self) -> Result<EcdfBank> {
        EcdfBank::new(
            self.values.clone(),
            Provenance::new(
                self.seed.master_seed,
                format!("hitting_time_alpha_{}", self.alpha),
                Some(1.0),
                self.values.len(),
            ),
        )
    }

    /// Mean and standard error of `f(w)` over the bank.
    pub fn mean_of<F: Fn(f64) -> f64>(&self, f: F) -> (f64, f64) {
        let n = self.values.len() as f64;
        let (mut s, mut s2) = (0.0, 0.0);
        for &w in &self.values {
            let v = f(w);
            s += v;
            s2 += v * v;
        }
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Series,
    PoissonCdf,
    MonteCarlo,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Series => "series",
            Route::PoissonCdf => "poisson_cdf",
            Route::MonteCarlo => "monte_carlo",
        }
    }
}

/// A value with its standard error (Monte Carlo) or truncation bound
/// (series).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub route: Route,
}

/// `P(Poisson(mu) <= k_minus_1)`. For `k_minus_1 = 0` this is exactly
/// `exp(-mu)`. Below the mean crossover the value is formed as one minus
/// the upper tail, which keeps it nonincreasing in `mu` near 1.
pub fn poisson_cdf(k_minus_1: u32, mu: f64) -> f64 {
    if k_minus_1 == 0 {
        return (-mu).exp();
    }
    if mu == 0.0 {
        return 1.0;
    }
    let k = k_minus_1 as f64 + 1.0;
    if mu < k {
        let mut term = (-mu + k * mu.ln() - ln_gamma(k + 1.0)).exp();
        let mut sum = 0.0;
        let mut j = k;
        while term > 1e-300 && term > 1e-17 * sum {
            sum += term;
            j += 1.0;
            term *= mu / j;
        }
        return (1.0 - sum).max(0.0);
    }
    if k_minus_1 < 30 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..=k_minus_1 {
            term *= mu / j as f64;
            sum += term;
        }
        ((-mu).exp() * sum).min(1.0)
    } else {
        gamma_ur(k, mu)
    }
}

#[derive(Debug, Clone)]
enum LawKind {
    Max { mda: MdaSpec },
    Kth { mda: MdaSpec, k: u32 },
    LargestJump { bank: Arc<EcdfBank> },
}

/// An evaluable limiting CDF. The route is fixed at construction.
#[derive(Debug, Clone)]
pub struct LimitLaw {
    description: String,
    alpha: f64,
    kind: LawKind,
    route: Route,
    bank: Option<Arc<WBank>>,
}

impl LimitLaw {
    /// `x ↦ E[G(x)^W]`. `bank = None` selects the series route; otherwise
    /// the Monte Carlo route over the bank.
    pub fn max(mda: MdaSpec, alpha: f64, bank: Option<Arc<WBank>>) -> Result<Self> {
        check_alpha(alpha)?;
        check_bank(alpha, bank.as_deref())?;
        let route = if bank.is_some() {
            Route::MonteCarlo
        } else {
            Route::Series
        };
        Ok(Self {
            description: format!("max limit E[G(x)^W], {:?}, alpha {alpha}", mda.family()),
            alpha,
            kind: LawKind::Max { mda },
            route,
            bank,
        })
    }

    /// `x ↦ E[P(Poisson(W Λ(x)) <= k-1)]` over the bank.
    pub fn kth_order(mda: MdaSpec, alpha: f64, k: u32, bank: Arc<WBank>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("order statistic index starts at 1"));
        }
        check_bank(alpha, Some(&bank))?;
        Ok(Self {
            description: format!("{k}-th order limit, {:?}, alpha {alpha}", mda.family()),
            alpha,
            kind: LawKind::Kth { mda, k },
            route: Route::PoissonCdf,
            bank: Some(bank),
        })
    }

    /// ECDF of a largest-jump sample bank.
    pub fn largest_jump(bank: Arc<EcdfBank>, alpha: f64) -> Self {
        Self {
            description: format!("largest jump before passage, alpha {alpha}"),
            alpha,
            kind: LawKind::LargestJump { bank },
            route: Route::MonteCarlo,
            bank: None,
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn estimate(&self, x: f64) -> Result<Estimate> {
        match &self.kind {
            LawKind::Max { mda } => {
                let lam = mda.neg_log_g(x);
                match &self.bank {
                    Some(bank) => Ok(max_mc(bank, lam)),
                    None => max_series(self.alpha, lam),
                }
            }
            LawKind::Kth { mda, k } => {
                let bank = self.bank.as_ref().ok_or(Error::BankMissing("kth order limit"))?;
                Ok(kth_mc(bank, *k, mda.neg_log_g(x)))
            }
            LawKind::LargestJump { bank } => {
                let f = bank.cdf(x);
                Ok(Estimate {
                    value: f,
                    error: (f * (1.0 - f) / bank.len() as f64).sqrt(),
                    route: Route::MonteCarlo,
                })
            }
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.estimate(x)?.value)
    }

    pub fn error_estimate(&self, x: f64) -> Result<f64> {
        Ok(self.estimate(x)?.error)
    }

    /// Left-continuous inverse `inf{x : F(x) >= p}`, by bisection.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("quantile level {p} outside (0,1)")));
        }
        if let LawKind::LargestJump { bank } = &self.kind {
            return Ok(bank.quantile(p));
        }
        let (mut lo, mut hi) = match &self.kind {
            LawKind::Max { mda } | LawKind::Kth { mda, .. } => match mda.family() {
                crate::model::MdaFamily::Gumbel => (-1.0, 1.0),
                crate::model::MdaFamily::Frechet { .. } => (0.5, 2.0),
            },
            LawKind::LargestJump { .. } => unreachable!(),
        };
        let gumbel = matches!(
            &self.kind,
            LawKind::Max { mda } | LawKind::Kth { mda, .. }
                if mda.family() == crate::model::MdaFamily::Gumbel
        );
        let mut guard = 0;
        while self.evaluate(lo)? >= p {
            lo = if gumbel { lo * 2.0 } else { lo / 2.0 };
            guard += 1;
            if guard > 200 {
                return Err(invalid("quantile bracket not found"));
            }
        }
        while self.evaluate(hi)? < p {
            hi *= 2.0;
            guard += 1;
            if guard > 400 {
                return Err(invalid("quantile bracket not found"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.evaluate(mid)? >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Writes `x,value,error_estimate` rows for the grid.
    pub fn write_grid_csv<W: Write>(&self, xs: &[f64], writer: W) -> Result<()> {
        let mut w = csv_writer(writer);
        w.write_record(["x", "value", "error_estimate"])?;
        for &x in xs {
            let e = self.estimate(x)?;
            w.write_record([x.to_string(), e.value.to_string(), e.error.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_bank(alpha: f64, bank: Option<&WBank>) -> Result<()> {
    match bank {
        Some(b) if b.alpha() != alpha => Err(invalid(format!(
            "bank built for alpha {} used with alpha {alpha}",
            b.alpha()
        ))),
        _ => Ok(()),
    }
}

fn max_mc(bank: &WBank, lam: f64) -> Estimate {
    if lam == 0.0 {
        return Estimate {
            value: 1.0,
            error: 0.0,
            route: Route::MonteCarlo,
        };
    }
    let (value, error) = bank.mean_of(|w| (-(w * lam)).exp());
    Estimate {
        value,
        error,
        route: Route::MonteCarlo,
    }
}

fn kth_mc(bank: &WBank, k: u32, lam: f64) -> Estimate {
    if lam == 0.0 || lam.is_infinite() {
        return Estimate {
            value: if lam == 0.0 { 1.0 } else { 0.0 },
            error: 0.0,
            route: Route::PoissonCdf,
        };
    }
    let (value, error) = bank.mean_of(|w| poisson_cdf(k - 1, w * lam));
    Estimate {
        value,
        error,
        route: Route::PoissonCdf,
    }
}

fn max_series(alpha: f64, lam: f64) -> Result<Estimate> {
    if lam.is_infinite() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            route: Route::Series,
        });
    }
    let (v, bound) = mittag_leffler_series(alpha, -lam / gamma(1.0 - alpha))?;
    Ok(Estimate {
        value: v.clamp(0.0, 1.0),
        error: bound,
        route: Route::Series,
    })
}

/// `E[G(x)^W]` at the given point on the chosen route.
pub fn limit_max_cdf(mda: &MdaSpec, alpha: f64, x: f64, bank: Option<&Arc<WBank>>) -> Result<Estimate> {
    LimitLaw::max(*mda, alpha, bank.cloned())?.estimate(x)
}

/// `E[P(Poisson(W lam) <= k-1)]` over the bank.
pub fn kth_order_limit(k: u32, alpha: f64, lam: f64, bank: Option<&WBank>) -> Result<Estimate> {
    let bank = bank.ok_or(Error::BankMissing("kth order limit"))?;
    check_bank(alpha, Some(bank))?;
    if k == 0 {
        return Err(invalid("order statistic index starts at 1"));
    }
    if !(lam >= 0.0) {
        return Err(invalid(format!("exponent measure value {lam} must be >= 0")));
    }
    Ok(kth_mc(bank, k, lam))
}

/// `P(largest <= u1, second largest <= u2)` for `u1 > u2`:
/// `E[G(u2)^W] + (Λ(u2) - Λ(u1)) E[W G(u2)^W]`.
pub fn two_largest_limit(
    alpha: f64,
    mda: &MdaSpec,
    u1: f64,
    u2: f64,
    bank: Option<&WBank>,
) -> Result<Estimate> {
    let bank = bank.ok_or(Error::BankMissing("two-largest limit"))?;
    check_bank(alpha, Some(bank))?;
    if !(u1 > u2) {
        return Err(invalid(format!("need u1 > u2, got {u1} and {u2}")));
    }
    let l1 = mda.neg_log_g(u1);
    let l2 = mda.neg_log_g(u2);
    let between = l2 - l1;
    let (value, error) = bank.mean_of(|w| (-(w * l2)).exp() * (1.0 + w * between));
    Ok(Estimate {
        value,
        error,
        route: Route::MonteCarlo,
    })
}

/// Limit law of the largest completed excursion: ECDF of a largest-jump
/// bank.
pub fn excursion_limit_cdf(bank: Arc<EcdfBank>) -> LimitLaw {
    LimitLaw::largest_jump(bank, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationLaw;
    use statrs::function::erf::erfc;

    fn bank(alpha: f64, n: usize) -> Arc<WBank> {
        Arc::new(WBank::generate(alpha, n, StreamSeed::new(77, 1 << 40)).unwrap())
    }

    #[test]
    fn mittag_leffler_at_zero_and_exponential() {
        assert_eq!(mittag_leffler_fn(0.3, 0.0).unwrap(), 1.0);
        for i in 0..=50 {
            let z = -5.0 * i as f64 / 50.0;
            let v = mittag_leffler_fn(1.0, z).unwrap();
            assert!((v - z.exp()).abs() < 1e-10, "z = {z}");
        }
    }

    #[test]
    fn mittag_leffler_half_matches_erfc_identity() {
        for i in 0..=60 {
            let z = 3.0 * i as f64 / 60.0;
            let oracle = (z * z).exp() * erfc(z);
            let v = mittag_leffler_fn(0.5, -z).unwrap();
            assert!((v - oracle).abs() < 1e-8, "z = {z}: {v} vs {oracle}");
        }
    }

    #[test]
    fn mittag_leffler_far_argument_errors() {
        assert!(matches!(
            mittag_leffler_fn(0.5, -20.0),
            Err(Error::PrecisionUnreachable { .. })
        ));
        assert!(mittag_leffler_fn(0.5, 1.0).is_err());
        assert!(mittag_leffler_fn(1.5, -1.0).is_err());
    }

    #[test]
    fn poisson_cdf_small_and_large_k() {
        assert_eq!(poisson_cdf(0, 0.7), (-0.7f64).exp());
        let direct = (-2.0f64).exp() * (1.0 + 2.0 + 2.0);
        assert!((poisson_cdf(2, 2.0) - direct).abs() < 1e-15);
        // direct sum agrees with the complementary and incomplete-gamma branches
        let small = 0.3f64;
        let direct = (-small).exp() * (1.0 + small + small * small / 2.0);
        assert!((poisson_cdf(2, small) - direct).abs() < 1e-15);
        let mu = 45.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..=40 {
            term *= mu / j as f64;
            sum += term;
        }
        assert!((poisson_cdf(40, mu) - (-mu).exp() * sum).abs() < 1e-12);
    }

    #[test]
    fn max_limit_trivial_points() {
        let b = bank(0.5, 10_000);
        let law = LimitLaw::max(MdaSpec::gumbel(), 0.5, Some(b)).unwrap();
        assert!(law.evaluate(60.0).unwrap() > 0.999_999);
        let frechet = MdaSpec::new(ObservationLaw::Pareto { beta: 1.0 }).unwrap();
        let series = LimitLaw::max(frechet, 0.5, None).unwrap();
        assert_eq!(series.evaluate(0.0).unwrap(), 0.0);
        assert!(series.evaluate(1e12).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn kth_reduces_to_max_bitwise() {
        let b = bank(0.5, 20_000);
        let max = LimitLaw::max(MdaSpec::gumbel(), 0.5, Some(b.clone())).unwrap();
        let k1 = LimitLaw::kth_order(MdaSpec::gumbel(), 0.5, 1, b.clone()).unwrap();
        for i in -40..=40 {
            let x = i as f64 / 10.0;
            assert_eq!(max.evaluate(x).unwrap(), k1.evaluate(x).unwrap());
        }
        assert_eq!(kth_order_limit(3, 0.5, 0.0, Some(&b)).unwrap().value, 1.0);
        assert!(matches!(
            kth_order_limit(1, 0.5, 1.0, None),
            Err(Error::BankMissing(_))
        ));
    }

    #[test]
    fn kth_monotone_in_k() {
        let b = bank(0.3, 20_000);
        for lam in [0.1, 1.0, 3.0, 10.0] {
            let mut prev = 0.0;
            for k in 1..=40 {
                let v = kth_order_limit(k, 0.3, lam, Some(&b)).unwrap().value;
                assert!(v >= prev - 1e-15);
                assert!((0.0..=1.0).contains(&v));
                prev = v;
            }
        }
    }

    #[test]
    fn laws_monotone_and_bounded_on_grid() {
        for alpha in [0.3, 0.5, 0.7] {
            let b = bank(alpha, 20_000);
            let laws = [
                LimitLaw::max(MdaSpec::gumbel(), alpha, Some(b.clone())).unwrap(),
                LimitLaw::kth_order(MdaSpec::gumbel(), alpha, 2, b.clone()).unwrap(),
                LimitLaw::kth_order(MdaSpec::gumbel(), alpha, 5, b.clone()).unwrap(),
            ];
            for law in &laws {
                let mut prev = 0.0;
                for i in -100..=100 {
                    let v = law.evaluate(i as f64 / 10.0).unwrap();
                    assert!((0.0..=1.0).contains(&v));
                    assert!(v >= prev, "{} at {i}: {v} < {prev}", law.description());
                    prev = v;
                }
                assert!(law.evaluate(-30.0).unwrap() < 1e-3);
                assert!(law.evaluate(40.0).unwrap() > 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn two_largest_edge_cases() {
        let b = bank(0.5, 20_000);
        let g = MdaSpec::gumbel();
        let u1 = 1.0;
        let near = two_largest_limit(0.5, &g, u1, u1 - 1e-9, Some(&b)).unwrap().value;
        let max = limit_max_cdf(&g, 0.5, u1, Some(&b)).unwrap().value;
        assert!((near - max).abs() < 1e-6);
        for u2 in [-2.0, -1.0, 0.0, 0.5] {
            let v = two_largest_limit(0.5, &g, u1, u2, Some(&b)).unwrap().value;
            let base = limit_max_cdf(&g, 0.5, u2, Some(&b)).unwrap().value;
            assert!(v >= base && v <= 1.0);
        }
        assert!(two_largest_limit(0.5, &g, 0.0, 1.0, Some(&b)).is_err());
    }

    #[test]
    fn quantile_inverts_law() {
        let b = bank(0.5, 20_000);
        let law = LimitLaw::max(MdaSpec::gumbel(), 0.5, Some(b)).unwrap();
        for p in [0.01, 0.1, 0.5, 0.9, 0.99] {
            let q = law.quantile(p).unwrap();
            assert!((law.evaluate(q).unwrap() - p).abs() < 1e-6);
        }
    }

    #[test]
    fn largest_jump_law_support() {
        let ecdf = Arc::new(EcdfBank::from_values(vec![0.2, 0.4, 0.9]).unwrap());
        let law = excursion_limit_cdf(ecdf);
        assert_eq!(law.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(law.evaluate(1.0).unwrap(), 1.0);
        assert_eq!(law.quantile(0.5).unwrap(), 0.4);
    }

    #[test]
    fn grid_csv_header() {
        let law = LimitLaw::max(MdaSpec::gumbel(), 0.5, None).unwrap();
        let mut buf = Vec::new();
        law.write_grid_csv(&[0.0, 1.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,value,error_estimate\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
