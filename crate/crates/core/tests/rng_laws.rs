use std::f64::consts::PI;

use proptest::prelude::*;
use renewal_extremes::rng::{pareto_sample, HittingTime, StableStandard, StreamSeed, WaitDist};
use renewal_extremes::stats::{dkw_epsilon_two_sample, ks_distance, EcdfBank};

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn stable_laplace_transform_on_grid() {
    for (i, alpha) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let st = StableStandard::new(alpha).unwrap();
        let mut s = StreamSeed::new(11, i as u64).stream();
        let draws: Vec<f64> = (0..40_000).map(|_| st.sample(&mut s)).collect();
        for lambda in [0.25, 1.0, 4.0] {
            let v: Vec<f64> = draws.iter().map(|x| (-lambda * x).exp()).collect();
            let (m, se) = mean_se(&v);
            let exact = (-f64::powf(lambda, alpha)).exp();
            assert!((m - exact).abs() <= 4.0 * se, "alpha {alpha} lambda {lambda}: {m} vs {exact}");
        }
    }
}

#[test]
fn half_stable_matches_inverse_gaussian_square() {
    // exp(-sqrt(λ)) is the Laplace transform of 1/(2Z²) with Z standard normal
    let st = StableStandard::new(0.5).unwrap();
    let mut s = StreamSeed::new(12, 0).stream();
    let n = 50_000;
    let a: Vec<f64> = (0..n).map(|_| st.sample(&mut s)).collect();
    let b: Vec<f64> = (0..n)
        .map(|_| {
            let z = s.normal();
            1.0 / (2.0 * z * z)
        })
        .collect();
    let ks = ks_distance(
        &EcdfBank::from_values(a).unwrap(),
        &EcdfBank::from_values(b).unwrap(),
    );
    assert!(ks <= dkw_epsilon_two_sample(n, n, 0.001).unwrap(), "KS {ks}");
}

#[test]
fn hitting_time_mean_and_scaling() {
    let h = HittingTime::new(0.5).unwrap();
    assert!((h.mean_at_one() - 2.0 / PI).abs() < 1e-12);
    let mut s = StreamSeed::new(13, 0).stream();
    let v: Vec<f64> = (0..200_000).map(|_| h.sample(1.0, &mut s)).collect();
    let (m, se) = mean_se(&v);
    assert!((m - 2.0 / PI).abs() <= 4.0 * se);

    // W(t) = t^α W(1) in law, so the mean scales by 9^0.5 = 3
    let v9: Vec<f64> = (0..200_000).map(|_| h.sample(9.0, &mut s)).collect();
    let (m9, se9) = mean_se(&v9);
    assert!((m9 - 6.0 / PI).abs() <= 4.0 * se9);
}

#[test]
fn hitting_time_negative_moment() {
    // W(1)^(-1/2) = Γ(1/2)^(1/2) S^(1/4) and E S^p = Γ(1 - p/α) / Γ(1 - p)
    let h = HittingTime::new(0.5).unwrap();
    let mut s = StreamSeed::new(14, 0).stream();
    let v: Vec<f64> = (0..200_000).map(|_| h.sample(1.0, &mut s).powf(-0.5)).collect();
    let (m, se) = mean_se(&v);
    let g = statrs::function::gamma::gamma;
    let exact = g(0.5).sqrt() * g(0.5) / g(0.75);
    assert!((m - exact).abs() <= 4.0 * se, "{m} vs {exact}");
}

#[test]
fn pareto_tail_frequency() {
    let mut s = StreamSeed::new(15, 0).stream();
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| pareto_sample(0.5, s.uniform_pos()).unwrap() > 100.0)
        .count();
    let p = hits as f64 / n as f64;
    assert!((p - 0.1).abs() < 4.0 * (0.1f64 * 0.9 / n as f64).sqrt());
}

#[test]
fn wait_sums_match_mean() {
    let mut s = StreamSeed::new(16, 0).stream();
    let w = WaitDist::Exponential { rate: 2.0 };
    let (sum, approx) = w.sum_of(1000, &mut s).unwrap();
    assert!(!approx);
    assert!((sum - 500.0).abs() < 5.0 * 500f64.sqrt() / 2.0);
    // exponential sums are exact gamma draws at any count
    let (big, approx) = w.sum_of(10_000_000, &mut s).unwrap();
    assert!(!approx);
    assert!((big / 5e6 - 1.0).abs() < 1e-2);
    // finite-variance Pareto sums switch to the Gaussian approximation
    let p = WaitDist::Pareto { alpha: 3.0 };
    let (big, approx) = p.sum_of(10_000_000, &mut s).unwrap();
    assert!(approx);
    assert!((big / 1.5e7 - 1.0).abs() < 1e-2);
}

proptest! {
    #[test]
    fn streams_are_reproducible(master in any::<u64>(), idx in any::<u64>()) {
        let mut a = StreamSeed::new(master, idx).stream();
        let mut b = StreamSeed::new(master, idx).stream();
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_pos_is_in_open_unit_interval(seed in any::<u64>()) {
        let mut s = StreamSeed::new(seed, 0).stream();
        for _ in 0..64 {
            let u = s.uniform_pos();
            prop_assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn stable_draws_are_positive(alpha in 0.05f64..0.95, seed in any::<u64>()) {
        let st = StableStandard::new(alpha).unwrap();
        let mut s = StreamSeed::new(seed, 1).stream();
        for _ in 0..32 {
            let x = st.sample(&mut s);
            prop_assert!(x > 0.0 && !x.is_nan());
        }
    }

    #[test]
    fn pareto_draws_are_at_least_one(alpha in 0.05f64..0.95, u in 1e-12f64..=1.0) {
        prop_assert!(pareto_sample(alpha, u).unwrap() >= 1.0);
    }
}
