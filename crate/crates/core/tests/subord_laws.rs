use std::f64::consts::PI;

use renewal_extremes::rng::{HittingTime, StreamSeed};
use renewal_extremes::stats::{dkw_epsilon_two_sample, ks_distance, EcdfBank};
use renewal_extremes::subord::{
    largest_jump_law, simulate_passage, simulate_passage_thinning, Algorithm, LargestJumpBank,
};

// 1e-3 keeps each realization near a few thousand jumps
const TOL: f64 = 1e-3;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn passage_time_matches_stable_inversion() {
    let n = 20_000;
    let ws: Vec<f64> = (0..n as u64)
        .map(|i| {
            let mut s = StreamSeed::new(61, i).stream();
            simulate_passage(0.5, TOL, &mut s).unwrap().w
        })
        .collect();
    let (m, se) = mean_se(&ws);
    assert!((m - 2.0 / PI).abs() <= 4.0 * se, "mean {m}");

    let h = HittingTime::new(0.5).unwrap();
    let mut s = StreamSeed::new(61, 1 << 62).stream();
    let direct: Vec<f64> = (0..n).map(|_| h.sample(1.0, &mut s)).collect();
    let ks = ks_distance(
        &EcdfBank::from_values(ws).unwrap(),
        &EcdfBank::from_values(direct).unwrap(),
    );
    assert!(ks <= dkw_epsilon_two_sample(n, n, 0.001).unwrap(), "KS {ks}");
}

#[test]
fn large_jump_counts_follow_the_levy_measure() {
    // jumps above c on [0, w] number E[w] c^(-α) on average
    let (alpha, c) = (0.5, 0.1);
    let n = 10_000;
    let mut counts = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let mut s = StreamSeed::new(62, i).stream();
        let r = simulate_passage_thinning(alpha, TOL, &mut s).unwrap();
        counts.push(r.jumps.iter().filter(|j| j.size > c && j.time <= r.w).count() as f64);
        ws.push(r.w);
    }
    let (m, se) = mean_se(&counts);
    let expected = 2.0 / PI * f64::powf(c, -alpha);
    assert!((m - expected).abs() <= 4.0 * se, "{m} vs {expected}");
}

#[test]
fn realizations_are_internally_consistent() {
    for i in 0..200 {
        let mut s = StreamSeed::new(63, i).stream();
        for r in [
            simulate_passage(0.5, TOL, &mut s).unwrap(),
            simulate_passage_thinning(0.5, TOL, &mut s).unwrap(),
        ] {
            assert!(r.s_before < 1.0 && r.s_at >= 1.0, "{} {}", r.s_before, r.s_at);
            assert!(r.w <= r.theta);
            assert!(r.v > 0.0 && r.v < 1.0);
            assert!(r.residual_bound() <= r.tol);
            assert!(r.jumps.iter().all(|j| j.size >= r.eps && j.time <= r.theta));
            let before = r.jumps.iter().filter(|j| j.time < r.w).map(|j| j.size);
            assert_eq!(before.fold(0.0, f64::max), r.v);
        }
    }
}

#[test]
fn ranked_and_thinning_banks_agree() {
    let n = 10_000;
    let a = largest_jump_law(0.5, n, TOL, Algorithm::RankedSeries, StreamSeed::new(64, 0)).unwrap();
    let b = largest_jump_law(0.5, n, TOL, Algorithm::Thinning, StreamSeed::new(64, 1 << 40)).unwrap();
    let ks = ks_distance(&a.bank, &b.bank);
    assert!(ks <= dkw_epsilon_two_sample(n, n, 0.001).unwrap(), "KS {ks}");
    assert!(a.stats.unwrap().max_jumps > 0);
}

#[test]
fn bank_csv_round_trips() {
    let bank = largest_jump_law(0.5, 10_000, 0.01, Algorithm::RankedSeries, StreamSeed::new(65, 0)).unwrap();
    let mut buf = Vec::new();
    bank.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("alpha,n,tol,seed\n0.5,10000,0.01,65\nvalue\n"));
    let back = LargestJumpBank::read_csv(&buf[..]).unwrap();
    assert_eq!(back.meta, bank.meta);
    assert_eq!(back.bank.values(), bank.bank.values());
}

#[test]
fn small_banks_are_rejected() {
    assert!(largest_jump_law(0.5, 100, TOL, Algorithm::Thinning, StreamSeed::new(66, 0)).is_err());
}
