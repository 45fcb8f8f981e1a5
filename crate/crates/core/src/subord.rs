//! Stable subordinator built from a Poisson random measure with intensity
//! `dt × α y^(-α-1) dy`, truncated below at `eps`, and its first passage of
//! level 1 together with the largest jump completed before it.
//!
//! Two independent generators are provided. The ranked series draws jump
//! sizes in decreasing order from the unit Poisson arrivals `Γ_i` as
//! `(Γ_i/θ)^(-1/α)` with uniform times. Thinning draws proposals in time
//! order from a heavier-tailed dominating measure and accepts each with the
//! density ratio.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{check_alpha, Stream, StreamSeed};
use crate::stats::{EcdfBank, Provenance};

/// Default bound on the expected truncated mass over `[0, θ]`.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Default cap on the number of generated jumps per realization.
pub const DEFAULT_JUMP_CAP: usize = 20_000_000;
const INITIAL_THETA: f64 = 2.0;
const MAX_REFINEMENTS: u32 = 3;
// keeps the truncation bound at or below tol after rounding
const EPS_SAFETY: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RankedSeries,
    Thinning,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// One truncated realization on `[0, θ]` with its level-1 passage.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorRealization {
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub theta: f64,
    pub eps: f64,
    pub tol: f64,
    /// All jumps of size `>= eps` on `[0, θ]`, in generation order.
    pub jumps: Vec<Jump>,
    /// Passage time of level 1.
    pub w: f64,
    /// Largest jump strictly before `w` (0 if none).
    pub v: f64,
    /// Sum of all jump sizes, in generation order.
    pub s_theta: f64,
    /// Truncated `S(w-)`.
    pub s_before: f64,
    /// Truncated `S(w)`.
    pub s_at: f64,
    /// Number of times `eps` was divided by 10 because the passage was
    /// within the truncation bound of level 1.
    pub refinements: u32,
}

impl SubordinatorRealization {
    /// Expected mass of the discarded jumps over `[0, θ]`.
    pub fn residual_bound(&self) -> f64 {
        residual_mass(self.alpha, self.theta, self.eps)
    }
}

/// `θ α eps^(1-α) / (1-α)`.
pub fn residual_mass(alpha: f64, theta: f64, eps: f64) -> f64 {
    theta * alpha * eps.powf(1.0 - alpha) / (1.0 - alpha)
}

fn eps_for(alpha: f64, theta: f64, tol: f64) -> f64 {
    ((1.0 - alpha) * tol / (alpha * theta)).powf(1.0 / (1.0 - alpha)) * EPS_SAFETY
}

fn check_cap(jumps: &[Jump], tol: f64, cap: usize) -> Result<()> {
    if jumps.len() > cap {
        Err(Error::ToleranceUnreachable { tol, cap })
    } else {
        Ok(())
    }
}

struct Passage {
    w: f64,
    v: f64,
    s_before: f64,
    s_at: f64,
}

pub fn simulate_passage(alpha: f64, tol: f64, stream: &mut Stream) -> Result<SubordinatorRealization> {
    simulate_passage_with(alpha, tol, Algorithm::RankedSeries, DEFAULT_JUMP_CAP, stream)
}

pub fn simulate_passage_thinning(
    alpha: f64,
    tol: f64,
    stream: &mut Stream,
) -> Result<SubordinatorRealization> {
    simulate_passage_with(alpha, tol, Algorithm::Thinning, DEFAULT_JUMP_CAP, stream)
}

pub fn simulate_passage_with(
    alpha: f64,
    tol: f64,
    algorithm: Algorithm,
    cap: usize,
    stream: &mut Stream,
) -> Result<SubordinatorRealization> {
    check_alpha(alpha)?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(invalid(format!("truncation tolerance {tol} must be positive")));
    }
    match algorithm {
        Algorithm::RankedSeries => Ranked::new(alpha, tol, cap).run(stream),
        Algorithm::Thinning => Thinning::new(alpha, tol, cap).run(stream),
    }
}

/// Decides whether a found passage is trustworthy at the current `eps`.
fn ambiguous(p: &Passage, alpha: f64, theta: f64, eps: f64) -> bool {
    1.0 - p.s_before < residual_mass(alpha, theta, eps) || p.v == 0.0
}

fn finish(
    alpha: f64,
    algorithm: Algorithm,
    theta: f64,
    eps: f64,
    tol: f64,
    jumps: Vec<Jump>,
    p: Passage,
    refinements: u32,
) -> SubordinatorRealization {
    let s_theta = jumps.iter().map(|j| j.size).sum();
    SubordinatorRealization {
        alpha,
        algorithm,
        theta,
        eps,
        tol,
        jumps,
        w: p.w,
        v: p.v,
        s_theta,
        s_before: p.s_before,
        s_at: p.s_at,
        refinements,
    }
}

/// Time span `[start, start + span)` whose ranked series is continued as
/// `eps` decreases.
struct Block {
    start: f64,
    span: f64,
    pending: f64,
}

struct Ranked {
    alpha: f64,
    tol: f64,
    cap: usize,
    blocks: Vec<Block>,
    jumps: Vec<Jump>,
}

impl Ranked {
    fn new(alpha: f64, tol: f64, cap: usize) -> Self {
        Self {
            alpha,
            tol,
            cap,
            blocks: Vec::new(),
            jumps: Vec::new(),
        }
    }

    fn add_block(&mut self, start: f64, span: f64, stream: &mut Stream) {
        self.blocks.push(Block {
            start,
            span,
            pending: stream.exp1(),
        });
    }

    /// Continues every block's series down to size `eps`.
    fn extend(&mut self, eps: f64, stream: &mut Stream) -> Result<()> {
        let inv = -1.0 / self.alpha;
        for b in &mut self.blocks {
            // Γ <= span eps^(-α)  <=>  size >= eps
            let gmax = b.span * eps.powf(-self.alpha);
            while b.pending <= gmax {
                let size = (b.pending / b.span).powf(inv);
                self.jumps.push(Jump {
                    time: b.start + b.span * stream.uniform(),
                    size,
                });
                b.pending += stream.exp1();
                check_cap(&self.jumps, self.tol, self.cap)?;
            }
        }
        Ok(())
    }

    fn run(mut self, stream: &mut Stream) -> Result<SubordinatorRealization> {
        let mut theta = INITIAL_THETA;
        let mut eps = eps_for(self.alpha, theta, self.tol);
        self.add_block(0.0, theta, stream);
        self.extend(eps, stream)?;
        let mut refinements = 0;
        loop {
            match bucketed_passage(&self.jumps, theta) {
                None => {
                    let next = 2.0 * theta;
                    eps = eps_for(self.alpha, next, self.tol);
                    self.add_block(theta, theta, stream);
                    self.extend(eps, stream)?;
                    theta = next;
                }
                Some(p) => {
                    if ambiguous(&p, self.alpha, theta, eps) && refinements < MAX_REFINEMENTS {
                        eps /= 10.0;
                        refinements += 1;
                        self.extend(eps, stream)?;
                        continue;
                    }
                    return Ok(finish(
                        self.alpha,
                        Algorithm::RankedSeries,
                        theta,
                        eps,
                        self.tol,
                        self.jumps,
                        p,
                        refinements,
                    ));
                }
            }
        }
    }
}

/// Passage of level 1 without a full time sort: jumps are distributed into
/// time buckets, whole buckets are skipped by their sums, and only buckets
/// reached by the running sum are sorted.
fn bucketed_passage(jumps: &[Jump], theta: f64) -> Option<Passage> {
    let total: f64 = jumps.iter().map(|j| j.size).sum();
    if total <= 1.0 {
        return None;
    }
    let nb = (jumps.len() / 4).max(1);
    let bucket = |t: f64| (((t / theta) * nb as f64) as usize).min(nb - 1);
    let mut start = vec![0usize; nb + 1];
    for j in jumps {
        start[bucket(j.time) + 1] += 1;
    }
    for b in 0..nb {
        start[b + 1] += start[b];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; jumps.len()];
    for (i, j) in jumps.iter().enumerate() {
        let b = bucket(j.time);
        order[fill[b]] = i;
        fill[b] += 1;
    }
    let mut s = 0.0;
    let mut v = 0.0f64;
    for b in 0..nb {
        let members = &mut order[start[b]..start[b + 1]];
        let bsum: f64 = members.iter().map(|&i| jumps[i].size).sum();
        if s + bsum <= 1.0 {
            s += bsum;
            v = members.iter().map(|&i| jumps[i].size).fold(v, f64::max);
            continue;
        }
        members.sort_unstable_by(|&a, &c| jumps[a].time.total_cmp(&jumps[c].time));
        for &i in members.iter() {
            let j = jumps[i];
            if s + j.size > 1.0 {
                return Some(Passage {
                    w: j.time,
                    v,
                    s_before: s,
                    s_at: s + j.size,
                });
            }
            s += j.size;
            v = v.max(j.size);
        }
    }
    None
}

struct Thinning {
    alpha: f64,
    tol: f64,
    cap: usize,
    jumps: Vec<Jump>,
}

impl Thinning {
    fn new(alpha: f64, tol: f64, cap: usize) -> Self {
        Self {
            alpha,
            tol,
            cap,
            jumps: Vec::new(),
        }
    }

    /// Jumps on `[t0, t1) × [lo, hi)` in time order. Proposals come from the
    /// measure `(α/γ) lo^(γ-α) γ y^(-γ-1) dy` with `γ = α/2`, which dominates
    /// the target on `y >= lo`; acceptance probability is `(y/lo)^(γ-α)`.
    fn layer(&mut self, t0: f64, t1: f64, lo: f64, hi: f64, stream: &mut Stream) -> Result<()> {
        let gamma = self.alpha / 2.0;
        let rate = (self.alpha / gamma) * lo.powf(-self.alpha);
        let mut t = t0;
        let mut proposals = 0usize;
        loop {
            t += stream.exp1() / rate;
            if t >= t1 {
                return Ok(());
            }
            let y = lo * stream.uniform_pos().powf(-1.0 / gamma);
            let accept = (y / lo).powf(gamma - self.alpha);
            if stream.uniform() < accept && y < hi {
                self.jumps.push(Jump { time: t, size: y });
                check_cap(&self.jumps, self.tol, self.cap)?;
            }
            proposals += 1;
            if proposals > 4 * self.cap {
                return Err(Error::ToleranceUnreachable {
                    tol: self.tol,
                    cap: self.cap,
                });
            }
        }
    }

    fn sort(&mut self) -> Result<()> {
        check_cap(&self.jumps, self.tol, self.cap)?;
        self.jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(())
    }

    fn run(mut self, stream: &mut Stream) -> Result<SubordinatorRealization> {
        let mut theta = INITIAL_THETA;
        let mut eps = eps_for(self.alpha, theta, self.tol);
        self.layer(0.0, theta, eps, f64::INFINITY, stream)?;
        check_cap(&self.jumps, self.tol, self.cap)?;
        let mut refinements = 0;
        loop {
            match sequential_passage(&self.jumps) {
                None => {
                    let next = 2.0 * theta;
                    let finer = eps_for(self.alpha, next, self.tol);
                    self.layer(0.0, theta, finer, eps, stream)?;
                    self.layer(theta, next, finer, f64::INFINITY, stream)?;
                    self.sort()?;
                    theta = next;
                    eps = finer;
                }
                Some(p) => {
                    if ambiguous(&p, self.alpha, theta, eps) && refinements < MAX_REFINEMENTS {
                        let finer = eps / 10.0;
                        self.layer(0.0, theta, finer, eps, stream)?;
                        self.sort()?;
                        eps = finer;
                        refinements += 1;
                        continue;
                    }
                    return Ok(finish(
                        self.alpha,
                        Algorithm::Thinning,
                        theta,
                        eps,
                        self.tol,
                        self.jumps,
                        p,
                        refinements,
                    ));
                }
            }
        }
    }
}

/// Passage scan over time-sorted jumps.
fn sequential_passage(jumps: &[Jump]) -> Option<Passage> {
    let mut s = 0.0;
    let mut v = 0.0f64;
    for j in jumps {
        if s + j.size > 1.0 {
            return Some(Passage {
                w: j.time,
                v,
                s_before: s,
                s_at: s + j.size,
            });
        }
        s += j.size;
        v = v.max(j.size);
    }
    None
}

/// Bank header fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankMeta {
    pub alpha: f64,
    pub n: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Work statistics of a bank build.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CapStats {
    pub mean_jumps: f64,
    pub max_jumps: usize,
    pub refinements: u64,
    pub max_theta: f64,
}

/// Sample bank of the largest jump before passage.
#[derive(Debug, Clone, PartialEq)]
pub struct LargestJumpBank {
    pub meta: BankMeta,
    pub algorithm: Option<Algorithm>,
    pub stats: Option<CapStats>,
    pub bank: EcdfBank,
}

pub const MIN_BANK_SAMPLES: usize = 10_000;

/// `n_samples` iid draws of the largest completed jump before passage. Draw
/// `i` uses stream `seed.stream_index + i`, so the bank does not depend on
/// how the work is split across threads.
pub fn largest_jump_law(
    alpha: f64,
    n_samples: usize,
    tol: f64,
    algorithm: Algorithm,
    seed: StreamSeed,
) -> Result<LargestJumpBank> {
    if n_samples < MIN_BANK_SAMPLES {
        return Err(invalid(format!(
            "largest-jump bank needs at least {MIN_BANK_SAMPLES} samples, got {n_samples}"
        )));
    }
    let draws: Vec<(f64, usize, u32, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = StreamSeed::new(seed.master_seed, seed.stream_index + i).stream();
            let r = simulate_passage_with(alpha, tol, algorithm, DEFAULT_JUMP_CAP, &mut s)?;
            Ok((r.v, r.jumps.len(), r.refinements, r.theta))
        })
        .collect::<Result<_>>()?;
    let stats = CapStats {
        mean_jumps: draws.iter().map(|d| d.1 as f64).sum::<f64>() / n_samples as f64,
        max_jumps: draws.iter().map(|d| d.1).max().unwrap_or(0),
        refinements: draws.iter().map(|d| d.2 as u64).sum(),
        max_theta: draws.iter().map(|d| d.3).fold(0.0, f64::max),
    };
    let label = match algorithm {
        Algorithm::RankedSeries => "largest_jump_ranked",
        Algorithm::Thinning => "largest_jump_thinning",
    };
    let bank = EcdfBank::new(
        draws.into_iter().map(|d| d.0).collect(),
        Provenance::new(seed.master_seed, label, None, n_samples),
    )?;
    Ok(LargestJumpBank {
        meta: BankMeta {
            alpha,
            n: n_samples,
            tol,
            seed: seed.master_seed,
        },
        algorithm: Some(algorithm),
        stats: Some(stats),
        bank,
    })
}

impl LargestJumpBank {
    /// CSV layout: a `alpha,n,tol,seed` header with one metadata row, then a
    /// `value` header and one sample per line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .flexible(true)
            .from_writer(writer);
        w.write_record(["alpha", "n", "tol", "seed"])?;
        w.write_record([
            self.meta.alpha.to_string(),
            self.meta.n.to_string(),
            self.meta.tol.to_string(),
            self.meta.seed.to_string(),
        ])?;
        w.write_record(["value"])?;
        for v in self.bank.values() {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let bad = |what: &str| Error::Config(format!("largest-jump bank csv: {what}"));
        let header = records.next().ok_or_else(|| bad("missing header"))??;
        if header.iter().collect::<Vec<_>>() != ["alpha", "n", "tol", "seed"] {
            return Err(bad("expected header alpha,n,tol,seed"));
        }
        let meta_row = records.next().ok_or_else(|| bad("missing metadata row"))??;
        let field = |i: usize| meta_row.get(i).ok_or_else(|| bad("short metadata row"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("unparsable metadata"));
        let meta = BankMeta {
            alpha: num(field(0)?)?,
            n: field(1)?.trim().parse().map_err(|_| bad("unparsable n"))?,
            tol: num(field(2)?)?,
            seed: field(3)?.trim().parse().map_err(|_| bad("unparsable seed"))?,
        };
        let value_header = records.next().ok_or_else(|| bad("missing value header"))??;
        if value_header.get(0) != Some("value") {
            return Err(bad("expected value header"));
        }
        let mut values = Vec::with_capacity(meta.n);
        for rec in records {
            let rec = rec?;
            let v = rec.get(0).ok_or_else(|| bad("empty row"))?;
            values.push(num(v)?);
        }
        if values.len() != meta.n {
            return Err(bad("sample count does not match header"));
        }
        let bank = EcdfBank::new(
            values,
            Provenance::new(meta.seed, "largest_jump", None, meta.n),
        )?;
        Ok(Self {
            meta,
            algorithm: None,
            stats: None,
            bank,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(r: &SubordinatorRealization) {
        assert!(r.s_before <= 1.0 && 1.0 < r.s_at);
        assert!(r.v > 0.0 && r.v < 1.0);
        assert!(r.w >= 0.0 && r.w < r.theta);
        assert!(r.residual_bound() <= r.tol);
        assert_eq!(r.s_theta, r.jumps.iter().map(|j| j.size).sum::<f64>());
        assert!(r.jumps.iter().all(|j| j.size >= r.eps * (1.0 - 1e-12)));
        // recompute the passage with a full sort
        let mut sorted = r.jumps.clone();
        sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
        let before: f64 = sorted.iter().filter(|j| j.time < r.w).map(|j| j.size).sum();
        let at: f64 = sorted.iter().filter(|j| j.time <= r.w).map(|j| j.size).sum();
        assert!(before <= 1.0 + 1e-12 && at > 1.0 - 1e-12);
        let v = sorted
            .iter()
            .filter(|j| j.time < r.w)
            .map(|j| j.size)
            .fold(0.0, f64::max);
        assert_eq!(v, r.v);
    }

    #[test]
    fn ranked_realizations_are_consistent() {
        for i in 0..200 {
            let mut s = StreamSeed::new(11, i).stream();
            check(&simulate_passage(0.5, 1e-3, &mut s).unwrap());
        }
    }

    #[test]
    fn thinning_realizations_are_consistent() {
        for i in 0..200 {
            let mut s = StreamSeed::new(12, i).stream();
            check(&simulate_passage_thinning(0.5, 1e-3, &mut s).unwrap());
        }
    }

    #[test]
    fn other_indices_supported() {
        // the jump count grows like tol^(-α/(1-α)), so larger α needs a looser tol
        for (alpha, tol) in [(0.3, 1e-4), (0.7, 0.05)] {
            for i in 0..20 {
                let mut s = StreamSeed::new(13, i).stream();
                check(&simulate_passage(alpha, tol, &mut s).unwrap());
                check(&simulate_passage_thinning(alpha, tol, &mut s).unwrap());
            }
        }
    }

    #[test]
    fn tiny_tolerance_hits_cap() {
        let mut s = StreamSeed::new(14, 0).stream();
        let r = simulate_passage_with(0.5, 1e-9, Algorithm::RankedSeries, 10_000, &mut s);
        assert!(matches!(r, Err(Error::ToleranceUnreachable { .. })));
        let r = simulate_passage_with(0.5, 1e-9, Algorithm::Thinning, 10_000, &mut s);
        assert!(matches!(r, Err(Error::ToleranceUnreachable { .. })));
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut s = StreamSeed::new(15, 0).stream();
        assert!(simulate_passage(1.0, 1e-3, &mut s).is_err());
        assert!(simulate_passage(0.5, 0.0, &mut s).is_err());
        assert!(largest_jump_law(0.5, 100, 1e-3, Algorithm::RankedSeries, StreamSeed::new(0, 0)).is_err());
    }

    #[test]
    fn bank_csv_round_trip() {
        let values = vec![0.25, 0.5, 0.125];
        let bank = LargestJumpBank {
            meta: BankMeta {
                alpha: 0.5,
                n: 3,
                tol: 1e-4,
                seed: 42,
            },
            algorithm: None,
            stats: None,
            bank: EcdfBank::from_values(values).unwrap(),
        };
        let mut buf = Vec::new();
        bank.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "alpha,n,tol,seed\n0.5,3,0.0001,42\nvalue\n0.125\n0.25\n0.5\n");
        let back = LargestJumpBank::read_csv(&buf[..]).unwrap();
        assert_eq!(back.meta, bank.meta);
        assert_eq!(back.bank.values(), bank.bank.values());
    }
}
