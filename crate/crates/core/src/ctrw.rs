//! Continuous time random walk: a simple symmetric walk whose jumps are
//! separated by iid waiting times, decomposed into cycles of one sojourn at
//! zero followed by one excursion away from zero.

use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::rng::{Stream, WaitDist};

/// Largest `n` with a tabulated `P(K > 2n)`.
pub const TABLE_SIZE: usize = 1_000_000;
/// Default cap on literal walk steps.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;
/// Default cap on the number of cycles in one path.
pub const DEFAULT_CYCLE_CAP: u64 = 1_000_000_000;
// K = 2n is kept in a u64; larger n saturate here.
const MAX_HALF_RETURN: f64 = 4_611_686_018_427_387_904.0; // 2^62

fn return_tail_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut u = Vec::with_capacity(TABLE_SIZE + 1);
        u.push(1.0);
        for n in 1..=TABLE_SIZE {
            let prev = u[n - 1];
            u.push(prev * (2 * n - 1) as f64 / (2 * n) as f64);
        }
        u
    })
}

/// `P(K > 2n) = C(2n, n) 2^(-2n)`: tabulated up to `TABLE_SIZE`, asymptotic
/// expansion beyond.
pub fn return_tail(n: u64) -> f64 {
    let table = return_tail_table();
    if (n as usize) <= TABLE_SIZE {
        table[n as usize]
    } else {
        asymptotic_tail(n as f64)
    }
}

fn asymptotic_tail(n: f64) -> f64 {
    (1.0 - 1.0 / (8.0 * n) + 1.0 / (128.0 * n * n)) / (std::f64::consts::PI * n).sqrt()
}

/// How first-return times are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnMode {
    /// Inverse transform on the tabulated tail.
    Exact,
    /// Literal simulation of the walk, up to the step cap.
    Walk { cap: u64 },
}

/// First return time `K` of the simple symmetric walk to zero (even, ≥ 2).
pub fn sample_first_return(stream: &mut Stream, mode: ReturnMode) -> Result<u64> {
    match mode {
        ReturnMode::Exact => Ok(first_return_exact(stream)),
        ReturnMode::Walk { cap } => first_return_walk(stream, cap),
    }
}

#[inline]
pub(crate) fn first_return_exact(stream: &mut Stream) -> u64 {
    // K > 2n iff U <= P(K > 2n); K = 2 * min{n : P(K > 2n) < U}
    let u = stream.uniform_pos();
    let table = return_tail_table();
    if u > table[TABLE_SIZE] {
        // table is strictly decreasing; first index with value < u
        let n = table.partition_point(|&v| v >= u);
        return 2 * n as u64;
    }
    let guess = 1.0 / (std::f64::consts::PI * u * u);
    if guess >= MAX_HALF_RETURN {
        return 2 * MAX_HALF_RETURN as u64;
    }
    let mut n = guess.floor().max((TABLE_SIZE + 1) as f64);
    if n < 1e15 {
        while n > (TABLE_SIZE + 1) as f64 && asymptotic_tail(n - 1.0) < u {
            n -= 1.0;
        }
        while asymptotic_tail(n) >= u {
            n += 1.0;
        }
    }
    2 * n as u64
}

fn first_return_walk(stream: &mut Stream, cap: u64) -> Result<u64> {
    let mut pos: i64 = 0;
    let mut k: u64 = 0;
    let mut bits = 0u64;
    let mut left = 0u32;
    loop {
        if left == 0 {
            bits = stream.next_u64();
            left = 64;
        }
        pos += if bits & 1 == 1 { 1 } else { -1 };
        bits >>= 1;
        left -= 1;
        k += 1;
        if pos == 0 {
            return Ok(k);
        }
        if k >= cap {
            return Err(Error::ResourceCap {
                what: "walk steps",
                cap,
            });
        }
    }
}

/// One freshly drawn cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleDraw {
    pub x: f64,
    pub k: u64,
    pub r: f64,
    pub approx: bool,
}

impl CycleDraw {
    #[inline]
    pub fn y(&self) -> f64 {
        self.x + self.r
    }
}

/// Sojourn `X ~ wait`, return count `K`, excursion `R` = sum of `K - 1` waits.
#[inline]
pub fn sample_cycle(wait: WaitDist, stream: &mut Stream) -> Result<CycleDraw> {
    let x = wait.sample(stream);
    let k = first_return_exact(stream);
    let (r, approx) = wait.sum_of(k - 1, stream)?;
    Ok(CycleDraw { x, k, r, approx })
}

/// Per-cycle record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtrwCycleRecord {
    /// Sojourn at zero.
    pub x: f64,
    /// Steps of the embedded walk until it returns to zero.
    pub k: u64,
    /// Excursion duration.
    pub r: f64,
    /// Cycle length `x + r`.
    pub y: f64,
    /// Return epoch `A_i`.
    pub a_end: f64,
}

/// Cycle list of one path up to the first cycle ending after the horizon,
/// with the sojourn and excursion functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct CtrwPathSummary {
    pub horizon: f64,
    pub cycles: Vec<CtrwCycleRecord>,
    /// Number of cycles started by the horizon, `τ(t)`.
    pub tau: usize,
    /// Longest sojourn at zero up to the horizon, incomplete part included.
    pub q: f64,
    pub m_tau: f64,
    pub m_tau_minus: f64,
    /// Longest completed excursion.
    pub longest_excursion: f64,
    /// Excursion sums drawn from the Gaussian approximation.
    pub approx_sums: u64,
}

impl CtrwPathSummary {
    fn from_cycles(horizon: f64, cycles: Vec<CtrwCycleRecord>, approx_sums: u64) -> Self {
        let tau = cycles.len();
        let completed = &cycles[..tau - 1];
        let m_tau_minus = completed.iter().map(|c| c.x).fold(0.0, f64::max);
        let m_tau = m_tau_minus.max(cycles[tau - 1].x);
        let longest_excursion = completed.iter().map(|c| c.r).fold(0.0, f64::max);
        let mut s = Self {
            horizon,
            cycles,
            tau,
            q: 0.0,
            m_tau,
            m_tau_minus,
            longest_excursion,
            approx_sums,
        };
        s.q = longest_sojourn(&s);
        s
    }

    /// `A_{τ-1}`: start of the cycle in progress at the horizon.
    pub fn last_start(&self) -> f64 {
        if self.tau >= 2 {
            self.cycles[self.tau - 2].a_end
        } else {
            0.0
        }
    }

    /// Sojourn lengths up to the horizon; the last one is cut at the horizon.
    pub fn sojourns(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cycles[..self.tau - 1].iter().map(|c| c.x).collect();
        let start = self.last_start();
        let last = self.cycles[self.tau - 1].x;
        v.push(if start + last < self.horizon {
            last
        } else {
            self.horizon - start
        });
        v
    }
}

/// `Q(t)`: `M^τ` if the last sojourn ended before the horizon, otherwise
/// `max(M^{τ-1}, t - A_{τ-1})`.
pub fn longest_sojourn(summary: &CtrwPathSummary) -> f64 {
    let start = summary.last_start();
    let last = summary.cycles[summary.tau - 1].x;
    if start + last < summary.horizon {
        summary.m_tau
    } else {
        summary.m_tau_minus.max(summary.horizon - start)
    }
}

/// The two longest sojourns up to the horizon (second is 0 if only one).
pub fn two_longest_sojourns(summary: &CtrwPathSummary) -> (f64, f64) {
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for s in summary.sojourns() {
        if s > first {
            second = first;
            first = s;
        } else if s > second {
            second = s;
        }
    }
    (first, second)
}

/// Simulation granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    /// One draw per cycle: sojourn, exact `K`, summed excursion.
    Cycle,
    /// Literal walk and waits up to the horizon.
    Step,
}

#[derive(Debug, Clone, Copy)]
pub struct CtrwCaps {
    pub cycles: u64,
    pub steps: u64,
}

impl Default for CtrwCaps {
    fn default() -> Self {
        Self {
            cycles: DEFAULT_CYCLE_CAP,
            steps: DEFAULT_STEP_CAP,
        }
    }
}

pub fn simulate_cycles(
    wait: WaitDist,
    t: f64,
    stream: &mut Stream,
    fidelity: Fidelity,
) -> Result<CtrwPathSummary> {
    simulate_cycles_capped(wait, t, stream, fidelity, CtrwCaps::default())
}

pub fn simulate_cycles_capped(
    wait: WaitDist,
    t: f64,
    stream: &mut Stream,
    fidelity: Fidelity,
    caps: CtrwCaps,
) -> Result<CtrwPathSummary> {
    wait.validate()?;
    if wait.mean().is_none() {
        return Err(invalid("ctrw waits must have finite mean"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("horizon {t} must be finite and >= 0")));
    }
    match fidelity {
        Fidelity::Cycle => simulate_cycle_level(wait, t, stream, caps),
        Fidelity::Step => simulate_step_level(wait, t, stream, caps),
    }
}

fn simulate_cycle_level(
    wait: WaitDist,
    t: f64,
    stream: &mut Stream,
    caps: CtrwCaps,
) -> Result<CtrwPathSummary> {
    let mut cycles = Vec::new();
    let mut a_prev = 0.0;
    let mut approx = 0u64;
    loop {
        if cycles.len() as u64 >= caps.cycles {
            return Err(Error::ResourceCap {
                what: "ctrw cycles",
                cap: caps.cycles,
            });
        }
        let c = sample_cycle(wait, stream)?;
        approx += c.approx as u64;
        let y = c.x + c.r;
        let a_end = a_prev + y;
        cycles.push(CtrwCycleRecord {
            x: c.x,
            k: c.k,
            r: c.r,
            y,
            a_end,
        });
        if a_end > t {
            break;
        }
        a_prev = a_end;
    }
    Ok(CtrwPathSummary::from_cycles(t, cycles, approx))
}

/// Walks literally until the horizon. The cycle in progress at the horizon
/// is completed in law: from position `j ≠ 0` the remaining jump count is a
/// sum of `j` independent copies of `K - 1`.
fn simulate_step_level(
    wait: WaitDist,
    t: f64,
    stream: &mut Stream,
    caps: CtrwCaps,
) -> Result<CtrwPathSummary> {
    let mut cycles = Vec::new();
    let mut a_prev = 0.0;
    let mut steps = 0u64;
    let mut approx = 0u64;
    loop {
        if cycles.len() as u64 >= caps.cycles {
            return Err(Error::ResourceCap {
                what: "ctrw cycles",
                cap: caps.cycles,
            });
        }
        let x = wait.sample(stream);
        let sojourn_end = a_prev + x;
        let (k, r) = if sojourn_end > t {
            let k = first_return_exact(stream);
            let (r, a) = wait.sum_of(k - 1, stream)?;
            approx += a as u64;
            (k, r)
        } else {
            let mut pos: i64 = if stream.next_u64() & 1 == 1 { 1 } else { -1 };
            let mut k = 1u64;
            let mut r = 0.0;
            loop {
                let e = wait.sample(stream);
                if sojourn_end + r + e > t {
                    let mut jumps = 0u64;
                    for _ in 0..pos.unsigned_abs() {
                        jumps = jumps.saturating_add(first_return_exact(stream) - 1);
                    }
                    let (rest, a) = wait.sum_of(jumps - 1, stream)?;
                    approx += a as u64;
                    r += e + rest;
                    k = k.saturating_add(jumps);
                    break;
                }
                r += e;
                pos += if stream.next_u64() & 1 == 1 { 1 } else { -1 };
                k += 1;
                steps += 1;
                if steps >= caps.steps {
                    return Err(Error::ResourceCap {
                        what: "ctrw walk steps",
                        cap: caps.steps,
                    });
                }
                if pos == 0 {
                    break;
                }
            }
            (k, r)
        };
        let y = x + r;
        let a_end = a_prev + y;
        cycles.push(CtrwCycleRecord { x, k, r, y, a_end });
        if a_end > t {
            break;
        }
        a_prev = a_end;
    }
    Ok(CtrwPathSummary::from_cycles(t, cycles, approx))
}
