//! Renewal paths: partial sums of interarrival times, the renewal index
//! `τ(t) = inf{k : Y₁ + … + Y_k > t}`, and generalized inverses of step
//! functions.

use crate::error::{invalid, Error, Result};
use crate::model::JointModel;
use crate::rng::Stream;

/// Default cap on `τ(t)`.
pub const DEFAULT_TAU_CAP: u64 = 1_000_000_000;

/// One trajectory up to the first partial sum exceeding the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalPath {
    /// Observations `X₁..X_τ`.
    pub x: Vec<f64>,
    /// Interarrival times `Y₁..Y_τ`.
    pub y: Vec<f64>,
    /// Partial sums `S_0 = 0, S_1, …, S_τ` (length `τ + 1`).
    pub cumsum: Vec<f64>,
    pub tau: usize,
    pub horizon: f64,
}

impl RenewalPath {
    /// `cumsum[τ-1] <= t < cumsum[τ]`.
    pub fn sandwich_holds(&self) -> bool {
        self.tau >= 1
            && self.cumsum.len() == self.tau + 1
            && self.cumsum[self.tau - 1] <= self.horizon
            && self.horizon < self.cumsum[self.tau]
    }

    /// `τ(s)` for `0 <= s <= t`, by a forward scan of the partial sums.
    pub fn tau_at(&self, s: f64) -> Result<usize> {
        if !(s >= 0.0 && s <= self.horizon) {
            return Err(invalid(format!(
                "level {s} outside the simulated range [0, {}]",
                self.horizon
            )));
        }
        for (k, &c) in self.cumsum.iter().enumerate().skip(1) {
            if c > s {
                return Ok(k);
            }
        }
        unreachable!("cumsum[tau] exceeds the horizon")
    }

    /// Largest observation among the first `n` pairs (`-∞` if `n = 0`).
    pub fn max_x(&self, n: usize) -> f64 {
        self.x[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn simulate_until(model: &JointModel, t: f64, stream: &mut Stream) -> Result<RenewalPath> {
    simulate_until_capped(model, t, stream, DEFAULT_TAU_CAP)
}

/// Draws pairs until the partial sum of the `Y`s exceeds `t`.
pub fn simulate_until_capped(
    model: &JointModel,
    t: f64,
    stream: &mut Stream,
    cap: u64,
) -> Result<RenewalPath> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("horizon {t} must be finite and >= 0")));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut cumsum = vec![0.0];
    let mut s = 0.0;
    while s <= t {
        if x.len() as u64 >= cap {
            return Err(Error::ResourceCap {
                what: "renewal steps",
                cap,
            });
        }
        let (xi, yi) = model.joint_sample(stream)?;
        s += yi;
        x.push(xi);
        y.push(yi);
        cumsum.push(s);
    }
    let tau = x.len();
    Ok(RenewalPath {
        x,
        y,
        cumsum,
        tau,
        horizon: t,
    })
}

/// Nondecreasing right-continuous step function
/// `z(s) = values[i] / scale` for `jump_points[i] <= s < jump_points[i+1]`.
///
/// Keeping `scale` separate lets inverses be evaluated against the level
/// `u * scale` without dividing the stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    jump_points: Vec<f64>,
    values: Vec<f64>,
    scale: f64,
}

impl StepFunction {
    pub fn new(jump_points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::scaled(jump_points, values, 1.0)
    }

    pub fn scaled(jump_points: Vec<f64>, values: Vec<f64>, scale: f64) -> Result<Self> {
        if jump_points.is_empty() || jump_points.len() != values.len() {
            return Err(invalid("step function needs matching, nonempty jump points and values"));
        }
        if jump_points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("jump points must be strictly increasing"));
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(invalid("step function values must be nondecreasing"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("scale {scale} must be positive")));
        }
        Ok(Self {
            jump_points,
            values,
            scale,
        })
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.jump_points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, s: f64) -> f64 {
        let i = self.jump_points.partition_point(|&p| p <= s);
        if i == 0 {
            f64::NAN
        } else {
            self.values[i - 1] / self.scale
        }
    }
}

/// `z^←(u) = inf{s : z(s) > u}`.
pub fn generalized_inverse(z: &StepFunction, u: f64) -> Result<f64> {
    let level = u * z.scale;
    let i = z.values.partition_point(|&v| v <= level);
    z.jump_points
        .get(i)
        .copied()
        .ok_or(Error::NoFiniteInverse(u))
}

/// `s ↦ T(d̃(t) s) / t` with `T(r) = Y₁ + … + Y_⌊r⌋`, known up to `s = τ/d̃`.
pub fn scaled_partial_sums(path: &RenewalPath, model: &JointModel) -> Result<StepFunction> {
    let dt = model.inter().d_inv(path.horizon)?;
    if !(dt > 0.0) {
        return Err(invalid("scaled partial sums need a positive horizon"));
    }
    let jumps = (0..=path.tau).map(|k| k as f64 / dt).collect();
    StepFunction::scaled(jumps, path.cumsum.clone(), path.horizon)
}

/// `τ(t) / d̃(t)`.
pub fn scaled_count(path: &RenewalPath, model: &JointModel) -> Result<f64> {
    let dt = model.inter().d_inv(path.horizon)?;
    Ok(path.tau as f64 / dt)
}

/// Number of grid levels `u ∈ (0, 1]` at which
/// `(T(d̃(t)·)/t)^←(u) = τ(tu)/d̃(t)` fails (zero on a correct path).
pub fn inverse_identity_violations(
    path: &RenewalPath,
    model: &JointModel,
    grid: &[f64],
) -> Result<usize> {
    let z = scaled_partial_sums(path, model)?;
    let dt = model.inter().d_inv(path.horizon)?;
    let mut bad = 0;
    for &u in grid {
        if !(u > 0.0 && u <= 1.0) {
            return Err(invalid(format!("identity level {u} outside (0,1]")));
        }
        let lhs = generalized_inverse(&z, u)?;
        let rhs = path.tau_at(path.horizon * u)? as f64 / dt;
        if lhs != rhs {
            bad += 1;
        }
    }
    Ok(bad)
}
