//! Deterministic, splittable random streams and the variate generators the
//! simulations draw from.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and positioned
//! on its own 64-bit stream id, so `(master_seed, stream_index)` fully
//! determines the output and distinct indices never overlap.
//!
//! The positive stable law is pinned to the Laplace transform
//! `E exp(-λS) = exp(-λ^α)`. The subordinator whose Lévy measure is
//! `α y^(-α-1) dy` then has Laplace exponent `Γ(1-α) λ^α`, and its first
//! passage time of level `t` is `t^α / (Γ(1-α) S^α)`.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl StreamSeed {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn stream(self) -> Stream {
        Stream::new(self)
    }
}

/// A random stream owned by exactly one worker at a time.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: StreamSeed) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
        rng.set_stream(seed.stream_index);
        Self { rng }
    }

    /// Uniform on (0,1); an exact zero is redrawn.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Gamma variate with the given shape and scale.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        // shape and scale are validated by the callers
        Gamma::new(shape, scale)
            .expect("positive gamma parameters")
            .sample(&mut self.rng)
    }
}

/// `u^(-1/alpha)`: a Pareto variate with `P(Y > y) = y^(-alpha)` on `[1, ∞)`.
pub fn pareto_sample(alpha: f64, u: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("pareto tail index {alpha} outside (0,1)")));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(invalid(format!("uniform {u} outside (0,1]")));
    }
    Ok(u.powf(-1.0 / alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("tail index {alpha} outside (0,1)")))
    }
}

/// Positive stable law with Laplace transform `exp(-λ^alpha)`, sampled by
/// Kanter's representation `(A(U)/E)^((1-α)/α)`.
#[derive(Debug, Clone, Copy)]
pub struct StableStandard {
    alpha: f64,
}

impl StableStandard {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let a = self.alpha;
        let u = stream.uniform_pos();
        let e = stream.exp1();
        let pu = PI * u;
        let zolotarev = (a * pu).sin().powf(a / (1.0 - a)) * ((1.0 - a) * pu).sin()
            / pu.sin().powf(1.0 / (1.0 - a));
        (zolotarev / e).powf((1.0 - a) / a)
    }
}

pub fn stable_standard_sample(alpha: f64, stream: &mut Stream) -> Result<f64> {
    Ok(StableStandard::new(alpha)?.sample(stream))
}

/// Passage-time sampler `W_α(t)` for the subordinator with Laplace exponent
/// `Γ(1-α) λ^α`.
#[derive(Debug, Clone, Copy)]
pub struct HittingTime {
    stable: StableStandard,
    gamma_one_minus: f64,
}

impl HittingTime {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Self {
            stable: StableStandard::new(alpha)?,
            gamma_one_minus: gamma(1.0 - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.stable.alpha
    }

    pub fn sample(&self, level: f64, stream: &mut Stream) -> f64 {
        if level == 0.0 {
            return 0.0;
        }
        let a = self.stable.alpha;
        let s = self.stable.sample(stream);
        level.powf(a) / (self.gamma_one_minus * s.powf(a))
    }

    /// `E W_α(1) = 1 / (Γ(1-α) Γ(1+α))`.
    pub fn mean_at_one(&self) -> f64 {
        1.0 / (self.gamma_one_minus * gamma(1.0 + self.stable.alpha))
    }
}

pub fn hitting_time_sample(alpha: f64, t: f64, stream: &mut Stream) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("level {t} must be finite and >= 0")));
    }
    Ok(HittingTime::new(alpha)?.sample(t, stream))
}

/// Count above which sums of general waits switch to a Gaussian approximation.
pub const GAUSSIAN_SUM_THRESHOLD: u64 = 1_000_000;
const LITERAL_SUM_CAP: u64 = 100_000_000;

/// Law of a waiting time (CTRW waits, finite-mean observations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WaitDist {
    Exponential { rate: f64 },
    /// `P(E > e) = e^(-alpha)` on `[1, ∞)`.
    Pareto { alpha: f64 },
    Deterministic { value: f64 },
}

impl WaitDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WaitDist::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(invalid(format!("exponential rate {rate} must be positive")))
            }
            WaitDist::Pareto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(invalid(format!("pareto wait index {alpha} must be positive")))
            }
            WaitDist::Deterministic { value } if !(value > 0.0 && value.is_finite()) => {
                Err(invalid(format!("deterministic wait {value} must be positive")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match *self {
            WaitDist::Exponential { rate } => stream.exp1() / rate,
            WaitDist::Pareto { alpha } => stream.uniform_pos().powf(-1.0 / alpha),
            WaitDist::Deterministic { value } => value,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            WaitDist::Exponential { rate } => Some(1.0 / rate),
            WaitDist::Pareto { alpha } if alpha > 1.0 => Some(alpha / (alpha - 1.0)),
            WaitDist::Pareto { .. } => None,
            WaitDist::Deterministic { value } => Some(value),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            WaitDist::Exponential { rate } => Some(1.0 / (rate * rate)),
            WaitDist::Pareto { alpha } if alpha > 2.0 => {
                Some(alpha / ((alpha - 1.0).powi(2) * (alpha - 2.0)))
            }
            WaitDist::Pareto { .. } => None,
            WaitDist::Deterministic { .. } => Some(0.0),
        }
    }

    /// `P(E > e)`.
    pub fn tail(&self, e: f64) -> f64 {
        match *self {
            WaitDist::Exponential { rate } => {
                if e <= 0.0 {
                    1.0
                } else {
                    (-rate * e).exp()
                }
            }
            WaitDist::Pareto { alpha } => {
                if e <= 1.0 {
                    1.0
                } else {
                    e.powf(-alpha)
                }
            }
            WaitDist::Deterministic { value } => {
                if e < value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Sum of `count` iid waits. Returns the sum and whether the Gaussian
    /// approximation was used.
    pub fn sum_of(&self, count: u64, stream: &mut Stream) -> Result<(f64, bool)> {
        if count == 0 {
            return Ok((0.0, false));
        }
        match *self {
            WaitDist::Exponential { rate } => Ok((stream.gamma(count as f64, 1.0 / rate), false)),
            WaitDist::Deterministic { value } => Ok((count as f64 * value, false)),
            WaitDist::Pareto { .. } => {
                if count > GAUSSIAN_SUM_THRESHOLD {
                    if let (Some(m), Some(v)) = (self.mean(), self.variance()) {
                        let n = count as f64;
                        let s = n * m + (n * v).sqrt() * stream.normal();
                        // each wait is at least 1
                        return Ok((s.max(n), true));
                    }
                    if count > LITERAL_SUM_CAP {
                        return Err(Error::ResourceCap {
                            what: "literal wait summation",
                            cap: LITERAL_SUM_CAP,
                        });
                    }
                }
                let s = (0..count).map(|_| self.sample(stream)).sum();
                Ok((s, false))
            }
        }
    }
}

/// Draw one waiting time after validating the law.
pub fn waiting_sample(dist: WaitDist, stream: &mut Stream) -> Result<f64> {
    dist.validate()?;
    Ok(dist.sample(stream))
}
