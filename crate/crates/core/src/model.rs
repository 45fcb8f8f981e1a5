//! The joint law of an observation `X` and its interarrival time `Y`,
//! together with the extreme-value normalizers `a, b` of `X` and the
//! renewal normalizers `d, d̃` of `Y`.

use serde::{Deserialize, Serialize};

use crate::ctrw;
use crate::error::{invalid, Error, Result};
use crate::rng::{check_alpha, Stream, WaitDist};

/// Extreme value family of the observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MdaFamily {
    Gumbel,
    Frechet { beta: f64 },
}

/// Built-in observation laws, one per supported domain of attraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationLaw {
    /// Exp(rate): Gumbel domain.
    Exponential { rate: f64 },
    /// `P(X > x) = x^(-beta)` on `[1, ∞)`: Fréchet domain with index `beta`.
    Pareto { beta: f64 },
}

/// Observation law with its normalizing functions `a(t)`, `b(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdaSpec {
    law: ObservationLaw,
}

impl MdaSpec {
    pub fn new(law: ObservationLaw) -> Result<Self> {
        match law {
            ObservationLaw::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(invalid(format!("exponential rate {rate} must be positive")))
            }
            ObservationLaw::Pareto { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(invalid(format!("frechet index {beta} must be positive")))
            }
            _ => Ok(Self { law }),
        }
    }

    pub fn gumbel() -> Self {
        Self {
            law: ObservationLaw::Exponential { rate: 1.0 },
        }
    }

    pub fn law(&self) -> ObservationLaw {
        self.law
    }

    pub fn family(&self) -> MdaFamily {
        match self.law {
            ObservationLaw::Exponential { .. } => MdaFamily::Gumbel,
            ObservationLaw::Pareto { beta } => MdaFamily::Frechet { beta },
        }
    }

    /// `(a(t), b(t))` with `t P(X > a(t) x + b(t)) = -log G(x)` exactly on
    /// the support.
    pub fn normalizers(&self, t: f64) -> Result<(f64, f64)> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(format!("normalizer argument {t} must be positive")));
        }
        Ok(match self.law {
            ObservationLaw::Exponential { rate } => (1.0 / rate, t.ln() / rate),
            ObservationLaw::Pareto { beta } => (t.powf(1.0 / beta), 0.0),
        })
    }

    /// `-log G(x)`: `e^(-x)` for Gumbel, `x^(-β)` for Fréchet.
    pub fn neg_log_g(&self, x: f64) -> f64 {
        self.family().neg_log_g(x)
    }

    pub fn g(&self, x: f64) -> f64 {
        (-self.neg_log_g(x)).exp()
    }

    /// `P(X > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match self.law {
            ObservationLaw::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            ObservationLaw::Pareto { beta } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-beta)
                }
            }
        }
    }

    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match self.law {
            ObservationLaw::Exponential { rate } => stream.exp1() / rate,
            ObservationLaw::Pareto { beta } => stream.uniform_pos().powf(-1.0 / beta),
        }
    }
}

impl MdaFamily {
    pub fn neg_log_g(&self, x: f64) -> f64 {
        match *self {
            MdaFamily::Gumbel => (-x).exp(),
            MdaFamily::Frechet { beta } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(-beta)
                }
            }
        }
    }
}

/// Exp(1) observations: `a = 1`, `b = log t`.
pub fn gumbel_normalizers_exponential(t: f64) -> Result<(f64, f64)> {
    if !(t >= 1.0) {
        return Err(invalid(format!("t = {t} must be >= 1")));
    }
    MdaSpec::gumbel().normalizers(t)
}

/// Pareto(β) observations: `a = t^(1/β)`, `b = 0`.
pub fn frechet_normalizers_pareto(beta: f64, t: f64) -> Result<(f64, f64)> {
    if !(t >= 1.0) {
        return Err(invalid(format!("t = {t} must be >= 1")));
    }
    MdaSpec::new(ObservationLaw::Pareto { beta })?.normalizers(t)
}

/// Pure Pareto(α) steps: `d(t) = t^(1/α)` and its exact inverse `d̃(t) = t^α`.
pub fn pareto_renewal_normalizers(alpha: f64, t: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !(t >= 0.0) {
        return Err(invalid(format!("t = {t} must be >= 0")));
    }
    Ok((t.powf(1.0 / alpha), t.powf(alpha)))
}

/// Laws for the interarrival times `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InterarrivalLaw {
    /// `P(Y > y) = y^(-alpha)` on `[1, ∞)`.
    Pareto { alpha: f64 },
    /// Exp(rate) plus an independent Pareto(alpha).
    ExpPlusPareto { rate: f64, alpha: f64 },
    /// CTRW cycle length: one sojourn wait plus the following excursion.
    CtrwCycle { wait: WaitDist },
}

impl InterarrivalLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InterarrivalLaw::Pareto { alpha } => check_alpha(alpha),
            InterarrivalLaw::ExpPlusPareto { rate, alpha } => {
                check_alpha(alpha)?;
                if rate > 0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("exponential rate {rate} must be positive")))
                }
            }
            InterarrivalLaw::CtrwCycle { wait } => {
                wait.validate()?;
                if wait.mean().is_none() {
                    return Err(invalid("ctrw waits must have finite mean"));
                }
                Ok(())
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            InterarrivalLaw::Pareto { alpha } | InterarrivalLaw::ExpPlusPareto { alpha, .. } => {
                alpha
            }
            InterarrivalLaw::CtrwCycle { .. } => 0.5,
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> Result<f64> {
        Ok(match *self {
            InterarrivalLaw::Pareto { alpha } => stream.uniform_pos().powf(-1.0 / alpha),
            InterarrivalLaw::ExpPlusPareto { rate, alpha } => {
                stream.exp1() / rate + stream.uniform_pos().powf(-1.0 / alpha)
            }
            InterarrivalLaw::CtrwCycle { wait } => ctrw::sample_cycle(wait, stream)?.y(),
        })
    }
}

/// Minimum number of exceedances at any solved calibration point.
pub const MIN_CALIBRATION_EXCEEDANCES: usize = 100;
/// Minimum calibration sample size.
pub const MIN_CALIBRATION_SAMPLES: usize = 1_000_000;

/// Empirical tail of `Y`, interpolated piecewise-linearly in log-log
/// coordinates between order statistics. The `j`-th largest value carries
/// tail level `j / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    /// Sample sorted descending.
    desc: Vec<f64>,
    /// `(t, d̃(t))` solved at calibration time.
    grid: Vec<(f64, f64)>,
}

impl EmpiricalTail {
    pub fn sample_size(&self) -> usize {
        self.desc.len()
    }

    pub fn grid(&self) -> &[(f64, f64)] {
        &self.grid
    }

    /// Interpolated `P̂(Y > y)`.
    pub fn tail(&self, y: f64) -> Result<f64> {
        let n = self.desc.len();
        // number of values strictly above y
        let above = self.desc.partition_point(|&v| v > y);
        if above < MIN_CALIBRATION_EXCEEDANCES {
            return Err(Error::Calibration {
                exceedances: above,
                required: MIN_CALIBRATION_EXCEEDANCES,
            });
        }
        if above == n {
            return Ok(1.0);
        }
        // desc[above-1] > y >= desc[above]; levels above/n and (above+1)/n
        let (hi_v, lo_v) = (self.desc[above - 1], self.desc[above]);
        let (hi_p, lo_p) = (above as f64 / n as f64, (above + 1) as f64 / n as f64);
        if hi_v <= 0.0 || lo_v <= 0.0 || y <= 0.0 || hi_v == lo_v {
            return Ok(lo_p);
        }
        let s = (y.ln() - lo_v.ln()) / (hi_v.ln() - lo_v.ln());
        Ok((lo_p.ln() + s * (hi_p.ln() - lo_p.ln())).exp())
    }

    /// Solves `n · P̂(Y > d) = 1`.
    pub fn d(&self, n: f64) -> Result<f64> {
        let size = self.desc.len() as f64;
        if !(n >= 1.0) {
            return Err(invalid(format!("normalizer index {n} must be >= 1")));
        }
        let j = size / n;
        if j < MIN_CALIBRATION_EXCEEDANCES as f64 {
            return Err(Error::Calibration {
                exceedances: j as usize,
                required: MIN_CALIBRATION_EXCEEDANCES,
            });
        }
        let lo = (j.floor() as usize).max(1);
        if lo as f64 == j || lo >= self.desc.len() {
            return Ok(self.desc[lo.min(self.desc.len()) - 1]);
        }
        let (v_lo, v_hi) = (self.desc[lo - 1], self.desc[lo]);
        let (p_lo, p_hi) = (lo as f64 / size, (lo + 1) as f64 / size);
        if v_lo <= 0.0 || v_hi <= 0.0 {
            return Ok(v_lo);
        }
        let s = ((1.0 / n).ln() - p_lo.ln()) / (p_hi.ln() - p_lo.ln());
        Ok((v_lo.ln() + s * (v_hi.ln() - v_lo.ln())).exp())
    }

    /// Inverse of `d`: `d̃(t) = 1 / P̂(Y > t)`.
    pub fn d_inv(&self, t: f64) -> Result<f64> {
        Ok(1.0 / self.tail(t)?)
    }
}

/// How `d` and `d̃` are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibration {
    Analytic,
    Empirical(EmpiricalTail),
}

/// Interarrival law with its renewal normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct InterarrivalSpec {
    law: InterarrivalLaw,
    calibration: Calibration,
}

impl InterarrivalSpec {
    /// Closed-form normalizers; only pure Pareto steps have them.
    pub fn analytic(law: InterarrivalLaw) -> Result<Self> {
        law.validate()?;
        match law {
            InterarrivalLaw::Pareto { .. } => Ok(Self {
                law,
                calibration: Calibration::Analytic,
            }),
            _ => Err(invalid("analytic normalizers exist only for pure Pareto steps")),
        }
    }

    pub fn law(&self) -> InterarrivalLaw {
        self.law
    }

    pub fn alpha(&self) -> f64 {
        self.law.alpha()
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn route_name(&self) -> &'static str {
        match self.calibration {
            Calibration::Analytic => "analytic",
            Calibration::Empirical(_) => "empirical",
        }
    }

    /// `P(Y > y)`.
    pub fn tail(&self, y: f64) -> Result<f64> {
        match (&self.calibration, self.law) {
            (Calibration::Analytic, InterarrivalLaw::Pareto { alpha }) => {
                Ok(if y <= 1.0 { 1.0 } else { y.powf(-alpha) })
            }
            (Calibration::Empirical(e), _) => e.tail(y),
            _ => unreachable!("analytic calibration is only built for pareto steps"),
        }
    }

    pub fn d(&self, t: f64) -> Result<f64> {
        match &self.calibration {
            Calibration::Analytic => Ok(t.powf(1.0 / self.alpha())),
            Calibration::Empirical(e) => e.d(t),
        }
    }

    pub fn d_inv(&self, t: f64) -> Result<f64> {
        match &self.calibration {
            Calibration::Analytic => Ok(t.powf(self.alpha())),
            Calibration::Empirical(e) => e.d_inv(t),
        }
    }

    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> Result<f64> {
        self.law.sample(stream)
    }
}

/// Calibrates `d` and `d̃` from `n_cal` draws of `Y`. Every `t` in `t_grid`
/// must have at least 100 sample exceedances.
pub fn calibrate_normalizer_empirical<F>(
    law: InterarrivalLaw,
    mut sampler: F,
    n_cal: usize,
    t_grid: &[f64],
) -> Result<InterarrivalSpec>
where
    F: FnMut() -> Result<f64>,
{
    law.validate()?;
    if n_cal < MIN_CALIBRATION_SAMPLES {
        return Err(invalid(format!(
            "calibration needs at least {MIN_CALIBRATION_SAMPLES} samples, got {n_cal}"
        )));
    }
    let mut desc = Vec::with_capacity(n_cal);
    for _ in 0..n_cal {
        desc.push(sampler()?);
    }
    desc.sort_by(|a, b| b.total_cmp(a));
    let mut tail = EmpiricalTail {
        desc,
        grid: Vec::new(),
    };
    let mut grid = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        grid.push((t, tail.d_inv(t)?));
    }
    tail.grid = grid;
    Ok(InterarrivalSpec {
        law,
        calibration: Calibration::Empirical(tail),
    })
}

/// Calibrates from the law's own sampler on the given stream.
pub fn calibrate_from_law(
    law: InterarrivalLaw,
    n_cal: usize,
    t_grid: &[f64],
    stream: &mut Stream,
) -> Result<InterarrivalSpec> {
    calibrate_normalizer_empirical(law, || law.sample(stream), n_cal, t_grid)
}

/// Dependence between `X` and `Y` within a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dependence {
    Independent,
    /// `X = Y`.
    Identical,
    /// `X` is the sojourn wait and `Y = X + R` the CTRW cycle length.
    CtrwCycle { wait: WaitDist },
}

/// Joint law of `(X₁, Y₁)`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    mda: MdaSpec,
    inter: InterarrivalSpec,
    dependence: Dependence,
}

impl JointModel {
    pub fn new(mda: MdaSpec, inter: InterarrivalSpec, dependence: Dependence) -> Result<Self> {
        match dependence {
            Dependence::Independent => {
                if let InterarrivalLaw::CtrwCycle { .. } = inter.law() {
                    return Err(invalid("ctrw cycle steps require ctrw_cycle dependence"));
                }
            }
            Dependence::Identical => match (mda.law(), inter.law()) {
                (ObservationLaw::Pareto { beta }, InterarrivalLaw::Pareto { alpha })
                    if beta == alpha => {}
                _ => {
                    return Err(invalid(
                        "identical mode needs Pareto observations with the step law's index",
                    ))
                }
            },
            Dependence::CtrwCycle { wait } => {
                match inter.law() {
                    InterarrivalLaw::CtrwCycle { wait: w } if w == wait => {}
                    _ => return Err(invalid("ctrw_cycle mode needs ctrw cycle steps")),
                }
                let matches = match (wait, mda.law()) {
                    (WaitDist::Exponential { rate }, ObservationLaw::Exponential { rate: r }) => {
                        rate == r
                    }
                    (WaitDist::Pareto { alpha }, ObservationLaw::Pareto { beta }) => {
                        alpha == beta && alpha > 1.0
                    }
                    _ => false,
                };
                if !matches {
                    return Err(invalid("ctrw sojourn law must equal the wait law"));
                }
            }
        }
        Ok(Self {
            mda,
            inter,
            dependence,
        })
    }

    /// CTRW model with sojourn = wait and cycle steps, using the given
    /// (typically empirical) calibration of the cycle-length tail.
    pub fn ctrw(wait: WaitDist, inter: InterarrivalSpec) -> Result<Self> {
        let law = match wait {
            WaitDist::Exponential { rate } => ObservationLaw::Exponential { rate },
            WaitDist::Pareto { alpha } => ObservationLaw::Pareto { beta: alpha },
            WaitDist::Deterministic { .. } => {
                return Err(invalid("deterministic waits have no continuous extreme value law"))
            }
        };
        Self::new(MdaSpec::new(law)?, inter, Dependence::CtrwCycle { wait })
    }

    pub fn mda(&self) -> &MdaSpec {
        &self.mda
    }

    pub fn inter(&self) -> &InterarrivalSpec {
        &self.inter
    }

    pub fn dependence(&self) -> Dependence {
        self.dependence
    }

    pub fn alpha(&self) -> f64 {
        self.inter.alpha()
    }

    /// `(ã(t), b̃(t)) = (a(d̃(t)), b(d̃(t)))`.
    pub fn scaled_normalizers(&self, t: f64) -> Result<(f64, f64)> {
        self.mda.normalizers(self.inter.d_inv(t)?)
    }

    /// One iid pair `(x, y)`.
    #[inline]
    pub fn joint_sample(&self, stream: &mut Stream) -> Result<(f64, f64)> {
        match self.dependence {
            Dependence::Independent => {
                let x = self.mda.sample(stream);
                let y = self.inter.sample(stream)?;
                Ok((x, y))
            }
            Dependence::Identical => {
                let y = self.inter.sample(stream)?;
                Ok((y, y))
            }
            Dependence::CtrwCycle { wait } => {
                let c = ctrw::sample_cycle(wait, stream)?;
                Ok((c.x, c.y()))
            }
        }
    }
}

pub fn joint_sample(model: &JointModel, stream: &mut Stream) -> Result<(f64, f64)> {
    model.joint_sample(stream)
}
