//! Config-driven experiment runner: simulates finite-horizon ensembles,
//! evaluates the matching limit law and writes comparison tables.
//!
//! Replication `r` at grid position `g` always draws from stream
//! `(g << 40) | r`; limit-law banks and calibration samples use reserved
//! indices above `1 << 62`. Output therefore depends only on the master seed,
//! never on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctrw::{self, Fidelity};
use crate::error::{invalid, Error, Result};
use crate::limits::{two_largest_limit, LimitLaw, WBank};
use crate::model::{
    calibrate_from_law, Dependence, InterarrivalLaw, InterarrivalSpec, JointModel, MdaSpec,
    ObservationLaw, MIN_CALIBRATION_SAMPLES,
};
use crate::pointproc::{extract, kth_max, Boundary};
use crate::renewal::{scaled_count, simulate_until};
use crate::rng::{StreamSeed, WaitDist};
use crate::stats::{
    csv_writer, dkw_epsilon, dkw_epsilon_two_sample, ks_distance, ks_distance_to_cdf, EcdfBank,
    Provenance,
};
use crate::subord::{largest_jump_law, Algorithm, DEFAULT_TOL};

/// Reserved stream indices for banks and calibration.
pub const BANK_STREAM_BASE: u64 = 1 << 62;
const W_BANK_STREAM: u64 = BANK_STREAM_BASE;
const CALIBRATION_STREAM: u64 = BANK_STREAM_BASE + 1;
const V_BANK_STREAM: u64 = BANK_STREAM_BASE + (1 << 40);
const DKW_DELTA: f64 = 0.01;
const DEFAULT_W_BANK: usize = 100_000;
const DEFAULT_V_BANK: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RenewalCount,
    MaxLimit,
    KthOrder,
    CtrwSojourn,
    CtrwTwoLargest,
    CtrwExcursion,
    FullDependenceMax,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RenewalCount => "renewal_count",
            ExperimentKind::MaxLimit => "max_limit",
            ExperimentKind::KthOrder => "kth_order",
            ExperimentKind::CtrwSojourn => "ctrw_sojourn",
            ExperimentKind::CtrwTwoLargest => "ctrw_two_largest",
            ExperimentKind::CtrwExcursion => "ctrw_excursion",
            ExperimentKind::FullDependenceMax => "full_dependence_max",
        }
    }

    pub fn default_tolerance(&self) -> f64 {
        match self {
            ExperimentKind::RenewalCount
            | ExperimentKind::MaxLimit
            | ExperimentKind::KthOrder
            | ExperimentKind::CtrwTwoLargest => 0.03,
            ExperimentKind::CtrwSojourn
            | ExperimentKind::CtrwExcursion
            | ExperimentKind::FullDependenceMax => 0.05,
        }
    }

    fn is_ctrw(&self) -> bool {
        matches!(
            self,
            ExperimentKind::CtrwSojourn
                | ExperimentKind::CtrwTwoLargest
                | ExperimentKind::CtrwExcursion
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceKind {
    #[default]
    Independent,
    Identical,
    CtrwCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Observation law; CTRW experiments derive it from the wait law.
    #[serde(default)]
    pub observation: Option<ObservationLaw>,
    pub interarrival: InterarrivalLaw,
    #[serde(default)]
    pub dependence: DependenceKind,
    /// Defaults to analytic for pure Pareto steps, empirical otherwise.
    #[serde(default)]
    pub calibration: Option<CalibrationKind>,
    #[serde(default)]
    pub calibration_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    pub t_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Overrides the kind's default pass tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Size of the limit-law sample bank.
    #[serde(default)]
    pub bank_size: Option<usize>,
    /// Order statistic for `kth_order` (default 2).
    #[serde(default)]
    pub k: Option<u32>,
    /// Truncation tolerance of the subordinator simulation.
    #[serde(default)]
    pub subord_tol: Option<f64>,
    /// Limit-law quantile levels `(p1, p2)`, `p1 > p2`, for `ctrw_two_largest`.
    #[serde(default)]
    pub quantile_pair: Option<(f64, f64)>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.reps < 100 {
            return cfg(format!("field `reps`: {} is below the minimum 100", self.reps));
        }
        if self.t_grid.is_empty() {
            return cfg("field `t_grid`: must not be empty".into());
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return cfg("field `t_grid`: horizons must be positive and finite".into());
        }
        if self.t_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return cfg("field `t_grid`: must be strictly increasing".into());
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol <= 1.0) {
                return cfg(format!("field `tolerance`: {tol} outside (0,1]"));
            }
        }
        if self.k == Some(0) {
            return cfg("field `k`: order statistics start at 1".into());
        }
        if let Some((p1, p2)) = self.quantile_pair {
            if !(0.0 < p2 && p2 < p1 && p1 < 1.0) {
                return cfg("field `quantile_pair`: need 0 < p2 < p1 < 1".into());
            }
        }
        if self.workers == Some(0) {
            return cfg("field `workers`: must be at least 1".into());
        }
        self.model
            .interarrival
            .validate()
            .map_err(|e| Error::Config(format!("field `model.interarrival`: {e}")))?;
        match (self.kind, self.model.interarrival) {
            (k, InterarrivalLaw::CtrwCycle { .. }) if !k.is_ctrw() => {
                cfg(format!("kind {} does not use ctrw cycle steps", k.name()))
            }
            (k, InterarrivalLaw::CtrwCycle { .. }) if k.is_ctrw() => Ok(()),
            (k, _) if k.is_ctrw() => cfg(format!(
                "field `model.interarrival`: kind {} needs ctrw_cycle steps",
                k.name()
            )),
            (ExperimentKind::FullDependenceMax, InterarrivalLaw::Pareto { .. }) => Ok(()),
            (ExperimentKind::FullDependenceMax, _) => {
                cfg("field `model.interarrival`: full_dependence_max needs pareto steps".into())
            }
            _ => Ok(()),
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(self.kind.default_tolerance())
    }
}

/// Builds the joint model, calibrating `d̃` from samples when needed.
pub fn build_model(config: &ExperimentConfig) -> Result<JointModel> {
    let m = &config.model;
    let law = m.interarrival;
    let calibration = m.calibration.unwrap_or(match law {
        InterarrivalLaw::Pareto { .. } => CalibrationKind::Analytic,
        _ => CalibrationKind::Empirical,
    });
    let inter = match calibration {
        CalibrationKind::Analytic => InterarrivalSpec::analytic(law)?,
        CalibrationKind::Empirical => {
            let n = m.calibration_samples.unwrap_or(MIN_CALIBRATION_SAMPLES);
            let mut s = StreamSeed::new(config.seed, CALIBRATION_STREAM).stream();
            calibrate_from_law(law, n, &config.t_grid, &mut s)?
        }
    };
    match (config.kind, law) {
        (_, InterarrivalLaw::CtrwCycle { wait }) => {
            let model = JointModel::ctrw(wait, inter)?;
            if let Some(obs) = m.observation {
                if obs != model.mda().law() {
                    return Err(Error::Config(
                        "field `model.observation`: ctrw sojourns follow the wait law".into(),
                    ));
                }
            }
            Ok(model)
        }
        (ExperimentKind::FullDependenceMax, InterarrivalLaw::Pareto { alpha }) => {
            let mda = MdaSpec::new(ObservationLaw::Pareto { beta: alpha })?;
            JointModel::new(mda, inter, Dependence::Identical)
        }
        _ => {
            let mda = MdaSpec::new(
                m.observation
                    .unwrap_or(ObservationLaw::Exponential { rate: 1.0 }),
            )?;
            let dep = match m.dependence {
                DependenceKind::Independent => Dependence::Independent,
                DependenceKind::Identical => Dependence::Identical,
                DependenceKind::CtrwCycle => {
                    return Err(Error::Config(
                        "field `model.dependence`: ctrw_cycle needs ctrw_cycle steps".into(),
                    ))
                }
            };
            JointModel::new(mda, inter, dep)
        }
    }
}

/// One comparison at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub kind: ExperimentKind,
    pub t: f64,
    pub reps: usize,
    pub statistic: String,
    /// Median of the finite-horizon sample, or the empirical probability.
    pub empirical: f64,
    /// Median of the limit law, or the limit probability.
    pub limit: f64,
    /// KS distance, or absolute probability difference.
    pub ks: f64,
    pub dkw_eps: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub calibration: String,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Limiting reference for plots: an evaluable law or a sample bank.
#[derive(Debug, Clone)]
pub enum LimitRef {
    Law(LimitLaw),
    Bank(Arc<EcdfBank>),
}

impl LimitRef {
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            LimitRef::Law(l) => l.evaluate(x),
            LimitRef::Bank(b) => Ok(b.cdf(x)),
        }
    }

    pub fn error(&self, x: f64) -> Result<f64> {
        match self {
            LimitRef::Law(l) => l.error_estimate(x),
            LimitRef::Bank(b) => {
                let f = b.cdf(x);
                Ok((f * (1.0 - f) / b.len() as f64).sqrt())
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            LimitRef::Law(l) => l.quantile(p),
            LimitRef::Bank(b) => Ok(b.quantile(p)),
        }
    }
}

/// Data behind `ecdf.csv`, `limit.csv` and `qq.csv` for one row.
#[derive(Debug, Clone)]
pub struct PlotData {
    pub kind: ExperimentKind,
    pub t: f64,
    pub empirical: EcdfBank,
    pub limit: LimitRef,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub plots: Vec<PlotData>,
}

impl RunOutput {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Runs every horizon of the config on a pool of `workers` threads.
pub fn run(config: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(config))
}

/// Evaluates `f` for every replication in parallel, in replication order.
fn replicate<F>(config: &ExperimentConfig, grid_pos: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(StreamSeed) -> Result<f64> + Sync,
{
    let pairs = replicate_pairs(config, grid_pos, |s| f(s).map(|v| (v, 0.0)))?;
    Ok(pairs.into_iter().map(|p| p.0).collect())
}

fn replicate_pairs<F>(config: &ExperimentConfig, grid_pos: usize, f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(StreamSeed) -> Result<(f64, f64)> + Sync,
{
    let results: Vec<Result<(f64, f64)>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| f(StreamSeed::new(config.seed, ((grid_pos as u64) << 40) | r)))
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        let first = results
            .into_iter()
            .find_map(|r| r.err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(Error::Replications {
            failed,
            total: config.reps,
            first,
        });
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

fn median(bank: &EcdfBank) -> f64 {
    bank.quantile(0.5)
}

struct Context {
    model: JointModel,
    w_bank: Option<Arc<WBank>>,
    v_bank: Option<Arc<EcdfBank>>,
}

fn prepare(config: &ExperimentConfig) -> Result<Context> {
    let model = build_model(config)?;
    let alpha = model.alpha();
    let w_bank = match config.kind {
        ExperimentKind::RenewalCount
        | ExperimentKind::MaxLimit
        | ExperimentKind::KthOrder
        | ExperimentKind::CtrwSojourn
        | ExperimentKind::CtrwTwoLargest => Some(Arc::new(WBank::generate(
            alpha,
            config.bank_size.unwrap_or(DEFAULT_W_BANK),
            StreamSeed::new(config.seed, W_BANK_STREAM),
        )?)),
        _ => None,
    };
    let v_bank = match config.kind {
        ExperimentKind::CtrwExcursion | ExperimentKind::FullDependenceMax => {
            let b = largest_jump_law(
                alpha,
                config.bank_size.unwrap_or(DEFAULT_V_BANK),
                config.subord_tol.unwrap_or(DEFAULT_TOL),
                Algorithm::RankedSeries,
                StreamSeed::new(config.seed, V_BANK_STREAM),
            )?;
            Some(Arc::new(b.bank))
        }
        _ => None,
    };
    Ok(Context {
        model,
        w_bank,
        v_bank,
    })
}

/// The limit law an experiment compares against.
pub fn limit_reference(config: &ExperimentConfig) -> Result<LimitRef> {
    let ctx = prepare(config)?;
    limit_for(config, &ctx)
}

fn limit_for(config: &ExperimentConfig, ctx: &Context) -> Result<LimitRef> {
    let alpha = ctx.model.alpha();
    let mda = *ctx.model.mda();
    Ok(match config.kind {
        ExperimentKind::RenewalCount => {
            LimitRef::Bank(Arc::new(ctx.w_bank.as_ref().unwrap().to_ecdf()?))
        }
        ExperimentKind::MaxLimit | ExperimentKind::CtrwSojourn | ExperimentKind::CtrwTwoLargest => {
            LimitRef::Law(LimitLaw::max(mda, alpha, ctx.w_bank.clone())?)
        }
        ExperimentKind::KthOrder => LimitRef::Law(LimitLaw::kth_order(
            mda,
            alpha,
            config.k.unwrap_or(2),
            ctx.w_bank.clone().unwrap(),
        )?),
        ExperimentKind::CtrwExcursion | ExperimentKind::FullDependenceMax => LimitRef::Law(
            LimitLaw::largest_jump(ctx.v_bank.clone().unwrap(), alpha),
        ),
    })
}

fn ctrw_wait(model: &JointModel) -> WaitDist {
    match model.dependence() {
        Dependence::CtrwCycle { wait } => wait,
        _ => unreachable!("validated ctrw model"),
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<RunOutput> {
    let ctx = prepare(config)?;
    let limit = limit_for(config, &ctx)?;
    let tol = config.tolerance();
    let model = &ctx.model;
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (pos, &t) in config.t_grid.iter().enumerate() {
        let start = Instant::now();
        let (statistic, sample): (&str, Vec<f64>) = match config.kind {
            ExperimentKind::RenewalCount => (
                "tau_over_dinv",
                replicate(config, pos, |s| {
                    scaled_count(&simulate_until(model, t, &mut s.stream())?, model)
                })?,
            ),
            ExperimentKind::MaxLimit | ExperimentKind::KthOrder => {
                let k = if config.kind == ExperimentKind::MaxLimit {
                    1
                } else {
                    config.k.unwrap_or(2) as usize
                };
                (
                    if k == 1 { "normalized_max" } else { "normalized_kth_max" },
                    replicate(config, pos, |s| {
                        let path = simulate_until(model, t, &mut s.stream())?;
                        Ok(kth_max(&extract(&path, model, Boundary::Closed)?, k))
                    })?,
                )
            }
            ExperimentKind::CtrwSojourn => {
                let (a, b) = model.scaled_normalizers(t)?;
                let wait = ctrw_wait(model);
                (
                    "normalized_longest_sojourn",
                    replicate(config, pos, |s| {
                        let sum = ctrw::simulate_cycles(wait, t, &mut s.stream(), Fidelity::Cycle)?;
                        Ok((sum.q - b) / a)
                    })?,
                )
            }
            ExperimentKind::CtrwTwoLargest => {
                let row = two_largest_row(config, &ctx, &limit, pos, t, start)?;
                rows.push(row.0);
                plots.push(row.1);
                continue;
            }
            ExperimentKind::CtrwExcursion => {
                let wait = ctrw_wait(model);
                (
                    "longest_excursion_over_t",
                    replicate(config, pos, |s| {
                        let sum = ctrw::simulate_cycles(wait, t, &mut s.stream(), Fidelity::Cycle)?;
                        Ok(sum.longest_excursion / t)
                    })?,
                )
            }
            ExperimentKind::FullDependenceMax => (
                "max_before_last_over_t",
                replicate(config, pos, |s| {
                    let path = simulate_until(model, t, &mut s.stream())?;
                    Ok(path.max_x(path.tau - 1).max(0.0) / t)
                })?,
            ),
        };
        let bank = EcdfBank::new(
            sample,
            Provenance::new(config.seed, config.kind.name(), Some(t), config.reps),
        )?;
        let (ks, dkw_eps) = match &limit {
            LimitRef::Bank(b) => (
                ks_distance(&bank, b),
                dkw_epsilon_two_sample(bank.len(), b.len(), DKW_DELTA)?,
            ),
            LimitRef::Law(law) => match config.kind {
                ExperimentKind::CtrwExcursion | ExperimentKind::FullDependenceMax => {
                    let v = ctx.v_bank.as_ref().unwrap();
                    (
                        ks_distance(&bank, v),
                        dkw_epsilon_two_sample(bank.len(), v.len(), DKW_DELTA)?,
                    )
                }
                _ => (
                    ks_distance_to_cdf(&bank, |x| law.evaluate(x).unwrap_or(f64::NAN)),
                    dkw_epsilon(bank.len() as f64, DKW_DELTA)?,
                ),
            },
        };
        rows.push(ResultRow {
            kind: config.kind,
            t,
            reps: config.reps,
            statistic: statistic.to_string(),
            empirical: median(&bank),
            limit: limit.quantile(0.5)?,
            ks,
            dkw_eps,
            tolerance: tol,
            pass: ks <= tol,
            calibration: model.inter().route_name().to_string(),
            wall_time: start.elapsed().as_secs_f64(),
        });
        plots.push(PlotData {
            kind: config.kind,
            t,
            empirical: bank,
            limit: limit.clone(),
        });
    }
    rows.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.t.total_cmp(&b.t)));
    Ok(RunOutput { rows, plots })
}

fn two_largest_row(
    config: &ExperimentConfig,
    ctx: &Context,
    limit: &LimitRef,
    pos: usize,
    t: f64,
    start: Instant,
) -> Result<(ResultRow, PlotData)> {
    let model = &ctx.model;
    let (a, b) = model.scaled_normalizers(t)?;
    let wait = ctrw_wait(model);
    let pairs = replicate_pairs(config, pos, |s| {
        let sum = ctrw::simulate_cycles(wait, t, &mut s.stream(), Fidelity::Cycle)?;
        let (q1, q2) = ctrw::two_longest_sojourns(&sum);
        Ok(((q1 - b) / a, (q2 - b) / a))
    })?;
    let (p1, p2) = config.quantile_pair.unwrap_or((0.9, 0.5));
    let u1 = limit.quantile(p1)?;
    let u2 = limit.quantile(p2)?;
    let hits = pairs.iter().filter(|(q1, q2)| *q1 <= u1 && *q2 <= u2).count();
    let empirical = hits as f64 / pairs.len() as f64;
    let theory = two_largest_limit(
        model.alpha(),
        model.mda(),
        u1,
        u2,
        ctx.w_bank.as_deref(),
    )?
    .value;
    let diff = (empirical - theory).abs();
    let tol = config.tolerance();
    let row = ResultRow {
        kind: config.kind,
        t,
        reps: config.reps,
        statistic: "joint_two_largest_probability".to_string(),
        empirical,
        limit: theory,
        ks: diff,
        dkw_eps: dkw_epsilon(pairs.len() as f64, DKW_DELTA)?,
        tolerance: tol,
        pass: diff <= tol,
        calibration: model.inter().route_name().to_string(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    let bank = EcdfBank::new(
        pairs.iter().map(|p| p.0).collect(),
        Provenance::new(config.seed, config.kind.name(), Some(t), config.reps),
    )?;
    let plot = PlotData {
        kind: config.kind,
        t,
        empirical: bank,
        limit: limit.clone(),
    };
    Ok((row, plot))
}

/// `results.csv`: one line per row, without timings.
pub fn write_results_csv<W: std::io::Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `timings.csv`: wall time per row, kept apart so results stay
/// byte-reproducible.
pub fn write_timings_csv<W: std::io::Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["kind", "t", "wall_time_s"])?;
    for r in rows {
        w.write_record([r.kind.name().to_string(), r.t.to_string(), r.wall_time.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Probability levels of the quantile grids: 0.01, 0.02, …, 0.99.
pub fn probability_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Writes `ecdf.csv`, `limit.csv` and `qq.csv` for every plot into
/// `dir/<kind>_t<t>/`.
pub fn emit_plot_data(dir: &Path, plots: &[PlotData]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for p in plots {
        let sub = dir.join(format!("{}_t{}", p.kind.name(), p.t));
        fs::create_dir_all(&sub)?;
        write_plot_files(&sub, &p.empirical, &p.limit)?;
        written.push(sub);
    }
    Ok(written)
}

pub fn write_plot_files(dir: &Path, empirical: &EcdfBank, limit: &LimitRef) -> Result<()> {
    let grid = probability_grid();

    let mut w = csv_writer(fs::File::create(dir.join("ecdf.csv"))?);
    w.write_record(["x", "F_emp"])?;
    let xs = empirical.values();
    let n = xs.len() as f64;
    for (i, &x) in xs.iter().enumerate() {
        if i + 1 < xs.len() && xs[i + 1] == x {
            continue;
        }
        w.write_record([x.to_string(), ((i + 1) as f64 / n).to_string()])?;
    }
    w.flush()?;

    let mut w = csv_writer(fs::File::create(dir.join("limit.csv"))?);
    w.write_record(["x", "F_limit", "err"])?;
    for &p in &grid {
        let x = limit.quantile(p)?;
        w.write_record([
            x.to_string(),
            limit.cdf(x)?.to_string(),
            limit.error(x)?.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(fs::File::create(dir.join("qq.csv"))?);
    w.write_record(["p", "q_emp", "q_limit"])?;
    for &p in &grid {
        w.write_record([
            p.to_string(),
            empirical.quantile(p).to_string(),
            limit.quantile(p)?.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `x,value,error_estimate` at the limit law's 0.01..0.99 quantiles.
pub fn write_limit_grid<W: std::io::Write>(limit: &LimitRef, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["x", "value", "error_estimate"])?;
    for p in probability_grid() {
        let x = limit.quantile(p)?;
        w.write_record([
            x.to_string(),
            limit.cdf(x)?.to_string(),
            limit.error(x)?.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `timings.csv` and the plot directories under `dir`.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&output.rows, fs::File::create(dir.join("results.csv"))?)?;
    write_timings_csv(&output.rows, fs::File::create(dir.join("timings.csv"))?)?;
    emit_plot_data(&dir.join("plots"), &output.plots)?;
    Ok(())
}

/// Rows read back from a `results.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StoredRow {
    pub kind: String,
    pub t: f64,
    pub reps: usize,
    pub statistic: String,
    pub empirical: f64,
    pub limit: f64,
    pub ks: f64,
    pub dkw_eps: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub calibration: String,
}

pub fn read_results_csv(path: &Path) -> Result<Vec<StoredRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

/// Checks the override values supplied on the command line.
pub fn apply_overrides(
    config: &mut ExperimentConfig,
    seed: Option<u64>,
    reps: Option<usize>,
    t_grid: Option<Vec<f64>>,
    output: Option<PathBuf>,
) -> Result<()> {
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(r) = reps {
        config.reps = r;
    }
    if let Some(t) = t_grid {
        config.t_grid = t;
    }
    if let Some(o) = output {
        config.output = o;
    }
    config.validate()
}

/// Parses a comma-separated list of horizons.
pub fn parse_t_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("cannot parse horizon `{}`", s.trim())))
        })
        .collect()
}
