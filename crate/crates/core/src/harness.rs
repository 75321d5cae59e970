//! Multi-seed experiment orchestration: configuration, repeats, aggregated
//! traces, comparison metrics and on-disk artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, fmt17, Dataset, DatasetSpec};
use crate::diagnostics::{self, FstarSearch, GaussianSampler, LandscapeEstimates};
use crate::error::{Error, Result};
use crate::optim::{hsgd_run, sgd_run, HomotopyRecord, SgdConfig, TraceRecord, TraceSink, Tracer};
use crate::param::ParamVector;
use crate::problem::HomotopyProblem;
use crate::problems::{LinearQuadratic, MlpSine, CUBIC_DIM};
use crate::rng::{derive_seed, repeat_seed, tags, Stream};
use crate::schedule::{Schedule, ScheduleKind};
use crate::trace::{mean_std, RunTrace};

/// Environment variable capping repeat parallelism.
pub const THREADS_ENV: &str = "HOMOTOPY_OPT_THREADS";

/// Trace CSV header.
pub const TRACE_HEADER: &str = "epoch,lambda,mean_objective,std_objective,mean_gap,grad_evals";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ToyErf,
    SineMlp,
    MoonsLogistic,
    SyntheticLq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sgd,
    Hsgd,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Value(f64),
    Keyword(StepKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKeyword {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitPoint {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl InitPoint {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            Self::Scalar(v) => vec![*v],
            Self::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n: Option<usize>,
    pub noise_std: Option<f64>,
    /// Toy slope.
    pub slope: Option<f64>,
    /// Sine frequency.
    pub freq: Option<f64>,
    pub source_noise_std: Option<f64>,
    /// Curvature of the synthetic quadratic family.
    pub mu: Option<f64>,
    /// Standard deviation of the synthetic per-sample offsets.
    pub offset_std: Option<f64>,
    /// Defaults to the master seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub step_size: Option<StepSize>,
    pub minibatch: Option<usize>,
    /// Inner SGD steps per homotopy iteration.
    pub k: Option<u64>,
    /// Homotopy iterations.
    pub n: Option<usize>,
    pub schedule: Option<ScheduleKind>,
    pub eta: Option<f64>,
    pub explicit: Option<Vec<f64>>,
    /// SGD baseline steps; defaults to `n·k`.
    pub sgd_steps: Option<u64>,
    /// SGD steps on the source problem used to build the initial point.
    pub pretrain_steps: Option<u64>,
    /// Record a trace row every this many steps (default: once per epoch).
    pub record_interval: Option<u64>,
}

/// User-facing configuration. Every `None` is filled with a per-experiment
/// default by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub method: Option<Method>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Initial point; the sine experiment defaults to a random
    /// initialization pretrained on the source problem.
    pub w0: Option<InitPoint>,
    pub repeats: Option<usize>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Threshold for epochs-to-threshold (objective, or error rate for the
    /// classification experiment).
    pub threshold: Option<f64>,
    /// λ used by the diagnose command.
    pub lambda: Option<f64>,
}

/// Fully materialized configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub method: Method,
    pub dataset: DatasetSpec,
    pub data_seed: u64,
    /// Synthetic quadratic curvature (only for that experiment).
    pub mu: f64,
    pub step_size: Option<f64>,
    pub minibatch: usize,
    pub k: u64,
    pub n: usize,
    pub schedule: ScheduleKind,
    pub eta: f64,
    pub explicit: Option<Vec<f64>>,
    pub sgd_steps: u64,
    pub pretrain_steps: u64,
    pub record_interval: Option<u64>,
    pub w0: Option<Vec<f64>>,
    pub repeats: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub threshold: Option<f64>,
    pub lambda: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            method: None,
            dataset: DatasetConfig::default(),
            optimizer: OptimizerConfig::default(),
            w0: None,
            repeats: None,
            master_seed: None,
            output_dir: None,
            threshold: None,
            lambda: None,
        }
    }

    /// Parses a config file. A run metadata file is accepted too: its
    /// embedded `config` object is used.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value.get("config") {
            Some(inner) if value.get("experiment").is_none() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let master_seed = self.master_seed.unwrap_or(0);
        let d = &self.dataset;
        let o = &self.optimizer;
        let data_seed = d.seed.unwrap_or(master_seed);
        let (dataset, defaults) = match self.experiment {
            Experiment::ToyErf => (
                DatasetSpec::LinearToy {
                    n: d.n.unwrap_or(100),
                    slope: d.slope.unwrap_or(3.0),
                    noise_std: d.noise_std.unwrap_or(1.0),
                },
                Defaults {
                    minibatch: None,
                    k: 25,
                    n: 20,
                    schedule: ScheduleKind::Exponential,
                    eta: 0.2,
                    w0: Some(vec![-4.0]),
                    threshold: None,
                    pretrain: 0,
                },
            ),
            Experiment::SineMlp => (
                DatasetSpec::Sine {
                    n: d.n.unwrap_or(500),
                    freq: d.freq.unwrap_or(10.0),
                    noise_std: d.noise_std.unwrap_or(0.1f64.sqrt()),
                    source_noise_std: d.source_noise_std.unwrap_or(0.1),
                },
                Defaults {
                    minibatch: Some(5),
                    k: 0,
                    n: 20,
                    schedule: ScheduleKind::Constant,
                    eta: 0.0,
                    w0: None,
                    threshold: Some(0.1),
                    pretrain: 0,
                },
            ),
            Experiment::MoonsLogistic => (
                DatasetSpec::Moons {
                    n: d.n.unwrap_or(1000),
                    noise_std: d.noise_std.unwrap_or(0.1),
                },
                Defaults {
                    minibatch: Some(20),
                    k: 0,
                    n: 10,
                    schedule: ScheduleKind::Exponential,
                    eta: 0.2,
                    w0: Some(vec![0.0; CUBIC_DIM]),
                    threshold: Some(0.1),
                    pretrain: 0,
                },
            ),
            Experiment::SyntheticLq => (
                DatasetSpec::LinearToy {
                    n: d.n.unwrap_or(50),
                    slope: 0.0,
                    noise_std: d.offset_std.unwrap_or(0.2),
                },
                Defaults {
                    minibatch: Some(5),
                    k: 5,
                    n: 10,
                    schedule: ScheduleKind::Constant,
                    eta: 0.0,
                    w0: Some(vec![0.0]),
                    threshold: None,
                    pretrain: 0,
                },
            ),
        };
        let n_samples = dataset.sample_count();
        let minibatch = o.minibatch.or(defaults.minibatch).unwrap_or(n_samples);
        if minibatch == 0 {
            return Err(Error::Config("minibatch must be at least 1".into()));
        }
        let epoch = n_samples.div_ceil(minibatch) as u64;
        let k = o.k.unwrap_or(match self.experiment {
            // 25 epochs for the MLP, 10 for the logistic model
            Experiment::SineMlp => 25 * epoch,
            Experiment::MoonsLogistic => 10 * epoch,
            _ => defaults.k,
        });
        let schedule = o.schedule.unwrap_or(defaults.schedule);
        let n = match (&o.explicit, schedule) {
            (Some(list), ScheduleKind::Explicit) => o.n.unwrap_or(list.len()),
            _ => o.n.unwrap_or(defaults.n),
        };
        let step_size = match o.step_size.unwrap_or(match self.experiment {
            Experiment::SyntheticLq => StepSize::Value(0.5 / d.mu.unwrap_or(1.0)),
            // random-pair smoothness estimates undershoot badly in 141
            // dimensions, so the network gets a fixed step
            Experiment::SineMlp => StepSize::Value(0.05),
            _ => StepSize::Keyword(StepKeyword::Auto),
        }) {
            StepSize::Value(v) => Some(v),
            StepSize::Keyword(StepKeyword::Auto) => None,
        };
        let repeats = self.repeats.unwrap_or(100);
        if repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        let lambda = self.lambda.unwrap_or(1.0);
        crate::problem::check_lambda(lambda)?;
        let resolved = ResolvedConfig {
            experiment: self.experiment,
            method: self.method.unwrap_or(Method::Both),
            dataset,
            data_seed,
            mu: d.mu.unwrap_or(1.0),
            step_size,
            minibatch,
            k,
            n,
            schedule,
            eta: o.eta.unwrap_or(defaults.eta),
            explicit: o.explicit.clone(),
            sgd_steps: o.sgd_steps.unwrap_or(n as u64 * k),
            pretrain_steps: o.pretrain_steps.unwrap_or(match self.experiment {
                Experiment::SineMlp => 25 * epoch,
                _ => defaults.pretrain,
            }),
            record_interval: o.record_interval,
            w0: self.w0.as_ref().map(InitPoint::to_vec).or(defaults.w0),
            repeats,
            master_seed,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out")),
            threshold: self.threshold.or(defaults.threshold),
            lambda,
        };
        resolved.schedule()?;
        if minibatch > n_samples {
            return Err(Error::Config(format!(
                "minibatch {minibatch} exceeds sample count {n_samples}"
            )));
        }
        if let Some(a) = step_size {
            SgdConfig::new(a, k, minibatch)?;
        }
        Ok(resolved)
    }
}

struct Defaults {
    minibatch: Option<usize>,
    k: u64,
    n: usize,
    schedule: ScheduleKind,
    eta: f64,
    w0: Option<Vec<f64>>,
    threshold: Option<f64>,
    pretrain: u64,
}

impl ResolvedConfig {
    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(
            self.schedule,
            self.n,
            Some(self.eta),
            self.explicit.as_deref(),
        )
    }

    /// Round-trips into a config with every field set.
    pub fn to_config(&self, step_size: f64) -> ExperimentConfig {
        let mut dataset = DatasetConfig {
            seed: Some(self.data_seed),
            ..Default::default()
        };
        match self.dataset {
            DatasetSpec::LinearToy {
                n,
                slope,
                noise_std,
            } => {
                dataset.n = Some(n);
                if self.experiment == Experiment::SyntheticLq {
                    dataset.offset_std = Some(noise_std);
                    dataset.mu = Some(self.mu);
                } else {
                    dataset.slope = Some(slope);
                    dataset.noise_std = Some(noise_std);
                }
            }
            DatasetSpec::Sine {
                n,
                freq,
                noise_std,
                source_noise_std,
            } => {
                dataset.n = Some(n);
                dataset.freq = Some(freq);
                dataset.noise_std = Some(noise_std);
                dataset.source_noise_std = Some(source_noise_std);
            }
            DatasetSpec::Moons { n, noise_std } => {
                dataset.n = Some(n);
                dataset.noise_std = Some(noise_std);
            }
        }
        ExperimentConfig {
            experiment: self.experiment,
            method: Some(self.method),
            dataset,
            optimizer: OptimizerConfig {
                step_size: Some(StepSize::Value(step_size)),
                minibatch: Some(self.minibatch),
                k: Some(self.k),
                n: Some(self.n),
                schedule: Some(self.schedule),
                eta: Some(self.eta),
                explicit: self.explicit.clone(),
                sgd_steps: Some(self.sgd_steps),
                pretrain_steps: Some(self.pretrain_steps),
                record_interval: self.record_interval,
            },
            w0: self.w0.clone().map(InitPoint::Vector),
            repeats: Some(self.repeats),
            master_seed: Some(self.master_seed),
            output_dir: Some(self.output_dir.clone()),
            threshold: self.threshold,
            lambda: Some(self.lambda),
        }
    }

    fn arms(&self) -> Vec<Method> {
        match self.method {
            Method::Both => vec![Method::Sgd, Method::Hsgd],
            m => vec![m],
        }
    }
}

/// A constructed problem instance.
pub enum Instance {
    Erf(crate::problems::ErfRegression),
    Mlp(MlpSine),
    Logistic(crate::problems::CubicLogistic),
    Quadratic(LinearQuadratic),
}

impl Instance {
    pub fn problem(&self) -> &dyn HomotopyProblem {
        match self {
            Self::Erf(p) => p,
            Self::Mlp(p) => p,
            Self::Logistic(p) => p,
            Self::Quadratic(p) => p,
        }
    }
}

/// Regenerates the dataset of a resolved config.
pub fn build_dataset(cfg: &ResolvedConfig) -> Result<Dataset> {
    data::generate(&cfg.dataset, cfg.data_seed)
}

pub fn build_instance(cfg: &ResolvedConfig, dataset: &Dataset) -> Result<Instance> {
    Ok(match cfg.experiment {
        Experiment::ToyErf => {
            let w0 = cfg
                .w0
                .as_ref()
                .and_then(|w| w.first().copied())
                .unwrap_or(-4.0);
            Instance::Erf(dataset.erf_problem(w0)?)
        }
        Experiment::SineMlp => Instance::Mlp(dataset.mlp_problem()?),
        Experiment::MoonsLogistic => Instance::Logistic(dataset.logistic_problem()?),
        Experiment::SyntheticLq => {
            Instance::Quadratic(LinearQuadratic::new(cfg.mu, dataset.targets.clone())?)
        }
    })
}

/// Optimal target value used for the gap column, when it is computable.
fn target_fstar(cfg: &ResolvedConfig, problem: &dyn HomotopyProblem) -> Result<Option<f64>> {
    match cfg.experiment {
        Experiment::ToyErf => Ok(Some(
            diagnostics::estimate_fstar(problem, 1.0, &toy_grid())?.value,
        )),
        Experiment::SyntheticLq => Ok(Some(0.0)),
        _ => Ok(None),
    }
}

/// Dense grid over `[−10, 10]` with step `1e−4`.
pub fn toy_grid() -> FstarSearch {
    FstarSearch::Grid {
        lo: -10.0,
        hi: 10.0,
        step: 1e-4,
    }
}

/// Smoothness estimate used for `α = 1/L̃`.
pub fn auto_l_tilde(cfg: &ResolvedConfig, problem: &dyn HomotopyProblem) -> Result<f64> {
    let mut rng = Stream::new(derive_seed(cfg.master_seed, tags::ESTIMATE));
    let (center, radius, pairs) = match cfg.experiment {
        Experiment::ToyErf | Experiment::SyntheticLq => (ParamVector::zeros(1), 10.0, 10_000),
        Experiment::SineMlp => {
            let mut init = Stream::new(derive_seed(cfg.master_seed, tags::INIT));
            (MlpSine::init_params(&mut init), 0.5, 1_000)
        }
        Experiment::MoonsLogistic => (ParamVector::zeros(CUBIC_DIM), 1.0, 2_000),
    };
    if center.dim() != problem.dim() {
        return Err(Error::Config(
            "dimension mismatch in smoothness estimate".into(),
        ));
    }
    diagnostics::estimate_l(problem, 1.0, &center, radius, pairs, &mut rng)
}

/// Seeds of every repeat.
pub fn repeat_seeds(cfg: &ResolvedConfig) -> Vec<u64> {
    (0..cfg.repeats as u64)
        .map(|r| repeat_seed(cfg.master_seed, r))
        .collect()
}

/// Initial point of repeat `r`, shared by all arms.
fn initial_point(
    cfg: &ResolvedConfig,
    problem: &dyn HomotopyProblem,
    alpha: f64,
    r: u64,
) -> Result<ParamVector> {
    let w0 = match &cfg.w0 {
        Some(w) => ParamVector::new(w.clone()),
        None => {
            let mut init = Stream::new(derive_seed(repeat_seed(cfg.master_seed, r), tags::INIT));
            let w = match cfg.experiment {
                Experiment::SineMlp => MlpSine::init_params(&mut init),
                _ => ParamVector::zeros(problem.dim()),
            };
            if cfg.pretrain_steps > 0 {
                let pre = SgdConfig::new(alpha, cfg.pretrain_steps, cfg.minibatch)?;
                sgd_run(&w, &pre, problem, 0.0, &mut init, None)?
            } else {
                w
            }
        }
    };
    if w0.dim() != problem.dim() {
        return Err(Error::Config(format!(
            "w0 has dimension {}, problem expects {}",
            w0.dim(),
            problem.dim()
        )));
    }
    Ok(w0)
}

/// Per-repeat output.
#[derive(Debug, Clone, Default)]
struct RepeatOutput {
    rows: Vec<TraceRecord>,
    homotopy: Vec<HomotopyRecord>,
    snapshots: Vec<Vec<f64>>,
}

/// Maps an iterate to the values stored in the snapshot CSV.
type SnapshotFn<'a> = dyn Fn(&ParamVector) -> Vec<f64> + Sync + 'a;

struct RepeatSink<'a> {
    out: RepeatOutput,
    snapshot: Option<&'a SnapshotFn<'a>>,
}

impl TraceSink for RepeatSink<'_> {
    fn record(&mut self, row: &TraceRecord, _w: &ParamVector) {
        self.out.rows.push(*row);
    }

    fn homotopy_step(&mut self, row: &HomotopyRecord, w: &ParamVector) {
        self.out.homotopy.push(*row);
        if let Some(f) = self.snapshot {
            self.out.snapshots.push(f(w));
        }
    }
}

/// Mean state at the end of one homotopy iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyRow {
    pub iteration: usize,
    pub lambda: f64,
    pub mean_objective_at_lambda: f64,
    /// Standard error of the mean.
    pub se_objective_at_lambda: f64,
    pub mean_objective: f64,
    pub grad_evals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub method: Method,
    /// `None` on success, else the first failure message.
    pub failure: Option<String>,
    pub epochs_to_threshold: Option<u64>,
    /// Last recorded epoch (the censoring point when the threshold is not
    /// reached).
    pub censor_epoch: u64,
    pub plateau_epoch: Option<u64>,
    pub terminal_mean: f64,
    pub terminal_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub experiment: Experiment,
    pub threshold: Option<f64>,
    /// `"objective"` or `"error"`.
    pub threshold_on: String,
    pub arms: Vec<ArmSummary>,
    /// `epochs_sgd / epochs_hsgd`, when both arms cross the threshold.
    pub speedup: Option<f64>,
}

impl ComparisonReport {
    pub fn arm(&self, method: Method) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.method == method)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment        {:?}", self.experiment);
        let _ = writeln!(
            out,
            "threshold         {} ({})",
            self.threshold.map_or("NA".into(), |t| t.to_string()),
            self.threshold_on
        );
        for a in &self.arms {
            let reached = match a.epochs_to_threshold {
                Some(e) => e.to_string(),
                None => format!("not reached (censored at {})", a.censor_epoch),
            };
            let _ = writeln!(
                out,
                "{:<5} terminal {:.6e} ± {:.3e}  epochs_to_threshold {}  plateau {}{}",
                format!("{:?}", a.method).to_lowercase(),
                a.terminal_mean,
                a.terminal_std,
                reached,
                a.plateau_epoch.map_or("NA".into(), |e| e.to_string()),
                a.failure
                    .as_ref()
                    .map_or(String::new(), |f| format!("  FAILED: {f}"))
            );
        }
        let _ = writeln!(
            out,
            "speedup           {}",
            self.speedup.map_or("NA".into(), |s| format!("{s:.4}"))
        );
        out
    }
}

/// In-memory results of one arm.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub method: Method,
    pub trace: Option<RunTrace>,
    pub homotopy: Vec<HomotopyRow>,
    /// Mean snapshot vector per homotopy iteration.
    pub snapshots: Vec<Vec<f64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ResolvedConfig,
    pub step_size: f64,
    pub l_tilde: Option<f64>,
    pub fstar: Option<f64>,
    pub arms: Vec<ArmResult>,
    pub report: ComparisonReport,
}

impl ExperimentOutcome {
    pub fn arm(&self, method: Method) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.method == method)
    }
}

/// Epoch at which the mean curve first changes by less than `rel_tol`
/// (relative) over `window` epochs.
pub fn plateau_epoch(trace: &RunTrace, rel_tol: f64, window: usize) -> Option<u64> {
    let rows = &trace.rows;
    (0..rows.len().saturating_sub(window)).find_map(|i| {
        let a = rows[i].mean_objective;
        let b = rows[i + window].mean_objective;
        ((a - b).abs() <= rel_tol * a.abs()).then_some(rows[i].epoch)
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

const SNAPSHOT_GRID: usize = 101;

/// Runs every arm in memory without touching the filesystem.
pub fn execute(cfg: &ResolvedConfig) -> Result<ExperimentOutcome> {
    let dataset = build_dataset(cfg)?;
    let instance = build_instance(cfg, &dataset)?;
    let problem = instance.problem();
    let (step_size, l_tilde) = match cfg.step_size {
        Some(a) => (a, None),
        None => {
            let l = auto_l_tilde(cfg, problem)?;
            (1.0 / l, Some(l))
        }
    };
    let sgd_cfg = SgdConfig::new(step_size, cfg.k, cfg.minibatch)?;
    sgd_cfg.validate_for(problem)?;
    let schedule = cfg.schedule()?;
    let fstar = target_fstar(cfg, problem)?;

    let snapshot: Option<Box<SnapshotFn<'_>>> = match &instance {
        Instance::Erf(_) => Some(Box::new(|w: &ParamVector| vec![w[0]])),
        Instance::Mlp(p) => Some(Box::new(move |w: &ParamVector| {
            (0..SNAPSHOT_GRID)
                .map(|i| p.predict(w, -1.0 + 2.0 * i as f64 / (SNAPSHOT_GRID - 1) as f64))
                .collect()
        })),
        _ => None,
    };

    let pool = thread_pool()?;
    let mut arms = Vec::new();
    for method in cfg.arms() {
        let results: Vec<Result<RepeatOutput>> = pool.install(|| {
            (0..cfg.repeats as u64)
                .into_par_iter()
                .map(|r| {
                    let w0 = initial_point(cfg, problem, step_size, r)?;
                    let mut rng = Stream::for_repeat(cfg.master_seed, r);
                    let mut sink = RepeatSink {
                        out: RepeatOutput::default(),
                        snapshot: if method == Method::Hsgd {
                            snapshot.as_deref()
                        } else {
                            None
                        },
                    };
                    {
                        let mut tracer = match cfg.record_interval {
                            Some(i) => Tracer::every(&mut sink, i),
                            None => Tracer::per_epoch(&mut sink),
                        };
                        match method {
                            Method::Hsgd => {
                                hsgd_run(
                                    &w0,
                                    &schedule,
                                    &sgd_cfg,
                                    problem,
                                    &mut rng,
                                    Some(&mut tracer),
                                )?;
                            }
                            _ => {
                                let base = SgdConfig {
                                    steps: cfg.sgd_steps,
                                    ..sgd_cfg
                                };
                                sgd_run(&w0, &base, problem, 1.0, &mut rng, Some(&mut tracer))?;
                            }
                        }
                    }
                    Ok(sink.out)
                })
                .collect()
        });
        arms.push(summarize_arm(method, results, fstar)?);
    }

    let report = compare(cfg, &arms);
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        step_size,
        l_tilde,
        fstar,
        arms,
        report,
    })
}

fn summarize_arm(
    method: Method,
    results: Vec<Result<RepeatOutput>>,
    fstar: Option<f64>,
) -> Result<ArmResult> {
    let mut outputs = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(o) => outputs.push(o),
            Err(e) => {
                return Ok(ArmResult {
                    method,
                    trace: None,
                    homotopy: Vec::new(),
                    snapshots: Vec::new(),
                    failure: Some(format!("repeat {r}: {e}")),
                })
            }
        }
    }
    let rows: Vec<Vec<TraceRecord>> = outputs.iter().map(|o| o.rows.clone()).collect();
    let trace = RunTrace::aggregate(&rows, fstar)?;
    let repeats = outputs.len() as f64;
    let homotopy = (0..outputs[0].homotopy.len())
        .map(|i| {
            let head = outputs[0].homotopy[i];
            let (mean, std) = mean_std(outputs.iter().map(|o| o.homotopy[i].objective_at_lambda));
            let (mean_target, _) = mean_std(outputs.iter().map(|o| o.homotopy[i].objective));
            HomotopyRow {
                iteration: head.iteration,
                lambda: head.lambda,
                mean_objective_at_lambda: mean,
                se_objective_at_lambda: std / repeats.sqrt(),
                mean_objective: mean_target,
                grad_evals: head.grad_evals,
            }
        })
        .collect();
    let snapshots = (0..outputs[0].snapshots.len())
        .map(|i| {
            let len = outputs[0].snapshots[i].len();
            (0..len)
                .map(|j| outputs.iter().map(|o| o.snapshots[i][j]).sum::<f64>() / repeats)
                .collect()
        })
        .collect();
    Ok(ArmResult {
        method,
        trace: Some(trace),
        homotopy,
        snapshots,
        failure: None,
    })
}

fn compare(cfg: &ResolvedConfig, arms: &[ArmResult]) -> ComparisonReport {
    let on_error = cfg.experiment == Experiment::MoonsLogistic;
    let summaries: Vec<ArmSummary> = arms
        .iter()
        .map(|a| match &a.trace {
            Some(t) => {
                let last = t.rows.last().expect("traces have an initial row");
                ArmSummary {
                    method: a.method,
                    failure: None,
                    epochs_to_threshold: cfg.threshold.and_then(|tau| {
                        if on_error {
                            t.epochs_to_metric(tau)
                        } else {
                            t.epochs_to_objective(tau)
                        }
                    }),
                    censor_epoch: t.last_epoch(),
                    plateau_epoch: plateau_epoch(t, 1e-3, 10),
                    terminal_mean: last.mean_objective,
                    terminal_std: last.std_objective,
                }
            }
            None => ArmSummary {
                method: a.method,
                failure: a.failure.clone(),
                epochs_to_threshold: None,
                censor_epoch: 0,
                plateau_epoch: None,
                terminal_mean: f64::NAN,
                terminal_std: f64::NAN,
            },
        })
        .collect();
    let find = |m: Method| {
        summaries
            .iter()
            .find(|s| s.method == m)
            .and_then(|s| s.epochs_to_threshold)
    };
    let speedup = match (find(Method::Sgd), find(Method::Hsgd)) {
        (Some(s), Some(h)) if h > 0 => Some(s as f64 / h as f64),
        _ => None,
    };
    ComparisonReport {
        experiment: cfg.experiment,
        threshold: cfg.threshold,
        threshold_on: if on_error { "error" } else { "objective" }.into(),
        arms: summaries,
        speedup,
    }
}

fn arm_name(m: Method) -> &'static str {
    match m {
        Method::Sgd => "sgd",
        Method::Hsgd => "hsgd",
        Method::Both => "both",
    }
}

/// Trace CSV text.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            fmt17(r.lambda),
            fmt17(r.mean_objective),
            fmt17(r.std_objective),
            r.mean_gap.map_or(String::new(), fmt17),
            r.grad_evals
        );
    }
    out
}

fn metric_csv(trace: &RunTrace) -> Option<String> {
    let metric = trace.metric.as_ref()?;
    let mut out = String::from("epoch,mean_error,std_error\n");
    for (r, (m, s)) in trace.rows.iter().zip(metric) {
        let _ = writeln!(out, "{},{},{}", r.epoch, fmt17(*m), fmt17(*s));
    }
    Some(out)
}

fn snapshot_csv(cfg: &ResolvedConfig, arm: &ArmResult) -> Option<String> {
    if arm.snapshots.is_empty() {
        return None;
    }
    let mut out = String::new();
    match cfg.experiment {
        Experiment::ToyErf => {
            out.push_str("iteration,lambda,mean_w,mean_objective_at_lambda\n");
            for (row, snap) in arm.homotopy.iter().zip(&arm.snapshots) {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    row.iteration,
                    fmt17(row.lambda),
                    fmt17(snap[0]),
                    fmt17(row.mean_objective_at_lambda)
                );
            }
        }
        _ => {
            out.push_str("iteration,lambda,x,mean_prediction\n");
            for (row, snap) in arm.homotopy.iter().zip(&arm.snapshots) {
                for (j, y) in snap.iter().enumerate() {
                    let x = -1.0 + 2.0 * j as f64 / (snap.len() - 1) as f64;
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        row.iteration,
                        fmt17(row.lambda),
                        fmt17(x),
                        fmt17(*y)
                    );
                }
            }
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config: ExperimentConfig,
    pub step_size: f64,
    pub l_tilde: Option<f64>,
    pub alpha_exceeds_smoothness: Option<bool>,
    pub sigma2_hat: Option<f64>,
    pub fstar: Option<f64>,
    pub schedule: Vec<f64>,
    pub schedule_warnings: Vec<String>,
    pub repeat_seeds: Vec<u64>,
    pub report: ComparisonReport,
}

/// Runs the experiment and writes `<arm>.csv`, `<arm>_metric.csv`,
/// `hsgd_snapshots.csv`, `report.txt` and `metadata.json` into the output
/// directory.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<(ExperimentOutcome, PathBuf)> {
    let outcome = execute(cfg)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    for arm in &outcome.arms {
        let name = arm_name(arm.method);
        if let Some(t) = &arm.trace {
            std::fs::write(dir.join(format!("{name}.csv")), trace_csv(t))?;
            if let Some(m) = metric_csv(t) {
                std::fs::write(dir.join(format!("{name}_metric.csv")), m)?;
            }
        }
        if let Some(s) = snapshot_csv(cfg, arm) {
            std::fs::write(dir.join(format!("{name}_snapshots.csv")), s)?;
        }
    }
    std::fs::write(dir.join("report.txt"), outcome.report.to_text())?;

    let dataset = build_dataset(cfg)?;
    let instance = build_instance(cfg, &dataset)?;
    let problem = instance.problem();
    let sigma2_hat = initial_point(cfg, problem, outcome.step_size, 0)
        .ok()
        .and_then(|w0| {
            let mut rng = Stream::new(derive_seed(cfg.master_seed ^ 1, tags::ESTIMATE));
            diagnostics::estimate_sigma2(problem, 1.0, &[w0], cfg.minibatch, 1000, &mut rng).ok()
        });
    let schedule = cfg.schedule()?;
    let warnings = schedule
        .check_bounds(None)
        .iter()
        .map(|w| {
            format!(
                "h({}) = {} exceeds bound {}",
                w.iteration, w.increment, w.bound
            )
        })
        .collect();
    let meta = Metadata {
        version: crate::VERSION.to_string(),
        config: cfg.to_config(outcome.step_size),
        step_size: outcome.step_size,
        l_tilde: outcome.l_tilde,
        alpha_exceeds_smoothness: outcome.l_tilde.map(|l| {
            SgdConfig::new(outcome.step_size, 1, 1).is_ok_and(|c| c.exceeds_smoothness(l))
        }),
        sigma2_hat,
        fstar: outcome.fstar,
        schedule: schedule.increments().to_vec(),
        schedule_warnings: warnings,
        repeat_seeds: repeat_seeds(cfg),
        report: outcome.report.clone(),
    };
    std::fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok((outcome, dir))
}

/// Writes the dataset CSV of a config and returns its path.
pub fn gen_data(cfg: &ResolvedConfig) -> Result<PathBuf> {
    let dataset = build_dataset(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("dataset.csv");
    if cfg.experiment == Experiment::SyntheticLq {
        let p = LinearQuadratic::new(cfg.mu, dataset.targets.clone())?;
        let mut out = String::from("b\n");
        for b in p.offsets() {
            out.push_str(&fmt17(*b));
            out.push('\n');
        }
        std::fs::write(&path, out)?;
    } else {
        dataset.write_csv(&path)?;
    }
    Ok(path)
}

/// Output of the diagnose command.
#[derive(Debug, Clone)]
pub struct DiagnoseOutcome {
    pub estimates: LandscapeEstimates,
    /// `(w, μ̂(w))` over the sweep grid (one-dimensional problems).
    pub mu_curve: Vec<(f64, Option<f64>)>,
}

/// `μ̂(w)` on `[lo, hi]` with `points` grid points.
pub fn mu_sweep(
    problem: &dyn HomotopyProblem,
    lambda: f64,
    fstar: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Vec<(f64, Option<f64>)> {
    (0..points)
        .map(|i| {
            let w = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let mu = diagnostics::estimate_mu(problem, lambda, &ParamVector::scalar(w), fstar).ok();
            (w, mu)
        })
        .collect()
}

/// Runs every estimator; failures are collected rather than aborting.
pub fn diagnose(cfg: &ResolvedConfig) -> Result<DiagnoseOutcome> {
    let dataset = build_dataset(cfg)?;
    let instance = build_instance(cfg, &dataset)?;
    let problem = instance.problem();
    let lambda = cfg.lambda;
    let d = problem.dim();
    let mut est = LandscapeEstimates {
        lambda,
        ..Default::default()
    };
    let mut rng = Stream::new(derive_seed(cfg.master_seed, tags::ESTIMATE));
    let center = match &cfg.w0 {
        Some(w) if w.len() == d && cfg.experiment != Experiment::ToyErf => {
            ParamVector::new(w.clone())
        }
        _ if cfg.experiment == Experiment::SineMlp => {
            MlpSine::init_params(&mut Stream::new(derive_seed(cfg.master_seed, tags::INIT)))
        }
        _ => ParamVector::zeros(d),
    };
    let mut record = |name: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            est.errors.push((name.to_string(), e.to_string()));
            None
        }
    };
    let radius = if d == 1 { 10.0 } else { 1.0 };
    let l_hat = record(
        "L_hat",
        diagnostics::estimate_l(
            problem,
            lambda,
            &center,
            radius,
            if d == 1 { 10_000 } else { 1_000 },
            &mut rng,
        ),
    );
    let sampler = GaussianSampler {
        mean: center.clone(),
        std: 1.0,
    };
    let points: Vec<ParamVector> = (0..8).map(|_| sampler.sample(&mut rng)).collect();
    let sigma2 = record(
        "sigma2_hat",
        diagnostics::estimate_sigma2(problem, lambda, &points, cfg.minibatch, 2_000, &mut rng),
    );
    let delta = record(
        "delta_hat",
        diagnostics::estimate_delta(problem, &sampler, 200, &mut rng),
    );
    let search = if d == 1 {
        toy_grid()
    } else {
        FstarSearch::MultiStart {
            restarts: 10,
            steps: 2_000,
            step_size: cfg.step_size.unwrap_or(0.1),
            init_std: 0.3,
            seed: derive_seed(cfg.master_seed, tags::ESTIMATE),
            starts: vec![center.as_slice().to_vec()],
        }
    };
    let fstar = match diagnostics::estimate_fstar(problem, lambda, &search) {
        Ok(f) => {
            est.fstar_upper_bound = f.upper_bound;
            Some(f.value)
        }
        Err(e) => {
            est.errors.push(("fstar".into(), e.to_string()));
            None
        }
    };
    let mut mu_curve = Vec::new();
    if let Some(fs) = fstar {
        if d == 1 {
            mu_curve = mu_sweep(problem, lambda, fs, -6.0, 6.0, 1201);
            est.mu_min = mu_curve.iter().filter_map(|(_, m)| *m).reduce(f64::min);
        }
        match diagnostics::expected_pl_probe(problem, lambda, &sampler, 1_000, fs, &mut rng) {
            Ok(p) => est.pl_ratio = Some(p.ratio),
            Err(e) => est.errors.push(("pl_ratio".into(), e.to_string())),
        }
    }
    est.l_hat = l_hat;
    est.sigma2_hat = sigma2;
    est.delta_hat = delta;
    est.fstar = fstar;
    Ok(DiagnoseOutcome {
        estimates: est,
        mu_curve,
    })
}

/// Runs [`diagnose`] and writes `diagnostics.txt` (plus `mu_curve.csv` for
/// one-dimensional problems).
pub fn run_diagnose(cfg: &ResolvedConfig) -> Result<DiagnoseOutcome> {
    let outcome = diagnose(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(
        cfg.output_dir.join("diagnostics.txt"),
        outcome.estimates.to_key_value(),
    )?;
    if !outcome.mu_curve.is_empty() {
        let mut out = String::from("w,mu_hat\n");
        for (w, mu) in &outcome.mu_curve {
            let _ = writeln!(out, "{},{}", fmt17(*w), mu.map_or(String::new(), fmt17));
        }
        std::fs::write(cfg.output_dir.join("mu_curve.csv"), out)?;
    }
    Ok(outcome)
}
