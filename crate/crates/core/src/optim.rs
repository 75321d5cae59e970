//! Minibatch SGD and the homotopy outer loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::problem::{check_lambda, HomotopyProblem};
use crate::rng::Stream;
use crate::schedule::Schedule;

/// Inner solver settings: `w ← w − α·g` for `steps` iterations with
/// minibatches of `minibatch` distinct samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub step_size: f64,
    pub steps: u64,
    pub minibatch: usize,
}

impl SgdConfig {
    pub fn new(step_size: f64, steps: u64, minibatch: usize) -> Result<Self> {
        let cfg = Self {
            step_size,
            steps,
            minibatch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!(
                "step size must be positive and finite, got {}",
                self.step_size
            )));
        }
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch size must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks the configuration against a concrete problem.
    pub fn validate_for<P: HomotopyProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        self.validate()?;
        let n = problem.sample_count();
        if self.minibatch > n {
            return Err(Error::Config(format!(
                "minibatch size {} exceeds sample count {n}",
                self.minibatch
            )));
        }
        Ok(())
    }

    /// True when `α > 1/L̃`, outside the range the linear-rate guarantee covers.
    pub fn exceeds_smoothness(&self, l_tilde: f64) -> bool {
        self.step_size * l_tilde > 1.0
    }

    /// Steps per epoch, `⌈N/M⌉`.
    pub fn steps_per_epoch(&self, sample_count: usize) -> u64 {
        sample_count.div_ceil(self.minibatch) as u64
    }
}

/// One trace row emitted by a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Completed epochs (0 for the initial point).
    pub epoch: u64,
    /// Homotopy parameter of the inner solve in progress.
    pub lambda: f64,
    /// Full-batch target objective `f(w, 1)`.
    pub objective: f64,
    /// Full-batch objective at the current `λ`.
    pub objective_at_lambda: f64,
    /// Target misclassification rate, for classification problems.
    pub error_rate: Option<f64>,
    /// Single-sample gradient evaluations so far (steps × M).
    pub grad_evals: u64,
}

/// State at the end of homotopy iteration `iteration` (0 is the start point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomotopyRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub objective_at_lambda: f64,
    pub objective: f64,
    pub grad_evals: u64,
}

/// Receives trace rows. Both hooks see the current iterate.
pub trait TraceSink {
    fn record(&mut self, row: &TraceRecord, w: &ParamVector);

    fn homotopy_step(&mut self, _row: &HomotopyRecord, _w: &ParamVector) {}
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, row: &TraceRecord, _w: &ParamVector) {
        self.push(*row);
    }
}

/// Collects both kinds of rows.
#[derive(Debug, Clone, Default)]
pub struct RecordingSink {
    pub rows: Vec<TraceRecord>,
    pub homotopy: Vec<HomotopyRecord>,
}

impl TraceSink for RecordingSink {
    fn record(&mut self, row: &TraceRecord, _w: &ParamVector) {
        self.rows.push(*row);
    }

    fn homotopy_step(&mut self, row: &HomotopyRecord, _w: &ParamVector) {
        self.homotopy.push(*row);
    }
}

/// Drives a sink across one or more consecutive inner solves.
///
/// A row is emitted every `interval` steps (one epoch by default) plus an
/// initial row before the first step. The step counter continues across
/// homotopy iterations.
pub struct Tracer<'a> {
    sink: &'a mut dyn TraceSink,
    interval: Option<u64>,
    steps_per_epoch: u64,
    steps: u64,
    grad_evals: u64,
    started: bool,
}

impl<'a> Tracer<'a> {
    /// Records once per epoch.
    pub fn per_epoch(sink: &'a mut dyn TraceSink) -> Self {
        Self {
            sink,
            interval: None,
            steps_per_epoch: 1,
            steps: 0,
            grad_evals: 0,
            started: false,
        }
    }

    /// Records every `interval` steps; the `epoch` column then counts
    /// intervals.
    pub fn every(sink: &'a mut dyn TraceSink, interval: u64) -> Self {
        Self {
            interval: Some(interval.max(1)),
            ..Self::per_epoch(sink)
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn start<P: HomotopyProblem + ?Sized>(
        &mut self,
        problem: &P,
        cfg: &SgdConfig,
        w: &ParamVector,
        lambda: f64,
    ) {
        if self.started {
            return;
        }
        self.started = true;
        self.steps_per_epoch = self
            .interval
            .unwrap_or_else(|| cfg.steps_per_epoch(problem.sample_count()));
        self.emit(problem, w, lambda);
    }

    fn after_step<P: HomotopyProblem + ?Sized>(
        &mut self,
        problem: &P,
        minibatch: usize,
        w: &ParamVector,
        lambda: f64,
    ) {
        self.steps += 1;
        self.grad_evals += minibatch as u64;
        if self.steps.is_multiple_of(self.steps_per_epoch) {
            self.emit(problem, w, lambda);
        }
    }

    fn emit<P: HomotopyProblem + ?Sized>(&mut self, problem: &P, w: &ParamVector, lambda: f64) {
        let objective = problem.full_objective(w, 1.0);
        let objective_at_lambda = if lambda == 1.0 {
            objective
        } else {
            problem.full_objective(w, lambda)
        };
        let row = TraceRecord {
            epoch: self.steps / self.steps_per_epoch,
            lambda,
            objective,
            objective_at_lambda,
            error_rate: problem.error_rate(w),
            grad_evals: self.grad_evals,
        };
        self.sink.record(&row, w);
    }

    fn homotopy<P: HomotopyProblem + ?Sized>(
        &mut self,
        problem: &P,
        iteration: usize,
        w: &ParamVector,
        lambda: f64,
    ) {
        let objective = problem.full_objective(w, 1.0);
        let objective_at_lambda = if lambda == 1.0 {
            objective
        } else {
            problem.full_objective(w, lambda)
        };
        let row = HomotopyRecord {
            iteration,
            lambda,
            objective_at_lambda,
            objective,
            grad_evals: self.grad_evals,
        };
        self.sink.homotopy_step(&row, w);
    }
}

/// Runs `cfg.steps` SGD iterations on `f(·, λ)` starting from `w0`.
///
/// Each step draws `M` distinct sample indices from `rng` (no draw when
/// `M = N`). A NaN or infinite gradient or iterate aborts the run.
pub fn sgd_run<P: HomotopyProblem + ?Sized>(
    w0: &ParamVector,
    cfg: &SgdConfig,
    problem: &P,
    lambda: f64,
    rng: &mut Stream,
    mut trace: Option<&mut Tracer<'_>>,
) -> Result<ParamVector> {
    cfg.validate_for(problem)?;
    check_lambda(lambda)?;
    if w0.dim() != problem.dim() {
        return Err(Error::Config(format!(
            "initial point has dimension {}, problem expects {}",
            w0.dim(),
            problem.dim()
        )));
    }
    let n = problem.sample_count();
    let full_batch = cfg.minibatch == n;
    let mut indices: Vec<usize> = if full_batch {
        (0..n).collect()
    } else {
        Vec::new()
    };
    let mut grad = vec![0.0; problem.dim()];
    let mut w = w0.clone();

    if let Some(t) = trace.as_deref_mut() {
        t.start(problem, cfg, &w, lambda);
    }
    for step in 1..=cfg.steps {
        if !full_batch {
            rng.sample_indices(n, cfg.minibatch, &mut indices);
        }
        let value = problem.value_and_gradient_into(&w, lambda, &indices, &mut grad);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                step,
            });
        }
        for (wi, gi) in w.as_mut_slice().iter_mut().zip(&grad) {
            *wi -= cfg.step_size * gi;
        }
        if !w.is_finite() {
            return Err(Error::NonFinite {
                what: "iterate",
                step,
            });
        }
        if let Some(t) = trace.as_deref_mut() {
            t.after_step(problem, cfg.minibatch, &w, lambda);
        }
    }
    Ok(w)
}

/// Homotopy SGD: `λ₀ = 0`, then for `i = 1..n` set `λᵢ = λᵢ₋₁ + h(i)` and
/// warm-start `cfg.steps` SGD iterations on `f(·, λᵢ)` from `wᵢ₋₁`.
///
/// The same `rng` stream continues across all inner solves. The last solve
/// runs at `λ = 1` exactly.
pub fn hsgd_run<P: HomotopyProblem + ?Sized>(
    w0: &ParamVector,
    schedule: &Schedule,
    cfg: &SgdConfig,
    family: &P,
    rng: &mut Stream,
    mut trace: Option<&mut Tracer<'_>>,
) -> Result<ParamVector> {
    cfg.validate_for(family)?;
    if let Some(t) = trace.as_deref_mut() {
        t.start(family, cfg, w0, 0.0);
        t.homotopy(family, 0, w0, 0.0);
    }
    let mut w = w0.clone();
    for (i, lambda) in schedule.lambdas().into_iter().enumerate() {
        let iteration = i + 1;
        w = sgd_run(&w, cfg, family, lambda, rng, trace.as_deref_mut()).map_err(|e| {
            Error::Homotopy {
                iteration,
                lambda,
                source: Box::new(e),
            }
        })?;
        if let Some(t) = trace.as_deref_mut() {
            t.homotopy(family, iteration, &w, lambda);
        }
    }
    Ok(w)
}
