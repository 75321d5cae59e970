//! Homotopy-continuation SGD.
//!
//! The solver warm-starts minibatch SGD along a family of objectives
//! `f(w, λ)` that deforms an easy source problem (`λ = 0`) into the target
//! (`λ = 1`). The crate also ships the three benchmark problem families,
//! seeded dataset generators, landscape estimators, closed-form bound
//! calculators, and the multi-seed experiment harness used by the CLI.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod optim;
pub mod param;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod schedule;
pub mod theory;
pub mod trace;

pub use error::{Error, Result};
pub use optim::{
    hsgd_run, sgd_run, HomotopyRecord, RecordingSink, SgdConfig, TraceRecord, TraceSink, Tracer,
};
pub use param::ParamVector;
pub use problem::HomotopyProblem;
pub use rng::Stream;
pub use schedule::{Schedule, ScheduleKind, ScheduleWarning};
pub use trace::{RunTrace, TraceRow};

/// Library version recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
