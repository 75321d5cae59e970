//! Homotopy-parameter schedules `h : {1..n} → (0, 1]` with `Σ h(i) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    Exponential,
    Explicit,
}

/// A validated increment sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    eta: f64,
    increments: Vec<f64>,
}

/// Raised when a normalized exponential increment exceeds the raw bound
/// `e^{−η(i−1)}` or a user-supplied cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleWarning {
    pub iteration: usize,
    pub increment: f64,
    pub bound: f64,
}

impl Schedule {
    /// Builds a schedule.
    ///
    /// * constant: `h(i) = 1/n`;
    /// * exponential: `h(i) = e^{−ηi} / Σ_j e^{−ηj}`;
    /// * explicit: the given positive entries, rescaled to sum to one.
    pub fn new(
        kind: ScheduleKind,
        n: usize,
        eta: Option<f64>,
        explicit: Option<&[f64]>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("schedule needs n >= 1".into()));
        }
        let (increments, eta) = match kind {
            ScheduleKind::Constant => (vec![1.0 / n as f64; n], 0.0),
            ScheduleKind::Exponential => {
                let eta = eta.ok_or_else(|| {
                    Error::Config("exponential schedule needs a decay rate eta".into())
                })?;
                if !(eta >= 0.0) || !eta.is_finite() {
                    return Err(Error::Config(format!(
                        "decay rate must be finite and >= 0, got {eta}"
                    )));
                }
                // e^{-η(i-1)} keeps the largest weight at 1; the common factor
                // e^{-η} cancels in the normalization.
                let raw: Vec<f64> = (0..n).map(|i| (-eta * i as f64).exp()).collect();
                (normalize(&raw), eta)
            }
            ScheduleKind::Explicit => {
                let entries = explicit
                    .ok_or_else(|| Error::Config("explicit schedule needs entries".into()))?;
                if entries.len() != n {
                    return Err(Error::Config(format!(
                        "explicit schedule has {} entries, expected n = {n}",
                        entries.len()
                    )));
                }
                if let Some(bad) = entries.iter().find(|&&h| !(h > 0.0) || !h.is_finite()) {
                    return Err(Error::Config(format!(
                        "explicit increments must be positive and finite, got {bad}"
                    )));
                }
                (normalize(entries), 0.0)
            }
        };
        if increments.iter().any(|&h| h < f64::MIN_POSITIVE) {
            return Err(Error::Config(format!(
                "increments underflow for n = {n}, eta = {eta}; reduce n or eta"
            )));
        }
        Ok(Self {
            kind,
            eta,
            increments,
        })
    }

    pub fn constant(n: usize) -> Result<Self> {
        Self::new(ScheduleKind::Constant, n, None, None)
    }

    pub fn exponential(n: usize, eta: f64) -> Result<Self> {
        Self::new(ScheduleKind::Exponential, n, Some(eta), None)
    }

    pub fn explicit(entries: &[f64]) -> Result<Self> {
        Self::new(ScheduleKind::Explicit, entries.len(), None, Some(entries))
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// `h(1), ..., h(n)`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `h(i)` for `i` in `1..=n`.
    pub fn increment(&self, i: usize) -> f64 {
        self.increments[i - 1]
    }

    /// `λ_1, ..., λ_n`, with the last value pinned to exactly 1.
    pub fn lambdas(&self) -> Vec<f64> {
        let mut lambda = 0.0;
        let n = self.increments.len();
        self.increments
            .iter()
            .enumerate()
            .map(|(i, h)| {
                lambda += h;
                if i + 1 == n {
                    1.0
                } else {
                    lambda.min(1.0)
                }
            })
            .collect()
    }

    /// Increments that exceed `min(e^{−η(i−1)}, cap)`. Only meaningful for
    /// the exponential kind; `cap` is the optional `ε₁`.
    pub fn check_bounds(&self, cap: Option<f64>) -> Vec<ScheduleWarning> {
        self.increments
            .iter()
            .enumerate()
            .filter_map(|(idx, &h)| {
                let raw = if self.kind == ScheduleKind::Exponential {
                    (-self.eta * idx as f64).exp()
                } else {
                    f64::INFINITY
                };
                let bound = cap.map_or(raw, |c| raw.min(c));
                (h > bound).then_some(ScheduleWarning {
                    iteration: idx + 1,
                    increment: h,
                    bound,
                })
            })
            .collect()
    }
}

fn normalize(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| v / total).collect()
}
