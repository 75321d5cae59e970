//! Aggregation of per-repeat traces into mean/std rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: u64,
    pub lambda: f64,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub mean_gap: Option<f64>,
    pub grad_evals: u64,
}

/// Mean trace over repeats, plus the optional mean of a secondary metric
/// (the error rate for classification problems).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub metric: Option<Vec<(f64, f64)>>,
}

/// Mean and sample standard deviation (`R − 1` denominator; 0 for one value).
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunTrace {
    /// Averages aligned traces. Every repeat must have recorded the same
    /// epochs, λ values and evaluation counts.
    ///
    /// `fstar` is the target optimum used for the gap column.
    pub fn aggregate(repeats: &[Vec<TraceRecord>], fstar: Option<f64>) -> Result<Self> {
        let first = repeats
            .first()
            .ok_or_else(|| Error::Config("no repeats to aggregate".into()))?;
        for (r, trace) in repeats.iter().enumerate() {
            if trace.len() != first.len() {
                return Err(Error::Data(format!(
                    "repeat {r} has {} rows, repeat 0 has {}",
                    trace.len(),
                    first.len()
                )));
            }
        }
        let mut rows = Vec::with_capacity(first.len());
        let mut metric = first[0].error_rate.map(|_| Vec::with_capacity(first.len()));
        for (idx, head) in first.iter().enumerate() {
            let (mean, std) = mean_std(repeats.iter().map(|t| t[idx].objective));
            rows.push(TraceRow {
                epoch: head.epoch,
                lambda: head.lambda,
                mean_objective: mean,
                std_objective: std,
                mean_gap: fstar.map(|f| mean - f),
                grad_evals: head.grad_evals,
            });
            if let Some(m) = metric.as_mut() {
                m.push(mean_std(
                    repeats
                        .iter()
                        .map(|t| t[idx].error_rate.unwrap_or(f64::NAN)),
                ));
            }
        }
        Ok(Self { rows, metric })
    }

    /// First epoch whose mean objective is at or below `threshold`.
    pub fn epochs_to_objective(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.mean_objective <= threshold)
            .map(|r| r.epoch)
    }

    /// First epoch whose mean secondary metric is at or below `threshold`.
    pub fn epochs_to_metric(&self, threshold: f64) -> Option<u64> {
        let metric = self.metric.as_ref()?;
        self.rows
            .iter()
            .zip(metric)
            .find(|(_, (m, _))| *m <= threshold)
            .map(|(r, _)| r.epoch)
    }

    pub fn last_epoch(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.epoch)
    }
}
