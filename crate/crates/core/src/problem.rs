//! The parametric objective family consumed by the solvers.

use crate::error::{Error, Result};
use crate::param::ParamVector;

/// A finite-sum objective `f(w, λ) = (1/N) Σ_j f_j(w, λ)` with `λ ∈ [0, 1]`.
///
/// `λ = 0` is the source problem and `λ = 1` the target problem. All
/// evaluations must be pure functions of `(w, λ, indices)` so that repeats can
/// run concurrently.
pub trait HomotopyProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn sample_count(&self) -> usize;

    /// Mean value over `indices`, writing the mean gradient into `grad`.
    ///
    /// `grad` has length `dim()` and is overwritten.
    fn value_and_gradient_into(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64;

    /// Full-batch objective. Implementations may override this with a
    /// gradient-free evaluation.
    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        let mut grad = vec![0.0; self.dim()];
        let all: Vec<usize> = (0..self.sample_count()).collect();
        self.value_and_gradient_into(w, lambda, &all, &mut grad)
    }

    fn minibatch_value_and_gradient(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
    ) -> (f64, ParamVector) {
        let mut grad = vec![0.0; self.dim()];
        let value = self.value_and_gradient_into(w, lambda, indices, &mut grad);
        (value, ParamVector::new(grad))
    }

    fn full_value_and_gradient(&self, w: &ParamVector, lambda: f64) -> (f64, ParamVector) {
        let all: Vec<usize> = (0..self.sample_count()).collect();
        self.minibatch_value_and_gradient(w, lambda, &all)
    }

    fn full_gradient(&self, w: &ParamVector, lambda: f64) -> ParamVector {
        self.full_value_and_gradient(w, lambda).1
    }

    /// Training misclassification rate of the target model, for
    /// classification problems.
    fn error_rate(&self, _w: &ParamVector) -> Option<f64> {
        None
    }
}

impl<P: HomotopyProblem + ?Sized> HomotopyProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_count(&self) -> usize {
        (**self).sample_count()
    }
    fn value_and_gradient_into(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        (**self).value_and_gradient_into(w, lambda, indices, grad)
    }
    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        (**self).full_objective(w, lambda)
    }
    fn error_rate(&self, w: &ParamVector) -> Option<f64> {
        (**self).error_rate(w)
    }
}

impl<P: HomotopyProblem + ?Sized> HomotopyProblem for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_count(&self) -> usize {
        (**self).sample_count()
    }
    fn value_and_gradient_into(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        (**self).value_and_gradient_into(w, lambda, indices, grad)
    }
    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        (**self).full_objective(w, lambda)
    }
    fn error_rate(&self, w: &ParamVector) -> Option<f64> {
        (**self).error_rate(w)
    }
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "lambda = {lambda} is outside [0, 1]"
        )))
    }
}
