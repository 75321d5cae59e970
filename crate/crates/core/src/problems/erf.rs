use std::f64::consts::PI;

use super::LabelInterpolationMap;
use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::problem::HomotopyProblem;

/// Error function (libm, full double precision).
#[inline]
pub fn erf(u: f64) -> f64 {
    libm::erf(u)
}

/// `d/du erf(u) = (2/√π) e^{−u²}`
#[inline]
pub fn erf_derivative(u: f64) -> f64 {
    2.0 / PI.sqrt() * (-u * u).exp()
}

/// One-parameter regression `f(w, λ) = (1/N) Σ (y_{j,λ} − erf(w·x_j))²`
/// with interpolated labels.
#[derive(Debug, Clone)]
pub struct ErfRegression {
    xs: Vec<f64>,
    labels: LabelInterpolationMap,
}

impl ErfRegression {
    pub fn new(xs: Vec<f64>, ys_target: Vec<f64>, ys_source: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Config(
                "erf problem needs at least one sample".into(),
            ));
        }
        if xs.len() != ys_target.len() {
            return Err(Error::Config(format!(
                "{} inputs but {} targets",
                xs.len(),
                ys_target.len()
            )));
        }
        let labels = LabelInterpolationMap::new(ys_target, ys_source)?;
        Ok(Self { xs, labels })
    }

    /// Source labels `y_{j,0} = w0·x_j`, so that `w0` is where the homotopy
    /// path starts.
    pub fn with_linear_source(xs: Vec<f64>, ys_target: Vec<f64>, w0: f64) -> Result<Self> {
        let source = xs.iter().map(|x| w0 * x).collect();
        Self::new(xs, ys_target, source)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn labels(&self) -> &LabelInterpolationMap {
        &self.labels
    }
}

impl HomotopyProblem for ErfRegression {
    fn dim(&self) -> usize {
        1
    }

    fn sample_count(&self) -> usize {
        self.xs.len()
    }

    fn value_and_gradient_into(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        let w = w[0];
        let mut value = 0.0;
        let mut g = 0.0;
        for &j in indices {
            let x = self.xs[j];
            let u = w * x;
            let residual = erf(u) - self.labels.label(j, lambda);
            value += residual * residual;
            g += 2.0 * residual * erf_derivative(u) * x;
        }
        let m = indices.len() as f64;
        grad[0] = g / m;
        value / m
    }

    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        let w = w[0];
        let sum: f64 = self
            .xs
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let r = self.labels.label(j, lambda) - erf(w * x);
                r * r
            })
            .sum();
        sum / self.xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> ErfRegression {
        let xs = vec![-0.9, -0.2, 0.3, 0.8];
        let ys = vec![-2.5, -0.4, 1.1, 2.2];
        ErfRegression::with_linear_source(xs, ys, -4.0).unwrap()
    }

    #[test]
    fn erf_reference_values() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(-0.5) + 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf_derivative(0.0) - 2.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn at_zero_weight() {
        let p = problem();
        let (f, g) = p.full_value_and_gradient(&ParamVector::scalar(0.0), 1.0);
        let n = 4.0;
        let ys = p.labels().target();
        let expected_f = ys.iter().map(|y| y * y).sum::<f64>() / n;
        let expected_g =
            -4.0 / (n * PI.sqrt()) * ys.iter().zip(p.xs()).map(|(y, x)| y * x).sum::<f64>();
        assert!((f - expected_f).abs() < 1e-14);
        assert!((g[0] - expected_g).abs() < 1e-14);
    }

    #[test]
    fn zero_residual_dataset() {
        let w_bar = 1.7;
        let xs = vec![-0.5, 0.1, 0.9];
        let ys: Vec<f64> = xs.iter().map(|x| erf(w_bar * x)).collect();
        let p = ErfRegression::new(xs.clone(), ys, vec![0.0; 3]).unwrap();
        let (f, g) = p.full_value_and_gradient(&ParamVector::scalar(w_bar), 1.0);
        assert_eq!(f, 0.0);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn full_objective_matches_minibatch_path() {
        let p = problem();
        let w = ParamVector::scalar(0.37);
        for lambda in [0.0, 0.3, 1.0] {
            let a = p.full_objective(&w, lambda);
            let b = p.full_value_and_gradient(&w, lambda).0;
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            ErfRegression::new(vec![], vec![], vec![]),
            Err(Error::Config(_))
        ));
    }
}
