use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::problem::HomotopyProblem;

/// Coefficient count of the cubic model.
pub const CUBIC_DIM: usize = 9;

/// Number of leading coefficients attached to nonlinear terms.
const NONLINEAR: usize = 6;

/// Binary logistic regression with the cubic model
/// `z = λ(c1 x1³ + c2 x2³ + c3 x1² + c4 x2² + c5 x1²x2 + c6 x1x2²) + c7 x1 + c8 x2 + c9`.
///
/// At `λ = 0` the model is linear (a convex source task).
#[derive(Debug, Clone)]
pub struct CubicLogistic {
    /// Per-sample monomials `[x1³, x2³, x1², x2², x1²x2, x1x2², x1, x2, 1]`.
    features: Vec<[f64; CUBIC_DIM]>,
    labels: Vec<f64>,
}

/// `∂z/∂c` for one sample.
pub(crate) fn monomials(x1: f64, x2: f64) -> [f64; CUBIC_DIM] {
    [
        x1 * x1 * x1,
        x2 * x2 * x2,
        x1 * x1,
        x2 * x2,
        x1 * x1 * x2,
        x1 * x2 * x2,
        x1,
        x2,
        1.0,
    ]
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl CubicLogistic {
    pub fn new(features: &[[f64; 2]], labels01: &[f64]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config(
                "logistic problem needs at least one sample".into(),
            ));
        }
        if features.len() != labels01.len() {
            return Err(Error::Config(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels01.len()
            )));
        }
        if let Some((j, y)) = labels01
            .iter()
            .enumerate()
            .find(|(_, &y)| y != 0.0 && y != 1.0)
        {
            return Err(Error::Data(format!("label {y} at row {j} is not 0 or 1")));
        }
        Ok(Self {
            features: features.iter().map(|x| monomials(x[0], x[1])).collect(),
            labels: labels01.to_vec(),
        })
    }

    /// Model value at sample `j`.
    #[inline]
    fn z(&self, c: &[f64], j: usize, lambda: f64) -> f64 {
        let phi = &self.features[j];
        let nonlinear: f64 = (0..NONLINEAR).map(|i| c[i] * phi[i]).sum();
        let linear: f64 = (NONLINEAR..CUBIC_DIM).map(|i| c[i] * phi[i]).sum();
        lambda * nonlinear + linear
    }

    /// Model value at an arbitrary input.
    pub fn model(c: &ParamVector, x: [f64; 2], lambda: f64) -> f64 {
        let phi = monomials(x[0], x[1]);
        let c = c.as_slice();
        let nonlinear: f64 = (0..NONLINEAR).map(|i| c[i] * phi[i]).sum();
        let linear: f64 = (NONLINEAR..CUBIC_DIM).map(|i| c[i] * phi[i]).sum();
        lambda * nonlinear + linear
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

impl HomotopyProblem for CubicLogistic {
    fn dim(&self) -> usize {
        CUBIC_DIM
    }

    fn sample_count(&self) -> usize {
        self.labels.len()
    }

    fn value_and_gradient_into(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        let c = w.as_slice();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for &j in indices {
            let z = self.z(c, j, lambda);
            let y = self.labels[j];
            value += softplus(z) - y * z;
            let r = sigmoid(z) - y;
            let phi = &self.features[j];
            for i in 0..NONLINEAR {
                grad[i] += r * lambda * phi[i];
            }
            for i in NONLINEAR..CUBIC_DIM {
                grad[i] += r * phi[i];
            }
        }
        let m = indices.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        value / m
    }

    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        let c = w.as_slice();
        let sum: f64 = (0..self.labels.len())
            .map(|j| {
                let z = self.z(c, j, lambda);
                softplus(z) - self.labels[j] * z
            })
            .sum();
        sum / self.labels.len() as f64
    }

    /// Fraction of samples misclassified by the target (`λ = 1`) model at
    /// threshold `sigmoid(z) ≥ 0.5`.
    fn error_rate(&self, w: &ParamVector) -> Option<f64> {
        let c = w.as_slice();
        let wrong = (0..self.labels.len())
            .filter(|&j| {
                let predicted = if self.z(c, j, 1.0) >= 0.0 { 1.0 } else { 0.0 };
                predicted != self.labels[j]
            })
            .count();
        Some(wrong as f64 / self.labels.len() as f64)
    }
}
