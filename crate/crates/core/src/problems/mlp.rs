use super::LabelInterpolationMap;
use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::problem::HomotopyProblem;
use crate::rng::Stream;

/// Units per hidden layer.
pub const HIDDEN: usize = 10;

/// Parameter count of the 1-10-10-1 network.
pub const MLP_DIM: usize = HIDDEN + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1;

/// Offsets of each parameter block inside the flat parameter vector.
///
/// `w2` is row-major: entry `i * HIDDEN + j` connects hidden-1 unit `j` to
/// hidden-2 unit `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpLayout;

impl MlpLayout {
    pub const W1: usize = 0;
    pub const B1: usize = Self::W1 + HIDDEN;
    pub const W2: usize = Self::B1 + HIDDEN;
    pub const B2: usize = Self::W2 + HIDDEN * HIDDEN;
    pub const W3: usize = Self::B2 + HIDDEN;
    pub const B3: usize = Self::W3 + HIDDEN;
}

struct Activations {
    h1: [f64; HIDDEN],
    h2: [f64; HIDDEN],
    out: f64,
}

fn forward(p: &[f64], x: f64) -> Activations {
    let mut h1 = [0.0; HIDDEN];
    for (i, h) in h1.iter_mut().enumerate() {
        *h = (p[MlpLayout::W1 + i] * x + p[MlpLayout::B1 + i]).tanh();
    }
    let mut h2 = [0.0; HIDDEN];
    for (i, h) in h2.iter_mut().enumerate() {
        let row = &p[MlpLayout::W2 + i * HIDDEN..MlpLayout::W2 + (i + 1) * HIDDEN];
        let pre: f64 = row.iter().zip(&h1).map(|(w, a)| w * a).sum::<f64>() + p[MlpLayout::B2 + i];
        *h = pre.tanh();
    }
    let out = p[MlpLayout::W3..MlpLayout::W3 + HIDDEN]
        .iter()
        .zip(&h2)
        .map(|(w, a)| w * a)
        .sum::<f64>()
        + p[MlpLayout::B3];
    Activations { h1, h2, out }
}

/// Sine regression with a 1-10-10-1 tanh network, identity output and MSE
/// loss on interpolated labels.
#[derive(Debug, Clone)]
pub struct MlpSine {
    xs: Vec<f64>,
    labels: LabelInterpolationMap,
}

impl MlpSine {
    pub fn new(xs: Vec<f64>, ys_target: Vec<f64>, ys_source: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Config(
                "MLP problem needs at least one sample".into(),
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

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn labels(&self) -> &LabelInterpolationMap {
        &self.labels
    }

    /// Weights uniform on `±1/√fan_in`, biases zero.
    pub fn init_params(rng: &mut Stream) -> ParamVector {
        let mut p = vec![0.0; MLP_DIM];
        let fill = |block: &mut [f64], fan_in: usize, rng: &mut Stream| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in block {
                *v = rng.uniform_range(-bound, bound);
            }
        };
        fill(&mut p[MlpLayout::W1..MlpLayout::B1], 1, rng);
        fill(&mut p[MlpLayout::W2..MlpLayout::B2], HIDDEN, rng);
        fill(&mut p[MlpLayout::W3..MlpLayout::B3], HIDDEN, rng);
        ParamVector::new(p)
    }

    pub fn predict(&self, w: &ParamVector, x: f64) -> f64 {
        forward(w.as_slice(), x).out
    }

    pub fn check_params(&self, w: &ParamVector) -> Result<()> {
        if w.dim() != MLP_DIM {
            return Err(Error::Config(format!(
                "MLP expects {MLP_DIM} parameters, got {}",
                w.dim()
            )));
        }
        Ok(())
    }
}

impl HomotopyProblem for MlpSine {
    fn dim(&self) -> usize {
        MLP_DIM
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
        let p = w.as_slice();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / indices.len() as f64;
        let mut value = 0.0;
        for &j in indices {
            let x = self.xs[j];
            let a = forward(p, x);
            let residual = a.out - self.labels.label(j, lambda);
            value += residual * residual;

            let d_out = 2.0 * residual * scale;
            grad[MlpLayout::B3] += d_out;
            let mut d2 = [0.0; HIDDEN];
            for i in 0..HIDDEN {
                grad[MlpLayout::W3 + i] += d_out * a.h2[i];
                d2[i] = d_out * p[MlpLayout::W3 + i] * (1.0 - a.h2[i] * a.h2[i]);
            }
            let mut d1 = [0.0; HIDDEN];
            for i in 0..HIDDEN {
                grad[MlpLayout::B2 + i] += d2[i];
                let row = MlpLayout::W2 + i * HIDDEN;
                for jj in 0..HIDDEN {
                    grad[row + jj] += d2[i] * a.h1[jj];
                    d1[jj] += d2[i] * p[row + jj];
                }
            }
            for jj in 0..HIDDEN {
                let d = d1[jj] * (1.0 - a.h1[jj] * a.h1[jj]);
                grad[MlpLayout::W1 + jj] += d * x;
                grad[MlpLayout::B1 + jj] += d;
            }
        }
        value * scale
    }

    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        let p = w.as_slice();
        let sum: f64 = self
            .xs
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let r = forward(p, x).out - self.labels.label(j, lambda);
                r * r
            })
            .sum();
        sum / self.xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> MlpSine {
        let xs = vec![-0.8, -0.1, 0.4, 0.9];
        let ys = xs.iter().map(|x: &f64| (10.0 * x).sin()).collect();
        let src = xs.iter().map(|x| x * x).collect();
        MlpSine::new(xs, ys, src).unwrap()
    }

    #[test]
    fn parameter_count() {
        assert_eq!(MLP_DIM, 141);
        assert_eq!(MlpLayout::B3, 140);
    }

    #[test]
    fn zero_parameters() {
        let p = problem();
        let w = ParamVector::zeros(MLP_DIM);
        for lambda in [0.0, 0.4, 1.0] {
            let (f, g) = p.full_value_and_gradient(&w, lambda);
            let ys = p.labels().interpolate(lambda).unwrap();
            let n = ys.len() as f64;
            let expected = ys.iter().map(|y| y * y).sum::<f64>() / n;
            assert!((f - expected).abs() < 1e-15);
            for idx in MlpLayout::W2..MlpLayout::B3 {
                assert_eq!(g[idx], 0.0, "index {idx}");
            }
            let bias = -2.0 / n * ys.iter().sum::<f64>();
            assert!((g[MlpLayout::B3] - bias).abs() < 1e-15);
        }
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let mut rng = Stream::new(9);
        let w = MlpSine::init_params(&mut rng);
        let s = w.as_slice();
        assert!(s[MlpLayout::W1..MlpLayout::B1]
            .iter()
            .all(|v| v.abs() <= 1.0));
        let b = 1.0 / 10f64.sqrt();
        assert!(s[MlpLayout::W2..MlpLayout::B2].iter().all(|v| v.abs() <= b));
        assert!(s[MlpLayout::B1..MlpLayout::W2].iter().all(|&v| v == 0.0));
        assert_eq!(s[MlpLayout::B3], 0.0);
    }

    #[test]
    fn wrong_dimension_is_a_config_error() {
        let p = problem();
        assert!(p.check_params(&ParamVector::zeros(10)).is_err());
        assert!(p.check_params(&ParamVector::zeros(MLP_DIM)).is_ok());
    }
}
