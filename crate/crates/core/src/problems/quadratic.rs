use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::problem::HomotopyProblem;

/// Synthetic linear-quadratic family with exactly known constants.
///
/// Sample `j` contributes `½μ(w − λ)² + b_j(w − λ)` with `Σ b_j = 0`, so the
/// full objective is `½μ(w − λ)²`, `f*(λ) = 0`, `L = μ` and the minibatch
/// noise does not depend on `w`.
#[derive(Debug, Clone)]
pub struct LinearQuadratic {
    mu: f64,
    offsets: Vec<f64>,
}

impl LinearQuadratic {
    /// The offsets are centred to mean zero.
    pub fn new(mu: f64, offsets: Vec<f64>) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        if offsets.is_empty() {
            return Err(Error::Config("need at least one sample offset".into()));
        }
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        let offsets = offsets.into_iter().map(|b| b - mean).collect();
        Ok(Self { mu, offsets })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `E‖g − ∇f‖²` for minibatches of `m` distinct samples:
    /// `(N − M) / (M (N − 1)) · (1/N) Σ b_j²`.
    pub fn exact_sigma2(&self, m: usize) -> f64 {
        let n = self.offsets.len();
        if m >= n {
            return 0.0;
        }
        let s2 = self.offsets.iter().map(|b| b * b).sum::<f64>() / n as f64;
        (n - m) as f64 / (m as f64 * (n - 1) as f64) * s2
    }

    /// Smallest `δ` with `|f(w, λ̃) − f(w, λ̂)| ≤ δ|λ̃ − λ̂|` whenever
    /// `|w − λ| ≤ radius` at both endpoints.
    pub fn delta_for_radius(&self, radius: f64) -> f64 {
        self.mu * radius
    }

    pub fn fstar(&self, _lambda: f64) -> f64 {
        0.0
    }
}

impl HomotopyProblem for LinearQuadratic {
    fn dim(&self) -> usize {
        1
    }

    fn sample_count(&self) -> usize {
        self.offsets.len()
    }

    fn value_and_gradient_into(
        &self,
        w: &ParamVector,
        lambda: f64,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        let e = w[0] - lambda;
        let m = indices.len() as f64;
        let b_mean = indices.iter().map(|&j| self.offsets[j]).sum::<f64>() / m;
        grad[0] = self.mu * e + b_mean;
        0.5 * self.mu * e * e + b_mean * e
    }

    fn full_objective(&self, w: &ParamVector, lambda: f64) -> f64 {
        let e = w[0] - lambda;
        0.5 * self.mu * e * e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_objective_is_the_pure_quadratic() {
        let p = LinearQuadratic::new(2.0, vec![1.0, -3.0, 0.5, 7.0]).unwrap();
        assert!(p.offsets().iter().sum::<f64>().abs() < 1e-14);
        let w = ParamVector::scalar(0.9);
        assert!((p.full_objective(&w, 0.4) - 0.25).abs() < 1e-15);
        let g = p.full_gradient(&w, 0.4);
        assert!((g[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_sigma2_matches_enumeration() {
        let p = LinearQuadratic::new(1.0, vec![0.3, -0.1, 0.5, -0.7, 0.0]).unwrap();
        let n = 5;
        // all pairs
        let mut total = 0.0;
        let mut count = 0;
        for a in 0..n {
            for b in a + 1..n {
                let mean = (p.offsets()[a] + p.offsets()[b]) / 2.0;
                total += mean * mean;
                count += 1;
            }
        }
        assert!((p.exact_sigma2(2) - total / count as f64).abs() < 1e-15);
        assert_eq!(p.exact_sigma2(5), 0.0);
    }

    #[test]
    fn rejects_nonpositive_mu() {
        assert!(LinearQuadratic::new(0.0, vec![1.0]).is_err());
    }
}
