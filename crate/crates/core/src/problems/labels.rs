use crate::error::{Error, Result};
use crate::problem::check_lambda;

/// Homotopy on regression labels: `y_λ = λ·y_target + (1 − λ)·y_source`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelInterpolationMap {
    target: Vec<f64>,
    source: Vec<f64>,
}

impl LabelInterpolationMap {
    pub fn new(target: Vec<f64>, source: Vec<f64>) -> Result<Self> {
        if target.len() != source.len() {
            return Err(Error::Config(format!(
                "target has {} labels but source has {}",
                target.len(),
                source.len()
            )));
        }
        Ok(Self { target, source })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Interpolated label of sample `j`. The endpoints are returned exactly.
    #[inline]
    pub fn label(&self, j: usize, lambda: f64) -> f64 {
        if lambda == 0.0 {
            self.source[j]
        } else if lambda == 1.0 {
            self.target[j]
        } else {
            lambda * self.target[j] + (1.0 - lambda) * self.source[j]
        }
    }

    pub fn interpolate(&self, lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        Ok((0..self.len()).map(|j| self.label(j, lambda)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let map = LabelInterpolationMap::new(vec![0.1, 2.0, -3.3], vec![0.7, 0.0, 1e-17]).unwrap();
        assert_eq!(map.interpolate(0.0).unwrap(), map.source());
        assert_eq!(map.interpolate(1.0).unwrap(), map.target());
    }

    #[test]
    fn midpoint() {
        let map = LabelInterpolationMap::new(vec![2.0], vec![0.0]).unwrap();
        assert_eq!(map.interpolate(0.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn lambda_outside_unit_interval_is_rejected() {
        let map = LabelInterpolationMap::new(vec![2.0], vec![0.0]).unwrap();
        assert!(matches!(map.interpolate(1.5), Err(Error::Domain(_))));
        assert!(matches!(map.interpolate(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(LabelInterpolationMap::new(vec![1.0], vec![]).is_err());
    }
}
