use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// Dense vector of optimization variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ParamVector) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().for_each(|x| *x *= a);
    }

    pub fn fill(&mut self, value: f64) {
        self.0.iter_mut().for_each(|x| *x = value);
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axpy_and_norms() {
        let mut a = ParamVector::new(vec![1.0, 2.0]);
        let b = ParamVector::new(vec![3.0, -1.0]);
        a.axpy(2.0, &b);
        assert_eq!(a.as_slice(), &[7.0, 0.0]);
        assert_eq!(a.norm_sq(), 49.0);
        assert_eq!(a.distance(&b), (16.0f64 + 1.0).sqrt());
        assert!(a.is_finite());
        a[1] = f64::NAN;
        assert!(!a.is_finite());
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mismatched_dimensions_panic() {
        let mut a = ParamVector::zeros(2);
        a.axpy(1.0, &ParamVector::zeros(3));
    }
}
