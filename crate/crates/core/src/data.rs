//! Seeded synthetic datasets for the three benchmark problems.
//!
//! All randomness comes from [`Stream`] (xoshiro256++ seeded through
//! SplitMix64, polar-method normals), so a `(spec, seed)` pair always
//! regenerates the same bits.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{CubicLogistic, ErfRegression, MlpSine};
use crate::rng::{derive_seed, tags, Stream};

/// Generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// `y = slope·x + ε`, `x ~ U[−1, 1]`, `ε ~ N(0, noise_std²)`.
    LinearToy {
        n: usize,
        slope: f64,
        noise_std: f64,
    },
    /// `y = sin(freq·x) + ε` with companion source targets `x² + ε′`.
    Sine {
        n: usize,
        freq: f64,
        noise_std: f64,
        source_noise_std: f64,
    },
    /// Two interleaved half circles with isotropic Gaussian noise.
    Moons { n: usize, noise_std: f64 },
}

impl DatasetSpec {
    pub fn sample_count(&self) -> usize {
        match *self {
            Self::LinearToy { n, .. } | Self::Sine { n, .. } | Self::Moons { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Feature vectors, each of length `input_dim`.
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Source-problem targets, when the generator defines them.
    pub source_targets: Option<Vec<f64>>,
    pub seed: u64,
    pub spec: DatasetSpec,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// First input coordinate of every sample.
    pub fn xs(&self) -> Vec<f64> {
        self.inputs.iter().map(|x| x[0]).collect()
    }

    /// Erf regression with source labels `w0·x`.
    pub fn erf_problem(&self, w0: f64) -> Result<ErfRegression> {
        self.require_dim(1)?;
        ErfRegression::with_linear_source(self.xs(), self.targets.clone(), w0)
    }

    pub fn mlp_problem(&self) -> Result<MlpSine> {
        self.require_dim(1)?;
        let source = self
            .source_targets
            .clone()
            .ok_or_else(|| Error::Data("dataset has no source targets".into()))?;
        MlpSine::new(self.xs(), self.targets.clone(), source)
    }

    pub fn logistic_problem(&self) -> Result<CubicLogistic> {
        self.require_dim(2)?;
        let features: Vec<[f64; 2]> = self.inputs.iter().map(|x| [x[0], x[1]]).collect();
        CubicLogistic::new(&features, &self.targets)
    }

    fn require_dim(&self, dim: usize) -> Result<()> {
        if self.input_dim() != dim {
            return Err(Error::Data(format!(
                "expected {dim}-dimensional inputs, dataset has {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// CSV text: header `x1[,x2],y[,y_source]`, 17 significant digits, LF.
    pub fn to_csv(&self) -> String {
        let dim = self.input_dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",y");
        if self.source_targets.is_some() {
            out.push_str(",y_source");
        }
        out.push('\n');
        for (j, x) in self.inputs.iter().enumerate() {
            for v in x {
                let _ = write!(out, "{},", fmt17(*v));
            }
            out.push_str(&fmt17(self.targets[j]));
            if let Some(src) = &self.source_targets {
                let _ = write!(out, ",{}", fmt17(src[j]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Scientific notation with 17 significant digits (round-trips any `f64`).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Builds a dataset from its spec.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    match *spec {
        DatasetSpec::LinearToy {
            n,
            slope,
            noise_std,
        } => gen_linear_toy(n, slope, noise_std, seed),
        DatasetSpec::Sine {
            n,
            freq,
            noise_std,
            source_noise_std,
        } => gen_sine(n, freq, noise_std, source_noise_std, seed),
        DatasetSpec::Moons { n, noise_std } => gen_moons(n, noise_std, seed),
    }
}

fn check_common(n: usize, noise: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("dataset needs at least one sample".into()));
    }
    if let Some(bad) = noise.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::Config(format!(
            "noise standard deviation must be finite and >= 0, got {bad}"
        )));
    }
    Ok(())
}

pub fn gen_linear_toy(n: usize, slope: f64, noise_std: f64, seed: u64) -> Result<Dataset> {
    check_common(n, &[noise_std])?;
    let mut rng = Stream::new(derive_seed(seed, tags::DATASET));
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.uniform_range(-1.0, 1.0);
        let eps = rng.normal();
        inputs.push(vec![x]);
        targets.push(slope * x + noise_std * eps);
    }
    Ok(Dataset {
        inputs,
        targets,
        source_targets: None,
        seed,
        spec: DatasetSpec::LinearToy {
            n,
            slope,
            noise_std,
        },
    })
}

pub fn gen_sine(
    n: usize,
    freq: f64,
    noise_std: f64,
    source_noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    check_common(n, &[noise_std, source_noise_std])?;
    let mut rng = Stream::new(derive_seed(seed, tags::DATASET));
    let mut source_rng = Stream::new(derive_seed(seed, tags::SOURCE_NOISE));
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.uniform_range(-1.0, 1.0);
        let eps = rng.normal();
        inputs.push(vec![x]);
        targets.push((freq * x).sin() + noise_std * eps);
        source.push(x * x + source_noise_std * source_rng.normal());
    }
    Ok(Dataset {
        inputs,
        targets,
        source_targets: Some(source),
        seed,
        spec: DatasetSpec::Sine {
            n,
            freq,
            noise_std,
            source_noise_std,
        },
    })
}

/// Class 0 on `(cos θ, sin θ)`, class 1 on `(1 − cos θ, 0.5 − sin θ)`, with
/// `θ` equally spaced on `[0, π]` in each class. Rows are class 0 first.
pub fn gen_moons(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    check_common(n, &[noise_std])?;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "moons needs an even sample count >= 2, got {n}"
        )));
    }
    let half = n / 2;
    let theta = |i: usize| {
        if half == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (half - 1) as f64
        }
    };
    let mut rng = Stream::new(derive_seed(seed, tags::DATASET));
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for class in 0..2 {
        for i in 0..half {
            let t = theta(i);
            let (x1, x2) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            let e1 = rng.normal();
            let e2 = rng.normal();
            inputs.push(vec![x1 + noise_std * e1, x2 + noise_std * e2]);
            targets.push(class as f64);
        }
    }
    Ok(Dataset {
        inputs,
        targets,
        source_targets: None,
        seed,
        spec: DatasetSpec::Moons { n, noise_std },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_toy_is_exactly_linear() {
        let d = gen_linear_toy(100, 3.0, 0.0, 7).unwrap();
        for (x, y) in d.inputs.iter().zip(&d.targets) {
            assert_eq!(*y, 3.0 * x[0]);
            assert!((-1.0..=1.0).contains(&x[0]));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = gen_sine(50, 10.0, 0.3, 0.1, 99).unwrap().to_csv();
        let b = gen_sine(50, 10.0, 0.3, 0.1, 99).unwrap().to_csv();
        let c = gen_sine(50, 10.0, 0.3, 0.1, 100).unwrap().to_csv();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_free_sine() {
        let d = gen_sine(200, 10.0, 0.0, 0.0, 3).unwrap();
        let src = d.source_targets.as_ref().unwrap();
        for ((x, y), s) in d.inputs.iter().zip(&d.targets).zip(src) {
            assert_eq!(*y, (10.0 * x[0]).sin());
            assert_eq!(*s, x[0] * x[0]);
        }
    }

    #[test]
    fn four_noise_free_moons() {
        let d = gen_moons(4, 0.0, 1).unwrap();
        let expected = [[1.0, 0.0], [-1.0, 0.0], [0.0, 0.5], [2.0, 0.5]];
        for (x, e) in d.inputs.iter().zip(expected) {
            assert!((x[0] - e[0]).abs() < 1e-15 && (x[1] - e[1]).abs() < 1e-15);
        }
        assert_eq!(d.targets, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn moons_balance_and_circle() {
        let d = gen_moons(100, 0.0, 1).unwrap();
        assert_eq!(d.targets.iter().filter(|&&y| y == 0.0).count(), 50);
        for (x, y) in d.inputs.iter().zip(&d.targets) {
            if *y == 0.0 {
                assert!((x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-12);
            }
        }
        assert!(gen_moons(5, 0.1, 1).is_err());
        assert!(gen_moons(0, 0.1, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let d = gen_moons(2, 0.0, 0).unwrap();
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,x2,y");
        assert_eq!(
            lines[1],
            "1.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0"
        );
        assert!(!csv.contains('\r'));
        let s = gen_sine(3, 10.0, 0.1, 0.1, 0).unwrap().to_csv();
        assert!(s.starts_with("x1,y,y_source\n"));
        let row: Vec<f64> = s
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        let d = gen_sine(3, 10.0, 0.1, 0.1, 0).unwrap();
        assert_eq!(row[1].to_bits(), d.targets[0].to_bits());
    }
}
