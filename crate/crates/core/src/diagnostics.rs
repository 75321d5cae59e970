//! Empirical estimates of the landscape constants used by the theory
//! calculators, a finite-difference gradient checker and an optimum oracle.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::problem::HomotopyProblem;
use crate::rng::Stream;

/// Gap below which the PL ratio is treated as undefined.
pub const GAP_TOLERANCE: f64 = 1e-12;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Uniform point in the Euclidean ball of `radius` around `center`.
pub fn sample_ball(center: &ParamVector, radius: f64, rng: &mut Stream) -> ParamVector {
    let d = center.dim();
    if d == 1 {
        return ParamVector::scalar(center[0] + rng.uniform_range(-radius, radius));
    }
    let mut dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius * rng.uniform().powf(1.0 / d as f64);
    for (v, c) in dir.iter_mut().zip(center.iter()) {
        *v = c + r * *v / norm;
    }
    ParamVector::new(dir)
}

/// `max ‖∇f(w₁) − ∇f(w₂)‖ / ‖w₁ − w₂‖` over `num_pairs` random pairs in the
/// ball. This is a lower bound on the smoothness constant.
pub fn estimate_l<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    center: &ParamVector,
    radius: f64,
    num_pairs: usize,
    rng: &mut Stream,
) -> Result<f64> {
    if num_pairs == 0 || !(radius > 0.0) {
        return Err(Error::Config(
            "smoothness estimate needs num_pairs >= 1 and radius > 0".into(),
        ));
    }
    let mut best: Option<f64> = None;
    for _ in 0..num_pairs {
        let w1 = sample_ball(center, radius, rng);
        let w2 = sample_ball(center, radius, rng);
        let dist = w1.distance(&w2);
        if dist == 0.0 {
            continue;
        }
        let g1 = problem.full_gradient(&w1, lambda);
        let g2 = problem.full_gradient(&w2, lambda);
        let ratio = g1.distance(&g2) / dist;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or_else(|| Error::Estimation("every sampled pair was coincident".into()))
}

/// Pointwise PL modulus `‖∇f(w)‖² / (2 (f(w) − f*))`.
pub fn estimate_mu<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    w: &ParamVector,
    fstar: f64,
) -> Result<f64> {
    let (f, g) = problem.full_value_and_gradient(w, lambda);
    let gap = f - fstar;
    if !(gap > GAP_TOLERANCE) {
        return Err(Error::Estimation(format!(
            "PL ratio undefined: gap {gap:e} is at or below tolerance"
        )));
    }
    Ok(g.norm_sq() / (2.0 * gap))
}

/// Smallest pointwise modulus over a set of iterates, skipping points at the
/// optimum.
pub fn mu_min_over<'a, P, I>(problem: &P, lambda: f64, points: I, fstar: f64) -> Option<f64>
where
    P: HomotopyProblem + ?Sized,
    I: IntoIterator<Item = &'a ParamVector>,
{
    points
        .into_iter()
        .filter_map(|w| estimate_mu(problem, lambda, w, fstar).ok())
        .fold(None, |acc, mu| Some(acc.map_or(mu, |a: f64| a.min(mu))))
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Calls `visit` with every `m`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        visit(&idx);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - m + i {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `max_w E‖g(w, ξ) − ∇f(w)‖²` over the supplied points.
///
/// When the number of distinct minibatches is at most `draws` the
/// expectation is computed exactly by enumeration; otherwise it is the mean
/// over `draws` sampled minibatches.
pub fn estimate_sigma2<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    w_samples: &[ParamVector],
    m: usize,
    draws: usize,
    rng: &mut Stream,
) -> Result<f64> {
    let n = problem.sample_count();
    if draws < 2 {
        return Err(Error::Config("variance estimate needs draws >= 2".into()));
    }
    if m == 0 || m > n {
        return Err(Error::Config(format!("minibatch size {m} outside 1..={n}")));
    }
    if w_samples.is_empty() {
        return Err(Error::Config(
            "variance estimate needs at least one point".into(),
        ));
    }
    if m == n {
        return Ok(0.0);
    }
    let exact = binomial(n, m).is_some_and(|c| c <= draws as u128);
    let mut grad = vec![0.0; problem.dim()];
    let mut indices = Vec::with_capacity(m);
    let mut worst: f64 = 0.0;
    for w in w_samples {
        let full = problem.full_gradient(w, lambda);
        let mut sq_dev = |idx: &[usize]| {
            problem.value_and_gradient_into(w, lambda, idx, &mut grad);
            grad.iter()
                .zip(full.iter())
                .map(|(g, f)| (g - f) * (g - f))
                .sum::<f64>()
        };
        let mean = if exact {
            let mut total = 0.0;
            let mut count = 0usize;
            for_each_subset(n, m, |idx| {
                total += sq_dev(idx);
                count += 1;
            });
            total / count as f64
        } else {
            let mut total = 0.0;
            for _ in 0..draws {
                rng.sample_indices(n, m, &mut indices);
                total += sq_dev(&indices);
            }
            total / draws as f64
        };
        worst = worst.max(mean);
    }
    Ok(worst)
}

/// How to search for `f*(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FstarSearch {
    /// One-dimensional grid with gradient-sign bisection around the best
    /// grid point.
    Grid { lo: f64, hi: f64, step: f64 },
    /// Best terminal value of full-batch gradient descent over seeded
    /// restarts `w ~ N(0, init_std² I)` plus any explicit starting points.
    MultiStart {
        restarts: usize,
        steps: usize,
        step_size: f64,
        init_std: f64,
        seed: u64,
        #[serde(default)]
        starts: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FstarEstimate {
    pub value: f64,
    pub argmin: ParamVector,
    /// Set when the value is only an upper bound (local search on a
    /// non-convex problem).
    pub upper_bound: bool,
}

pub fn estimate_fstar<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    search: &FstarSearch,
) -> Result<FstarEstimate> {
    match search {
        FstarSearch::Grid { lo, hi, step } => grid_search(problem, lambda, *lo, *hi, *step),
        FstarSearch::MultiStart {
            restarts,
            steps,
            step_size,
            init_std,
            seed,
            starts,
        } => {
            let mut rng = Stream::new(*seed);
            let d = problem.dim();
            let mut candidates: Vec<ParamVector> =
                starts.iter().map(|s| ParamVector::new(s.clone())).collect();
            for _ in 0..*restarts {
                candidates.push(ParamVector::new(
                    (0..d).map(|_| init_std * rng.normal()).collect(),
                ));
            }
            if candidates.is_empty() {
                return Err(Error::Config(
                    "multi-start search has no starting points".into(),
                ));
            }
            let mut best: Option<(f64, ParamVector)> = None;
            for mut w in candidates {
                if w.dim() != d {
                    return Err(Error::Config(format!(
                        "starting point has dimension {}, problem expects {d}",
                        w.dim()
                    )));
                }
                for _ in 0..*steps {
                    let g = problem.full_gradient(&w, lambda);
                    w.axpy(-step_size, &g);
                }
                let f = problem.full_objective(&w, lambda);
                if f.is_finite() && best.as_ref().is_none_or(|(b, _)| f < *b) {
                    best = Some((f, w));
                }
            }
            let (value, argmin) =
                best.ok_or_else(|| Error::Estimation("every restart diverged".into()))?;
            Ok(FstarEstimate {
                value,
                argmin,
                upper_bound: true,
            })
        }
    }
}

fn grid_search<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<FstarEstimate> {
    if problem.dim() != 1 {
        return Err(Error::Config(
            "grid search needs a one-dimensional problem".into(),
        ));
    }
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!(
            "empty grid: lo = {lo}, hi = {hi}, step = {step}"
        )));
    }
    let count = ((hi - lo) / step).floor() as usize + 1;
    let at = |i: usize| lo + step * i as f64;
    let f = |w: f64| problem.full_objective(&ParamVector::scalar(w), lambda);
    let (mut best_i, mut best_f) = (0, f(lo));
    for i in 1..count {
        let v = f(at(i));
        if v < best_f {
            best_i = i;
            best_f = v;
        }
    }
    let mut best_w = at(best_i);
    // refine inside each neighbouring cell where the derivative changes sign
    let slope = |w: f64| problem.full_gradient(&ParamVector::scalar(w), lambda)[0];
    for (a, b) in [
        (best_i.checked_sub(1).map(at), Some(best_w)),
        (Some(best_w), (best_i + 1 < count).then(|| at(best_i + 1))),
    ] {
        let (Some(mut a), Some(mut b)) = (a, b) else {
            continue;
        };
        let (ga, gb) = (slope(a), slope(b));
        if !(ga < 0.0 && gb > 0.0) {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        for w in [a, b] {
            let v = f(w);
            if v < best_f {
                best_f = v;
                best_w = w;
            }
        }
    }
    Ok(FstarEstimate {
        value: best_f,
        argmin: ParamVector::scalar(best_w),
        upper_bound: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordCheck {
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic − numeric| / max(1, |analytic|)`
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub coords: Vec<CoordCheck>,
    pub max_rel_error: f64,
}

/// Central differences of the full objective on the selected coordinates.
pub fn check_gradient<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    w: &ParamVector,
    coords: &[usize],
    fd_step: f64,
) -> Result<GradientCheck> {
    if !(fd_step > 0.0) {
        return Err(Error::Config(format!(
            "fd_step must be positive, got {fd_step}"
        )));
    }
    if let Some(&c) = coords.iter().find(|&&c| c >= w.dim()) {
        return Err(Error::Config(format!("coordinate {c} out of range")));
    }
    let g = problem.full_gradient(w, lambda);
    let mut probe = w.clone();
    let mut report = Vec::with_capacity(coords.len());
    for &c in coords {
        let orig = probe[c];
        probe[c] = orig + fd_step;
        let up = problem.full_objective(&probe, lambda);
        probe[c] = orig - fd_step;
        let down = problem.full_objective(&probe, lambda);
        probe[c] = orig;
        let numeric = (up - down) / (2.0 * fd_step);
        report.push(CoordCheck {
            coord: c,
            analytic: g[c],
            numeric,
            rel_error: (g[c] - numeric).abs() / g[c].abs().max(1.0),
        });
    }
    let max_rel_error = report.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(GradientCheck {
        coords: report,
        max_rel_error,
    })
}

/// Gaussian sampler `w ~ N(mean, std² I)` for the expected-PL probe and the
/// λ-regularity probe.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSampler {
    pub mean: ParamVector,
    pub std: f64,
}

impl GaussianSampler {
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: ParamVector::zeros(dim),
            std: 1.0,
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> ParamVector {
        ParamVector::new(
            self.mean
                .iter()
                .map(|m| m + self.std * rng.normal())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlProbe {
    /// `E‖∇f‖² / (2 (E f − f*))`
    pub ratio: f64,
    pub mean_grad_sq: f64,
    pub mean_gap: f64,
}

/// Monte-Carlo expected-PL ratio under the given sampler.
pub fn expected_pl_probe<P: HomotopyProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    sampler: &GaussianSampler,
    draws: usize,
    fstar: f64,
    rng: &mut Stream,
) -> Result<PlProbe> {
    if draws < 100 {
        return Err(Error::Config(format!(
            "probe needs at least 100 draws, got {draws}"
        )));
    }
    let (mut sum_g, mut sum_f) = (0.0, 0.0);
    for _ in 0..draws {
        let w = sampler.sample(rng);
        let (f, g) = problem.full_value_and_gradient(&w, lambda);
        sum_g += g.norm_sq();
        sum_f += f;
    }
    let mean_grad_sq = sum_g / draws as f64;
    let mean_gap = sum_f / draws as f64 - fstar;
    if !(mean_gap > 0.0) {
        return Err(Error::Estimation(format!(
            "probe invalid: mean gap {mean_gap:e} is not positive"
        )));
    }
    Ok(PlProbe {
        ratio: mean_grad_sq / (2.0 * mean_gap),
        mean_grad_sq,
        mean_gap,
    })
}

/// `max |f(w, λ̃) − f(w, λ̂)| / |λ̃ − λ̂|` over random `w` from the sampler and
/// uniform `λ̃, λ̂`.
pub fn estimate_delta<P: HomotopyProblem + ?Sized>(
    problem: &P,
    sampler: &GaussianSampler,
    probes: usize,
    rng: &mut Stream,
) -> Result<f64> {
    let mut best: Option<f64> = None;
    for _ in 0..probes {
        let w = sampler.sample(rng);
        let a = rng.uniform();
        let b = rng.uniform();
        if a == b {
            continue;
        }
        let ratio =
            (problem.full_objective(&w, a) - problem.full_objective(&w, b)).abs() / (a - b).abs();
        best = Some(best.map_or(ratio, |x: f64| x.max(ratio)));
    }
    best.ok_or_else(|| Error::Estimation("no valid lambda pairs sampled".into()))
}

/// Basin estimate `B̂`: the largest mean gap from which the recorded curve
/// decreases monotonically to the end, allowing each step to rise by at most
/// `z` standard errors.
pub fn estimate_basin(mean_gaps: &[f64], std_errors: &[f64], z: f64) -> Option<f64> {
    let n = mean_gaps.len();
    if n == 0 || std_errors.len() != n {
        return None;
    }
    let mut start = n - 1;
    while start > 0 && mean_gaps[start] <= mean_gaps[start - 1] + z * std_errors[start] {
        start -= 1;
    }
    mean_gaps[start..].iter().copied().reduce(f64::max)
}

/// Collected landscape estimates for one problem at one `λ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LandscapeEstimates {
    pub lambda: f64,
    pub l_hat: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub delta_hat: Option<f64>,
    pub fstar: Option<f64>,
    pub fstar_upper_bound: bool,
    pub mu_min: Option<f64>,
    pub pl_ratio: Option<f64>,
    /// Estimator failures, as `(name, message)`.
    pub errors: Vec<(String, String)>,
}

impl LandscapeEstimates {
    /// Flat `key = value` block; missing values print as `NA`.
    pub fn to_key_value(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.17e}"));
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<18} = {v}");
        };
        line("lambda", format!("{}", self.lambda));
        line("L_hat", fmt(self.l_hat));
        line("sigma2_hat", fmt(self.sigma2_hat));
        line("delta_hat", fmt(self.delta_hat));
        line("fstar", fmt(self.fstar));
        line("fstar_upper_bound", self.fstar_upper_bound.to_string());
        line("mu_min", fmt(self.mu_min));
        line("pl_ratio", fmt(self.pl_ratio));
        for (name, msg) in &self.errors {
            line(&format!("error.{name}"), msg.clone());
        }
        out
    }
}
