//! Closed-form bounds for SGD and homotopy SGD under a local expected PL
//! condition, plus a structured feasibility report.
//!
//! Notation: `ρ = 1 − αμ` is the per-step contraction, `σ²/(2μ)` the noise
//! floor, `B` the basin width, `r` the tracking radius, `δ` and `γ` the
//! λ-Lipschitz constants of the objective and of the optimal value, `ρ̃` the
//! per-homotopy-iteration contraction and `ε₀` the initial expected gap.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_rho_open(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho must lie in (0, 1), got {rho}")))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("mu must be positive, got {mu}")))
    }
}

/// Smallest `k ≥ 0` with `holds(k)`, where `holds` is monotone in `k` and
/// `estimate` is the real-valued log-ratio. The ceiling of the estimate is
/// corrected against the inequality so rounding never shifts the answer.
fn smallest_k(estimate: f64, holds: impl Fn(u64) -> bool) -> u64 {
    let mut k = if estimate.is_finite() && estimate > 0.0 {
        estimate.ceil() as u64
    } else {
        0
    };
    while !holds(k) {
        k += 1;
    }
    while k > 0 && holds(k - 1) {
        k -= 1;
    }
    k
}

fn pow(rho: f64, k: u64) -> f64 {
    if k <= i32::MAX as u64 {
        rho.powi(k as i32)
    } else {
        rho.powf(k as f64)
    }
}

/// `ρᵗ·ε + σ²/(2μ)`: expected gap after `t` SGD steps from gap `ε`.
pub fn sgd_gap_bound(t: u64, rho: f64, epsilon_init: f64, sigma2: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(epsilon_init >= 0.0) {
        return Err(Error::Domain(format!(
            "initial gap must be nonnegative, got {epsilon_init}"
        )));
    }
    Ok(pow(rho, t) * epsilon_init + sigma2 / (2.0 * mu))
}

/// `⌈log_ρ(1 − σ²/(2μr))⌉`: inner steps needed to stay within radius `r`.
pub fn kmax_tracking(rho: f64, sigma2: f64, mu: f64, r: f64) -> Result<u64> {
    check_rho_open(rho)?;
    check_mu(mu)?;
    let floor = sigma2 / (2.0 * mu);
    if !(r > floor) {
        return Err(Error::Infeasible(format!(
            "target radius {r} is inside the noise floor {floor}"
        )));
    }
    let q = 1.0 - floor / r;
    Ok(smallest_k(q.ln() / rho.ln(), |k| {
        pow(rho, k) * r + floor <= r
    }))
}

/// `⌈log_ρ(1 − (2μ(δ+γ)ε + σ²)/(2μB))⌉`: inner steps after which a warm
/// start at gap `≤ B` ends at gap `≤ B − (δ+γ)ε`.
pub fn kmax_warmstart(
    rho: f64,
    mu: f64,
    delta: f64,
    gamma: f64,
    epsilon: f64,
    sigma2: f64,
    b: f64,
) -> Result<u64> {
    check_rho_open(rho)?;
    check_mu(mu)?;
    let dg = delta + gamma;
    let floor = sigma2 / (2.0 * mu);
    let limit = (b - floor) / dg;
    if !(epsilon >= 0.0 && epsilon < limit) {
        return Err(Error::Infeasible(format!(
            "epsilon {epsilon} outside [0, {limit})"
        )));
    }
    let q = 1.0 - (2.0 * mu * dg * epsilon + sigma2) / (2.0 * mu * b);
    Ok(smallest_k(q.ln() / rho.ln(), |k| {
        pow(rho, k) * b + floor <= b - dg * epsilon
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingEpsilons {
    /// `(B − r)/(δ+γ)`
    pub eps1: f64,
    /// `((1−ρᵏ)r − σ²/(2μ)) / (ρᵏ(δ+γ))`
    pub eps2: f64,
    /// `min(ε₁, ε₂)`
    pub eps_tilde: f64,
    /// False when `ε̃ < 0` (too few inner steps or `r > B`).
    pub feasible: bool,
}

/// Largest λ-increments that preserve an `r`-tracking invariant.
#[allow(clippy::too_many_arguments)]
pub fn tracking_epsilons(
    rho: f64,
    k: u64,
    sigma2: f64,
    mu: f64,
    r: f64,
    b: f64,
    delta: f64,
    gamma: f64,
) -> Result<TrackingEpsilons> {
    check_rho_open(rho)?;
    check_mu(mu)?;
    let dg = delta + gamma;
    if !(dg > 0.0) {
        return Err(Error::Domain(format!(
            "delta + gamma must be positive, got {dg}"
        )));
    }
    let rk = pow(rho, k);
    let eps1 = (b - r) / dg;
    let eps2 = ((1.0 - rk) * r - sigma2 / (2.0 * mu)) / (rk * dg);
    let eps_tilde = eps1.min(eps2);
    Ok(TrackingEpsilons {
        eps1,
        eps2,
        eps_tilde,
        feasible: eps_tilde >= 0.0,
    })
}

/// `ρ̃ⁱ·ε₀ + σ²/(2μ)·(1 − ρ̃ⁱ)/(1 − ρ̃)`: gap bound after `i` homotopy
/// iterations.
pub fn hsgd_gap_bound(i: u64, rho_tilde: f64, epsilon0: f64, sigma2: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(rho_tilde > 0.0 && rho_tilde < 1.0) {
        return Err(Error::Domain(format!(
            "rho_tilde must lie in (0, 1), got {rho_tilde}"
        )));
    }
    let p = pow(rho_tilde, i);
    Ok(p * epsilon0 + sigma2 / (2.0 * mu) * (1.0 - p) / (1.0 - rho_tilde))
}

/// `γ = δ + κ₁κ₂`.
pub fn gamma_from_kappas(delta: f64, kappa1: f64, kappa2: f64) -> Result<f64> {
    if delta < 0.0 || kappa1 < 0.0 || kappa2 < 0.0 {
        return Err(Error::Domain(format!(
            "delta, kappa1, kappa2 must be nonnegative, got {delta}, {kappa1}, {kappa2}"
        )));
    }
    Ok(delta + kappa1 * kappa2)
}

/// One named interval test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCheck {
    pub key: String,
    pub interval: String,
    pub value: f64,
    pub pass: bool,
}

impl FeasibilityCheck {
    fn new(key: &str, interval: String, value: f64, pass: bool) -> Self {
        Self {
            key: key.to_string(),
            interval,
            value,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRateParams {
    pub c_rho_tilde: f64,
    /// 1 when `k ≥ log_ρ ρ̃ − log_ρ(1 + (δ+γ)/ε₀)` (so `C = 1`), else 2.
    pub branch: u8,
    /// `−ln(C·ρ̃)`; `+∞` when `C ≤ 0`.
    pub eta_min: f64,
    /// `ln(C·ρ̃)`, the opposite-sign variant, reported for comparison.
    pub eta_min_opposite_sign: f64,
    /// `⌈log_ρ ρ̃⌉`
    pub k_min: u64,
    pub checks: Vec<FeasibilityCheck>,
}

impl LinearRateParams {
    pub fn feasible(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Schedule parameters that yield a linear rate `ρ̃` across homotopy
/// iterations.
#[allow(clippy::too_many_arguments)]
pub fn linear_rate_schedule_params(
    rho: f64,
    k: u64,
    rho_tilde: f64,
    epsilon0: f64,
    delta: f64,
    gamma: f64,
    sigma2: f64,
    mu: f64,
    b: f64,
    r: f64,
) -> Result<LinearRateParams> {
    check_rho_open(rho)?;
    check_mu(mu)?;
    let dg = delta + gamma;
    let ln_rho = rho.ln();
    let rk = pow(rho, k);
    let floor = sigma2 / (2.0 * mu);

    let threshold = rho_tilde.ln() / ln_rho - (1.0 + dg / epsilon0).ln() / ln_rho;
    let (branch, c) = if k as f64 >= threshold {
        (1, 1.0)
    } else {
        (2, (rho_tilde - rk) / rk * epsilon0 / dg)
    };
    let product = c * rho_tilde;
    let (eta_min, eta_min_opposite_sign) = if product > 0.0 {
        (-product.ln(), product.ln())
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    };
    let k_min = if rho_tilde > 0.0 && rho_tilde <= 1.0 {
        smallest_k(rho_tilde.ln() / ln_rho, |j| pow(rho, j) <= rho_tilde)
    } else {
        0
    };

    let rt_max = 1.0 - sigma2 / (2.0 * mu * b);
    let r_floor = floor / (1.0 - rho_tilde);
    let checks = vec![
        FeasibilityCheck::new(
            "rho_tilde",
            format!("(0, {rt_max}]"),
            rho_tilde,
            rho_tilde > 0.0 && rho_tilde < 1.0 && rho_tilde <= rt_max,
        ),
        FeasibilityCheck::new(
            "r",
            format!("[{r_floor}, {b}]"),
            r,
            rho_tilde < 1.0 && r >= r_floor && r <= b,
        ),
        FeasibilityCheck::new("k", format!("[{k_min}, inf)"), k as f64, k >= k_min),
        FeasibilityCheck::new("epsilon0", "(0, inf)".into(), epsilon0, epsilon0 > 0.0),
        FeasibilityCheck::new("C_rho_tilde", "(0, 1]".into(), c, c > 0.0 && c <= 1.0),
    ];
    Ok(LinearRateParams {
        c_rho_tilde: c,
        branch,
        eta_min,
        eta_min_opposite_sign,
        k_min,
        checks,
    })
}

/// `λ_n` reachable when every increment obeys `Δλᵢ₊₁ ≤ min(e^{−ηi}, ε₁)`,
/// `i = 0..n−1`, capped at 1.
pub fn achievable_lambda(n: u64, eta: f64, eps1: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        total += (-eta * i as f64).exp().min(eps1.max(0.0));
        if total >= 1.0 {
            return 1.0;
        }
    }
    total
}

/// Input constants. Optional fields switch on the parts of the report that
/// need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConstants {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub delta: f64,
    /// Defaults to `δ + κ₁κ₂` when both kappas are given.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(default)]
    pub r: Option<f64>,
    /// Defaults to `1/L`.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub k: u64,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub rho_tilde: Option<f64>,
    #[serde(default)]
    pub epsilon0: Option<f64>,
    /// λ-increment used for the warm-start inner-step count.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub kappa1: Option<f64>,
    #[serde(default)]
    pub kappa2: Option<f64>,
}

impl TheoryConstants {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.l)
    }

    /// `1 − αμ`
    pub fn rho(&self) -> f64 {
        1.0 - self.alpha() * self.mu
    }

    pub fn gamma(&self) -> Result<f64> {
        match (self.gamma, self.kappa1, self.kappa2) {
            (Some(g), _, _) => Ok(g),
            (None, Some(k1), Some(k2)) => gamma_from_kappas(self.delta, k1, k2),
            _ => Err(Error::Config(
                "gamma missing: give gamma or both kappa1 and kappa2".into(),
            )),
        }
    }

    pub fn noise_floor(&self) -> f64 {
        self.sigma2 / (2.0 * self.mu)
    }
}

/// Everything the `theory` command prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub rho: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub noise_floor: f64,
    pub sgd_gap_bound_k: Option<f64>,
    pub kmax_tracking: Option<u64>,
    pub kmax_warmstart: Option<u64>,
    pub tracking: Option<TrackingEpsilons>,
    pub linear_rate: Option<LinearRateParams>,
    pub achievable_lambda_n: Option<f64>,
    /// `hsgd_gap_bound(i)` for `i = 0..=n`.
    pub gap_curve: Vec<f64>,
    pub checks: Vec<FeasibilityCheck>,
    pub notes: Vec<String>,
}

impl TheoryReport {
    pub fn feasible(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &FeasibilityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Aligned `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<28} {v}");
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
        let opt_u = |v: Option<u64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        kv("rho", format!("{}", self.rho));
        kv("alpha", format!("{}", self.alpha));
        kv("gamma", format!("{}", self.gamma));
        kv("noise_floor", format!("{}", self.noise_floor));
        kv("sgd_gap_bound(k)", opt(self.sgd_gap_bound_k));
        kv("kmax_tracking", opt_u(self.kmax_tracking));
        kv("kmax_warmstart", opt_u(self.kmax_warmstart));
        if let Some(t) = &self.tracking {
            kv("eps1", format!("{}", t.eps1));
            kv("eps2", format!("{}", t.eps2));
            kv("eps_tilde", format!("{}", t.eps_tilde));
        }
        if let Some(lr) = &self.linear_rate {
            kv("C_rho_tilde", format!("{}", lr.c_rho_tilde));
            kv("C_rho_tilde_branch", lr.branch.to_string());
            kv("eta_min", format!("{}", lr.eta_min));
            kv(
                "eta_min_opposite_sign",
                format!("{}", lr.eta_min_opposite_sign),
            );
            kv("k_min", lr.k_min.to_string());
        }
        kv("achievable_lambda_n", opt(self.achievable_lambda_n));
        for (i, g) in self.gap_curve.iter().enumerate() {
            kv(&format!("hsgd_gap_bound[{i}]"), format!("{g}"));
        }
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "FAIL" };
            kv(
                &format!("check.{}", c.key),
                format!("{status} value={} interval={}", c.value, c.interval),
            );
        }
        for n in &self.notes {
            kv("note", n.clone());
        }
        out
    }
}

/// Evaluates every calculator the constants allow. Violated invariants are
/// listed as failed checks; the remaining quantities are still computed.
pub fn theory_report(c: &TheoryConstants) -> Result<TheoryReport> {
    let gamma = c.gamma()?;
    let alpha = c.alpha();
    let rho = c.rho();
    let floor = c.noise_floor();
    let dg = c.delta + gamma;
    let mut checks = vec![
        FeasibilityCheck::new("mu", "(0, inf)".into(), c.mu, c.mu > 0.0),
        FeasibilityCheck::new(
            "alpha",
            format!("(0, {}]", 1.0 / c.l),
            alpha,
            alpha > 0.0 && alpha * c.l <= 1.0,
        ),
        FeasibilityCheck::new("rho", "(0, 1)".into(), rho, rho > 0.0 && rho < 1.0),
        FeasibilityCheck::new("B", format!("({floor}, inf)"), c.b, c.b > floor),
        FeasibilityCheck::new("delta+gamma", "(0, inf)".into(), dg, dg > 0.0),
    ];
    let mut notes = Vec::new();
    if let Some(r) = c.r {
        checks.push(FeasibilityCheck::new(
            "r",
            format!("({floor}, {}]", c.b),
            r,
            r > floor && r <= c.b,
        ));
    }
    if !(c.mu > 0.0 && rho > 0.0 && rho < 1.0) {
        return Ok(TheoryReport {
            rho,
            alpha,
            gamma,
            noise_floor: floor,
            sgd_gap_bound_k: None,
            kmax_tracking: None,
            kmax_warmstart: None,
            tracking: None,
            linear_rate: None,
            achievable_lambda_n: None,
            gap_curve: Vec::new(),
            checks,
            notes: vec!["rho or mu out of range; bounds not evaluated".into()],
        });
    }

    let sgd_gap_bound_k = c
        .epsilon0
        .and_then(|e0| sgd_gap_bound(c.k, rho, e0, c.sigma2, c.mu).ok());
    let kmax_tracking = c.r.and_then(|r| kmax_tracking(rho, c.sigma2, c.mu, r).ok());
    if let Some(km) = kmax_tracking {
        checks.push(FeasibilityCheck::new(
            "k>=kmax_tracking",
            format!("[{km}, inf)"),
            c.k as f64,
            c.k >= km,
        ));
    }
    let kmax_warmstart = match c.epsilon {
        Some(eps) => match kmax_warmstart(rho, c.mu, c.delta, gamma, eps, c.sigma2, c.b) {
            Ok(k) => Some(k),
            Err(e) => {
                checks.push(FeasibilityCheck::new(
                    "epsilon",
                    format!("[0, {})", (c.b - floor) / dg),
                    eps,
                    false,
                ));
                notes.push(e.to_string());
                None
            }
        },
        None => None,
    };
    let tracking = match c.r {
        Some(r) if dg > 0.0 => {
            let t = tracking_epsilons(rho, c.k, c.sigma2, c.mu, r, c.b, c.delta, gamma)?;
            checks.push(FeasibilityCheck::new(
                "eps_tilde",
                "[0, inf)".into(),
                t.eps_tilde,
                t.feasible,
            ));
            Some(t)
        }
        _ => None,
    };

    let mut linear_rate = None;
    let mut gap_curve = Vec::new();
    let mut achievable_lambda_n = None;
    if let (Some(rt), Some(e0), Some(r)) = (c.rho_tilde, c.epsilon0, c.r) {
        let lr =
            linear_rate_schedule_params(rho, c.k, rt, e0, c.delta, gamma, c.sigma2, c.mu, c.b, r)?;
        checks.extend(lr.checks.iter().cloned());
        notes.push(format!(
            "eta threshold uses -ln(C*rho_tilde) = {}; the opposite sign gives {}",
            lr.eta_min, lr.eta_min_opposite_sign
        ));
        if let Some(eta) = c.eta {
            checks.push(FeasibilityCheck::new(
                "eta",
                format!("[{}, inf)", lr.eta_min),
                eta,
                eta >= lr.eta_min,
            ));
        }
        if let Some(n) = c.n {
            let eta = c.eta.unwrap_or(lr.eta_min);
            let eps1 = (c.b - r) / dg;
            let reach = achievable_lambda(n, eta, eps1);
            if reach < 1.0 {
                notes.push(format!(
                    "increments capped by min(exp(-eta*i), eps1) reach only lambda_n = {reach}"
                ));
            }
            achievable_lambda_n = Some(reach);
            if rt > 0.0 && rt < 1.0 {
                gap_curve = (0..=n)
                    .map(|i| hsgd_gap_bound(i, rt, e0, c.sigma2, c.mu))
                    .collect::<Result<_>>()?;
            }
        }
        linear_rate = Some(lr);
    }

    Ok(TheoryReport {
        rho,
        alpha,
        gamma,
        noise_floor: floor,
        sgd_gap_bound_k,
        kmax_tracking,
        kmax_warmstart,
        tracking,
        linear_rate,
        achievable_lambda_n,
        gap_curve,
        checks,
        notes,
    })
}
