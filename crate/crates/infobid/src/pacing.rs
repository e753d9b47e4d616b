//! Budget pacing through a multiplicative dual variable, and the per-auction
//! bid that maximizes expected budget-aware surplus.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacingConfig {
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eta: f64,
    pub budget: f64,
    pub period_len: usize,
    pub total_periods: usize,
}

impl Default for PacingConfig {
    fn default() -> Self {
        Self {
            lambda0: 0.01,
            lambda_min: 1e-6,
            lambda_max: 100.0,
            eta: 0.1,
            budget: 600.0,
            period_len: 100,
            total_periods: 6,
        }
    }
}

/// JSON view of a controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSnapshot {
    pub lambda: f64,
    pub eta: f64,
    pub budget: f64,
    pub spent: f64,
    pub period_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacingController {
    pub dual_lambda: f64,
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eta: f64,
    pub budget: f64,
    pub spent: f64,
    pub period_len: usize,
    pub total_periods: usize,
    /// Completed pacing periods.
    pub period_index: usize,
    /// Set once an update has been cut by a clamp.
    pub saturated: bool,
}

impl PacingController {
    pub fn new(cfg: &PacingConfig) -> Result<Self> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(cfg.lambda_min > 0.0 && cfg.lambda0 >= cfg.lambda_min && cfg.lambda0 <= cfg.lambda_max) {
            return bad("need 0 < lambda_min ≤ lambda0 ≤ lambda_max");
        }
        if !(cfg.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(cfg.budget >= 0.0) {
            return bad("budget must be nonnegative");
        }
        if cfg.period_len == 0 || cfg.total_periods == 0 {
            return bad("period_len and total_periods must be at least 1");
        }
        Ok(Self {
            dual_lambda: cfg.lambda0,
            lambda0: cfg.lambda0,
            lambda_min: cfg.lambda_min,
            lambda_max: cfg.lambda_max,
            eta: cfg.eta,
            budget: cfg.budget,
            spent: 0.0,
            period_len: cfg.period_len,
            total_periods: cfg.total_periods,
            period_index: 0,
            saturated: false,
        })
    }

    /// Linear schedule `B·k/K`.
    pub fn paced_budget(&self, k: usize) -> f64 {
        self.budget * k as f64 / self.total_periods as f64
    }

    pub fn remaining(&self) -> f64 {
        (self.budget - self.spent).max(0.0)
    }

    pub fn exhausted(&self) -> bool {
        self.spent >= self.budget
    }

    pub fn record_spend(&mut self, cost: f64) {
        self.spent += cost;
    }

    fn clamp_lambda(&mut self, raw: f64) {
        let clamped = if raw.is_nan() { self.lambda_max } else { raw.clamp(self.lambda_min, self.lambda_max) };
        if clamped != raw {
            self.saturated = true;
        }
        self.dual_lambda = clamped;
    }

    /// End-of-period update. With `k` periods now complete,
    /// `λ ← λ·exp(η(cost − B·k/K)/B)`, then clamped.
    pub fn update_dual_period(&mut self, realized_cost_so_far: f64) {
        let k = self.period_index + 1;
        self.period_index = k;
        if self.budget == 0.0 {
            return;
        }
        let gap = (realized_cost_so_far - self.paced_budget(k)) / self.budget;
        self.clamp_lambda(self.dual_lambda * (self.eta * gap).exp());
    }

    /// Per-auction update `λ ← λ·exp(η·h/B)`, capped at `lambda_max`.
    pub fn update_dual_perwin(&mut self, h: f64) {
        if self.budget == 0.0 {
            return;
        }
        let raw = self.dual_lambda * (self.eta * h / self.budget).exp();
        if raw > self.lambda_max {
            self.saturated = true;
            self.dual_lambda = self.lambda_max;
        } else {
            self.dual_lambda = raw;
        }
    }

    pub fn snapshot(&self) -> ControllerSnapshot {
        ControllerSnapshot {
            lambda: self.dual_lambda,
            eta: self.eta,
            budget: self.budget,
            spent: self.spent,
            period_index: self.period_index,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.snapshot())?)
    }
}

/// Win probability as a function of the bid.
#[derive(Clone)]
pub enum WinCurve {
    /// Highest competing bid uniform on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    Custom {
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        b_max: f64,
    },
}

impl fmt::Debug for WinCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WinCurve::Uniform { lo, hi } => write!(f, "Uniform {{ lo: {lo}, hi: {hi} }}"),
            WinCurve::Custom { b_max, .. } => write!(f, "Custom {{ b_max: {b_max} }}"),
        }
    }
}

impl WinCurve {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo && lo >= 0.0) {
            return Err(Error::Config("uniform win curve needs hi > lo ≥ 0".into()));
        }
        Ok(WinCurve::Uniform { lo, hi })
    }

    pub fn custom(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, b_max: f64) -> Self {
        WinCurve::Custom { eval: Arc::new(eval), b_max }
    }

    pub fn win_prob(&self, b: f64) -> f64 {
        match self {
            WinCurve::Uniform { lo, hi } => ((b - lo) / (hi - lo)).clamp(0.0, 1.0),
            WinCurve::Custom { eval, .. } => eval(b),
        }
    }

    pub fn b_max(&self) -> f64 {
        match self {
            WinCurve::Uniform { hi, .. } => *hi,
            WinCurve::Custom { b_max, .. } => *b_max,
        }
    }
}

/// First-price bid maximizing `W(b)·(Δ − λb)`; 0 means abstain.
///
/// Uniform curves use the closed form `(Δ/λ + lo)/2` clipped to `[lo, hi]`;
/// other curves fall back to [`optimal_bid_fpa_grid`]. A `grid_step` of
/// `None` uses `1e-4·b_max`.
pub fn optimal_bid_fpa(delta: f64, lambda: f64, curve: &WinCurve, grid_step: Option<f64>) -> f64 {
    if !(delta > 0.0) {
        return 0.0;
    }
    match curve {
        WinCurve::Uniform { lo, hi } => {
            let reach = delta / lambda;
            if reach <= *lo {
                0.0
            } else {
                ((reach + lo) / 2.0).clamp(*lo, *hi)
            }
        }
        WinCurve::Custom { .. } => optimal_bid_fpa_grid(delta, lambda, curve, grid_step),
    }
}

/// Grid argmax over `{0, step, …, b_max}`; the lowest bid wins ties.
pub fn optimal_bid_fpa_grid(delta: f64, lambda: f64, curve: &WinCurve, grid_step: Option<f64>) -> f64 {
    let b_max = curve.b_max();
    let step = grid_step.unwrap_or(1e-4 * b_max);
    let n = (b_max / step).round() as usize;
    let mut best = (0.0, 0.0);
    for i in 0..=n {
        let b = (i as f64 * step).min(b_max);
        let s = curve.win_prob(b) * (delta - lambda * b);
        if s > best.1 {
            best = (b, s);
        }
    }
    best.0
}

/// Second-price bid: the threshold `Δ/λ`, floored at 0.
pub fn optimal_bid_spa(delta: f64, lambda: f64) -> f64 {
    (delta / lambda).max(0.0)
}

/// Learning rate `sqrt(ln(λ_max/λ0)/T)/C`.
pub fn recommended_eta(lambda_max: f64, lambda0: f64, t: usize, c: f64) -> f64 {
    ((lambda_max / lambda0).ln() / t as f64).sqrt() / c
}

/// Learning slack `ln(λ_max/λ0)/η` on expected spend above `B`.
pub fn feasibility_slack(lambda_max: f64, lambda0: f64, eta: f64) -> f64 {
    (lambda_max / lambda0).ln() / eta
}

/// Spend reachable under per-win updates before `λ` saturates:
/// `(B/η)·ln(λ_max/λ0)`.
pub fn saturation_spend(budget: f64, lambda_max: f64, lambda0: f64, eta: f64) -> f64 {
    budget / eta * (lambda_max / lambda0).ln()
}
