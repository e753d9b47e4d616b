//! Label-free marginal-utility estimation at bid time.
//!
//! The true label of an impression is unknown when bidding. Confident
//! predictions use the smaller-norm hypothetical gradient as a proxy;
//! uncertain ones get a fixed exploration utility.

use std::fmt;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageState;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cosine, dist_sq, dot, norm_sq};
use crate::model::{log_loss, sigmoid, LogisticModel};
use crate::rng::{stream_rng, Rng};

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Loss gradients under each possible label: `g0 = σ̂x`, `g1 = (σ̂−1)x`.
pub fn hypothetical_gradients(model: &LogisticModel, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((model.loss_gradient(x, 0)?, model.loss_gradient(x, 1)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exploration,
    NormPickG0,
    NormPickG1,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Exploration => "exploration",
            Provenance::NormPickG0 => "norm_pick_g0",
            Provenance::NormPickG1 => "norm_pick_g1",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The smaller-norm gradient; an exact tie goes to `g0`.
pub fn norm_select(g0: Vec<f64>, g1: Vec<f64>) -> (Vec<f64>, Provenance) {
    if norm_sq(&g1) < norm_sq(&g0) {
        (g1, Provenance::NormPickG1)
    } else {
        (g0, Provenance::NormPickG0)
    }
}

/// Two-point estimate `(1/n) Σ (L(θ+μu) − L(θ−μu))/(2μ) · u` over Gaussian `u`.
pub fn zo_gradient(
    mut loss_eval: impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    mu: f64,
    n_dirs: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::Config("zo_mu must be positive".into()));
    }
    if n_dirs == 0 {
        return Err(Error::Config("zo_dirs must be at least 1".into()));
    }
    let d = theta.len();
    let mut est = vec![0.0; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for _ in 0..n_dirs {
        let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            plus[i] = theta[i] + mu * u[i];
            minus[i] = theta[i] - mu * u[i];
        }
        let diff = (loss_eval(&plus) - loss_eval(&minus)) / (2.0 * mu);
        if !diff.is_finite() {
            return Err(Error::NonFinite);
        }
        for (e, ui) in est.iter_mut().zip(&u) {
            *e += diff * ui;
        }
    }
    est.iter_mut().for_each(|e| *e /= n_dirs as f64);
    Ok(est)
}

/// Zeroth-order `(g0, g1)` for one sample. Both share the same directions.
pub fn zo_hypothetical_gradients(
    model: &LogisticModel,
    x: &[f64],
    mu: f64,
    n_dirs: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(model.dim(), x.len())?;
    let mut shared = rng.clone();
    let g0 = zo_gradient(|t| log_loss(sigmoid(dot(t, x)), 0), &model.weights, mu, n_dirs, &mut shared)?;
    let g1 = zo_gradient(|t| log_loss(sigmoid(dot(t, x)), 1), &model.weights, mu, n_dirs, rng)?;
    Ok((g0, g1))
}

/// Expected gradient under the predicted label distribution, `p·g1 + (1−p)·g0`.
pub fn pctr_weighted(g0: &[f64], g1: &[f64], p: f64) -> Vec<f64> {
    g0.iter().zip(g1).map(|(a, b)| p * b + (1.0 - p) * a).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    Analytical,
    ZerothOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradEstConfig {
    /// Gate ζ in bits; entropy above it triggers exploration.
    pub entropy_threshold: f64,
    /// Utility ū assigned on the exploration branch.
    pub exploration_utility: f64,
    pub zo_mu: f64,
    pub zo_dirs: usize,
    pub mode: GradMode,
    pub seed: u64,
}

impl Default for GradEstConfig {
    fn default() -> Self {
        Self {
            entropy_threshold: 0.3,
            exploration_utility: 1.0,
            zo_mu: 1e-3,
            zo_dirs: 5,
            mode: GradMode::Analytical,
            seed: 0,
        }
    }
}

impl GradEstConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.entropy_threshold) {
            return Err(Error::Config("entropy_threshold must lie in [0, 1]".into()));
        }
        if !(self.exploration_utility >= 0.0) {
            return Err(Error::Config("exploration_utility must be nonnegative".into()));
        }
        if !(self.zo_mu > 0.0) {
            return Err(Error::Config("zo_mu must be positive".into()));
        }
        if self.zo_dirs == 0 {
            return Err(Error::Config("zo_dirs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    /// Absent on the exploration branch.
    pub gradient: Option<Vec<f64>>,
    pub utility: f64,
    pub provenance: Provenance,
    pub entropy: f64,
    pub pctr: f64,
}

/// Gated utility of impression `index` with features `x`.
///
/// Zeroth-order draws come from the stream `(cfg.seed, index)`, so the
/// estimate does not depend on evaluation order.
pub fn estimate_marginal_utility(
    model: &LogisticModel,
    x: &[f64],
    index: u64,
    state: &CoverageState<'_>,
    cfg: &GradEstConfig,
) -> Result<GradEstimate> {
    let pctr = model.predict(x)?;
    let h = entropy(pctr);
    if h > cfg.entropy_threshold {
        return Ok(GradEstimate {
            gradient: None,
            utility: cfg.exploration_utility,
            provenance: Provenance::Exploration,
            entropy: h,
            pctr,
        });
    }
    let (g0, g1) = match cfg.mode {
        GradMode::Analytical => hypothetical_gradients(model, x)?,
        GradMode::ZerothOrder => {
            let mut rng = stream_rng(cfg.seed, index);
            zo_hypothetical_gradients(model, x, cfg.zo_mu, cfg.zo_dirs, &mut rng)?
        }
    };
    let (g, provenance) = norm_select(g0, g1);
    let utility = state.marginal_gain(&g, pctr)?;
    Ok(GradEstimate { gradient: Some(g), utility, provenance, entropy: h, pctr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracy {
    /// `None` when every truth has zero norm.
    pub mean_cosine: Option<f64>,
    pub mean_l2: f64,
    /// Zero-norm truths left out of the cosine mean.
    pub excluded: usize,
}

/// Mean cosine and mean Euclidean distance of estimates to truths. A
/// zero-norm estimate has cosine 0; a zero-norm truth is skipped for cosine.
pub fn estimator_accuracy(estimates: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<Accuracy> {
    check_dim(truths.len(), estimates.len())?;
    if truths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cos_sum = 0.0;
    let mut cos_n = 0usize;
    let mut l2_sum = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        check_dim(t.len(), e.len())?;
        l2_sum += dist_sq(e, t).sqrt();
        if norm_sq(t) > 0.0 {
            cos_sum += cosine(e, t);
            cos_n += 1;
        }
    }
    Ok(Accuracy {
        mean_cosine: (cos_n > 0).then(|| cos_sum / cos_n as f64),
        mean_l2: l2_sum / truths.len() as f64,
        excluded: truths.len() - cos_n,
    })
}
