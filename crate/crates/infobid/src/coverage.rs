//! Gradient coverage `U(S)`, the composite objective `F = (1−β)U + βV`,
//! greedy selection and the regularized Fisher uncertainty it stands in for.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, norm};
use crate::rng::seeded;

pub fn kernel(g1: &[f64], g2: &[f64], lambda: f64) -> Result<f64> {
    check_dim(g1.len(), g2.len())?;
    Ok((-lambda * dist_sq(g1, g2)).exp())
}

/// Validation-set gradients at a shared anchor parameter. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBank {
    grads: Vec<Vec<f64>>,
    dim: usize,
    pub anchor_id: String,
}

impl GradientBank {
    pub fn new(grads: Vec<Vec<f64>>, anchor_id: impl Into<String>) -> Result<Self> {
        let dim = grads.first().map(Vec::len).ok_or(Error::EmptyCandidates)?;
        for g in &grads {
            check_dim(dim, g.len())?;
        }
        Ok(Self { grads, dim, anchor_id: anchor_id.into() })
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn k(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `J = Σ g gᵀ` over the bank.
    pub fn outer_sum(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dim, self.dim);
        for g in &self.grads {
            let v = DVector::from_column_slice(g);
            j.ger(1.0, &v, &v, 1.0);
        }
        j
    }

    /// One gradient per row, same numeric format as datasets.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_gradients(path, &self.grads)
    }
}

pub fn write_gradients(path: impl AsRef<Path>, grads: &[Vec<f64>]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for g in grads {
        crate::model::write_row(&mut w, g, None)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageValue {
    pub u: f64,
    pub v: f64,
    pub f: f64,
}

/// Incremental facility-location state: `maxima[x]` is the best kernel
/// similarity between validation point `x` and anything committed so far.
#[derive(Debug, Clone)]
pub struct CoverageState<'a> {
    bank: &'a GradientBank,
    pub kernel_lambda: f64,
    pub beta: f64,
    maxima: Vec<f64>,
    value_sum: f64,
    selected_count: usize,
}

impl<'a> CoverageState<'a> {
    pub fn new(bank: &'a GradientBank, kernel_lambda: f64, beta: f64) -> Result<Self> {
        if !(kernel_lambda > 0.0) {
            return Err(Error::Config("kernel_lambda must be positive".into()));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config("beta must lie in [0, 1]".into()));
        }
        Ok(Self { bank, kernel_lambda, beta, maxima: vec![0.0; bank.k()], value_sum: 0.0, selected_count: 0 })
    }

    pub fn bank(&self) -> &'a GradientBank {
        self.bank
    }

    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn selected_count(&self) -> usize {
        self.selected_count
    }

    pub fn value(&self) -> CoverageValue {
        let u: f64 = self.maxima.iter().sum();
        let v = self.value_sum;
        CoverageValue { u, v, f: (1.0 - self.beta) * u + self.beta * v }
    }

    /// `F(S ∪ {z}) − F(S)` without mutating the state.
    pub fn marginal_gain(&self, g_z: &[f64], pctr_z: f64) -> Result<f64> {
        check_dim(self.bank.dim(), g_z.len())?;
        let mut gain = 0.0;
        for (g_x, &m) in self.bank.grads().iter().zip(&self.maxima) {
            let k = (-self.kernel_lambda * dist_sq(g_x, g_z)).exp();
            if k > m {
                gain += k - m;
            }
        }
        Ok((1.0 - self.beta) * gain + self.beta * pctr_z)
    }

    pub fn commit(&mut self, g_z: &[f64], pctr_z: f64) -> Result<()> {
        check_dim(self.bank.dim(), g_z.len())?;
        for (g_x, m) in self.bank.grads().iter().zip(self.maxima.iter_mut()) {
            let k = (-self.kernel_lambda * dist_sq(g_x, g_z)).exp();
            if k > *m {
                *m = k;
            }
        }
        self.value_sum += pctr_z;
        self.selected_count += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    Surrogate,
    FimOracle,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    pub kernel_lambda: f64,
    pub beta: f64,
    /// Ridge for the Fisher oracle.
    pub gamma: f64,
    pub seed: u64,
}

/// Pick `budget_count` candidates, each `(gradient, pctr)`, greedily.
///
/// `Surrogate` maximizes the coverage gain, `FimOracle` minimizes `G_γ`,
/// `Random` draws uniformly without replacement. Ties go to the lowest index.
pub fn greedy_select(
    bank: &GradientBank,
    candidates: &[(Vec<f64>, f64)],
    budget_count: usize,
    mode: SelectMode,
    params: &SelectParams,
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if budget_count > candidates.len() {
        return Err(Error::Config(format!("budget_count {budget_count} exceeds {} candidates", candidates.len())));
    }
    for (g, _) in candidates {
        check_dim(bank.dim(), g.len())?;
    }
    match mode {
        SelectMode::Random => {
            let mut rng = seeded(params.seed);
            Ok(sample(&mut rng, candidates.len(), budget_count).into_vec())
        }
        SelectMode::Surrogate => {
            let mut state = CoverageState::new(bank, params.kernel_lambda, params.beta)?;
            let mut taken = vec![false; candidates.len()];
            let mut picks = Vec::with_capacity(budget_count);
            for _ in 0..budget_count {
                let mut best: Option<(usize, f64)> = None;
                for (i, (g, p)) in candidates.iter().enumerate() {
                    if taken[i] {
                        continue;
                    }
                    let gain = state.marginal_gain(g, *p)?;
                    if best.map_or(true, |(_, b)| gain > b) {
                        best = Some((i, gain));
                    }
                }
                let (i, _) = best.expect("budget_count ≤ candidates");
                taken[i] = true;
                state.commit(&candidates[i].0, candidates[i].1)?;
                picks.push(i);
            }
            Ok(picks)
        }
        SelectMode::FimOracle => fim_greedy(bank, candidates, budget_count, params.gamma),
    }
}

/// Greedy minimization of `G_γ` with a rank-one inverse update per pick.
///
/// Adding `z` lowers `G_γ` by `wᵀJw / (1 + zᵀw)` where `w = I_γ⁻¹ z` and `J`
/// is the bank's outer-product sum, so each candidate costs `O(d²)`.
fn fim_greedy(
    bank: &GradientBank,
    candidates: &[(Vec<f64>, f64)],
    budget_count: usize,
    gamma: f64,
) -> Result<Vec<usize>> {
    check_gamma(gamma)?;
    let d = bank.dim();
    let j = bank.outer_sum();
    let mut inv = DMatrix::<f64>::identity(d, d) / gamma;
    let zs: Vec<DVector<f64>> = candidates.iter().map(|(g, _)| DVector::from_column_slice(g)).collect();
    let mut taken = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(budget_count);
    for _ in 0..budget_count {
        let mut best: Option<(usize, f64, DVector<f64>, f64)> = None;
        for (i, z) in zs.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let w = &inv * z;
            let denom = 1.0 + z.dot(&w);
            let drop = w.dot(&(&j * &w)) / denom;
            if best.as_ref().map_or(true, |(_, b, _, _)| drop > *b) {
                best = Some((i, drop, w, denom));
            }
        }
        let (i, _, w, denom) = best.expect("budget_count ≤ candidates");
        inv.ger(-1.0 / denom, &w, &w, 1.0);
        taken[i] = true;
        picks.push(i);
    }
    Ok(picks)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Config("gamma must be positive".into()))
    }
}

fn check_grads(dim: usize, grads: &[Vec<f64>]) -> Result<()> {
    grads.iter().try_for_each(|g| check_dim(dim, g.len()))
}

/// `G_γ(S) = Σ_x g_xᵀ (Σ_z g_z g_zᵀ + γI)⁻¹ g_x` by Cholesky solves.
pub fn fisher_uncertainty(bank: &GradientBank, selected: &[Vec<f64>], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_grads(bank.dim(), selected)?;
    let d = bank.dim();
    let mut a = DMatrix::<f64>::identity(d, d) * gamma;
    for g in selected {
        let v = DVector::from_column_slice(g);
        a.ger(1.0, &v, &v, 1.0);
    }
    let chol = a.cholesky().ok_or_else(|| Error::Assumption("regularized Fisher is not positive definite".into()))?;
    Ok(bank
        .grads()
        .iter()
        .map(|g| {
            let v = DVector::from_column_slice(g);
            v.dot(&chol.solve(&v))
        })
        .sum())
}

/// Same quantity as [`fisher_uncertainty`], maintaining `I_γ⁻¹` through
/// Sherman–Morrison rank-one updates instead of factorizing.
pub fn fisher_uncertainty_sm(bank: &GradientBank, selected: &[Vec<f64>], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_grads(bank.dim(), selected)?;
    let d = bank.dim();
    let mut inv = DMatrix::<f64>::identity(d, d) / gamma;
    for g in selected {
        let z = DVector::from_column_slice(g);
        let w = &inv * &z;
        let denom = 1.0 + z.dot(&w);
        inv.ger(-1.0 / denom, &w, &w, 1.0);
    }
    Ok(bank
        .grads()
        .iter()
        .map(|g| {
            let v = DVector::from_column_slice(g);
            v.dot(&(&inv * &v))
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FisherConfig {
    pub gamma: f64,
    /// Defaults to `m²`.
    pub tau: Option<f64>,
    /// Defaults to the largest observed gradient norm.
    #[serde(rename = "grad_bound_L")]
    pub grad_bound_l: Option<f64>,
    /// Defaults to the smallest selected gradient norm.
    pub grad_floor_m: Option<f64>,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self { gamma: 1.0, tau: None, grad_bound_l: None, grad_floor_m: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub u: f64,
    pub l: f64,
    pub m: f64,
    pub tau: f64,
}

impl FisherBoundReport {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Right-hand side of the Fisher–coverage bound.
pub fn fisher_bound_rhs(k: usize, l: f64, m: f64, gamma: f64, tau: f64, kernel_lambda: f64, u: f64) -> f64 {
    let k = k as f64;
    let e = (-kernel_lambda * tau).exp();
    let coef = (2.0 * m * m - tau).powi(2) / (4.0 * gamma * gamma * (1.0 + l * l / gamma));
    k * l * l / gamma - coef * (u - k * e) / (1.0 - e)
}

/// Check `G_γ(S) ≤ rhs(U_λ(S))` for the bank and selected gradients.
///
/// `L` and `m` are measured from the gradients; configured values must be at
/// least as loose. A zero selected gradient (or empty `S`) violates the
/// non-degeneracy assumption and is reported as an error.
pub fn theorem1_bound(
    bank: &GradientBank,
    selected: &[Vec<f64>],
    cfg: &FisherConfig,
    kernel_lambda: f64,
) -> Result<FisherBoundReport> {
    check_gamma(cfg.gamma)?;
    check_grads(bank.dim(), selected)?;
    let m_obs = selected.iter().map(|g| norm(g)).fold(f64::INFINITY, f64::min);
    if selected.is_empty() || !(m_obs > 0.0) {
        return Err(Error::Assumption("selected gradients need a positive norm floor m".into()));
    }
    let l_obs = bank.grads().iter().chain(selected).map(|g| norm(g)).fold(0.0, f64::max);
    let l = cfg.grad_bound_l.unwrap_or(l_obs);
    let m = cfg.grad_floor_m.unwrap_or(m_obs);
    if l < l_obs {
        return Err(Error::Assumption(format!("L = {l} is below the observed gradient norm {l_obs}")));
    }
    if !(m > 0.0) || m > m_obs {
        return Err(Error::Assumption(format!("m = {m} must lie in (0, {m_obs}]")));
    }
    let tau = cfg.tau.unwrap_or(m * m);
    if !(tau > 0.0 && tau <= 2.0 * m * m) {
        return Err(Error::Assumption(format!("tau = {tau} must lie in (0, 2m²]")));
    }

    let u: f64 = bank
        .grads()
        .iter()
        .map(|g_x| selected.iter().map(|g_z| (-kernel_lambda * dist_sq(g_x, g_z)).exp()).fold(0.0, f64::max))
        .sum();
    let lhs = fisher_uncertainty(bank, selected, cfg.gamma)?;
    let rhs = fisher_bound_rhs(bank.k(), l, m, cfg.gamma, tau, kernel_lambda, u);
    Ok(FisherBoundReport { lhs, rhs, holds: lhs <= rhs + 1e-9, u, l, m, tau })
}
