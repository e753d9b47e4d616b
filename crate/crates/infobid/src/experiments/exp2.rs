//! Budget pacing under a first-price auction against one uniform competitor.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{mean, num, write_summary, write_table, Report};
use crate::error::{Error, Result};
use crate::pacing::{optimal_bid_fpa, PacingConfig, PacingController, WinCurve};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp2Config {
    pub seed: u64,
    pub trials: usize,
    pub t: usize,
    pub value: f64,
    pub competitor_lo: f64,
    pub competitor_hi: f64,
    pub period_len: usize,
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Budget used for the learning-rate sweep.
    pub budget: f64,
    pub eta_grid: Vec<f64>,
    pub budget_grid: Vec<f64>,
    /// Stop bidding once the budget is spent. Off by default so that the
    /// controller alone is responsible for hitting the target.
    pub hard_cap: bool,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 30,
            t: 5000,
            value: 1.5,
            competitor_lo: 0.0,
            competitor_hi: 1.0,
            period_len: 20,
            lambda0: 1.0,
            lambda_min: 1e-6,
            lambda_max: 100.0,
            budget: 1000.0,
            eta_grid: vec![1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4, 1e5],
            budget_grid: vec![30.0, 100.0, 300.0, 1000.0, 3000.0],
            hard_cap: false,
        }
    }
}

/// Final spend of one paced campaign. Trial `trial` draws its competitor bids
/// from its own stream, so every `(eta, budget)` cell sees the same markets.
pub fn simulate(cfg: &Exp2Config, eta: f64, budget: f64, trial: usize) -> Result<f64> {
    let mut ctl = PacingController::new(&PacingConfig {
        lambda0: cfg.lambda0,
        lambda_min: cfg.lambda_min,
        lambda_max: cfg.lambda_max,
        eta,
        budget,
        period_len: cfg.period_len,
        total_periods: cfg.t.div_ceil(cfg.period_len),
    })?;
    let curve = WinCurve::uniform(cfg.competitor_lo, cfg.competitor_hi)?;
    let mut rng = stream_rng(cfg.seed, trial as u64);
    for t in 0..cfg.t {
        let price: f64 = rng.random_range(cfg.competitor_lo..cfg.competitor_hi);
        let mut bid = optimal_bid_fpa(cfg.value, ctl.dual_lambda, &curve, None);
        if cfg.hard_cap {
            bid = bid.min(ctl.remaining());
        }
        if bid > price {
            ctl.record_spend(bid);
        }
        if (t + 1) % cfg.period_len == 0 {
            ctl.update_dual_period(ctl.spent);
        }
    }
    Ok(ctl.spent)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaRow {
    pub eta: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub budget: f64,
    pub trial: usize,
    pub spend: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp2Result {
    pub eta_sweep: Vec<EtaRow>,
    pub eta_star: f64,
    pub budget_sweep: Vec<BudgetRow>,
}

impl Exp2Result {
    pub fn mae_at(&self, i: usize) -> f64 {
        self.eta_sweep[i].mae
    }

    pub fn min_mae(&self) -> f64 {
        self.eta_sweep.iter().map(|r| r.mae).fold(f64::INFINITY, f64::min)
    }

    /// Mean signed relative error `(spend − B)/B` per budget, at `η*`.
    pub fn mean_rel_error_by_budget(&self) -> Vec<(f64, f64)> {
        let mut budgets: Vec<f64> = Vec::new();
        for r in &self.budget_sweep {
            if !budgets.contains(&r.budget) {
                budgets.push(r.budget);
            }
        }
        budgets
            .into_iter()
            .map(|b| (b, mean(self.budget_sweep.iter().filter(|r| r.budget == b).map(|r| r.rel_error))))
            .collect()
    }
}

pub fn run(cfg: &Exp2Config) -> Result<Exp2Result> {
    if cfg.eta_grid.is_empty() || cfg.budget_grid.is_empty() || cfg.trials == 0 {
        return Err(Error::Config("eta_grid, budget_grid and trials must be nonempty".into()));
    }
    if cfg.period_len == 0 {
        return Err(Error::Config("period_len must be at least 1".into()));
    }
    let eta_sweep = cfg
        .eta_grid
        .par_iter()
        .map(|&eta| {
            let errs = (0..cfg.trials)
                .map(|k| Ok((simulate(cfg, eta, cfg.budget, k)? - cfg.budget).abs() / cfg.budget))
                .collect::<Result<Vec<_>>>()?;
            Ok(EtaRow { eta, mae: mean(errs) })
        })
        .collect::<Result<Vec<_>>>()?;
    let eta_star = eta_sweep
        .iter()
        .fold(None::<&EtaRow>, |best, r| match best {
            Some(b) if b.mae <= r.mae => Some(b),
            _ => Some(r),
        })
        .map(|r| r.eta)
        .expect("nonempty grid");

    let cells: Vec<(f64, usize)> = cfg.budget_grid.iter().flat_map(|&b| (0..cfg.trials).map(move |k| (b, k))).collect();
    let budget_sweep = cells
        .par_iter()
        .map(|&(budget, trial)| {
            let spend = simulate(cfg, eta_star, budget, trial)?;
            Ok(BudgetRow { budget, trial, spend, rel_error: (spend - budget) / budget })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Exp2Result { eta_sweep, eta_star, budget_sweep })
}

impl Report for Exp2Result {
    fn summary(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("eta_star".into(), num(self.eta_star));
        m.insert("mae_min".into(), num(self.min_mae()));
        m.insert("mae_at_eta_first".into(), num(self.mae_at(0)));
        m.insert("mae_at_eta_last".into(), num(self.mae_at(self.eta_sweep.len() - 1)));
        let worst = self.mean_rel_error_by_budget().iter().map(|(_, e)| e.abs()).fold(0.0, f64::max);
        m.insert("max_abs_mean_rel_error".into(), num(worst));
        m
    }

    fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let rows: Vec<_> = self.eta_sweep.iter().map(|r| vec![r.eta.to_string(), r.mae.to_string()]).collect();
        write_table(&out.join("exp2_mae_vs_eta.csv"), &["eta", "mae"], &rows)?;
        let rows: Vec<_> = self
            .budget_sweep
            .iter()
            .map(|r| vec![r.budget.to_string(), r.trial.to_string(), r.spend.to_string(), r.rel_error.to_string()])
            .collect();
        write_table(&out.join("exp2_spend_vs_budget.csv"), &["budget", "trial", "spend", "rel_error"], &rows)?;
        let rows: Vec<_> =
            self.mean_rel_error_by_budget().iter().map(|(b, e)| vec![b.to_string(), e.to_string()]).collect();
        write_table(&out.join("exp2_rel_error_vs_budget.csv"), &["budget", "mean_rel_error"], &rows)?;
        write_summary(out, &self.summary())
    }

    fn invariant_failures(&self) -> Vec<String> {
        Vec::new()
    }
}
