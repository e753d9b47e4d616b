//! Monte Carlo checks of the Fisher–coverage bound and of the per-win dual
//! update's telescoping spend identity.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{num, write_summary, write_table, Report};
use crate::coverage::{theorem1_bound, FisherBoundReport, FisherConfig, GradientBank};
use crate::error::{Error, Result};
use crate::pacing::{feasibility_slack, optimal_bid_fpa, saturation_spend, PacingConfig, PacingController, WinCurve};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsConfig {
    pub seed: u64,
    pub instances: usize,
    pub d: usize,
    pub k: usize,
    pub max_selected: usize,
    pub runs: usize,
    pub auctions: usize,
    pub budget: f64,
    pub eta: f64,
    pub lambda0: f64,
    pub lambda_max: f64,
    pub value: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 100,
            d: 5,
            k: 20,
            max_selected: 15,
            runs: 30,
            auctions: 5000,
            budget: 50.0,
            eta: 0.5,
            lambda0: 0.01,
            lambda_max: 100.0,
            value: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherInstance {
    pub selected: usize,
    pub gamma: f64,
    pub kernel_lambda: f64,
    pub report: FisherBoundReport,
}

/// One random bound instance: validation gradients with random scales and a
/// selected set of perturbed copies, so coverage ranges from tight to loose.
pub fn fisher_instance(cfg: &BoundsConfig, index: usize) -> Result<FisherInstance> {
    let mut rng = stream_rng(cfg.seed, index as u64);
    let gauss = |rng: &mut crate::rng::Rng, s: f64| -> Vec<f64> {
        (0..cfg.d).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let val: Vec<Vec<f64>> = (0..cfg.k)
        .map(|_| {
            let s = rng.random_range(0.01..2.0);
            gauss(&mut rng, s)
        })
        .collect();
    let n_sel = rng.random_range(1..=cfg.max_selected);
    let jitter = rng.random_range(0.0..0.5);
    let selected: Vec<Vec<f64>> = (0..n_sel)
        .map(|_| {
            let base = &val[rng.random_range(0..cfg.k)];
            let noise = gauss(&mut rng, jitter);
            base.iter().zip(noise).map(|(a, b)| a + b).collect()
        })
        .collect();
    let gamma = rng.random_range(0.01..2.0);
    let kernel_lambda = rng.random_range(0.01..5.0);
    let bank = GradientBank::new(val, format!("bounds-{index}"))?;
    let report = theorem1_bound(&bank, &selected, &FisherConfig { gamma, ..Default::default() }, kernel_lambda)?;
    Ok(FisherInstance { selected: n_sel, gamma, kernel_lambda, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelescopeRun {
    pub run: usize,
    /// Spend accumulated while `λ` stayed below `lambda_max`.
    pub spend_unsaturated: f64,
    pub total_spend: f64,
    pub lambda_final: f64,
    pub saturated_at: Option<usize>,
    /// `|Σh − (B/η)·ln(λ/λ0)|` over the unsaturated prefix.
    pub identity_err: f64,
}

/// First-price auctions against a uniform[0, 1] competitor with per-win dual
/// updates and no hard budget stop.
pub fn telescope_run(cfg: &BoundsConfig, run: usize) -> Result<TelescopeRun> {
    let mut ctl = PacingController::new(&PacingConfig {
        lambda0: cfg.lambda0,
        lambda_min: cfg.lambda0.min(1e-6),
        lambda_max: cfg.lambda_max,
        eta: cfg.eta,
        budget: cfg.budget,
        period_len: 1,
        total_periods: cfg.auctions,
    })?;
    let curve = WinCurve::uniform(0.0, 1.0)?;
    let mut rng = stream_rng(cfg.seed ^ 0x7e1e, run as u64);
    let mut spend_unsaturated = 0.0;
    let mut identity_err: f64 = 0.0;
    let mut saturated_at = None;
    for t in 0..cfg.auctions {
        let price: f64 = rng.random_range(0.0..1.0);
        let bid = optimal_bid_fpa(cfg.value, ctl.dual_lambda, &curve, None);
        let h = if bid > price { bid } else { 0.0 };
        ctl.record_spend(h);
        ctl.update_dual_perwin(h);
        if saturated_at.is_none() {
            if ctl.saturated {
                saturated_at = Some(t);
            } else {
                spend_unsaturated += h;
                let predicted = cfg.budget / cfg.eta * (ctl.dual_lambda / cfg.lambda0).ln();
                identity_err = identity_err.max((spend_unsaturated - predicted).abs());
            }
        }
    }
    Ok(TelescopeRun {
        run,
        spend_unsaturated,
        total_spend: ctl.spent,
        lambda_final: ctl.dual_lambda,
        saturated_at,
        identity_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResult {
    pub budget: f64,
    pub eta: f64,
    pub lambda0: f64,
    pub lambda_max: f64,
    pub fisher: Vec<FisherInstance>,
    pub telescope: Vec<TelescopeRun>,
}

impl BoundsResult {
    pub fn theorem1_pass(&self) -> usize {
        self.fisher.iter().filter(|f| f.report.holds).count()
    }

    pub fn worst_slack(&self) -> f64 {
        self.fisher.iter().map(|f| f.report.slack()).fold(f64::INFINITY, f64::min)
    }

    pub fn telescope_max_err(&self) -> f64 {
        self.telescope.iter().map(|r| r.identity_err).fold(0.0, f64::max)
    }

    pub fn max_unsaturated_spend(&self) -> f64 {
        self.telescope.iter().map(|r| r.spend_unsaturated).fold(0.0, f64::max)
    }

    /// `(B/η)·ln(λ_max/λ0)`, the spend the identity allows before saturation.
    pub fn proof_bound(&self) -> f64 {
        saturation_spend(self.budget, self.lambda_max, self.lambda0, self.eta)
    }

    /// `B + ln(λ_max/λ0)/η`, the headline form of the expenditure bound.
    pub fn statement_bound(&self) -> f64 {
        self.budget + feasibility_slack(self.lambda_max, self.lambda0, self.eta)
    }
}

pub fn run(cfg: &BoundsConfig) -> Result<BoundsResult> {
    if cfg.d == 0 || cfg.k == 0 || cfg.max_selected == 0 || cfg.instances == 0 || cfg.runs == 0 {
        return Err(Error::Config("d, k, max_selected, instances and runs must be positive".into()));
    }
    let fisher = (0..cfg.instances).map(|i| fisher_instance(cfg, i)).collect::<Result<Vec<_>>>()?;
    let telescope = (0..cfg.runs).map(|r| telescope_run(cfg, r)).collect::<Result<Vec<_>>>()?;
    Ok(BoundsResult {
        budget: cfg.budget,
        eta: cfg.eta,
        lambda0: cfg.lambda0,
        lambda_max: cfg.lambda_max,
        fisher,
        telescope,
    })
}

impl Report for BoundsResult {
    fn summary(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("theorem1_pass".into(), self.theorem1_pass().into());
        m.insert("theorem1_total".into(), self.fisher.len().into());
        m.insert("theorem1_worst_slack".into(), num(self.worst_slack()));
        m.insert("telescope_max_err".into(), num(self.telescope_max_err()));
        m.insert("telescope_runs".into(), self.telescope.len().into());
        m.insert("max_unsaturated_spend".into(), num(self.max_unsaturated_spend()));
        m.insert("spend_bound_proof".into(), num(self.proof_bound()));
        m.insert("spend_bound_statement".into(), num(self.statement_bound()));
        m
    }

    fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let rows: Vec<_> = self
            .fisher
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let r = &f.report;
                vec![
                    i.to_string(),
                    f.selected.to_string(),
                    f.gamma.to_string(),
                    f.kernel_lambda.to_string(),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.slack().to_string(),
                    r.holds.to_string(),
                ]
            })
            .collect();
        write_table(
            &out.join("bounds_fisher.csv"),
            &["instance", "selected", "gamma", "kernel_lambda", "lhs", "rhs", "slack", "holds"],
            &rows,
        )?;
        let rows: Vec<_> = self
            .telescope
            .iter()
            .map(|r| {
                vec![
                    r.run.to_string(),
                    r.spend_unsaturated.to_string(),
                    r.total_spend.to_string(),
                    r.lambda_final.to_string(),
                    r.saturated_at.map_or(String::new(), |t| t.to_string()),
                    r.identity_err.to_string(),
                ]
            })
            .collect();
        write_table(
            &out.join("bounds_telescope.csv"),
            &["run", "spend_unsaturated", "total_spend", "lambda_final", "saturated_at", "identity_err"],
            &rows,
        )?;
        write_summary(out, &self.summary())
    }

    fn invariant_failures(&self) -> Vec<String> {
        let mut f = Vec::new();
        if self.theorem1_pass() != self.fisher.len() {
            f.push(format!("Fisher bound failed on {} instances", self.fisher.len() - self.theorem1_pass()));
        }
        if !(self.telescope_max_err() < 1e-9) {
            f.push(format!("telescoping identity error {}", self.telescope_max_err()));
        }
        if self.max_unsaturated_spend() > self.proof_bound() + 1e-9 {
            f.push("unsaturated spend exceeded (B/eta) ln(lambda_max/lambda0)".into());
        }
        f
    }
}
