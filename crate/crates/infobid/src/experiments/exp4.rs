//! End-to-end campaigns: each strategy bids over the same auction stream,
//! then a model is retrained on its won impressions and scored on held-out data.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::exp1::labeled_gradients;
use super::{mean, num, write_summary, write_table, Report};
use crate::auction::{
    calibrate_market_max, competitor_uniform, offline_opt_fractional, retrain_with_won, run_campaign, CampaignConfig,
    CampaignLog, DualUpdate, Impression, Mechanism, Strategy,
};
use crate::coverage::GradientBank;
use crate::error::{Error, Result};
use crate::gradest::{GradEstConfig, GradMode};
use crate::model::{evaluate, generate_synthetic, train, LogisticModel, SynthConfig, TrainConfig};

const MARKET_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp4Config {
    pub seeds: Vec<u64>,
    pub synth: SynthConfig,
    pub n_init: usize,
    pub n_val: usize,
    pub n_auction: usize,
    pub n_test: usize,
    pub budget: f64,
    pub mechanism: Mechanism,
    pub strategies: Vec<Strategy>,
    pub lambda0: f64,
    pub eta: f64,
    pub period_len: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub gradest: GradEstConfig,
    pub kernel_lambda: f64,
    /// Objective weight used to log utilities for non-framework baselines.
    pub beta: f64,
    /// Upper end of the uniform market price. `None` calibrates it per seed
    /// so that a constant bid of `calibration_bid` spends the budget in
    /// expectation.
    pub market_hi: Option<f64>,
    pub calibration_bid: f64,
    pub train: TrainConfig,
}

impl Default for Exp4Config {
    fn default() -> Self {
        Self {
            seeds: (0..10).collect(),
            synth: SynthConfig { n: 1800, d: 20, separation: 5.0, label_noise: 0.0, seed: 0 },
            n_init: 100,
            n_val: 100,
            n_auction: 600,
            n_test: 1000,
            budget: 600.0,
            mechanism: Mechanism::first_price(),
            strategies: vec![
                Strategy::Proposed { beta: 0.5 },
                Strategy::ValueOnly,
                Strategy::UncertaintyOnly,
                Strategy::Uniform { c: 20.0 },
                Strategy::PctrLinear { m: 45.0 },
            ],
            lambda0: 0.01,
            eta: 0.1,
            period_len: 100,
            lambda_min: 1e-6,
            lambda_max: 100.0,
            gradest: GradEstConfig {
                entropy_threshold: 0.5,
                exploration_utility: 0.1,
                zo_mu: 0.01,
                zo_dirs: 5,
                mode: GradMode::ZerothOrder,
                seed: 0,
            },
            kernel_lambda: 0.1,
            beta: 0.5,
            market_hi: None,
            calibration_bid: 20.0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub name: String,
    pub framework: bool,
    pub auc: f64,
    pub logloss: f64,
    pub log: CampaignLog,
    pub dual_updates: Vec<DualUpdate>,
    pub offline_opt: f64,
}

impl StrategyRun {
    pub fn spend(&self) -> f64 {
        self.log.total_spend()
    }

    pub fn budget_safe(&self, budget: f64) -> bool {
        self.spend() <= budget + self.log.max_payment()
    }

    /// `cum_spend` is the running sum of `price_paid`, exactly.
    pub fn log_consistent(&self) -> bool {
        let mut acc = 0.0;
        self.log.records.iter().all(|r| {
            acc += r.price_paid;
            r.cum_spend == acc && (r.won || r.price_paid == 0.0)
        })
    }

    /// Every period update moved `λ` in the direction of the pacing error.
    pub fn lambda_direction_ok(&self) -> bool {
        self.dual_updates.iter().all(|u| {
            let moved = u.lambda_after - u.lambda_before;
            let gap = u.cost - u.paced;
            if u.clamped {
                moved * gap >= 0.0
            } else {
                moved.signum() == gap.signum() || (moved == 0.0 && gap == 0.0)
            }
        })
    }

    pub fn oracle_dominates(&self) -> bool {
        self.log.realized_delta() <= self.offline_opt + 1e-9 * self.offline_opt.abs().max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub market_hi: f64,
    pub initial_auc: f64,
    pub runs: Vec<StrategyRun>,
}

impl SeedResult {
    pub fn run(&self, name: &str) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct Exp4Result {
    pub budget: f64,
    pub seeds: Vec<SeedResult>,
}

impl Exp4Result {
    /// Seeds where `proposed` retrains to an AUC at least that of `other`.
    pub fn proposed_at_least(&self, other: &str) -> usize {
        self.seeds
            .iter()
            .filter(|s| match (s.run("proposed"), s.run(other)) {
                (Some(p), Some(o)) => p.auc >= o.auc,
                _ => false,
            })
            .count()
    }

    pub fn baselines(&self) -> Vec<String> {
        self.seeds
            .first()
            .map(|s| s.runs.iter().filter(|r| r.name != "proposed").map(|r| r.name.clone()).collect())
            .unwrap_or_default()
    }

    pub fn budget_safe_seeds(&self) -> usize {
        self.seeds.iter().filter(|s| s.runs.iter().all(|r| r.budget_safe(self.budget))).count()
    }

    pub fn lambda_direction_ok(&self) -> bool {
        self.seeds.iter().all(|s| s.runs.iter().all(StrategyRun::lambda_direction_ok))
    }

    pub fn oracle_dominates(&self) -> bool {
        self.seeds.iter().all(|s| s.runs.iter().all(StrategyRun::oracle_dominates))
    }

    pub fn logs_consistent(&self) -> bool {
        self.seeds.iter().all(|s| s.runs.iter().all(StrategyRun::log_consistent))
    }
}

fn strategy_label(s: &Strategy, all: &[Strategy]) -> String {
    let base = s.name().to_string();
    // distinguish repeated kinds, e.g. two proposed variants
    if all.iter().filter(|o| o.name() == s.name()).count() > 1 {
        match s {
            Strategy::Proposed { beta } => format!("{base}_beta{beta}"),
            Strategy::Uniform { c } => format!("{base}_{c}"),
            Strategy::PctrLinear { m } => format!("{base}_{m}"),
            _ => base,
        }
    } else {
        base
    }
}

pub fn run_seed(cfg: &Exp4Config, seed: u64) -> Result<SeedResult> {
    let need = cfg.n_init + cfg.n_val + cfg.n_auction + cfg.n_test;
    let (data, _) = generate_synthetic(&SynthConfig { seed, n: need, ..cfg.synth.clone() })?;
    let a = cfg.n_init;
    let b = a + cfg.n_val;
    let c = b + cfg.n_auction;
    let init = data.slice(0..a);
    let val = data.slice(a..b);
    let auction = data.slice(b..c);
    let test = data.slice(c..need);

    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let theta0 = train(&LogisticModel::zeros(data.dim()), &init, &tcfg)?;
    let initial_auc = evaluate(&theta0, &test)?.auc()?;
    let bank = GradientBank::new(labeled_gradients(&theta0, &val)?, format!("exp4-seed{seed}"))?;

    let pctrs = auction.samples().iter().map(|s| theta0.predict(&s.features)).collect::<Result<Vec<_>>>()?;
    let market_hi = match cfg.market_hi {
        Some(h) => h,
        None => calibrate_market_max(&pctrs, cfg.budget, cfg.calibration_bid)?,
    };
    let prices = competitor_uniform(0.0, market_hi, cfg.n_auction, seed ^ MARKET_SALT)?;
    let stream: Vec<Impression> = auction
        .samples()
        .iter()
        .zip(&prices)
        .enumerate()
        .map(|(t, (s, &p))| {
            Ok(Impression {
                index: t,
                features: s.features.clone(),
                true_label: s.label.ok_or(Error::MissingLabel(t))?,
                market_price: p,
            })
        })
        .collect::<Result<_>>()?;
    let oracle_prices: Vec<f64> = prices.iter().map(|p| p.max(f64::MIN_POSITIVE)).collect();

    let runs = cfg
        .strategies
        .par_iter()
        .map(|strategy| {
            let ccfg = CampaignConfig {
                budget: cfg.budget,
                t: cfg.n_auction,
                mechanism: cfg.mechanism,
                strategy: *strategy,
                lambda0: cfg.lambda0,
                eta: cfg.eta,
                period_len: cfg.period_len,
                lambda_min: cfg.lambda_min,
                lambda_max: cfg.lambda_max,
                gradest: cfg.gradest.clone(),
                kernel_lambda: cfg.kernel_lambda,
                beta: cfg.beta,
                market_lo: 0.0,
                market_hi,
                seed,
            };
            let out = run_campaign(&stream, &ccfg, &theta0, &bank)?;
            let model = retrain_with_won(&init, &out.won, &tcfg)?;
            let ev = evaluate(&model, &test)?;
            let deltas: Vec<f64> = out.log.records.iter().map(|r| r.delta).collect();
            Ok(StrategyRun {
                name: strategy_label(strategy, &cfg.strategies),
                framework: strategy.beta().is_some(),
                auc: ev.auc()?,
                logloss: ev.logloss,
                offline_opt: offline_opt_fractional(&deltas, &oracle_prices, cfg.budget)?,
                log: out.log,
                dual_updates: out.dual_updates,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedResult { seed, market_hi, initial_auc, runs })
}

pub fn run(cfg: &Exp4Config) -> Result<Exp4Result> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seeds must be nonempty".into()));
    }
    let seeds = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<_>>>()?;
    Ok(Exp4Result { budget: cfg.budget, seeds })
}

impl Report for Exp4Result {
    fn summary(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("seeds".into(), self.seeds.len().into());
        m.insert("budget".into(), num(self.budget));
        m.insert("budget_safe_seeds".into(), self.budget_safe_seeds().into());
        m.insert("lambda_direction_ok".into(), self.lambda_direction_ok().into());
        m.insert("oracle_dominates".into(), self.oracle_dominates().into());
        m.insert("logs_consistent".into(), self.logs_consistent().into());
        for b in self.baselines() {
            m.insert(format!("proposed_auc_ge_{b}"), self.proposed_at_least(&b).into());
        }
        if let Some(first) = self.seeds.first() {
            for r in &first.runs {
                let name = &r.name;
                let runs = || self.seeds.iter().filter_map(|s| s.run(name));
                m.insert(format!("{name}_mean_auc"), num(mean(runs().map(|r| r.auc))));
                m.insert(format!("{name}_mean_logloss"), num(mean(runs().map(|r| r.logloss))));
                m.insert(format!("{name}_mean_wins"), num(mean(runs().map(|r| r.log.wins() as f64))));
                m.insert(format!("{name}_mean_spend"), num(mean(runs().map(|r| r.spend()))));
            }
        }
        m
    }

    fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let mut rows = Vec::new();
        for s in &self.seeds {
            for r in &s.runs {
                rows.push(vec![
                    s.seed.to_string(),
                    r.name.clone(),
                    r.auc.to_string(),
                    r.logloss.to_string(),
                    r.log.wins().to_string(),
                    r.spend().to_string(),
                    r.log.realized_delta().to_string(),
                    r.offline_opt.to_string(),
                    s.market_hi.to_string(),
                ]);
                r.log.write_csv(out.join(format!("exp4_log_seed{}_{}.csv", s.seed, r.name)))?;
            }
        }
        write_table(
            &out.join("exp4_metrics.csv"),
            &["seed", "strategy", "auc", "logloss", "wins", "spend", "realized_delta", "offline_opt", "market_hi"],
            &rows,
        )?;
        write_summary(out, &self.summary())
    }

    fn invariant_failures(&self) -> Vec<String> {
        let mut f = Vec::new();
        if self.budget_safe_seeds() != self.seeds.len() {
            f.push("spend exceeded budget plus one payment".into());
        }
        if !self.lambda_direction_ok() {
            f.push("dual variable moved against the pacing error".into());
        }
        if !self.oracle_dominates() {
            f.push("realized utility exceeded the offline fractional optimum".into());
        }
        if !self.logs_consistent() {
            f.push("cum_spend disagrees with the running sum of payments".into());
        }
        f
    }
}
