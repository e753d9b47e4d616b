//! Auction simulation: market prices, payment rules, bidding strategies and
//! the campaign loop that turns won impressions into training data.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageState, GradientBank};
use crate::error::{Error, Result};
use crate::gradest::{estimate_marginal_utility, GradEstConfig, GradEstimate};
use crate::model::{train, Dataset, LogisticModel, Sample, TrainConfig};
use crate::pacing::{optimal_bid_fpa, optimal_bid_spa, PacingConfig, PacingController, WinCurve};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct Impression {
    pub index: usize,
    pub features: Vec<f64>,
    /// Revealed to the bidder only after a win.
    pub true_label: u8,
    /// Highest competing eCPM score.
    pub market_price: f64,
}

/// I.i.d. uniform market prices on `[lo, hi)`.
pub fn competitor_uniform(lo: f64, hi: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(hi > lo && lo >= 0.0) {
        return Err(Error::Config("competitor range needs hi > lo ≥ 0".into()));
    }
    let mut rng = seeded(seed);
    Ok((0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Market ceiling `p` such that a constant per-click bid `c` facing prices
/// uniform on `[0, p]` spends `budget` in expectation over `pctrs`.
pub fn calibrate_market_max(pctrs: &[f64], budget: f64, c: f64) -> Result<f64> {
    let scores: Vec<f64> = pctrs.iter().map(|p| c * p).collect();
    let total: f64 = scores.iter().sum();
    if !(budget > 0.0 && budget < total) {
        return Err(Error::Config(format!("budget {budget} must lie in (0, {total}) for calibration")));
    }
    let expected = |p: f64| scores.iter().map(|s| s * (s / p).min(1.0)).sum::<f64>();
    let s_max = scores.iter().cloned().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, scores.iter().map(|s| s * s).sum::<f64>() / budget + s_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    FirstPriceCpm,
    SecondPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mechanism {
    pub kind: MechanismKind,
    /// Score equal to the market price counts as a win when set.
    #[serde(default)]
    pub tie_wins: bool,
}

impl Mechanism {
    pub fn first_price() -> Self {
        Self { kind: MechanismKind::FirstPriceCpm, tie_wins: false }
    }

    pub fn second_price() -> Self {
        Self { kind: MechanismKind::SecondPrice, tie_wins: false }
    }

    /// Outcome of per-click `bid` at `pctr` against `market_price`:
    /// `(won, price_paid)`.
    pub fn resolve(&self, bid: f64, pctr: f64, market_price: f64) -> (bool, f64) {
        let score = pctr * bid;
        let won = bid > 0.0 && (score > market_price || (self.tie_wins && score == market_price));
        if !won {
            return (false, 0.0);
        }
        match self.kind {
            MechanismKind::FirstPriceCpm => (true, score),
            MechanismKind::SecondPrice => (true, market_price),
        }
    }
}

pub fn resolve(mechanism: MechanismKind, bid: f64, pctr: f64, market_price: f64) -> (bool, f64) {
    Mechanism { kind: mechanism, tie_wins: false }.resolve(bid, pctr, market_price)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Proposed { beta: f64 },
    ValueOnly,
    UncertaintyOnly,
    Uniform { c: f64 },
    PctrLinear { m: f64 },
}

impl Strategy {
    /// Objective weight for the strategies built on the coverage framework.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Strategy::Proposed { beta } => Some(*beta),
            Strategy::ValueOnly => Some(1.0),
            Strategy::UncertaintyOnly => Some(0.0),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Proposed { .. } => "proposed",
            Strategy::ValueOnly => "value_only",
            Strategy::UncertaintyOnly => "uncertainty_only",
            Strategy::Uniform { .. } => "uniform",
            Strategy::PctrLinear { .. } => "pctr_linear",
        }
    }
}

/// Per-click bid of `strategy` on `imp`, with the utility estimate behind it.
///
/// Framework strategies choose an eCPM score against `curve` and convert it
/// to a per-click bid by dividing by the pCTR. Every bid is cut so that a
/// first-price win cannot cost more than the remaining budget.
#[allow(clippy::too_many_arguments)]
pub fn strategy_bid(
    strategy: &Strategy,
    imp: &Impression,
    model: &LogisticModel,
    state: &CoverageState<'_>,
    controller: &PacingController,
    gradcfg: &GradEstConfig,
    mechanism: MechanismKind,
    curve: &WinCurve,
) -> Result<(f64, GradEstimate)> {
    let est = estimate_marginal_utility(model, &imp.features, imp.index as u64, state, gradcfg)?;
    if controller.exhausted() {
        return Ok((0.0, est));
    }
    let pctr = est.pctr;
    let bid = match strategy {
        Strategy::Uniform { c } => *c,
        Strategy::PctrLinear { m } => m * pctr,
        _ => {
            let score = match mechanism {
                MechanismKind::FirstPriceCpm => optimal_bid_fpa(est.utility, controller.dual_lambda, curve, None),
                MechanismKind::SecondPrice => optimal_bid_spa(est.utility, controller.dual_lambda),
            };
            score / pctr
        }
    };
    Ok((bid.min(controller.remaining() / pctr), est))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignRecord {
    pub t: usize,
    pub bid: f64,
    pub won: bool,
    pub price_paid: f64,
    pub delta: f64,
    pub lambda: f64,
    pub cum_spend: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignLog {
    pub records: Vec<CampaignRecord>,
}

impl CampaignLog {
    pub fn total_spend(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_spend)
    }

    pub fn wins(&self) -> usize {
        self.records.iter().filter(|r| r.won).count()
    }

    /// Sum of logged utilities over won auctions.
    pub fn realized_delta(&self) -> f64 {
        self.records.iter().filter(|r| r.won).map(|r| r.delta).sum()
    }

    pub fn max_payment(&self) -> f64 {
        self.records.iter().map(|r| r.price_paid).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["t", "bid", "won", "price_paid", "delta", "lambda", "cum_spend", "provenance"])?;
        for r in &self.records {
            csv.write_record([
                r.t.to_string(),
                r.bid.to_string(),
                u8::from(r.won).to_string(),
                r.price_paid.to_string(),
                r.delta.to_string(),
                r.lambda.to_string(),
                r.cum_spend.to_string(),
                r.provenance.clone(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub budget: f64,
    pub t: usize,
    pub mechanism: Mechanism,
    pub strategy: Strategy,
    pub lambda0: f64,
    pub eta: f64,
    pub period_len: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub gradest: GradEstConfig,
    pub kernel_lambda: f64,
    /// Objective weight used to log utilities for the non-framework baselines.
    pub beta: f64,
    /// Market prices are uniform on `[market_lo, market_hi]`; framework
    /// bidders use this as their win curve.
    pub market_lo: f64,
    pub market_hi: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub log: CampaignLog,
    pub won: Dataset,
    pub controller: PacingController,
    pub dual_updates: Vec<DualUpdate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualUpdate {
    pub t: usize,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub cost: f64,
    pub paced: f64,
    /// The update hit `lambda_min` or `lambda_max`.
    pub clamped: bool,
}

/// Run one strategy over `stream`.
///
/// Won impressions reveal their label; the true-label gradient is committed
/// to the coverage state and the sample joins the won set. Framework
/// strategies update the dual variable every `period_len` auctions.
pub fn run_campaign(
    stream: &[Impression],
    cfg: &CampaignConfig,
    model: &LogisticModel,
    bank: &GradientBank,
) -> Result<CampaignOutcome> {
    if stream.len() != cfg.t {
        return Err(Error::Config(format!("stream has {} impressions, config says {}", stream.len(), cfg.t)));
    }
    if cfg.t == 0 {
        return Err(Error::Config("T must be at least 1".into()));
    }
    let mut won = Dataset::empty(model.dim());
    let mut log = CampaignLog::default();
    let framework = cfg.strategy.beta().is_some();
    let beta = cfg.strategy.beta().unwrap_or(cfg.beta);
    let mut state = CoverageState::new(bank, cfg.kernel_lambda, beta)?;
    let mut controller = PacingController::new(&pacing_cfg(cfg))?;
    let curve = WinCurve::uniform(cfg.market_lo, cfg.market_hi)?;
    let gradcfg = GradEstConfig { seed: cfg.seed, ..cfg.gradest.clone() };
    gradcfg.validate()?;
    let mut dual_updates = Vec::new();

    for (t, imp) in stream.iter().enumerate() {
        let (bid, est) =
            strategy_bid(&cfg.strategy, imp, model, &state, &controller, &gradcfg, cfg.mechanism.kind, &curve)?;
        let (win, mut paid) = cfg.mechanism.resolve(bid, est.pctr, imp.market_price);
        paid = paid.min(controller.remaining());
        if win {
            let g = model.loss_gradient(&imp.features, imp.true_label)?;
            state.commit(&g, est.pctr)?;
            won.push(Sample::labeled(imp.features.clone(), imp.true_label))?;
            controller.record_spend(paid);
        }
        log.records.push(CampaignRecord {
            t: imp.index,
            bid,
            won: win,
            price_paid: paid,
            delta: est.utility,
            lambda: controller.dual_lambda,
            cum_spend: controller.spent,
            provenance: if framework { est.provenance.to_string() } else { "none".into() },
        });
        if framework && (t + 1) % cfg.period_len == 0 && controller.period_index < controller.total_periods {
            let before = controller.dual_lambda;
            let paced = controller.paced_budget(controller.period_index + 1);
            controller.update_dual_period(controller.spent);
            dual_updates.push(DualUpdate {
                t,
                lambda_before: before,
                lambda_after: controller.dual_lambda,
                cost: controller.spent,
                paced,
                clamped: controller.dual_lambda == controller.lambda_max
                    || controller.dual_lambda == controller.lambda_min,
            });
        }
    }
    Ok(CampaignOutcome { log, won, controller, dual_updates })
}

fn pacing_cfg(cfg: &CampaignConfig) -> PacingConfig {
    PacingConfig {
        lambda0: cfg.lambda0,
        lambda_min: cfg.lambda_min,
        lambda_max: cfg.lambda_max,
        eta: cfg.eta,
        budget: cfg.budget,
        period_len: cfg.period_len.max(1),
        total_periods: cfg.t.div_ceil(cfg.period_len.max(1)),
    }
}

/// Train from scratch on `initial` followed by `won`.
pub fn retrain_with_won(initial: &Dataset, won: &Dataset, cfg: &TrainConfig) -> Result<LogisticModel> {
    let data = initial.concat(won)?;
    train(&LogisticModel::zeros(initial.dim()), &data, cfg)
}

/// Fractional-knapsack optimum: items by decreasing `Δ/price`, the last one
/// taken fractionally. Items with `Δ ≤ 0` are skipped.
pub fn offline_opt_fractional(deltas: &[f64], prices: &[f64], budget: f64) -> Result<f64> {
    crate::error::check_dim(deltas.len(), prices.len())?;
    if prices.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Config("offline oracle needs positive prices".into()));
    }
    let mut items: Vec<usize> = (0..deltas.len()).filter(|&i| deltas[i] > 0.0).collect();
    items.sort_by(|&a, &b| (deltas[b] / prices[b]).total_cmp(&(deltas[a] / prices[a])));
    let mut room = budget.max(0.0);
    let mut value = 0.0;
    for i in items {
        if room <= 0.0 {
            break;
        }
        if prices[i] <= room {
            value += deltas[i];
            room -= prices[i];
        } else {
            value += deltas[i] * room / prices[i];
            room = 0.0;
        }
    }
    Ok(value)
}
