//! Single-batch active learning: coverage-greedy vs Fisher-greedy vs random.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{mean, num, write_summary, write_table, Report};
use crate::coverage::{greedy_select, write_gradients, GradientBank, SelectMode, SelectParams};
use crate::error::{Error, Result};
use crate::model::{evaluate, generate_synthetic, train, Dataset, LogisticModel, SynthConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp1Config {
    pub seeds: Vec<u64>,
    pub synth: SynthConfig,
    pub n_init: usize,
    pub n_test: usize,
    pub n_val: usize,
    pub budget_count: usize,
    pub kernel_lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub train: TrainConfig,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Self {
            seeds: (0..10).collect(),
            synth: SynthConfig { n: 2000, d: 20, separation: 10.0, label_noise: 0.0, seed: 0 },
            n_init: 500,
            n_test: 500,
            n_val: 500,
            budget_count: 50,
            kernel_lambda: 0.1,
            beta: 0.0,
            gamma: 1.0,
            train: TrainConfig::default(),
        }
    }
}

pub const METHODS: [SelectMode; 3] = [SelectMode::Surrogate, SelectMode::FimOracle, SelectMode::Random];

pub fn method_name(m: SelectMode) -> &'static str {
    match m {
        SelectMode::Surrogate => "surrogate",
        SelectMode::FimOracle => "fim_oracle",
        SelectMode::Random => "random",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub auc: f64,
    pub logloss: f64,
    pub selected: Vec<usize>,
    #[serde(skip)]
    pub selected_grads: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Indexed like [`METHODS`].
    pub methods: Vec<MethodResult>,
}

impl SeedResult {
    pub fn get(&self, m: SelectMode) -> &MethodResult {
        &self.methods[METHODS.iter().position(|x| *x == m).expect("known method")]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp1Result {
    pub seeds: Vec<SeedResult>,
}

impl Exp1Result {
    /// Seeds where the surrogate beats random on both AUC and log loss.
    pub fn surrogate_beats_random(&self) -> usize {
        self.seeds
            .iter()
            .filter(|s| {
                let (a, r) = (s.get(SelectMode::Surrogate), s.get(SelectMode::Random));
                a.auc > r.auc && a.logloss < r.logloss
            })
            .count()
    }

    pub fn mean_gap_to_fim(&self, m: SelectMode) -> f64 {
        mean(self.seeds.iter().map(|s| (s.get(m).auc - s.get(SelectMode::FimOracle).auc).abs()))
    }
}

fn split(cfg: &Exp1Config, data: &Dataset) -> Result<(Dataset, Dataset, Dataset, Dataset)> {
    let (a, b, c) = (cfg.n_init, cfg.n_init + cfg.n_test, cfg.n_init + cfg.n_test + cfg.n_val);
    if c >= data.len() {
        return Err(Error::Config("splits leave no candidates".into()));
    }
    Ok((data.slice(0..a), data.slice(a..b), data.slice(b..c), data.slice(c..data.len())))
}

pub(crate) fn labeled_gradients(model: &LogisticModel, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    data.samples()
        .iter()
        .enumerate()
        .map(|(i, s)| model.loss_gradient(&s.features, s.label.ok_or(Error::MissingLabel(i))?))
        .collect()
}

pub fn run_seed(cfg: &Exp1Config, seed: u64) -> Result<SeedResult> {
    let (data, _) = generate_synthetic(&SynthConfig { seed, ..cfg.synth.clone() })?;
    let (init, test, val, pool) = split(cfg, &data)?;
    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let theta0 = train(&LogisticModel::zeros(data.dim()), &init, &tcfg)?;
    let bank = GradientBank::new(labeled_gradients(&theta0, &val)?, format!("exp1-seed{seed}"))?;
    let pool_grads = labeled_gradients(&theta0, &pool)?;
    let candidates: Vec<(Vec<f64>, f64)> = pool_grads
        .iter()
        .zip(pool.samples())
        .map(|(g, s)| Ok((g.clone(), theta0.predict(&s.features)?)))
        .collect::<Result<_>>()?;
    let params = SelectParams { kernel_lambda: cfg.kernel_lambda, beta: cfg.beta, gamma: cfg.gamma, seed };

    let methods = METHODS
        .iter()
        .map(|&mode| {
            let picks = greedy_select(&bank, &candidates, cfg.budget_count, mode, &params)?;
            let chosen = init.concat(&pool.subset(&picks))?;
            let model = train(&LogisticModel::zeros(data.dim()), &chosen, &tcfg)?;
            let ev = evaluate(&model, &test)?;
            Ok(MethodResult {
                auc: ev.auc()?,
                logloss: ev.logloss,
                selected_grads: picks.iter().map(|&i| pool_grads[i].clone()).collect(),
                selected: picks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedResult { seed, methods })
}

pub fn run(cfg: &Exp1Config) -> Result<Exp1Result> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seeds must be nonempty".into()));
    }
    let seeds = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<_>>>()?;
    Ok(Exp1Result { seeds })
}

impl Report for Exp1Result {
    fn summary(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("seeds".into(), self.seeds.len().into());
        m.insert("surrogate_beats_random_both".into(), self.surrogate_beats_random().into());
        for mode in METHODS {
            let name = method_name(mode);
            m.insert(format!("{name}_mean_auc"), num(mean(self.seeds.iter().map(|s| s.get(mode).auc))));
            m.insert(format!("{name}_mean_logloss"), num(mean(self.seeds.iter().map(|s| s.get(mode).logloss))));
        }
        m.insert("surrogate_gap_to_fim".into(), num(self.mean_gap_to_fim(SelectMode::Surrogate)));
        m.insert("random_gap_to_fim".into(), num(self.mean_gap_to_fim(SelectMode::Random)));
        m
    }

    fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let mut rows = Vec::new();
        for s in &self.seeds {
            for (mode, r) in METHODS.iter().zip(&s.methods) {
                rows.push(vec![
                    s.seed.to_string(),
                    method_name(*mode).into(),
                    r.auc.to_string(),
                    r.logloss.to_string(),
                ]);
                write_gradients(
                    out.join(format!("exp1_grads_seed{}_{}.csv", s.seed, method_name(*mode))),
                    &r.selected_grads,
                )?;
            }
        }
        write_table(&out.join("exp1_metrics.csv"), &["seed", "method", "auc", "logloss"], &rows)?;
        write_summary(out, &self.summary())
    }

    fn invariant_failures(&self) -> Vec<String> {
        Vec::new()
    }
}
