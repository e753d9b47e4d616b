//! Accuracy of label-free gradient proxies against the true-label gradient.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{mean, num, write_summary, write_table, Report};
use crate::error::{Error, Result};
use crate::gradest::{entropy, hypothetical_gradients, norm_select, pctr_weighted, zo_hypothetical_gradients};
use crate::linalg::{cosine, dist_sq};
use crate::model::{generate_synthetic, train, LogisticModel, SynthConfig, TrainConfig};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp3Config {
    pub seeds: Vec<u64>,
    pub synth: SynthConfig,
    pub n_train: usize,
    pub entropy_threshold: f64,
    pub zo_mu: f64,
    pub zo_dirs: usize,
    /// Consecutive test samples that share one set of ZO directions.
    pub zo_batch: usize,
    pub train: TrainConfig,
}

impl Default for Exp3Config {
    fn default() -> Self {
        Self {
            seeds: (0..10).collect(),
            synth: SynthConfig { n: 2000, d: 20, separation: 5.0, label_noise: 0.0, seed: 0 },
            n_train: 500,
            entropy_threshold: 0.3,
            zo_mu: 0.01,
            zo_dirs: 20,
            zo_batch: 1,
            train: TrainConfig::default(),
        }
    }
}

pub const METHODS: [&str; 4] = ["analytical", "zo", "pctr_weighted", "random"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub index: usize,
    pub pctr: f64,
    pub entropy: f64,
    pub correct: bool,
    /// Cosine and L2 distance per method, ordered like [`METHODS`].
    pub cosine: [f64; 4],
    pub l2: [f64; 4],
    /// Analytical proxy equals the true-label gradient bit for bit.
    pub analytical_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub rows: Vec<SampleRow>,
    pub zeta: f64,
}

impl SeedResult {
    fn select(&self, high_conf: bool) -> impl Iterator<Item = &SampleRow> {
        self.rows.iter().filter(move |r| !high_conf || r.entropy <= self.zeta)
    }

    /// Mean cosine per method over all samples or the `H ≤ ζ` subset.
    pub fn mean_cosine(&self, high_conf: bool) -> [f64; 4] {
        std::array::from_fn(|m| mean(self.select(high_conf).map(|r| r.cosine[m])))
    }

    pub fn mean_l2(&self, high_conf: bool) -> [f64; 4] {
        std::array::from_fn(|m| mean(self.select(high_conf).map(|r| r.l2[m])))
    }

    pub fn ordering_holds(&self) -> bool {
        let c = self.mean_cosine(true);
        c[0] >= c[1] && c[1] >= c[2] && c[2] >= c[3]
    }

    pub fn correct_analytical_cosine(&self) -> f64 {
        mean(self.rows.iter().filter(|r| r.correct).map(|r| r.cosine[0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp3Result {
    pub seeds: Vec<SeedResult>,
}

impl Exp3Result {
    pub fn ordering_count(&self) -> usize {
        self.seeds.iter().filter(|s| s.ordering_holds()).count()
    }

    pub fn all_correct_exact(&self) -> bool {
        self.seeds.iter().all(|s| s.rows.iter().filter(|r| r.correct).all(|r| r.analytical_exact && r.cosine[0] == 1.0))
    }
}

pub fn run_seed(cfg: &Exp3Config, seed: u64) -> Result<SeedResult> {
    let (data, _) = generate_synthetic(&SynthConfig { seed, ..cfg.synth.clone() })?;
    if cfg.n_train >= data.len() {
        return Err(Error::Config("n_train leaves no test samples".into()));
    }
    if cfg.zo_batch == 0 {
        return Err(Error::Config("zo_batch must be at least 1".into()));
    }
    let model = train(
        &LogisticModel::zeros(data.dim()),
        &data.slice(0..cfg.n_train),
        &TrainConfig { seed, ..cfg.train.clone() },
    )?;
    let test = data.slice(cfg.n_train..data.len());
    let mut guess_rng = stream_rng(seed, u64::MAX);
    let mut rows = Vec::with_capacity(test.len());
    for (i, s) in test.samples().iter().enumerate() {
        let y = s.label.ok_or(Error::MissingLabel(i))?;
        let x = &s.features;
        let p = model.predict(x)?;
        let truth = model.loss_gradient(x, y)?;
        let (g0, g1) = hypothetical_gradients(&model, x)?;
        let (analytical, _) = norm_select(g0.clone(), g1.clone());
        let mut zo_rng = stream_rng(seed, (i / cfg.zo_batch) as u64);
        let (z0, z1) = zo_hypothetical_gradients(&model, x, cfg.zo_mu, cfg.zo_dirs, &mut zo_rng)?;
        let (zo, _) = norm_select(z0, z1);
        let weighted = pctr_weighted(&g0, &g1, p);
        let random = if guess_rng.random::<bool>() { g1.clone() } else { g0.clone() };

        let ests = [&analytical, &zo, &weighted, &random];
        rows.push(SampleRow {
            index: i,
            pctr: p,
            entropy: entropy(p),
            correct: u8::from(p > 0.5) == y,
            cosine: ests.map(|e| cosine(e, &truth)),
            l2: ests.map(|e| dist_sq(e, &truth).sqrt()),
            analytical_exact: analytical == truth,
        });
    }
    Ok(SeedResult { seed, rows, zeta: cfg.entropy_threshold })
}

pub fn run(cfg: &Exp3Config) -> Result<Exp3Result> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seeds must be nonempty".into()));
    }
    let seeds = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<_>>>()?;
    Ok(Exp3Result { seeds })
}

impl Report for Exp3Result {
    fn summary(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("seeds".into(), self.seeds.len().into());
        m.insert("ordering_holds".into(), self.ordering_count().into());
        m.insert("correct_subset_exact".into(), self.all_correct_exact().into());
        for (k, name) in METHODS.iter().enumerate() {
            m.insert(format!("{name}_cosine_all"), num(mean(self.seeds.iter().map(|s| s.mean_cosine(false)[k]))));
            m.insert(format!("{name}_cosine_high_conf"), num(mean(self.seeds.iter().map(|s| s.mean_cosine(true)[k]))));
            m.insert(format!("{name}_l2_high_conf"), num(mean(self.seeds.iter().map(|s| s.mean_l2(true)[k]))));
        }
        m
    }

    fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let mut rows = Vec::new();
        for s in &self.seeds {
            for r in &s.rows {
                for (k, name) in METHODS.iter().enumerate() {
                    rows.push(vec![
                        s.seed.to_string(),
                        r.index.to_string(),
                        r.pctr.to_string(),
                        r.entropy.to_string(),
                        (*name).into(),
                        r.cosine[k].to_string(),
                        r.l2[k].to_string(),
                    ]);
                }
            }
        }
        write_table(
            &out.join("exp3_samples.csv"),
            &["seed", "index", "pctr", "entropy", "method", "cosine", "l2"],
            &rows,
        )?;

        let mut rows = Vec::new();
        for s in &self.seeds {
            for (subset, hc) in [("all", false), ("high_conf", true)] {
                let (c, l) = (s.mean_cosine(hc), s.mean_l2(hc));
                for (k, name) in METHODS.iter().enumerate() {
                    rows.push(vec![
                        s.seed.to_string(),
                        subset.into(),
                        (*name).into(),
                        c[k].to_string(),
                        l[k].to_string(),
                    ]);
                }
            }
        }
        write_table(&out.join("exp3_summary.csv"), &["seed", "subset", "method", "mean_cosine", "mean_l2"], &rows)?;
        write_summary(out, &self.summary())
    }

    fn invariant_failures(&self) -> Vec<String> {
        if self.all_correct_exact() {
            Vec::new()
        } else {
            vec!["analytical proxy differs from the true-label gradient on a correct prediction".into()]
        }
    }
}
