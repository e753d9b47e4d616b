//! Intercept-free logistic pCTR model, synthetic data and evaluation.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::seeded;

/// Probability clamp keeping `log_loss` finite.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Option<u8>,
}

impl Sample {
    pub fn labeled(features: Vec<f64>, label: u8) -> Self {
        Self { features, label: Some(label) }
    }

    pub fn unlabeled(features: Vec<f64>) -> Self {
        Self { features, label: None }
    }
}

/// Ordered samples of a common dimension. The index of a sample identifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            check_dim(dim, s.features.len())?;
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            if let Some(y) = s.label {
                if y > 1 {
                    return Err(Error::Config(format!("label {y} is not binary")));
                }
            }
        }
        Ok(Self { dim, samples })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, samples: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn push(&mut self, s: Sample) -> Result<()> {
        check_dim(self.dim, s.features.len())?;
        self.samples.push(s);
        Ok(())
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { dim: self.dim, samples: indices.iter().map(|&i| self.samples[i].clone()).collect() }
    }

    /// Contiguous index range as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self { dim: self.dim, samples: self.samples[range].to_vec() }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if !other.is_empty() {
            check_dim(self.dim, other.dim)?;
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(Self { dim: self.dim, samples })
    }

    pub fn labels(&self) -> Result<Vec<u8>> {
        self.samples.iter().enumerate().map(|(i, s)| s.label.ok_or(Error::MissingLabel(i))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(sigmoid(dot(&self.weights, x)))
    }

    /// Exact log-loss gradient in θ: `(σ̂ − y)·x`.
    pub fn loss_gradient(&self, x: &[f64], y: u8) -> Result<Vec<f64>> {
        let r = self.predict(x)? - f64::from(y);
        Ok(x.iter().map(|v| r * v).collect())
    }

    pub fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for (i, s) in data.samples().iter().enumerate() {
            let y = s.label.ok_or(Error::MissingLabel(i))?;
            total += log_loss(self.predict(&s.features)?, y);
        }
        Ok(total / data.len() as f64)
    }
}

pub fn log_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_reg: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Full-batch descent; converges on the desk-scale datasets used here.
    fn default() -> Self {
        Self { learning_rate: 0.5, epochs: 300, batch_size: usize::MAX, l2_reg: 1e-3, seed: 0 }
    }
}

/// Mini-batch gradient descent on mean log loss plus `l2_reg·‖θ‖²/2`.
///
/// Batches are reshuffled every epoch from `cfg.seed` unless one batch covers
/// the whole dataset, in which case the sample order is kept.
pub fn train(model: &LogisticModel, data: &Dataset, cfg: &TrainConfig) -> Result<LogisticModel> {
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("learning_rate must be positive".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(model.dim(), data.dim())?;
    let labels = data.labels()?;
    let n = data.len();
    let d = model.dim();
    let mut theta = model.weights.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded(cfg.seed);
    let batch = cfg.batch_size.min(n);
    let mut grad = vec![0.0; d];

    for _ in 0..cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let x = &data.get(i).features;
                let r = sigmoid(dot(&theta, x)) - f64::from(labels[i]);
                for (g, v) in grad.iter_mut().zip(x) {
                    *g += r * v;
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= cfg.learning_rate * (g * inv + cfg.l2_reg * *t);
            }
        }
    }
    Ok(LogisticModel::new(theta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub separation: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n: 2000, d: 20, separation: 10.0, label_noise: 0.0, seed: 0 }
    }
}

/// Logistic-teacher data: `x ~ N(0, I)`, `y ~ Bernoulli(σ(w·x))` with
/// `w = separation·w*` for a seeded unit `w*`, then each label flipped with
/// probability `label_noise`. Returns the dataset and `w`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, Vec<f64>)> {
    if cfg.n == 0 || cfg.d == 0 {
        return Err(Error::Config("synthetic data needs n ≥ 1 and d ≥ 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.label_noise) {
        return Err(Error::Config("label_noise must lie in [0, 1]".into()));
    }
    let mut rng = seeded(cfg.seed);
    let mut dir: Vec<f64> = (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect();
    let len = norm(&dir);
    dir.iter_mut().for_each(|v| *v *= cfg.separation / len);

    let mut samples = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x: Vec<f64> = (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect();
        let p = sigmoid(dot(&dir, &x));
        let mut y = u8::from(rng.random::<f64>() < p);
        if rng.random::<f64>() < cfg.label_noise {
            y = 1 - y;
        }
        samples.push(Sample::labeled(x, y));
    }
    Ok((Dataset { dim: cfg.d, samples }, dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    /// `None` when the data hold a single class.
    pub auc: Option<f64>,
    pub logloss: f64,
}

impl Evaluation {
    pub fn auc(&self) -> Result<f64> {
        self.auc.ok_or(Error::SingleClass)
    }
}

pub fn evaluate(model: &LogisticModel, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = data.labels()?;
    let scores = data.samples().iter().map(|s| model.predict(&s.features)).collect::<Result<Vec<_>>>()?;
    let logloss = scores.iter().zip(&labels).map(|(&p, &y)| log_loss(p, y)).sum::<f64>() / labels.len() as f64;
    let auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation { auc, logloss })
}

/// Rank-statistic AUC; tied scores share their average rank.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_dim(scores.len(), labels.len())?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let avg = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += avg * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Read comma-separated reals, label last when `has_label`. No header.
pub fn load_csv(path: impl AsRef<Path>, has_label: bool) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?, has_label)
}

pub fn read_csv(reader: impl Read, has_label: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut dim: Option<usize> = None;
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let mut vals = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("cannot parse {field:?} as a number") })?;
            vals.push(v);
        }
        let label = if has_label {
            let y = vals.pop().ok_or_else(|| Error::Parse { row, msg: "missing label".into() })?;
            if y != 0.0 && y != 1.0 {
                return Err(Error::Parse { row, msg: format!("label {y} is not 0 or 1") });
            }
            Some(y as u8)
        } else {
            None
        };
        match dim {
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(Error::Parse { row, msg: format!("expected {d} features, found {}", vals.len()) })
            }
            _ => {}
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { row, msg: "non-finite value".into() });
        }
        samples.push(Sample { features: vals, label });
    }
    Ok(Dataset { dim: dim.unwrap_or(0), samples })
}

/// Write in the format `load_csv` reads, 17 significant digits per value.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset(w: &mut impl Write, data: &Dataset) -> Result<()> {
    for s in data.samples() {
        write_row(w, &s.features, s.label)?;
    }
    Ok(())
}

pub(crate) fn write_row(w: &mut impl Write, values: &[f64], label: Option<u8>) -> Result<()> {
    let mut line = values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
    if let Some(y) = label {
        line.push_str(&format!(",{y}"));
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    Ok(())
}
