//! Try-accept hill climbing on a noisy smooth landscape: the terminal
//! gradient norm settles at a floor that rises with the reward noise.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{mean, num, write_summary, write_table, Report};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm, norm_sq};
use crate::rng::{seeded, stream_rng};

/// Mixture of isotropic Gaussian bumps `Σ a_j exp(−‖x − c_j‖²/(2w²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub centers: Vec<Vec<f64>>,
    pub amplitudes: Vec<f64>,
    pub width: f64,
}

impl Landscape {
    pub fn reward(&self, x: &[f64]) -> f64 {
        let s = 2.0 * self.width * self.width;
        self.centers.iter().zip(&self.amplitudes).map(|(c, a)| a * (-dist_sq(x, c) / s).exp()).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let w2 = self.width * self.width;
        let mut g = vec![0.0; x.len()];
        for (c, a) in self.centers.iter().zip(&self.amplitudes) {
            let e = a * (-dist_sq(x, c) / (2.0 * w2)).exp();
            for ((gi, xi), ci) in g.iter_mut().zip(x).zip(c) {
                *gi -= (xi - ci) / w2 * e;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub d: usize,
    /// Proposal radius.
    pub r: f64,
    /// Reward-noise levels ξ to sweep.
    pub xi: Vec<f64>,
    pub steps: usize,
    pub trajectories: usize,
    pub amplitudes: Vec<f64>,
    pub width: f64,
    /// Scale of the seeded bump centers and starting points.
    pub spread: f64,
    /// Explicit centers; drawn from `seed` when absent.
    pub centers: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            d: 5,
            r: 0.05,
            xi: vec![0.0, 0.1, 0.5, 1.0, 2.0],
            steps: 2000,
            trajectories: 100,
            amplitudes: vec![50.0, 40.0, 30.0],
            width: 1.5,
            spread: 1.5,
            centers: None,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn landscape(&self) -> Result<Landscape> {
        if !(self.r > 0.0) || self.amplitudes.iter().any(|a| !(*a > 0.0)) || !(self.width > 0.0) {
            return Err(Error::Config("need r > 0, width > 0 and positive amplitudes".into()));
        }
        let centers = match &self.centers {
            Some(c) => {
                if c.len() != self.amplitudes.len() || c.iter().any(|v| v.len() != self.d) {
                    return Err(Error::Config("centers must match amplitudes and d".into()));
                }
                c.clone()
            }
            None => {
                let mut rng = seeded(self.seed);
                self.amplitudes
                    .iter()
                    .map(|_| (0..self.d).map(|_| self.spread * rng.sample::<f64, _>(StandardNormal)).collect())
                    .collect()
            }
        };
        Ok(Landscape { centers, amplitudes: self.amplitudes.clone(), width: self.width })
    }
}

/// Uniform direction on the sphere of radius `r`.
pub fn sphere_step(rng: &mut impl rand::Rng, d: usize, r: f64) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&u);
        if n > 0.0 {
            return u.into_iter().map(|v| v * r / n).collect();
        }
    }
}

/// Accept `x + δ` iff its noisy reward beats a fresh noisy reading at `x`.
pub fn try_accept(landscape: &Landscape, x: &[f64], delta: &[f64], xi: f64, rng: &mut impl rand::Rng) -> bool {
    let noise = |rng: &mut _| if xi > 0.0 { Normal::new(0.0, xi).expect("xi ≥ 0").sample(rng) } else { 0.0 };
    let cand: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
    let new = landscape.reward(&cand) + noise(rng);
    let old = landscape.reward(x) + noise(rng);
    new > old
}

/// Mean `‖∇R‖²` over the final 10% of steps of one trajectory.
pub fn trajectory(cfg: &ToyConfig, landscape: &Landscape, xi: f64, rng: &mut impl rand::Rng) -> f64 {
    let mut x: Vec<f64> = (0..cfg.d).map(|_| cfg.spread * rng.sample::<f64, _>(StandardNormal)).collect();
    let tail_start = cfg.steps - cfg.steps.div_ceil(10);
    let mut acc = Vec::with_capacity(cfg.steps - tail_start);
    for t in 0..cfg.steps {
        let delta = sphere_step(rng, cfg.d, cfg.r);
        if try_accept(landscape, &x, &delta, xi, rng) {
            x.iter_mut().zip(&delta).for_each(|(a, b)| *a += b);
        }
        if t >= tail_start {
            acc.push(norm_sq(&landscape.gradient(&x)));
        }
    }
    mean(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arm {
    pub xi: f64,
    pub mean_grad_sq: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyResult {
    pub landscape: Landscape,
    pub arms: Vec<Arm>,
}

impl ToyResult {
    pub fn non_decreasing(&self) -> bool {
        self.arms.windows(2).all(|w| w[1].mean_grad_sq >= w[0].mean_grad_sq)
    }

    pub fn spearman(&self) -> f64 {
        let xs: Vec<f64> = self.arms.iter().map(|a| a.xi).collect();
        let ys: Vec<f64> = self.arms.iter().map(|a| a.mean_grad_sq).collect();
        spearman(&xs, &ys)
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(rx.iter().copied()), mean(ry.iter().copied()));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn run(cfg: &ToyConfig) -> Result<ToyResult> {
    if cfg.d == 0 || cfg.steps == 0 || cfg.trajectories == 0 || cfg.xi.is_empty() {
        return Err(Error::Config("d, steps, trajectories and xi must be nonempty".into()));
    }
    if cfg.xi.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Config("xi must be nonnegative".into()));
    }
    let landscape = cfg.landscape()?;
    let arms = cfg
        .xi
        .iter()
        .enumerate()
        .map(|(a, &xi)| {
            let vals: Vec<f64> = (0..cfg.trajectories)
                .into_par_iter()
                .map(|k| {
                    let mut rng = stream_rng(cfg.seed, (a * cfg.trajectories + k + 1) as u64);
                    trajectory(cfg, &landscape, xi, &mut rng)
                })
                .collect();
            let m = mean(vals.iter().copied());
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len().max(2) - 1) as f64;
            Arm { xi, mean_grad_sq: m, std_err: (var / vals.len() as f64).sqrt() }
        })
        .collect();
    Ok(ToyResult { landscape, arms })
}

impl Report for ToyResult {
    fn summary(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("spearman".into(), num(self.spearman()));
        m.insert("non_decreasing".into(), self.non_decreasing().into());
        for a in &self.arms {
            m.insert(format!("grad_sq_xi_{}", a.xi), num(a.mean_grad_sq));
        }
        m
    }

    fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        let rows: Vec<_> = self
            .arms
            .iter()
            .map(|a| vec![a.xi.to_string(), a.mean_grad_sq.to_string(), a.std_err.to_string()])
            .collect();
        write_table(&out.join("toy_noise_floor.csv"), &["xi", "mean_grad_sq", "std_err"], &rows)?;
        std::fs::write(out.join("toy_landscape.json"), serde_json::to_string_pretty(&self.landscape)? + "\n")?;
        write_summary(out, &self.summary())
    }

    fn invariant_failures(&self) -> Vec<String> {
        Vec::new()
    }
}
