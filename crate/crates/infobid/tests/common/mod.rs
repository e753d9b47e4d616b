//! Reference implementations written without the library's helpers, used as
//! oracles by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// `(U, V, F)` recomputed from the full selected set.
pub fn coverage_scratch(bank: &[Vec<f64>], selected: &[(Vec<f64>, f64)], lambda: f64, beta: f64) -> (f64, f64, f64) {
    let mut u = 0.0;
    for gx in bank {
        let mut best = 0.0f64;
        for (gz, _) in selected {
            best = best.max((-lambda * sq_dist(gx, gz)).exp());
        }
        u += best;
    }
    let v: f64 = selected.iter().map(|(_, p)| p).sum();
    (u, v, (1.0 - beta) * u + beta * v)
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    x
}

/// `Σ_x g_xᵀ (Σ_z g_z g_zᵀ + γI)⁻¹ g_x` by dense elimination.
pub fn fisher_scratch(bank: &[Vec<f64>], selected: &[Vec<f64>], gamma: f64) -> f64 {
    let d = bank[0].len();
    let mut a = vec![vec![0.0; d]; d];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = gamma;
    }
    for z in selected {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += z[i] * z[j];
            }
        }
    }
    bank.iter()
        .map(|g| {
            let x = solve(a.clone(), g.clone());
            g.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>()
        })
        .sum()
}

/// Greedy minimization of the Fisher uncertainty, recomputed per candidate.
pub fn fim_greedy_naive(bank: &[Vec<f64>], cands: &[Vec<f64>], k: usize, gamma: f64) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::new();
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..cands.len() {
            if picked.contains(&i) {
                continue;
            }
            let mut s: Vec<Vec<f64>> = picked.iter().map(|&j| cands[j].clone()).collect();
            s.push(cands[i].clone());
            let g = fisher_scratch(bank, &s, gamma);
            if best.map_or(true, |(_, b)| g < b) {
                best = Some((i, g));
            }
        }
        picked.push(best.unwrap().0);
    }
    picked
}

/// Greedy coverage maximization, recomputing `F` from scratch per candidate.
pub fn surrogate_greedy_naive(
    bank: &[Vec<f64>],
    cands: &[(Vec<f64>, f64)],
    k: usize,
    lambda: f64,
    beta: f64,
) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::new();
    for _ in 0..k {
        let sel: Vec<(Vec<f64>, f64)> = picked.iter().map(|&j| cands[j].clone()).collect();
        let base = coverage_scratch(bank, &sel, lambda, beta).2;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..cands.len() {
            if picked.contains(&i) {
                continue;
            }
            let mut s = sel.clone();
            s.push(cands[i].clone());
            let gain = coverage_scratch(bank, &s, lambda, beta).2 - base;
            if best.map_or(true, |(_, b)| gain > b) {
                best = Some((i, gain));
            }
        }
        picked.push(best.unwrap().0);
    }
    picked
}

/// Mann–Whitney AUC by counting positive/negative pairs, ties worth half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Per-sample logistic loss `−y ln σ − (1−y) ln(1−σ)` written from scratch.
pub fn logistic_loss(theta: &[f64], x: &[f64], y: u8) -> f64 {
    let z: f64 = theta.iter().zip(x).map(|(a, b)| a * b).sum();
    // ln σ(z) = −ln(1 + e^{−z}), ln(1−σ(z)) = −ln(1 + e^{z})
    if y == 1 {
        (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut p = theta.to_vec();
            let mut m = theta.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Best 0/1 knapsack value by enumerating every subset.
pub fn knapsack_exhaustive(values: &[f64], prices: &[f64], budget: f64) -> f64 {
    let n = values.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let (mut v, mut c) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                v += values[i];
                c += prices[i];
            }
        }
        if c <= budget {
            best = best.max(v);
        }
    }
    best
}

pub fn binary_entropy_nats_to_bits(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    (-(p * p.ln()) - (1.0 - p) * (1.0 - p).ln()) / std::f64::consts::LN_2
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    ab / (na * nb)
}
