//! Small dense-vector helpers shared across modules.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
/// Identical nonzero vectors give exactly 1.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let den = norm(a) * norm(b);
    if den == 0.0 {
        0.0
    } else if a == b {
        1.0
    } else {
        (dot(a, b) / den).clamp(-1.0, 1.0)
    }
}
