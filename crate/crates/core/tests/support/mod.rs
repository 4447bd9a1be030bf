//! Test-only oracles for the synthetic testbed, computed straight from the
//! spec's gain table without going through the rendered image.

#![allow(dead_code)]

use latent_probe::models::{Control, SyntheticSpec};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let t: f64 = e.iter().sum();
    e.into_iter().map(|v| v / t).collect()
}

/// Dense `L x N` gain matrix.
pub fn gain_matrix(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; spec.n]; spec.l];
    for (l, controls) in spec.control_map.iter().enumerate() {
        for c in controls {
            g[l][c.dim] += c.gain;
        }
    }
    g
}

pub fn logits(gains: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    gains
        .iter()
        .map(|row| row.iter().zip(z).map(|(g, v)| g * v).sum())
        .collect()
}

pub fn probs(gains: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    softmax(&logits(gains, z))
}

/// `dS_j / dz` of `softmax(G z)`: `S_j * (G_j - sum_l S_l G_l)`.
pub fn prob_gradient(gains: &[Vec<f64>], z: &[f64], j: usize) -> Vec<f64> {
    let s = probs(gains, z);
    let n = z.len();
    (0..n)
        .map(|i| {
            let mean: f64 = (0..gains.len()).map(|l| s[l] * gains[l][i]).sum();
            s[j] * (gains[j][i] - mean)
        })
        .collect()
}

/// Analytic gradient of `mean_b(1 - |S_j(z_b + xi w) - S_j(z_b)|) + lambda ||w||_2`.
pub fn single_objective_gradient(
    gains: &[Vec<f64>],
    bases: &[Vec<f64>],
    j: usize,
    w: &[f64],
    xi: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = w.len();
    let mut grad = vec![0.0; n];
    for z in bases {
        let moved: Vec<f64> = z.iter().zip(w).map(|(a, b)| a + xi * b).collect();
        let delta = probs(gains, &moved)[j] - probs(gains, z)[j];
        let dz = prob_gradient(gains, &moved, j);
        for i in 0..n {
            grad[i] -= delta.signum() * xi * dz[i] / bases.len() as f64;
        }
    }
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for i in 0..n {
            grad[i] += lambda * w[i] / norm;
        }
    }
    grad
}

/// One control dim per class, gain `gain`, dims drawn by seed.
pub fn one_per_class(n: usize, l: usize, gain: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec::disjoint(n, l, 1, gain, seed).unwrap()
}

/// Class `j` and `k` share dim 0 with opposite gains; every other class owns
/// one dim of gain 2.
pub fn opposed(n: usize, l: usize, j: usize, k: usize, gain: f64) -> SyntheticSpec {
    let mut next = 1;
    let control_map = (0..l)
        .map(|c| {
            if c == j {
                vec![Control { dim: 0, gain: -gain }]
            } else if c == k {
                vec![Control { dim: 0, gain }]
            } else {
                next += 1;
                vec![Control { dim: next - 1, gain: 2.0 }]
            }
        })
        .collect();
    SyntheticSpec::new(n, control_map)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm
}
