//! Oracles written against the problem definition only, sharing no code
//! with the solvers under test.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_signs(rng: &mut ChaCha8Rng, m: usize) -> Vec<i8> {
    (0..m)
        .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
        .collect()
}

/// `n` random ±1 columns and labels over `m` examples.
pub fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (Vec<Vec<i8>>, Vec<i8>) {
    let cols = (0..n).map(|_| random_signs(rng, m)).collect();
    (cols, random_signs(rng, m))
}

pub fn margin(cols: &[Vec<i8>], labels: &[i8], w: &[f64], i: usize) -> f64 {
    let s: f64 = cols
        .iter()
        .zip(w)
        .map(|(c, &wj)| f64::from(c[i]) * wj)
        .sum();
    f64::from(labels[i]) * s
}

/// `Σ exp(-γ_i) + ν Σ w_j`.
pub fn l1_risk(cols: &[Vec<i8>], labels: &[i8], w: &[f64], nu: f64) -> f64 {
    let risk: f64 = (0..labels.len())
        .map(|i| (-margin(cols, labels, w, i)).exp())
        .sum();
    risk + nu * w.iter().sum::<f64>()
}

/// ℓ1 risk plus `λ` per strictly positive weight.
pub fn cp_objective(cols: &[Vec<i8>], labels: &[i8], w: &[f64], nu: f64, lambda: f64) -> f64 {
    let card = w.iter().filter(|&&v| v > 0.0).count();
    l1_risk(cols, labels, w, nu) + lambda * card as f64
}

/// Edges `Σ_i u_i y_i h_ij` of every column at `u = exp(-γ(w))`.
pub fn edges_at(cols: &[Vec<i8>], labels: &[i8], ensemble: (&[Vec<i8>], &[f64])) -> Vec<f64> {
    let u: Vec<f64> = (0..labels.len())
        .map(|i| (-margin(ensemble.0, labels, ensemble.1, i)).exp())
        .collect();
    cols.iter()
        .map(|c| {
            (0..labels.len())
                .map(|i| u[i] * f64::from(labels[i]) * f64::from(c[i]))
                .sum()
        })
        .collect()
}

/// Minimizes the ℓ1 risk over `w ≥ 0` restricted to `support` by cyclic
/// coordinate descent with the closed-form update of a ±1 column.
pub fn l1_optimum(cols: &[Vec<i8>], labels: &[i8], nu: f64, support: &[usize]) -> Vec<f64> {
    let m = labels.len();
    let mut w = vec![0.0; cols.len()];
    let mut gamma = vec![0.0f64; m];
    for _ in 0..200_000 {
        let mut moved = 0.0f64;
        for &j in support {
            let (mut plus, mut minus) = (0.0, 0.0);
            for i in 0..m {
                let e = (-gamma[i]).exp();
                if cols[j][i] == labels[i] {
                    plus += e;
                } else {
                    minus += e;
                }
            }
            // d/dδ [plus e^-δ + minus e^δ + ν δ] = 0, with x = e^δ
            let x = if minus > 0.0 {
                (-nu + (nu * nu + 4.0 * plus * minus).sqrt()) / (2.0 * minus)
            } else {
                plus / nu
            };
            let next = (w[j] + x.ln()).max(0.0);
            let delta = next - w[j];
            if delta != 0.0 {
                for i in 0..m {
                    gamma[i] += delta * f64::from(labels[i] * cols[j][i]);
                }
                w[j] = next;
            }
            moved = moved.max(delta.abs());
        }
        if moved < 1e-14 {
            break;
        }
    }
    w
}

/// Exact minimizer of `ℓ1 risk + λ card` by enumerating every support.
pub fn cp_optimum(cols: &[Vec<i8>], labels: &[i8], nu: f64, lambda: f64) -> (Vec<f64>, f64) {
    let n = cols.len();
    let mut best = (vec![0.0; n], f64::INFINITY);
    for mask in 0u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask >> j & 1 == 1).collect();
        let w = l1_optimum(cols, labels, nu, &support);
        let v = cp_objective(cols, labels, &w, nu, lambda);
        if v < best.1 {
            best = (w, v);
        }
    }
    best
}

pub fn support_of(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&j| w[j] > 0.0).collect()
}
