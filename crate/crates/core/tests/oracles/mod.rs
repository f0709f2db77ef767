//! Slow, straightforward reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::HashMap;

use augsc::DenseMatrix;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn symmetric(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let r = uniform(n, n, rng);
    (&r + r.transpose()) * 0.5
}

/// Symmetric positive definite with eigenvalues at least `floor`.
pub fn spd(n: usize, floor: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let r = uniform(n, n, rng);
    &r * r.transpose() + DenseMatrix::identity(n, n) * floor
}

pub fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Solves `A X + X B = C` through `(I kron A + B^T kron I) vec(X) = vec(C)`.
pub fn sylvester_kron(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> DenseMatrix {
    let (k, m) = c.shape();
    let mut big = DenseMatrix::zeros(k * m, k * m);
    for col in 0..m {
        for i in 0..k {
            let row = col * k + i;
            for l in 0..k {
                big[(row, col * k + l)] += a[(i, l)];
            }
            for j in 0..m {
                big[(row, j * k + i)] += b[(j, col)];
            }
        }
    }
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = big.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DenseMatrix::from_column_slice(k, m, x.as_slice())
}

/// `tau * ||E||_{2,1} + 1/2 ||E - G||_F^2`.
pub fn l21_prox_objective(e: &DenseMatrix, g: &DenseMatrix, tau: f64) -> f64 {
    let l21: f64 = e.column_iter().map(|c| c.norm()).sum();
    tau * l21 + 0.5 * (e - g).norm_squared()
}

/// Prox of `tau * ||.||_{2,1}` through projected gradient on the dual:
/// `min_{||u_j|| <= 1} 1/2 ||G - tau U||^2`, then `E = G - tau U`.
pub fn l21_prox_projected_gradient(g: &DenseMatrix, tau: f64, iters: usize) -> DenseMatrix {
    let step = 0.5 / (tau * tau);
    let mut u = DenseMatrix::zeros(g.nrows(), g.ncols());
    for _ in 0..iters {
        let grad = (g - &u * tau) * (-tau);
        u -= grad * step;
        for mut col in u.column_iter_mut() {
            let norm = col.norm();
            if norm > 1.0 {
                col /= norm;
            }
        }
    }
    g - u * tau
}

/// Uniformly random `k x d` matrix with orthonormal rows.
pub fn random_row_orthonormal(k: usize, d: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = DenseMatrix::from_fn(d, k, |_, _| {
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    g.qr().q().transpose()
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&DenseMatrix) -> f64, x: &DenseMatrix, eps: f64) -> DenseMatrix {
    let mut grad = DenseMatrix::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = probe[idx];
        probe[idx] = orig + eps;
        let up = f(&probe);
        probe[idx] = orig - eps;
        let down = f(&probe);
        probe[idx] = orig;
        grad[idx] = (up - down) / (2.0 * eps);
    }
    grad
}

pub fn random_labels(n: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..c)).collect()
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut tail in permutations(rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Accuracy maximized over every injective relabeling, by enumeration.
pub fn acc_brute(pred: &[usize], truth: &[usize]) -> f64 {
    let p = distinct(pred);
    let t = distinct(truth);
    let size = p.len().max(t.len());
    let mut best = 0;
    for perm in permutations((0..size).collect()) {
        let hits = pred
            .iter()
            .zip(truth)
            .filter(|(a, b)| {
                let slot = perm[p.iter().position(|x| x == *a).unwrap()];
                slot < t.len() && t[slot] == **b
            })
            .count();
        best = best.max(hits);
    }
    best as f64 / pred.len() as f64
}

/// NMI from empirical probabilities, arithmetic-mean normalization.
pub fn nmi_direct(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pp: HashMap<usize, f64> = HashMap::new();
    let mut pt: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in pred.iter().zip(truth) {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *pp.entry(a).or_default() += 1.0 / n;
        *pt.entry(b).or_default() += 1.0 / n;
    }
    let h = |m: &HashMap<usize, f64>| -m.values().map(|p| p * p.ln()).sum::<f64>();
    let (hp, ht) = (h(&pp), h(&pt));
    if hp == 0.0 && ht == 0.0 {
        return 1.0;
    }
    let mi: f64 = joint.iter().map(|(&(a, b), &p)| p * (p / (pp[&a] * pt[&b])).ln()).sum();
    mi / ((hp + ht) / 2.0)
}

/// `(both same, same pred only, same truth only, both different)` over all pairs.
pub fn pair_counts(pred: &[usize], truth: &[usize]) -> (f64, f64, f64, f64) {
    let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..pred.len() {
        for j in (i + 1)..pred.len() {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    (ss, sd, ds, dd)
}

/// ARI in its pair-confusion form.
pub fn ari_pairs(pred: &[usize], truth: &[usize]) -> f64 {
    let (a, b, c, d) = pair_counts(pred, truth);
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (a * d - b * c) / denom
}

pub fn f1_pairs(pred: &[usize], truth: &[usize]) -> f64 {
    let (tp, fp, fn_, _) = pair_counts(pred, truth);
    if tp + fp == 0.0 && tp + fn_ == 0.0 {
        return 1.0;
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

/// Block-constant affinity: `groups[i]` samples per component, random
/// positive weight inside each component, zero across.
pub fn block_affinity(groups: &[usize], rng: &mut ChaCha8Rng) -> (DenseMatrix, Vec<usize>) {
    let labels: Vec<usize> = groups.iter().enumerate().flat_map(|(g, &s)| std::iter::repeat_n(g, s)).collect();
    let weights: Vec<f64> = groups.iter().map(|_| rng.random_range(0.5..2.0)).collect();
    let n = labels.len();
    let z = DenseMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { weights[labels[i]] } else { 0.0 });
    (z, labels)
}

/// Same partition up to renaming.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}
