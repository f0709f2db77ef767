//! External clustering quality measures and multi-trial aggregation.
//!
//! All measures compare a predicted partition against ground truth and are
//! invariant to renaming cluster ids on either side.

use std::collections::BTreeMap;
use std::fmt;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contingency table of two labelings over the same samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    /// `counts[i][j]`: samples in predicted cluster `i` and true cluster `j`.
    pub counts: Vec<Vec<u64>>,
    pub pred_sizes: Vec<u64>,
    pub true_sizes: Vec<u64>,
    pub n: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0);
    }
    for (k, v) in ids.iter_mut().enumerate() {
        *v.1 = k;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl Contingency {
    pub fn new(predicted: &[usize], truth: &[usize]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::contract(format!(
                "label length mismatch: {} predicted vs {} true",
                predicted.len(),
                truth.len()
            )));
        }
        if predicted.is_empty() {
            return Err(Error::contract("cannot score an empty labeling"));
        }
        let (p, kp) = compact(predicted);
        let (t, kt) = compact(truth);
        let mut counts = vec![vec![0u64; kt]; kp];
        for (&a, &b) in p.iter().zip(&t) {
            counts[a][b] += 1;
        }
        let pred_sizes = counts.iter().map(|r| r.iter().sum()).collect();
        let true_sizes = (0..kt).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            pred_sizes,
            true_sizes,
            n: predicted.len() as u64,
        })
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().flatten().copied()
    }
}

fn pairs(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Best fraction of matched samples under a one-to-one map between cluster ids.
pub fn acc(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = Contingency::new(predicted, truth)?;
    let size = t.pred_sizes.len().max(t.true_sizes.len());
    let mut weights = Matrix::new(size, size, 0i64);
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            weights[(i, j)] = c as i64;
        }
    }
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / t.n as f64)
}

fn entropy(sizes: &[u64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the arithmetic mean of the two entropies.
pub fn nmi(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = Contingency::new(predicted, truth)?;
    let n = t.n as f64;
    let hp = entropy(&t.pred_sizes, n);
    let ht = entropy(&t.true_sizes, n);
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (t.pred_sizes[i] as f64 * t.true_sizes[j] as f64)).ln();
            }
        }
    }
    Ok((mi / ((hp + ht) / 2.0)).clamp(0.0, 1.0))
}

/// Adjusted Rand index under the permutation model.
pub fn ari(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = Contingency::new(predicted, truth)?;
    let index: f64 = t.cells().map(pairs).sum();
    let a: f64 = t.pred_sizes.iter().copied().map(pairs).sum();
    let b: f64 = t.true_sizes.iter().copied().map(pairs).sum();
    let total = pairs(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// F1 over the set of sample pairs placed in the same cluster.
pub fn pairwise_f1(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = Contingency::new(predicted, truth)?;
    let tp: f64 = t.cells().map(pairs).sum();
    let pred_pairs: f64 = t.pred_sizes.iter().copied().map(pairs).sum();
    let true_pairs: f64 = t.true_sizes.iter().copied().map(pairs).sum();
    if pred_pairs == 0.0 && true_pairs == 0.0 {
        return Ok(1.0);
    }
    if tp == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp / (pred_pairs + true_pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub f1: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 4] = ["acc", "nmi", "ari", "f1"];

    pub fn as_array(&self) -> [f64; 4] {
        [self.acc, self.nmi, self.ari, self.f1]
    }
}

pub fn evaluate(predicted: &[usize], truth: &[usize]) -> Result<MetricSet> {
    Ok(MetricSet {
        acc: acc(predicted, truth)?,
        nmi: nmi(predicted, truth)?,
        ari: ari(predicted, truth)?,
        f1: pairwise_f1(predicted, truth)?,
    })
}

/// Mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// `n - 1` denominator; a single value has `std = 0`.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("cannot summarize zero trials"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Ok(Self { mean, std })
    }
}

/// `mean±std` in percent with two decimals, e.g. `95.00±7.07`.
impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean * 100.0, self.std * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trials: Vec<MetricSet>,
    pub acc: Summary,
    pub nmi: Summary,
    pub ari: Summary,
    pub f1: Summary,
}

impl EvalReport {
    pub fn summaries(&self) -> [(&'static str, Summary); 4] {
        [("acc", self.acc), ("nmi", self.nmi), ("ari", self.ari), ("f1", self.f1)]
    }
}

pub fn aggregate_trials(trials: &[MetricSet]) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::contract("aggregate_trials: need at least one trial"));
    }
    let column = |f: fn(&MetricSet) -> f64| Summary::of(&trials.iter().map(f).collect::<Vec<_>>());
    Ok(EvalReport {
        trials: trials.to_vec(),
        acc: column(|m| m.acc)?,
        nmi: column(|m| m.nmi)?,
        ari: column(|m| m.ari)?,
        f1: column(|m| m.f1)?,
    })
}
