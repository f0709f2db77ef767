use augsc::metrics::{aggregate_trials, MetricSet, Summary};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::pipeline::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    /// `mean±std` in percent.
    pub formatted: String,
}

impl From<Summary> for MetricSummary {
    fn from(s: Summary) -> Self {
        Self {
            mean: s.mean,
            std: s.std,
            formatted: s.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub acc: MetricSummary,
    pub nmi: MetricSummary,
    pub ari: MetricSummary,
    pub f1: MetricSummary,
}

impl Aggregate {
    pub fn from_trials(trials: &[MetricSet]) -> CliResult<Self> {
        let r = aggregate_trials(trials)?;
        Ok(Self {
            acc: r.acc.into(),
            nmi: r.nmi.into(),
            ari: r.ari.into(),
            f1: r.f1.into(),
        })
    }

    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        match metric {
            "acc" => Some(&self.acc),
            "nmi" => Some(&self.nmi),
            "ari" => Some(&self.ari),
            "f1" => Some(&self.f1),
            _ => None,
        }
    }
}

/// Parameters drawn in random-parameter mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    /// One draw covers every trial of the run.
    pub scope: String,
    pub lambda: f64,
    pub latent_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Fully resolved configuration, including the drawn parameters.
    pub config: RunConfig,
    pub random_draw: Option<RandomDraw>,
    pub pca_components: usize,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Option<Aggregate>,
}

impl RunReport {
    /// Copy with timing fields zeroed, for reproducibility comparisons.
    pub fn without_wall_clock(&self) -> Self {
        let mut r = self.clone();
        for t in &mut r.trials {
            t.wall_clock_secs = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub lambda: f64,
    pub latent_dim: usize,
    /// Directory holding the cell's own report, relative to the sweep output.
    pub dir: String,
    pub aggregate: Option<Aggregate>,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub random_draw: Option<RandomDraw>,
    pub cells: Vec<CellRecord>,
}

impl SweepReport {
    /// Successful cell with the highest mean of `metric`; ties go to the earlier cell.
    pub fn best(&self, metric: &str) -> Option<&CellRecord> {
        let mut best: Option<(&CellRecord, f64)> = None;
        for cell in &self.cells {
            if let Some(m) = cell.aggregate.as_ref().and_then(|a| a.get(metric)) {
                if best.is_none_or(|(_, b)| m.mean > b) {
                    best = Some((cell, m.mean));
                }
            }
        }
        best.map(|(c, _)| c)
    }
}
