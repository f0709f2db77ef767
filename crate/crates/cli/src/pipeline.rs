//! One end-to-end trial: solve, aggregate, cluster, score.

use std::time::Instant;

use augsc::dataset::{build_augmented, default_pca_components, gen_synthetic, load_dataset, AugmentedMatrix, MultiViewDataset};
use augsc::metrics::{evaluate, MetricSet};
use augsc::solver::{self, ConvergenceTrace, KktReport};
use augsc::spectral::{self, SpectralOptions};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::error::CliResult;

/// Dataset and augmented matrix, shared by every trial of a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: MultiViewDataset,
    pub augmented: AugmentedMatrix,
    pub pca_components: usize,
}

pub fn load_source(source: &DataSource) -> CliResult<MultiViewDataset> {
    Ok(match source {
        DataSource::Manifest(path) => load_dataset(path)?,
        DataSource::Synthetic(spec) => gen_synthetic(spec)?,
    })
}

pub fn prepare(dataset: MultiViewDataset, cfg: &RunConfig) -> CliResult<Prepared> {
    let pca_components = cfg
        .pca_components
        .unwrap_or_else(|| default_pca_components(cfg.clusters, &dataset));
    let augmented = build_augmented(&dataset, pca_components)?;
    Ok(Prepared {
        dataset,
        augmented,
        pca_components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub iterations: usize,
    pub converged: bool,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub objective: f64,
    pub kkt: KktReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub labels: Vec<usize>,
    /// Present when the dataset carries ground truth.
    pub metrics: Option<MetricSet>,
    pub convergence: ConvergenceSummary,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub trace: ConvergenceTrace,
}

pub fn run_trial(prep: &Prepared, cfg: &RunConfig, trial: usize) -> CliResult<TrialOutcome> {
    let start = Instant::now();
    let solver_cfg = cfg.solver_config(trial);
    let out = solver::run(&prep.augmented, &solver_cfg)?;

    let input = solver::effective_input(&prep.augmented, &solver_cfg);
    let (v, n) = (input.view_count(), input.sample_count());
    let kkt = solver::kkt_residuals(&out.state, &input.xa, solver_cfg.effective_lambda(), n);
    let zhat = solver::aggregate_z(out.z(), v, n)?;
    let opts = SpectralOptions {
        restarts: cfg.restarts,
        seed: solver_cfg.seed,
        normalize_rows: false,
    };
    let clustering = spectral::cluster_with(&zhat, cfg.clusters, &opts)?;
    let metrics = match prep.dataset.labels() {
        Some(truth) => Some(evaluate(&clustering.labels, truth)?),
        None => None,
    };

    let last = out.trace.last().copied();
    let convergence = ConvergenceSummary {
        iterations: out.state.iter,
        converged: out.converged,
        r1: last.map_or(f64::NAN, |r| r.r1),
        r2: last.map_or(f64::NAN, |r| r.r2),
        r3: last.map_or(f64::NAN, |r| r.r3),
        objective: last.map_or(f64::NAN, |r| r.objective),
        kkt,
    };
    log::info!(
        "trial {trial}: {} iterations, converged = {}, acc = {}",
        convergence.iterations,
        convergence.converged,
        metrics.map_or("n/a".to_string(), |m| format!("{:.4}", m.acc))
    );
    Ok(TrialOutcome {
        record: TrialRecord {
            trial,
            seed: solver_cfg.seed,
            labels: clustering.labels,
            metrics,
            convergence,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
        trace: out.trace,
    })
}
