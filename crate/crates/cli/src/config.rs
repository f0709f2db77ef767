use std::path::PathBuf;

use augsc::dataset::SyntheticSpec;
use augsc::solver::{Ablation, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0];
pub const DEFAULT_K_GRID: [usize; 4] = [50, 100, 150, 200];
pub const DEFAULT_LATENT_DIM: usize = 100;
pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Everything that determines a run's results. `out` and `workers` only
/// decide where results go and how fast, so they are left out of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: DataSource,
    pub clusters: usize,
    pub lambda: f64,
    pub latent_dim: usize,
    pub trials: usize,
    /// Trial `t` uses seed `seed + t` for both the solver and k-means.
    pub seed: u64,
    pub ablation: Ablation,
    /// Principal components for the similarity step; `clusters * 6`, clipped
    /// to the data, when absent.
    pub pca_components: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub lambda_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    /// Draw `lambda` and `latent_dim` once per run from the grids.
    pub random_params: bool,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub workers: usize,
}

impl RunConfig {
    pub fn new(source: DataSource, clusters: usize) -> Self {
        Self {
            source,
            clusters,
            lambda: 1.0,
            latent_dim: DEFAULT_LATENT_DIM,
            trials: DEFAULT_TRIALS,
            seed: 0,
            ablation: Ablation::Full,
            pca_components: None,
            restarts: DEFAULT_RESTARTS,
            max_iter: SolverConfig::DEFAULT_MAX_ITER,
            tol: SolverConfig::DEFAULT_TOL,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            k_grid: DEFAULT_K_GRID.to_vec(),
            random_params: false,
            out: PathBuf::from("out"),
            workers: 1,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.clusters < 2 {
            return usage(format!("--clusters must be at least 2, got {}", self.clusters));
        }
        if self.trials == 0 {
            return usage("--trials must be positive".into());
        }
        if self.restarts == 0 {
            return usage("--restarts must be positive".into());
        }
        if self.lambda_grid.is_empty() || self.k_grid.is_empty() {
            return usage("parameter grids must not be empty".into());
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return usage("lambda grid values must be finite and >= 0".into());
        }
        if self.k_grid.contains(&0) {
            return usage("k grid values must be positive".into());
        }
        self.solver_config(0).validate()?;
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    pub fn solver_config(&self, trial: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.lambda, self.latent_dim)
            .with_seed(self.trial_seed(trial))
            .with_ablation(self.ablation);
        cfg.max_iter = self.max_iter;
        cfg.tol = self.tol;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::new(DataSource::Manifest("m.toml".into()), 3)
    }

    #[test]
    fn defaults() {
        let c = cfg();
        assert_eq!(c.trials, 10);
        assert_eq!(c.latent_dim, 100);
        assert_eq!(c.lambda_grid, vec![1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0]);
        assert_eq!(c.k_grid, vec![50, 100, 150, 200]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn trial_seeds_offset_the_base() {
        let c = RunConfig { seed: 40, ..cfg() };
        assert_eq!(c.trial_seed(0), 40);
        assert_eq!(c.trial_seed(3), 43);
        assert_eq!(c.solver_config(2).seed, 42);
    }

    #[test]
    fn validation() {
        assert!(RunConfig { clusters: 1, ..cfg() }.validate().is_err());
        assert!(RunConfig { trials: 0, ..cfg() }.validate().is_err());
        assert!(RunConfig { k_grid: vec![], ..cfg() }.validate().is_err());
        assert!(RunConfig { lambda: -1.0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn output_location_is_not_serialized() {
        let a = serde_json::to_string(&RunConfig { out: "x".into(), workers: 4, ..cfg() }).unwrap();
        let b = serde_json::to_string(&cfg()).unwrap();
        assert_eq!(a, b);
    }
}
