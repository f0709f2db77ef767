use std::fs;
use std::path::{Path, PathBuf};

use augsc::dataset::{format_labels, gen_synthetic, parse_labels, write_dataset, SyntheticSpec};
use augsc::metrics::{evaluate, MetricSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{load_source, prepare, run_trial, Prepared, TrialOutcome};
use crate::report::{Aggregate, CellRecord, RandomDraw, RunReport, SweepReport};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// One `(lambda, k)` pair drawn uniformly from the grids.
pub fn draw_params(cfg: &RunConfig) -> RandomDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let lambda = cfg.lambda_grid[rng.random_range(0..cfg.lambda_grid.len())];
    let latent_dim = cfg.k_grid[rng.random_range(0..cfg.k_grid.len())];
    RandomDraw {
        scope: "per-run".into(),
        lambda,
        latent_dim,
    }
}

fn run_trials(prep: &Prepared, cfg: &RunConfig) -> CliResult<Vec<TrialOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(prep, cfg, t))
            .collect()
    })
}

fn write_run_outputs(report: &RunReport, outcomes: &[TrialOutcome], dir: &Path) -> CliResult<()> {
    create_dir(dir)?;
    for o in outcomes {
        let t = o.record.trial;
        write_file(&dir.join(format!("labels_{t}.txt")), format_labels(&o.record.labels).as_bytes())?;
        let path = dir.join(format!("trace_{t}.csv"));
        let mut buf = Vec::new();
        o.trace.write_csv(&mut buf).map_err(|e| CliError::output(&path, e))?;
        write_file(&path, &buf)?;
    }

    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::output(&path, e);
    w.write_record(["trial", "seed", "acc", "nmi", "ari", "f1", "iterations", "converged"])
        .map_err(fail)?;
    for t in &report.trials {
        let mut row = vec![t.trial.to_string(), t.seed.to_string()];
        match t.metrics {
            Some(m) => row.extend(m.as_array().iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        row.push(t.convergence.iterations.to_string());
        row.push(t.convergence.converged.to_string());
        w.write_record(&row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::output(&path, e))?;
    write_file(&path, &bytes)?;

    write_file(&dir.join("report.json"), report.to_json().as_bytes())
}

fn cluster_prepared(prep: &Prepared, cfg: &RunConfig, random_draw: Option<RandomDraw>) -> CliResult<RunReport> {
    let outcomes = run_trials(prep, cfg)?;
    let metrics: Vec<MetricSet> = outcomes.iter().filter_map(|o| o.record.metrics).collect();
    let aggregate = if metrics.len() == outcomes.len() {
        Some(Aggregate::from_trials(&metrics)?)
    } else {
        None
    };
    let report = RunReport {
        config: cfg.clone(),
        random_draw,
        pca_components: prep.pca_components,
        trials: outcomes.iter().map(|o| o.record.clone()).collect(),
        aggregate,
    };
    write_run_outputs(&report, &outcomes, &cfg.out)?;
    Ok(report)
}

fn apply_draw(cfg: &RunConfig) -> (RunConfig, Option<RandomDraw>) {
    if !cfg.random_params {
        return (cfg.clone(), None);
    }
    let draw = draw_params(cfg);
    let resolved = RunConfig {
        lambda: draw.lambda,
        latent_dim: draw.latent_dim,
        ..cfg.clone()
    };
    (resolved, Some(draw))
}

/// Runs `cfg.trials` independent trials and writes `report.json`,
/// `metrics.csv`, `trace_<t>.csv` and `labels_<t>.txt` under `cfg.out`.
pub fn cmd_cluster(cfg: &RunConfig) -> CliResult<RunReport> {
    cfg.validate()?;
    let (cfg, draw) = apply_draw(cfg);
    cfg.validate()?;
    let prep = prepare(load_source(&cfg.source)?, &cfg)?;
    cluster_prepared(&prep, &cfg, draw)
}

/// Runs every `(lambda, k)` cell of the grids (or one random cell), each into
/// its own subdirectory, and writes `summary.csv` and `sweep.json`.
pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<SweepReport> {
    cfg.validate()?;
    let prep = prepare(load_source(&cfg.source)?, cfg)?;

    let (cells, random_draw): (Vec<(f64, usize)>, _) = if cfg.random_params {
        let draw = draw_params(cfg);
        (vec![(draw.lambda, draw.latent_dim)], Some(draw))
    } else {
        let grid = cfg
            .lambda_grid
            .iter()
            .flat_map(|&l| cfg.k_grid.iter().map(move |&k| (l, k)))
            .collect();
        (grid, None)
    };

    let mut records = Vec::with_capacity(cells.len());
    for (idx, (lambda, latent_dim)) in cells.into_iter().enumerate() {
        let dir = format!("cell_{idx:03}");
        let cell_cfg = RunConfig {
            lambda,
            latent_dim,
            random_params: false,
            out: cfg.out.join(&dir),
            ..cfg.clone()
        };
        let result = cell_cfg
            .validate()
            .and_then(|_| cluster_prepared(&prep, &cell_cfg, random_draw.clone()));
        let (aggregate, error) = match result {
            Ok(report) => (report.aggregate, None),
            Err(e) => {
                log::warn!("cell lambda = {lambda}, k = {latent_dim} failed: {e}");
                (None, Some(e.to_string()))
            }
        };
        records.push(CellRecord {
            lambda,
            latent_dim,
            dir,
            aggregate,
            error,
        });
    }
    let sweep = SweepReport {
        random_draw,
        cells: records,
    };
    write_sweep_outputs(&sweep, &cfg.out)?;
    Ok(sweep)
}

fn write_sweep_outputs(sweep: &SweepReport, dir: &Path) -> CliResult<()> {
    create_dir(dir)?;
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::output(&path, e);
    let mut header = vec!["lambda".to_string(), "latent_dim".into(), "status".into()];
    for m in MetricSet::NAMES {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    header.push("error".into());
    w.write_record(&header).map_err(fail)?;
    for c in &sweep.cells {
        let mut row = vec![
            c.lambda.to_string(),
            c.latent_dim.to_string(),
            if c.ok() { "ok" } else { "failed" }.to_string(),
        ];
        for m in MetricSet::NAMES {
            match c.aggregate.as_ref().and_then(|a| a.get(m)) {
                Some(s) => row.extend([s.mean.to_string(), s.std.to_string()]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        row.push(c.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::output(&path, e))?;
    write_file(&path, &bytes)?;
    let json = serde_json::to_string_pretty(sweep).expect("sweep serializes");
    write_file(&dir.join("sweep.json"), json.as_bytes())
}

/// Writes a synthetic dataset and returns the manifest path.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> CliResult<PathBuf> {
    let ds = gen_synthetic(spec)?;
    create_dir(out)?;
    Ok(write_dataset(&ds, out)?)
}

fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_labels(&text)?)
}

pub fn cmd_eval(predicted: &Path, truth: &Path) -> CliResult<MetricSet> {
    Ok(evaluate(&read_labels(predicted)?, &read_labels(truth)?)?)
}

/// `ACC 100.00  NMI 100.00  AR 100.00  F1 100.00`
pub fn format_metrics(m: &MetricSet) -> String {
    format!(
        "ACC {:.2}  NMI {:.2}  AR {:.2}  F1 {:.2}",
        m.acc * 100.0,
        m.nmi * 100.0,
        m.ari * 100.0,
        m.f1 * 100.0
    )
}
