use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use augsc::dataset::SyntheticSpec;
use augsc::solver::Ablation;
use augsc_cli::{cmd_cluster, cmd_eval, cmd_sweep, cmd_synth, format_metrics, CliError, CliResult, DataSource, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "augsc", version, about = "Multi-view subspace clustering on an augmented data matrix")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of the full pipeline on one dataset.
    Cluster(RunArgs),
    /// Run the pipeline over a lambda x k grid.
    Sweep(RunArgs),
    /// Write a synthetic multi-view dataset with a manifest.
    Synth(SynthArgs),
    /// Score predicted labels against ground truth.
    Eval {
        predicted: PathBuf,
        truth: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Dataset manifest (TOML).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    manifest: Option<PathBuf>,
    /// Generate the dataset from a synthetic spec file (TOML) instead.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = augsc_cli::config::DEFAULT_LATENT_DIM)]
    latent_dim: usize,
    #[arg(long, default_value_t = augsc_cli::config::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "full", value_parser = |s: &str| s.parse::<Ablation>().map_err(|e| e.to_string()))]
    ablation: Ablation,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Draw lambda and k once from the grids.
    #[arg(long)]
    random_params: bool,
    /// Comma-separated lambda values.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Comma-separated latent dimensions.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    /// Principal components for the cross-view similarities.
    #[arg(long)]
    pca: Option<usize>,
    #[arg(long, default_value_t = augsc_cli::config::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = augsc::solver::SolverConfig::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = augsc::solver::SolverConfig::DEFAULT_TOL)]
    tol: f64,
}

impl RunArgs {
    fn into_config(self) -> CliResult<RunConfig> {
        let source = match (self.manifest, self.synthetic) {
            (Some(m), _) => DataSource::Manifest(m),
            (None, Some(path)) => {
                let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let spec: SyntheticSpec = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                DataSource::Synthetic(spec)
            }
            (None, None) => return Err(CliError::Usage("one of --manifest or --synthetic is required".into())),
        };
        let mut cfg = RunConfig::new(source, self.clusters);
        cfg.lambda = self.lambda;
        cfg.latent_dim = self.latent_dim;
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.out = self.out;
        cfg.ablation = self.ablation;
        cfg.workers = self.workers;
        cfg.random_params = self.random_params;
        if let Some(g) = self.lambda_grid {
            cfg.lambda_grid = g;
        }
        if let Some(g) = self.k_grid {
            cfg.k_grid = g;
        }
        cfg.pca_components = self.pca;
        cfg.restarts = self.restarts;
        cfg.max_iter = self.max_iter;
        cfg.tol = self.tol;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    per_cluster: usize,
    /// Dimension of the shared latent space the views are generated from.
    #[arg(long)]
    latent: usize,
    /// Comma-separated feature dimension of each view.
    #[arg(long, value_delimiter = ',', required = true)]
    view_dims: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Cluster(args) => {
            let cfg = args.into_config()?;
            let report = cmd_cluster(&cfg)?;
            if let Some(a) = &report.aggregate {
                println!(
                    "ACC {}  NMI {}  AR {}  F1 {}",
                    a.acc.formatted, a.nmi.formatted, a.ari.formatted, a.f1.formatted
                );
            }
            println!("report written to {}", cfg.out.join("report.json").display());
        }
        Command::Sweep(args) => {
            let cfg = args.into_config()?;
            let sweep = cmd_sweep(&cfg)?;
            let failed = sweep.cells.iter().filter(|c| !c.ok()).count();
            println!("{} cells, {failed} failed", sweep.cells.len());
            if let Some(best) = sweep.best("acc") {
                println!("best ACC at lambda = {}, k = {}", best.lambda, best.latent_dim);
            }
            println!("summary written to {}", cfg.out.join("summary.csv").display());
        }
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                clusters: a.clusters,
                per_cluster: a.per_cluster,
                latent_dim: a.latent,
                view_dims: a.view_dims,
                noise_sigma: a.noise,
                seed: a.seed,
            };
            println!("{}", cmd_synth(&spec, &a.out)?.display());
        }
        Command::Eval { predicted, truth } => {
            println!("{}", format_metrics(&cmd_eval(&predicted, &truth)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
