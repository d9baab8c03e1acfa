use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use replicator_sphere::cli::{run, Experiment, ExperimentConfig, GraphSource};
use replicator_sphere::sde::DriftSign;
use replicator_sphere::stationary::ExponentScale;
use replicator_sphere::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;

/// Stochastic replicator dynamics on the sphere: simulation and metastability experiments.
#[derive(Parser, Debug)]
#[command(name = "repsphere", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Simulate trajectories; writes trajectory.csv and summary.json.
    Simulate,
    /// Exit-time sweep over noise levels; writes samples.csv, sweep.json and ccdf.csv.
    ExitSweep,
    /// Gibbs measure validation on the circle (n = 2).
    Stationary,
    /// Principal Dirichlet eigenpair and conditioned-process checks (n = 2).
    Qprocess,
    /// Clique and exit-rate bounds for the configured graph.
    Bounds,
    /// Enumerate maximal cliques.
    Cliques,
    /// Write the configured graph as JSON and as an edge list.
    GenGraph,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Experiment::Simulate,
            Command::ExitSweep => Experiment::ExitSweep,
            Command::Stationary => Experiment::Stationary,
            Command::Qprocess => Experiment::Qprocess,
            Command::Bounds => Experiment::Bounds,
            Command::Cliques => Experiment::Cliques,
            Command::GenGraph => Experiment::GenGraph,
        }
    }
}

fn parse_graph_source(s: &str) -> Result<GraphSource, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| "expected one of two-edge, edgeless, gnp, file, matrix".to_owned())
}

fn parse_scale(s: &str) -> Result<ExponentScale, String> {
    s.parse::<u8>().ok().and_then(|v| ExponentScale::try_from(v).ok()).ok_or_else(|| "expected 2 or 8".to_owned())
}

/// Flags override values from `--config`.
#[derive(Args, Debug)]
struct Overrides {
    /// Flat JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Master seed; generated and printed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, short, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true, value_parser = parse_graph_source)]
    graph: Option<GraphSource>,
    #[arg(long, global = true)]
    graph_file: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    graph_seed: Option<u64>,
    #[arg(long, global = true)]
    plant: Option<usize>,

    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Comma-separated noise levels for exit-sweep.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    eps_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    steps: Option<u64>,
    #[arg(long, global = true)]
    max_steps: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<u64>,
    #[arg(long, global = true)]
    stride: Option<u64>,
    #[arg(long, global = true)]
    check_stride: Option<u64>,
    /// Use the descent sign for the drift.
    #[arg(long, global = true)]
    descent: bool,
    /// Comma-separated initial simplex point.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    start: Option<Vec<f64>>,
    /// Comma-separated members of the starting clique.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    start_clique: Option<Vec<usize>>,

    #[arg(long, global = true)]
    bins: Option<usize>,
    #[arg(long, global = true)]
    grid_size: Option<usize>,
    /// Gibbs exponent scale (2 or 8).
    #[arg(long, global = true, value_parser = parse_scale)]
    scale: Option<ExponentScale>,
    #[arg(long, global = true)]
    exit_runs: Option<u64>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    #[arg(long, global = true)]
    saddle: Option<f64>,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        set!(p, graph_seed, plant, eps_list, max_steps, stride, check_stride, bins, scale, exit_runs, resolution);
        set_opt!(seed, graph, graph_file, n, dt, eps, steps, runs, start, start_clique, grid_size, saddle);
        if let Some(o) = &self.out {
            c.out_dir = o.clone();
        }
        if self.descent {
            c.drift = DriftSign::Descent;
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) | Error::TooFewSamples { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let mut cfg = match &cli.opts.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => ExperimentConfig::default(),
    };
    cli.opts.apply(&mut cfg);
    if cfg.seed.is_none() {
        let seed = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
        eprintln!("seed: {seed}");
        cfg.seed = Some(seed);
    }
    if let Some(j) = cli.opts.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let exp = Experiment::from(cli.command);
    match run(exp, &cfg) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            for f in &out.files {
                let _ = writeln!(stdout, "{}", f.display());
            }
            if out.passed {
                eprintln!("{}: {}", exp.name(), out.message);
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: check failed: {}", exp.name(), out.message);
                ExitCode::from(EXIT_NUMERIC)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
