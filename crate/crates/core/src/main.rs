use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use logconvex::cli::{run_experiment, ExperimentConfig, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use logconvex::Error;

/// Runs one experiment (or the sweep it declares) and writes its artifacts.
#[derive(Debug, Parser)]
#[command(name = "logconvex", version)]
struct Args {
    /// heat-logconvexity, parabolic-backward, controllability or tamed-nse.
    #[arg(long)]
    experiment: Option<String>,
    /// Configuration file of `key = value` sections.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides run.seed and noise.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides run.out.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LOGCONVEX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("LOGCONVEX_THREADS = {v:?} must be a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(args: Args) -> Result<bool, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::load(&text, args.experiment.as_deref())?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
        cfg.noise.seed = Some(s);
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.run.out));
    run_experiment(&cfg, &out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let code = match run(args) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    };
    ExitCode::from(code as u8)
}
