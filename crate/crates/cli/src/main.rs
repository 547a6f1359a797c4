use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use otmatch::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

/// Run one experiment and write its CSV/JSON artifacts and manifest.
#[derive(Parser, Debug)]
#[command(name = "otmatch", version)]
struct Args {
    /// deconvolve, invert-pde, landscape, resolution-study, transport-1d,
    /// w2-compute, gaussian-expansion or project-locate
    kind: ExperimentKind,
    /// JSON parameter block for the experiment; omitted fields take defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(args: &Args) -> Result<bool> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = ExperimentConfig::from_json(args.kind, &text).with_context(|| format!("invalid {} config", args.kind))?;
    let manifest = run_experiment(&cfg, &args.out, args.seed).context("experiment failed")?;
    for s in manifest.failed_steps() {
        eprintln!("step `{}` failed: {}", s.name, s.error.as_deref().unwrap_or("unknown error"));
    }
    println!("{} artifacts written to {}", manifest.artifacts.len(), args.out.display());
    Ok(manifest.ok())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
