//! `alm` — hold-one-domain-out adaptation experiments from the command line.
//!
//! Subcommands:
//! - `sine-bench`: the synthetic sine-wave benchmark (fresh domains per
//!   trial, logistic global classifier).
//! - `run`: error table over user-supplied CSV domains.
//! - `inspect`: shape and label statistics of CSV domains.
//!
//! Configuration comes from built-in defaults, then an optional
//! `key = value` config file, then command-line flags, each layer overriding
//! the last. Exit status is 0 on success and 1 on any error, with a
//! diagnostic on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alm_core::data::read_domain_csv;
use alm_core::experiment::{
    emit_report, render_report, run_experiment, DomainSpec, ExperimentConfig,
};
use alm_core::Result;

#[derive(Parser)]
#[command(name = "alm", version, about = "Multi-source domain adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic sine-wave benchmark.
    #[command(name = "sine-bench")]
    SineBench(ExperimentArgs),
    /// Produce the hold-one-domain-out error table for CSV domains.
    Run(RunArgs),
    /// Print shape and label statistics for CSV domains.
    Inspect {
        /// CSV files in the documented domain format.
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment seed; fixes every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials averaged into each cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of cheat,global,local_vote,alm,tca,kmm.
    #[arg(long)]
    methods: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: csv or text.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Labeled domain CSVs (alternatively the `domains` config key).
    domains: Vec<PathBuf>,
    #[command(flatten)]
    common: ExperimentArgs,
}

fn apply_common(cfg: &mut ExperimentConfig, args: &ExperimentArgs) -> Result<()> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_config_text(&text, &path.display().to_string())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(methods) = &args.methods {
        cfg.apply_kv("methods", methods)?;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(format) = &args.format {
        cfg.apply_kv("format", format)?;
    }
    Ok(())
}

fn finish(cfg: &ExperimentConfig) -> Result<()> {
    let report = run_experiment(cfg)?;
    match &cfg.out {
        Some(path) => emit_report(&report, cfg.format, path)?,
        None => print!("{}", render_report(&report, cfg.format)),
    }
    Ok(())
}

fn sine_bench(args: &ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::sine_default();
    apply_common(&mut cfg, args)?;
    finish(&cfg)
}

fn run_tables(args: &RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::run_default();
    apply_common(&mut cfg, &args.common)?;
    if !args.domains.is_empty() {
        cfg.domains = DomainSpec::Csv(args.domains.clone());
    }
    finish(&cfg)
}

fn inspect(files: &[PathBuf]) -> Result<()> {
    if files.is_empty() {
        return Err(alm_core::Error::Config("inspect needs at least one file".into()));
    }
    for path in files {
        let domain = read_domain_csv(path)?;
        println!("{}", path.display());
        println!("  samples:  {}", domain.len());
        println!("  features: {}", domain.dim());
        match domain.labels() {
            Some(labels) => {
                let positives = labels.iter().filter(|&&y| y > 0.0).count();
                println!(
                    "  labels:   +1 x {positives}, -1 x {}",
                    labels.len() - positives
                );
            }
            None => println!("  labels:   none (target domain)"),
        }
        let shown = domain.dim().min(8);
        for j in 0..shown {
            let col = domain.features().column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / col.len().max(1) as f64;
            println!("  f{j}: mean {mean:.4}, std {:.4}", var.sqrt());
        }
        if shown < domain.dim() {
            println!("  ... {} more features", domain.dim() - shown);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SineBench(args) => sine_bench(args),
        Command::Run(args) => run_tables(args),
        Command::Inspect { files } => inspect(files),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
