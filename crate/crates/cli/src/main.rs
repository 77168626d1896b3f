//! `epieval` command-line driver.
//!
//! Exit codes: 0 success, 1 some regions failed, 2 config or parse failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use epieval::report::{
    export_inputs, run_pipeline, write_outputs, OutputFormat, PipelineInputs, ReportError, RunConfig,
};
use epieval::EvaluationMode;

#[derive(Parser)]
#[command(
    name = "epieval",
    version,
    about = "Rank epidemic forecasting methods against observed curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate forecasts as described by a config file.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<EvaluationMode>,
        /// Restrict to these regions; repeatable.
        #[arg(long = "region")]
        regions: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of csv, json, svg.
        #[arg(long, value_delimiter = ',')]
        format: Vec<OutputFormat>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the synthetic scenario of a config file as input CSV files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } | ReportError::Region { .. } => Failure::Runtime(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

fn evaluate(
    config: PathBuf,
    mode: Option<EvaluationMode>,
    regions: Vec<String>,
    out: Option<PathBuf>,
    format: Vec<OutputFormat>,
    seed: Option<u64>,
) -> Result<bool, Failure> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(mode) = mode {
        cfg.evaluation.mode = mode;
    }
    if !regions.is_empty() {
        cfg.evaluation.regions = regions;
    }
    if let Some(out) = out {
        cfg.output.dir = out;
    }
    if !format.is_empty() {
        cfg.output.formats = format;
    }
    if seed.is_some() {
        cfg.stochastic.seed = seed;
    }
    let bundle = run_pipeline(&cfg)?;
    let written = write_outputs(&bundle, &cfg.output.dir, &cfg.output.formats)
        .with_context(|| format!("writing outputs to {}", cfg.output.dir.display()))
        .map_err(Failure::Runtime)?;
    println!(
        "evaluated {} region(s); wrote {} file(s) to {}",
        bundle.regions.len(),
        written.len(),
        cfg.output.dir.display()
    );
    if let Some(o) = &bundle.overall {
        println!("overall consensus (lower is better):");
        let mut order: Vec<usize> = (0..o.average.len()).collect();
        order.sort_by(|&a, &b| o.average[a].total_cmp(&o.average[b]));
        for i in order {
            println!("  {:<24} {:.2}", o.table.methods[i], o.average[i]);
        }
    }
    for f in &bundle.failures {
        eprintln!("region {} failed: {}", f.region_id, f.message);
    }
    Ok(bundle.failures.is_empty())
}

fn synth(config: PathBuf, out: PathBuf) -> Result<bool, Failure> {
    let cfg = RunConfig::load(&config)?;
    let section = cfg
        .synthetic
        .as_ref()
        .context("config has no [synthetic] section")
        .map_err(Failure::Input)?;
    let inputs = PipelineInputs::synthetic(section, &cfg.evaluation.regions)?;
    let (observed, forecasts) = export_inputs(&inputs, &out)?;
    println!("wrote {} and {}", observed.display(), forecasts.display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate {
            config,
            mode,
            regions,
            out,
            format,
            seed,
        } => evaluate(config, mode, regions, out, format, seed),
        Command::Synth { config, out } => synth(config, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
