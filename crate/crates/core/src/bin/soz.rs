//! Thin CLI over the library: `generate` synthetic cohorts, `run` the full
//! experiment, `report` from saved results.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure.
//! `SOZ_THREADS` caps worker threads.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use soz_pipeline::dataset::{Cohort, Stage};
use soz_pipeline::error::Error;
use soz_pipeline::experiment::{init_thread_pool_from_env, run_experiment, RunConfig};
use soz_pipeline::metrics::{aggregate, results_from_csv};
use soz_pipeline::synth::generate;

#[derive(Parser)]
#[command(name = "soz", about = "CCEP seizure-onset-zone classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic raw cohort CSV from the config's generator block.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full experiment: clean, split, encode, oversample, train,
    /// evaluate, report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Raw cohort CSV; omitted means generate from the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the target-encoder smoothing.
        #[arg(long)]
        smoothing_m: Option<f64>,
        /// Override the saturation-rejection threshold (microvolts).
        #[arg(long)]
        sat_threshold: Option<f64>,
        /// Override the flatline-rejection variance epsilon.
        #[arg(long)]
        flat_eps: Option<f64>,
        /// Override SMOTE's neighbor count.
        #[arg(long)]
        smote_k: Option<usize>,
    },
    /// Re-aggregate a saved results.csv and print the table.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoFailure {
        path: path.clone(),
        source,
    })?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{path:?}: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    init_thread_pool_from_env();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut cause = std::error::Error::source(&e);
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn real_main() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = load_config(&config)?;
            let gen_cfg = cfg
                .generator
                .ok_or_else(|| Error::InvalidConfig("config has no generator block".into()))?;
            let cohort = generate(&gen_cfg)?;
            log::info!("generated {} records", cohort.len());
            Cohort::Raw(cohort).write_csv(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Run {
            config,
            data,
            out_dir,
            seed,
            smoothing_m,
            sat_threshold,
            flat_eps,
            smote_k,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = smoothing_m {
                cfg.pipeline.smoothing_m = m;
            }
            if let Some(t) = sat_threshold {
                cfg.pipeline.sat_threshold = Some(t);
            }
            if let Some(e) = flat_eps {
                cfg.pipeline.flat_eps = e;
            }
            if let Some(k) = smote_k {
                cfg.pipeline.smote_k = k;
            }
            let cohort = match data {
                Some(path) => Some(Cohort::load_csv(&path, Stage::Raw)?.into_raw()?),
                None => None,
            };
            let out = run_experiment(&cfg, cohort, Some(&out_dir))?;
            println!("{}", out.table.to_markdown());
            println!("artifacts in {}", out_dir.display());
        }
        Command::Report { results, format } => {
            let text = std::fs::read_to_string(&results).map_err(|source| Error::IoFailure {
                path: results.clone(),
                source,
            })?;
            let parsed = results_from_csv(&text)?;
            let table = aggregate(&parsed)?;
            match format {
                Format::Md => print!("{}", table.to_markdown()),
                Format::Csv => print!("{}", table.to_csv()),
            }
        }
    }
    Ok(())
}
