use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use msa_lab::config::{ExperimentConfig, ExperimentKind};
use msa_lab::{run, with_workers, LabError};

#[derive(Parser, Debug)]
#[command(name = "msa-lab", version, about = "Multi-particle localization experiments")]
struct Cli {
    #[arg(value_enum)]
    experiment: ExperimentKind,
    /// Flat key = value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    strict: bool,
    /// Worker threads; falls back to MSA_LAB_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

fn build(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::for_kind(cli.experiment),
    };
    cfg.experiment = cli.experiment;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.strict {
        cfg.strict = true;
    }
    let env_workers = std::env::var("MSA_LAB_WORKERS").ok();
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    } else if cfg.workers.is_none() {
        if let Some(v) = env_workers {
            let w = v
                .parse::<usize>()
                .map_err(|_| LabError::Validation(vec![format!("MSA_LAB_WORKERS: {v:?} is not a count")]))?;
            cfg.workers = Some(w);
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = build(&cli).and_then(|cfg| {
        cfg.validate()?;
        with_workers(cfg.workers, || run(&cfg))
    });
    match result {
        Ok(r) => {
            println!("{} tables written to {}", r.manifest.table_hashes.len(), cli.out.as_deref().unwrap_or("the configured directory"));
            for f in &r.output.failures {
                eprintln!("invariant failure: {f}");
            }
            ExitCode::from(r.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
