use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rkhs_fusion::fusion_space::Agent;
use rkhs_fusion::pipeline::{build_basis, fit_agent, replay_fusion, run_pipeline, ExperimentConfig, ESTIMATE_NAMES};
use rkhs_fusion::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Two-agent RKHS estimation with fusion and download")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run local fits, fusion, download and the baseline; write artifacts.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit one agent locally and print its upload message.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        agent: u8,
    },
    /// Recompute fusion and downloads from the messages in an output directory.
    Fuse {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).map_err(|e| Error::Stage {
        stage: "config",
        source: Box::new(e),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline { config, out_dir } => {
            let cfg = load(&config)?;
            let dir = out_dir
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let run = run_pipeline(&cfg, &dir)?;
            let r = &run.report;
            println!("basis rank {} digest {}", r.rank, &r.basis_digest[..16]);
            println!(
                "fusion a = {:.6} b = {:.6}{}",
                r.fusion.a,
                r.fusion.b,
                if r.fusion.degenerate { " (degenerate)" } else { "" }
            );
            println!("{:<12} {:>14} {:>14} {:>12}", "estimate", "rmse", "sup error", "H norm");
            for (name, m) in r.estimates.entries() {
                println!(
                    "{name:<12} {:>14.6e} {:>14.6e} {:>12.6}",
                    m.rmse_on_grid, m.sup_error_on_grid, m.h_norm
                );
            }
            debug_assert_eq!(r.estimates.entries().len(), ESTIMATE_NAMES.len());
            println!("artifacts in {}", dir.display());
        }
        Command::Fit { config, agent } => {
            let cfg = load(&config)?;
            let agent = Agent::try_from(agent).map_err(Error::Config)?;
            let basis = build_basis(&cfg).map_err(|e| Error::Stage {
                stage: "basis",
                source: Box::new(e),
            })?;
            let fit = fit_agent(&cfg, &basis, agent)?;
            eprintln!(
                "agent {agent}: {} samples, objective {:.6e}",
                fit.data.len(),
                fit.estimate.objective_value
            );
            println!("{}", serde_json::to_string(&fit.upload)?);
        }
        Command::Fuse { out_dir } => {
            let report = replay_fusion(&out_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            if !matches!(e, Error::Stage { .. }) {
                msg = format!("error: cli: {e}");
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
