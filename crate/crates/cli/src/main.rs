//! `lf` command line: run benchmarking campaigns, search chain candidates,
//! evaluate the theory self-checks and validate device files.
//!
//! Exit code 0 on success; on failure a machine-readable JSON object is
//! printed to stderr and the exit code is nonzero.

use clap::{Parser, Subcommand};
use lf_core::campaign::{
    run_campaign, theory_bounds_check, theory_lemma_check, CampaignConfig, CampaignKind,
};
use lf_core::topology::{find_candidate_chains, load_device, predicted_lf};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lf", version, about = "Layer-fidelity benchmarking campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write results, CSV plot data and a manifest.
    Run {
        /// Campaign kind: lf_scan, figure4, figure5, figure6,
        /// mirror_compare, layer_count_sweep, gamma_compare, theory_check.
        campaign: String,
        /// JSON configuration file (defaults are used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Shots per circuit (0 = exact probabilities).
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Search candidate chains on a device.
    Chains {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        nmax: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Evaluate a named theory self-check: families, bounds or lemma.
    Theory {
        #[arg(long)]
        check: String,
    },
    /// Validate a device model file.
    Validate {
        #[arg(long)]
        device: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), lf_core::LfError> {
    match cli.command {
        Command::Run {
            campaign,
            config,
            out,
            seed,
            shots,
        } => {
            let kind = CampaignKind::parse(&campaign)?;
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    let cfg = CampaignConfig::from_json(&text)?;
                    if cfg.campaign != kind {
                        return Err(lf_core::LfError::InvalidConfig(format!(
                            "config file is for campaign '{}', requested '{}'",
                            cfg.campaign.name(),
                            kind.name()
                        )));
                    }
                    cfg
                }
                None => CampaignConfig::new(kind),
            };
            if let Some(out) = out {
                cfg.out_dir = Some(out.to_string_lossy().into_owned());
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(shots) = shots {
                cfg.shots = shots;
            }
            let report = run_campaign(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "campaign": cfg.campaign.name(),
                    "out_dir": cfg.out_dir,
                    "summary": report.summary,
                }))?
            );
            Ok(())
        }
        Command::Chains { device, nmax, k } => {
            let dev = load_device(&device)?;
            let res = find_candidate_chains(&dev, nmax, k)?;
            let chains: Vec<serde_json::Value> = res
                .chains
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "qubits": c.qubits,
                        "predicted_lf": predicted_lf(c, &dev),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "complete": res.complete,
                    "reached_length": res.reached_length,
                    "chains": chains,
                }))?
            );
            Ok(())
        }
        Command::Theory { check } => {
            match check.as_str() {
                "families" => {
                    let cfg = CampaignConfig::new(CampaignKind::TheoryCheck);
                    let r = lf_core::campaign::run_theory_check(&cfg)?;
                    println!("{}", serde_json::to_string_pretty(&r)?);
                }
                "bounds" => {
                    let violations = theory_bounds_check(7, 10_000)?;
                    println!(
                        "{}",
                        serde_json::json!({"check": "bounds", "samples": 10000, "violations": violations})
                    );
                    if violations > 0 {
                        return Err(lf_core::LfError::InvalidValue(
                            "bound violations found".into(),
                        ));
                    }
                }
                "lemma" => {
                    let violations = theory_lemma_check(7, 1000)?;
                    println!(
                        "{}",
                        serde_json::json!({"check": "lemma", "samples": 1000, "violations": violations})
                    );
                    if violations > 0 {
                        return Err(lf_core::LfError::InvalidValue(
                            "lemma violations found".into(),
                        ));
                    }
                }
                other => {
                    return Err(lf_core::LfError::InvalidConfig(format!(
                        "unknown theory check '{other}' (expected families, bounds or lemma)"
                    )))
                }
            }
            Ok(())
        }
        Command::Validate { device } => {
            let dev = load_device(&device)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "valid": true,
                    "name": dev.name,
                    "qubits": dev.n(),
                    "edges": dev.edges.len(),
                    "connected": dev.is_connected(),
                }))?
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": e.to_string(),
                    "kind": format!("{e:?}").split('(').next().unwrap_or("Unknown"),
                })
            );
            ExitCode::FAILURE
        }
    }
}
