//! Command line interface: experiment runner (`run`), snapshot sampler
//! (`sample`), metrics evaluator (`metrics`), and theory-suite runner
//! (`theory`).
//!
//! Exit codes: 0 on success, 1 when a theory checker reports a violation,
//! 2 on usage, configuration, or parse errors. The environment variable
//! `BOOSTDENS_SEED` overrides the config-file seed; an explicit `--seed`
//! flag overrides both.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use boostdens::dist::Density;
use boostdens::mcmc::MhConfig;
use boostdens::metrics::{coverage, kl_grid, nll_normalized, GridSpec};
use boostdens::{snapshot, Error};

use config::{ExperimentConfig, TargetSpec};

#[derive(Parser)]
#[command(name = "boostdens", version, about = "Boosted density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config file).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Restore paper-scale settings (3000 epochs, 400-point grids).
        #[arg(long)]
        full: bool,
        /// Parallel run workers.
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed override (beats BOOSTDENS_SEED and the config file).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample from a density snapshot and stream CSV to stdout.
    Sample {
        snapshot: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        proposal_std: Option<f64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate metrics of a density snapshot against a target mixture.
    Metrics {
        snapshot: PathBuf,
        /// Target spec: inline JSON or a path to a JSON file.
        #[arg(long)]
        target: String,
        /// Comma-separated subset of kl,nll,coverage.
        #[arg(long, default_value = "kl,nll,coverage")]
        which: String,
        /// Monte Carlo sample size for nll/coverage.
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0.95)]
        kappa: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the brute-force theory verification suite.
    Theory {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var("BOOSTDENS_SEED").ok()?.parse().ok()
}

fn effective_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or_else(env_seed).or(config).unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> boostdens::Result<u8> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            full,
            jobs,
            seed,
        } => {
            let body = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::from_json(&body)?;
            let seed = effective_seed(seed, cfg.seed);
            let outdir = output_dir
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("boostdens_out"));
            let result = experiments::run_experiment(&cfg, full, jobs, seed, &outdir)?;
            eprintln!("results written to {}", result.aggregate_path.display());
            Ok(result.exit_code as u8)
        }
        Command::Sample {
            snapshot: path,
            n,
            burn_in,
            proposal_std,
            chains,
            seed,
        } => {
            let bd = snapshot::load(&path)?;
            let mut mh = MhConfig {
                n_samples: n,
                seed: effective_seed(seed, None),
                ..MhConfig::default()
            };
            if let Some(b) = burn_in {
                mh.burn_in = b;
            }
            if let Some(s) = proposal_std {
                mh.proposal_std = s;
            }
            if let Some(c) = chains {
                mh.n_chains = c;
            }
            let header: Vec<String> = (0..bd.dim()).map(|j| format!("x{j}")).collect();
            println!("{}", header.join(","));
            if n > 0 {
                let samples = bd.sample_with(n, &mh)?;
                let mut out = String::new();
                for row in samples.rows() {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                print!("{out}");
            }
            Ok(0)
        }
        Command::Metrics {
            snapshot: path,
            target,
            which,
            n,
            kappa,
            seed,
        } => {
            let bd = snapshot::load(&path)?;
            let spec = parse_target(&target)?;
            let mixture = spec.build()?;
            if mixture.dim() != bd.dim() {
                return Err(Error::Dimension {
                    expected: mixture.dim(),
                    got: bd.dim(),
                });
            }
            let seed = effective_seed(seed, None);
            let mut result = serde_json::Map::new();
            for item in which.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match item {
                    "kl" => {
                        if bd.dim() > 2 {
                            return Err(Error::Config(format!(
                                "kl requires dim <= 2 (grid quadrature); snapshot has dim {}",
                                bd.dim()
                            )));
                        }
                        let grid = GridSpec::around_mixture(&mixture, 4.0, 400)?;
                        let v = kl_grid(&mixture, &bd, &grid)?;
                        result.insert("kl".into(), serde_json::json!(v));
                    }
                    "nll" => {
                        let v = nll_normalized(&mixture, &bd, n, seed)?;
                        result.insert("nll".into(), serde_json::json!(v));
                    }
                    "coverage" => {
                        let sampler = bd.sampler(MhConfig {
                            seed: seed.wrapping_add(1),
                            ..MhConfig::default()
                        });
                        let v = coverage(&mixture, &sampler, kappa, n, n, seed)?;
                        result.insert("coverage".into(), serde_json::json!(v));
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "unknown metric '{other}' (expected kl, nll, coverage)"
                        )))
                    }
                }
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::Value::Object(result))
                    .map_err(|e| Error::Parse(e.to_string()))?
            );
            Ok(0)
        }
        Command::Theory { trials, seed } => {
            let seed = effective_seed(seed, None);
            let reports = boostdens::theory::run_theory_suite(
                trials,
                seed,
                boostdens::theory::DEFAULT_TOLERANCE,
            );
            let mut ok = true;
            for r in &reports {
                let status = if r.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {}: {} trials, {} violations, worst slack {:.3e}",
                    r.name, r.n_trials, r.n_violations, r.worst_slack
                );
                ok &= r.passed();
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn parse_target(arg: &str) -> boostdens::Result<TargetSpec> {
    let body = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)?
    };
    serde_json::from_str(&body).map_err(|e| Error::Parse(format!("target spec: {e}")))
}
