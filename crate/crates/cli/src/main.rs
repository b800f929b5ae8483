mod config;
mod inline;
mod output;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ScenarioConfig;
use runner::{RunError, BUILTIN_BUNDLES, BUILTIN_NORMAL_FORMS, BUILTIN_SYSTEMS};

/// Environment variable for the default output directory.
const OUT_ENV: &str = "NORMFORM_OUT";

#[derive(Parser)]
#[command(
    name = "normform",
    version,
    about = "Analyze input-invariant dynamical systems: simulate, verify invariances, \
             transform into the integral-feedback normal form, find transmissible inputs."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario and write its artifacts.
    Run {
        /// Path to the scenario configuration.
        config: PathBuf,
        /// Output directory (default: config `out`, then $NORMFORM_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the relative solver tolerance.
        #[arg(long)]
        rtol: Option<f64>,
        /// Override the absolute solver tolerance.
        #[arg(long)]
        atol: Option<f64>,
    },
    /// List builtin systems, normal forms and scenario kinds.
    ListExamples,
    /// Parse and validate a scenario configuration without running it.
    Validate { config: PathBuf },
}

fn load_config(path: &Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| format!("invalid scenario config {}: {e}", path.display()))?;
    config
        .validate()
        .map_err(|e| format!("invalid scenario config {}: {e}", path.display()))?;
    Ok(config)
}

fn out_dir(flag: Option<PathBuf>, config: &ScenarioConfig) -> PathBuf {
    flag.or_else(|| config.out.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            rtol,
            atol,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(r) = rtol {
                cfg.rtol = r;
            }
            if let Some(a) = atol {
                cfg.atol = a;
            }
            let dir = out_dir(out, &cfg);
            match runner::run_scenario(&cfg, &dir) {
                Ok((passed, files)) => {
                    for f in &files {
                        println!("wrote {}", f.display());
                    }
                    if passed {
                        println!("result: PASS");
                        ExitCode::SUCCESS
                    } else {
                        println!("result: FAIL (see {})", dir.join("summary.txt").display());
                        ExitCode::from(1)
                    }
                }
                Err(RunError::Config(msg)) => {
                    eprintln!("configuration error: {msg}");
                    ExitCode::from(2)
                }
                Err(RunError::Run(msg)) => {
                    eprintln!("run failed: {msg}");
                    ExitCode::from(1)
                }
            }
        }
        Command::ListExamples => {
            println!("systems (original coordinates): {}", BUILTIN_SYSTEMS.join(", "));
            println!("normal forms: {}", BUILTIN_NORMAL_FORMS.join(", "));
            println!("coordinate bundles: {}", BUILTIN_BUNDLES.join(", "));
            println!(
                "scenario kinds: simulate, simulate-normal-form, check-equivariance, \
                 check-pde, transmissible, gauge, rectify, scaled-io, nullclines, \
                 oscillator-comparison"
            );
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(_) => {
                println!("ok: {}", config.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
    }
}
