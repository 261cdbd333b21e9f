//! `delaymab` — config-driven experiment runner.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigFailure, ExperimentSpec};

const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("thm4", include_str!("../presets/thm4.toml")),
];

/// Environment variable holding the default output directory.
const OUT_DIR_ENV: &str = "DELAYMAB_OUT_DIR";

#[derive(Parser)]
#[command(name = "delaymab", version, about = "Bandit interest-forwarding simulator and bound toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to an experiment TOML file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in preset (fig2, fig3, fig4, fig5, fig6, thm4).
    #[arg(long)]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<u32>,
    /// Override the horizon in slots.
    #[arg(long)]
    horizon: Option<u32>,
    /// Output directory (default: $DELAYMAB_OUT_DIR, then the current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policies and write per-slot fraction-optimal curves.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write one trace CSV per replication.
        #[arg(long)]
        emit_trace: bool,
    },
    /// Sweep initial-phase lengths and strategies.
    SweepT0 {
        #[command(flatten)]
        common: Common,
        /// Comma-separated t0 values (overrides the [sweep] section).
        #[arg(long, value_delimiter = ',')]
        t0: Vec<u32>,
        /// Comma-separated strategies: round-robin, uniform-random.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Evaluate the closed-form bounds next to Monte Carlo estimates.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Check a configuration and print per-arm moments and preconditions.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load_spec(common: &Common) -> anyhow::Result<ExperimentSpec> {
    let text = match (&common.config, &common.preset) {
        (Some(path), None) => std::fs::read_to_string(path).map_err(|e| {
            anyhow::Error::new(ConfigFailure {
                issues: vec![config::Issue {
                    key: "--config".into(),
                    message: format!("cannot read {}: {e}", path.display()),
                }],
            })
        })?,
        (None, Some(name)) => PRESETS
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, text)| text.to_string())
            .ok_or_else(|| {
                anyhow::Error::new(ConfigFailure {
                    issues: vec![config::Issue {
                        key: "--preset".into(),
                        message: format!(
                            "unknown preset '{name}' (available: {})",
                            PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                        ),
                    }],
                })
            })?,
        _ => {
            return Err(anyhow::Error::new(ConfigFailure {
                issues: vec![config::Issue {
                    key: "--config/--preset".into(),
                    message: "exactly one of --config or --preset is required".into(),
                }],
            }))
        }
    };
    let mut spec = ExperimentSpec::from_toml(&text).map_err(anyhow::Error::new)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(replications) = common.replications {
        spec.replications = replications;
    }
    if let Some(horizon) = common.horizon {
        spec.horizon = horizon;
    }
    if let Some(dir) = &common.out_dir {
        spec.out_dir = Some(dir.clone());
    }
    Ok(spec)
}

fn out_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { common, emit_trace } => {
            let mut spec = load_spec(&common)?;
            spec.emit_trace |= emit_trace;
            let files = commands::simulate(&spec, &out_dir(&spec))?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::SweepT0 { common, t0, strategies } => {
            let spec = load_spec(&common)?;
            let sweep = spec.sweep.clone();
            let t0_values = if t0.is_empty() {
                sweep.as_ref().map(|s| s.t0_values.clone()).unwrap_or_else(|| vec![3, 9, 30])
            } else {
                t0
            };
            let strats = if strategies.is_empty() {
                sweep.as_ref().map(|s| s.strategies.clone()).unwrap_or_else(|| {
                    vec![delaymab::InitStrategy::RoundRobin, delaymab::InitStrategy::UniformRandom]
                })
            } else {
                strategies
                    .iter()
                    .map(|s| {
                        config::parse_strategy(s).ok_or_else(|| {
                            anyhow::Error::new(ConfigFailure {
                                issues: vec![config::Issue {
                                    key: "--strategies".into(),
                                    message: format!("unknown strategy '{s}'"),
                                }],
                            })
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            let files = commands::sweep_t0(&spec, &t0_values, &strats, &out_dir(&spec))?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Bounds { common } => {
            let spec = load_spec(&common)?;
            let files = commands::bounds(&spec, &out_dir(&spec))?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Validate { common } => {
            let spec = load_spec(&common)?;
            commands::validate(&spec)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(failure) = e.downcast_ref::<ConfigFailure>() {
                eprintln!("{failure}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
