use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod run;

use config::{Assignments, ConfigError, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_BLOW_UP: u8 = 3;
const EXIT_GRADCHECK: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "pfcontrol", version, about = "Optimal boundary temperature control for phase-field solidification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Preset name (see `list`).
    #[arg(short, long)]
    scenario: Option<String>,
    /// Config file with `section.key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the config file.
    #[arg(short = 'O', long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in scenarios.
    List,
    /// Optimize the control and write CSV results.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory (overrides output.dir).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Extra field snapshot time; repeatable.
        #[arg(long = "snapshot", value_name = "T")]
        snapshots: Vec<f64>,
    },
    /// Compare the adjoint gradient with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, extra: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut a = Assignments::default();
    if let Some(path) = &common.config {
        a.read_file(path)?;
    }
    for o in &common.overrides {
        a.push_override(o)?;
    }
    for (k, v) in extra {
        a.push(k, v)?;
    }
    RunConfig::resolve(&a, common.scenario.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            run::list();
            Ok(())
        }
        Command::Run {
            common,
            out,
            snapshots,
        } => {
            let mut extra = Vec::new();
            if let Some(out) = out {
                extra.push(("output.dir".to_string(), out.display().to_string()));
            }
            let cfg = load(&common, &extra).map(|mut c| {
                c.snapshots.extend(snapshots.iter().copied());
                c
            });
            cfg.map_err(anyhow::Error::from).and_then(|mut c| {
                let t = c.scenario.grid.final_time();
                if let Some(bad) = c.snapshots.iter().find(|s| !(0.0..=t).contains(*s)) {
                    return Err(ConfigError(format!("snapshot time {bad} outside [0, {t}]")).into());
                }
                c.snapshots.sort_by(f64::total_cmp);
                run::run(&c)
            })
        }
        Command::Gradcheck { common } => load(&common, &[])
            .map_err(anyhow::Error::from)
            .and_then(|c| run::gradcheck(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    if e.downcast_ref::<run::GradcheckFailed>().is_some() {
        return EXIT_GRADCHECK;
    }
    let core = e
        .downcast_ref::<pfcontrol::DescentFailure>()
        .map(|f| &f.error)
        .or_else(|| e.downcast_ref::<pfcontrol::Error>());
    match core {
        Some(pfcontrol::Error::BlowUp { .. } | pfcontrol::Error::NonFinite(_)) => EXIT_BLOW_UP,
        Some(
            pfcontrol::Error::InvalidConfig(_)
            | pfcontrol::Error::InvalidGrid { .. }
            | pfcontrol::Error::InvalidParams { .. }
            | pfcontrol::Error::UnknownScenario { .. },
        ) => EXIT_CONFIG,
        _ => 1,
    }
}
