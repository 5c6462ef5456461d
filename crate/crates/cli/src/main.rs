use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use qbattery_cli::config::keys_help;
use qbattery_cli::dispatch::EXIT_ORACLE;
use qbattery_cli::output::gnuplot_script;
use qbattery_cli::{dispatch, load_with_overrides, ExperimentKind, Manifest};

#[derive(Parser)]
#[command(name = "qbattery", version, about = "Spin-chain quantum battery simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Charging run.
    Charge(RunArgs),
    /// Discharge from the noiseless charged state.
    Discharge(RunArgs),
    /// Charge to steady state, then discharge.
    Cycle(RunArgs),
    /// Work versus number of noisy sites.
    Hierarchy(RunArgs),
    /// Advantage over time and coupling or noise ratio.
    Grid(RunArgs),
    /// Ohmicity sweep.
    Ohmicity(RunArgs),
    /// Thermal initial states.
    Thermal(RunArgs),
    /// Power across chain lengths.
    Scale(RunArgs),
    /// Two-site engine against the closed forms.
    #[command(name = "oracle_check", alias = "oracle-check")]
    OracleCheck(RunArgs),
    /// Write plot.gp for an existing output directory.
    Gnuplot {
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("QBATTERY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(keys_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    init_threads();
    let (kind, args) = match cli.command {
        Command::Gnuplot { out } => {
            let written = Manifest::read(&out)
                .and_then(|m| gnuplot_script(&out, &m))
                .and_then(|s| std::fs::write(out.join("plot.gp"), s));
            return match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
        Command::Charge(a) => (ExperimentKind::Charge, a),
        Command::Discharge(a) => (ExperimentKind::Discharge, a),
        Command::Cycle(a) => (ExperimentKind::Cycle, a),
        Command::Hierarchy(a) => (ExperimentKind::Hierarchy, a),
        Command::Grid(a) => (ExperimentKind::Grid, a),
        Command::Ohmicity(a) => (ExperimentKind::Ohmicity, a),
        Command::Thermal(a) => (ExperimentKind::Thermal, a),
        Command::Scale(a) => (ExperimentKind::Scale, a),
        Command::OracleCheck(a) => (ExperimentKind::OracleCheck, a),
    };
    let result = load_with_overrides(args.config.as_deref(), &args.set)
        .map_err(Into::into)
        .and_then(|cfg| dispatch(kind, &cfg, &args.out));
    match result {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string(&m.summary).unwrap_or_default());
            if m.passed == Some(false) {
                eprintln!("{kind}: check failed");
                return ExitCode::from(EXIT_ORACLE);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
