use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;

use error::CliError;

/// CSF pressure-volume simulator.
#[derive(Debug, Parser)]
#[command(name = "csfpv", version, about, arg_required_else_help = true)]
struct Cli {
    /// Print the typical parameter table and exit.
    #[arg(long)]
    show_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario described by a TOML file.
    Simulate {
        config: PathBuf,
        /// Trace CSV destination (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the steady-state report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Override `[output] solver`.
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        /// Write the configuration with every default filled in.
        #[arg(long)]
        dump_config: Option<PathBuf>,
    },
    /// Write the data behind figures 1 to 7 as CSV files.
    Figures {
        dir: PathBuf,
        /// Only this figure.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=7))]
        only: Option<u32>,
    },
    /// Fit a compliance model to a pressure trace; prints JSON.
    Fit {
        trace: PathBuf,
        #[arg(long, value_parser = ["constant", "hyperbolic", "sklar", "lim"])]
        model: String,
        /// Volume of an instantaneous bolus given just before the first fitted sample (cc).
        #[arg(long, allow_hyphen_values = true)]
        delta_v: Option<f64>,
        /// Drop samples before this time (min).
        #[arg(long)]
        from: Option<f64>,
        /// Absorption resistance; fixed when given.
        #[arg(long)]
        r_a: Option<f64>,
    },
    /// Compare closed forms against the numeric engine and run the self-checks.
    Validate {
        /// Scale one closed form's output to confirm the suite notices.
        #[arg(long)]
        perturb: Option<String>,
        #[arg(long, default_value_t = 1e-3, allow_hyphen_values = true)]
        perturb_size: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Analytic,
    Numeric,
    Both,
}

impl From<SolverArg> for csfpv_core::SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => Self::Auto,
            SolverArg::Analytic => Self::Analytic,
            SolverArg::Numeric => Self::Numeric,
            SolverArg::Both => Self::Both,
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if cli.show_defaults {
        commands::emit(&commands::defaults_table())?;
        if cli.command.is_none() {
            return Ok(());
        }
    }
    match cli.command {
        None => Ok(()),
        Some(Command::Simulate {
            config,
            out,
            report,
            solver,
            dump_config,
        }) => commands::simulate(&commands::SimulateArgs {
            config,
            out,
            report,
            solver: solver.map(Into::into),
            dump_config,
        }),
        Some(Command::Figures { dir, only }) => commands::figures(&dir, only),
        Some(Command::Fit {
            trace,
            model,
            delta_v,
            from,
            r_a,
        }) => commands::fit(&commands::FitArgs {
            trace,
            model,
            delta_v,
            from,
            r_a,
        }),
        Some(Command::Validate {
            perturb,
            perturb_size,
        }) => commands::validate(perturb.as_deref(), perturb_size),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
