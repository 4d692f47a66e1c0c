use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use lbes_cli::app::{self, Source};
use lbes_cli::exit;

/// Extremum seeking with intermittent cost measurements.
///
/// Exit codes: 0 success, 1 configuration or usage error, 2 divergence
/// detected, 3 a verification check failed.
#[derive(Parser)]
#[command(name = "lbes", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Bundled preset (fig2a … fig5b).
    #[arg(long)]
    preset: Option<String>,
}

impl SourceArgs {
    fn source(&self) -> Source {
        match (&self.config, &self.preset) {
            (Some(p), _) => Source::Path(p.clone()),
            (None, Some(n)) => Source::Preset(n.clone()),
            (None, None) => unreachable!("clap requires one of --config/--preset"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write its trajectory as CSV.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        /// CSV output path; defaults to `<name>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional SVG plot of x(t).
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the Cartesian product of parameter lists and tabulate metrics.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// `key=v1,v2,...` entries, e.g. `scheme.omega=20pi,2002pi`.
        #[arg(long, num_args = 0..)]
        grid: Vec<String>,
        /// Metrics table, one row per grid cell.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run built-in self-checks.
    Verify {
        /// dithers, gamma, assumption4, path-equivalence, gradient-scaling,
        /// reference-oracle or all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// List bundled presets.
    Presets,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::CONFIG,
            };
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run { source, out, plot } => app::cmd_run(&source.source(), out.as_deref(), plot.as_deref()),
        Command::Sweep { source, grid, out } => app::cmd_sweep(&source.source(), grid, out),
        Command::Verify { suite } => app::cmd_verify(suite),
        Command::Presets => Ok(app::cmd_presets()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
