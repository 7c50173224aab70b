use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use h4bp::acceptance::Criterion;
use h4bp::reference::SUN_JUPITER_MU;
use h4bp_cli::commands;
use h4bp_cli::config::{Overrides, RunConfig};
use h4bp_cli::CliError;

/// Explore periodic orbit families of the planar Hill four-body problem.
#[derive(Debug, Parser)]
#[command(name = "h4bp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibria, their spectra and the linear frequencies around L3.
    Info {
        #[arg(long, default_value_t = SUN_JUPITER_MU)]
        mu: f64,
    },
    /// Continue one or more families and write their records.
    Trace {
        /// JSON run configuration; command-line options override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mu: Option<f64>,
        /// Comma-separated family names: g, f, a, a2, g-upper, g-lower, Hb, Ha, short, long.
        #[arg(long, value_delimiter = ',')]
        family: Option<Vec<String>>,
        #[arg(long, allow_negative_numbers = true)]
        c_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        c_max: Option<f64>,
        #[arg(long)]
        max_members: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the SVG charts next to each family record.
        #[arg(long)]
        plot: bool,
    },
    /// Draw charts for a trace directory or a single family directory.
    Plot { dir: PathBuf },
    /// Recompute acceptance criteria, or check a trace directory.
    Verify {
        dir: Option<PathBuf>,
        /// Criterion name or number; repeatable.
        #[arg(long)]
        criterion: Vec<Criterion>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Info { mu } => commands::info(mu, &mut out),
        Command::Trace { config, mu, family, c_min, c_max, max_members, out: dir, plot } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            cfg.apply(Overrides { mu, families: family, c_min, c_max, max_members, output_dir: dir, plot });
            commands::trace(&cfg, &mut out)
        }
        Command::Plot { dir } => commands::plot(&dir, &mut out),
        Command::Verify { dir, criterion } => commands::verify(dir.as_deref(), &criterion, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            if !matches!(e, CliError::Failed) {
                eprintln!("h4bp: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
