use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use onsd_cli::error::CliResult;
use onsd_cli::evaluate::{cmd_evaluate, EvaluateOpts};
use onsd_cli::load_config;
use onsd_cli::measure::{cmd_measure, MeasureOpts};
use onsd_cli::phantom::{cmd_phantom, PhantomOpts};

/// Automated optic nerve sheath diameter measurement from ultrasound frame sequences.
#[derive(Parser)]
#[command(name = "onsd", version)]
struct Cli {
    /// Pipeline config file (key=value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Videos measured in parallel in batch mode.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Also write v(n), kappa(n), KL and entropy CSV/SVG files.
    #[arg(long, global = true)]
    dump_signals: bool,

    /// Tracker seed box on frame 0, `x,y,w,h`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    seed_box: Option<String>,

    /// Rows `start,end` whose pixels feed the boundary histograms.
    #[arg(long, global = true)]
    measure_rows: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure one video directory, or every video directory inside INPUT.
    Measure {
        input: PathBuf,
        /// Report directory; without it a single report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metadata file, defaults to INPUT/meta.txt.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Video id used in the report, defaults to the directory name.
        #[arg(long)]
        id: Option<String>,
    },
    /// Render a synthetic phantom sequence with ground truth.
    Phantom {
        /// Phantom spec file (key=value); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Agreement statistics between two `id,value` CSV series.
    Evaluate {
        candidate: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    let config = load_config(
        cli.config.as_deref(),
        cli.seed_box.as_deref(),
        cli.measure_rows.as_deref(),
    )?;
    match cli.command {
        Command::Measure {
            input,
            out,
            meta,
            id,
        } => cmd_measure(
            &MeasureOpts {
                input,
                out,
                meta,
                id,
                dump_signals: cli.dump_signals,
                jobs: cli.jobs.max(1),
            },
            &config,
            &mut stdout,
        ),
        Command::Phantom {
            spec,
            frames,
            seed,
            out,
        } => cmd_phantom(
            &PhantomOpts {
                spec,
                frames,
                seed,
                out,
            },
            &mut stdout,
        ),
        Command::Evaluate {
            candidate,
            reference,
            out,
        } => cmd_evaluate(
            &EvaluateOpts {
                candidate,
                reference,
                out,
            },
            &mut stdout,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("onsd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
