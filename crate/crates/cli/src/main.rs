mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;
use output::OutputFormat;

/// Exact laws, samplers and Monte Carlo checks for fractional Poisson
/// processes.
///
/// Exit status: 0 success, 1 usage error, 2 a series failed to converge,
/// 3 a statistical check failed.
#[derive(Debug, Parser)]
#[command(name = "fracpois", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    /// Write the table here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for sampling and verification.
    #[arg(long, global = true, env = "FRACPOIS_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ParamArgs {
    /// Space-fractional order, in (0, 1].
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Time-fractional order, in (0, 1].
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SeriesArgs {
    /// Relative tolerance of the series.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Process {
    Space,
    Time,
    SpaceTime,
    Composed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    PmfMc,
    MinUniform,
    Subordination,
    Ode,
    Oracle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mass function P(N(t) = k) for k = 0..=kmax.
    Pmf {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 10)]
        kmax: u64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Generating function E[u^N(t)].
    Pgf {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        u: f64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Draws of N(t), one count per row.
    Sample {
        #[arg(long, value_enum)]
        process: Process,
        #[command(flatten)]
        params: ParamArgs,
        /// Order of the stable time change, for the composed process.
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First random stream; chunk i uses stream + i.
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Runs one verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        /// Draws per sample; each suite has its own default.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Single u for the min-uniform suite; default 0.2, 0.5 and 0.8.
        #[arg(long, allow_negative_numbers = true)]
        u: Option<f64>,
        /// Largest k for the ode suite.
        #[arg(long, default_value_t = 10)]
        kmax: u64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Law of the first time N reaches level k.
    Passage {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        k: u64,
        #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["tmax", "steps"])]
        t: Option<f64>,
        #[arg(long, requires = "steps", allow_negative_numbers = true)]
        tmax: Option<f64>,
        #[arg(long, requires = "tmax")]
        steps: Option<u64>,
        #[command(flatten)]
        series: SeriesArgs,
    },
}

fn open_output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (table, failure) = match fracpois::sample::with_threads(cli.threads, || commands::run(&cli.command)) {
        Ok(outcome) => outcome,
        Err(e) => (None, Some(Failure::from(e))),
    };
    if let Some(table) = table {
        let written = open_output(&cli.out).and_then(|mut out| table.write(cli.format, &mut out));
        if let Err(e) = written {
            eprintln!("error: cannot write output: {e}");
            return ExitCode::from(1);
        }
    }
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
