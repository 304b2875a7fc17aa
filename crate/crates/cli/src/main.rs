mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "cslearn", version, about = "Sparse equation learning by comprehensive subset search")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for subset enumeration and scenario fan-out.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,

    /// Output file (dict, gen, fit) or directory (bench).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the monomial dictionary for the given limits.
    Dict(DictArgs),
    /// Simulate a system or sample a random polynomial problem.
    Gen(GenArgs),
    /// Learn a sparse model from a CSV file.
    Fit(FitArgs),
    /// Run a benchmark sweep described by a JSON config.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DictArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub features: u64,
    /// Largest power of a single feature.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub m1: u32,
    /// Largest total degree of a term.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub m2: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenTarget {
    Lorenz,
    Rf,
    Poly,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub system: GenTarget,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    /// Time step (systems only).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Number of nonzero terms (polynomials only).
    #[arg(long, default_value_t = 2)]
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMode {
    /// Columns `x1,…,xl,y`: regress `y` on the features.
    Regression,
    /// State columns, optionally preceded by `t`: learn one equation per state.
    Dynsys,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub data: PathBuf,
    /// cs-r2, cs-pm, bsr, stlsq, stlsq-cv or frols.
    #[arg(long, default_value = "cs-r2")]
    pub method: String,
    #[arg(long, value_enum, default_value_t = FitMode::Regression)]
    pub mode: FitMode,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub m1: u32,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    pub m2: u32,
    /// Time step when the file has no `t` column.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub top_s: Option<usize>,
    #[arg(long)]
    pub top_t: Option<usize>,
    #[arg(long)]
    pub c_min: Option<f64>,
    /// STLSQ weight threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    /// Comma-separated methods overriding the config's list.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
}

pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let globals = Globals {
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
    };
    let run = || match &cli.command {
        Command::Dict(a) => commands::dict(a, &globals),
        Command::Gen(a) => commands::gen(a, &globals),
        Command::Fit(a) => commands::fit(a, &globals),
        Command::Bench(a) => commands::bench(a, &globals),
    };
    let result = match cli.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w as usize).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(Failure::internal(e.to_string())),
        },
        None => run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
