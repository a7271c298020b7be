use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use roughmax::cli::{load_config, preset, run, Command, RunOptions};
use roughmax::operators::Budget;
use roughmax::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Maximal,
    Constant,
    Sparse,
    Dominate,
    Sharpness,
    Weaktype,
    Twoweight,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Maximal => Command::Maximal,
            Sub::Constant => Command::Constant,
            Sub::Sparse => Command::Sparse,
            Sub::Dominate => Command::Dominate,
            Sub::Sharpness => Command::Sharpness,
            Sub::Weaktype => Command::Weaktype,
            Sub::Twoweight => Command::Twoweight,
        }
    }
}

/// Multilinear fractional maximal operators with rough kernels: experiments
/// and checks on sampled data.
#[derive(Debug, Parser)]
#[command(name = "roughmax", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// JSON run configuration; the command's built-in preset when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for `<command>.csv` and `<command>.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Largest grid, in cells, on which the all-cubes family is swept.
    #[arg(long)]
    budget: Option<usize>,
    /// Seed for random data that does not carry its own.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::Hypothesis(_) | Error::Domain(_) | Error::Format(_) | Error::Json(_) => 2,
        Error::Resource(_) => 3,
        Error::Inconsistency(_) => 4,
        Error::Io(_) | Error::Csv(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = Command::from(args.command);
    let cfg = match &args.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
        },
        None => preset(cmd),
    };
    let mut budget = Budget::default();
    if let Some(cells) = args.budget {
        budget.all_cubes_cells = cells;
    }
    let opts = RunOptions { out: args.out, budget, seed: args.seed };
    match run(cmd, &cfg, &opts) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
            eprintln!("wrote {} and {}", out.csv.display(), out.json.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
