use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vexspace_cli::scenario::Overrides;
use vexspace_cli::{load_bundled, load_file, run_all, thread_cap, write_artifacts, BUNDLED};

#[derive(Parser)]
#[command(name = "vexspace", version, about = "Variable-exponent norms, rearrangements, Cantor sets and embedding certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or the bundled suite with --all
    Run(RunArgs),
    /// List the bundled scenarios
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (one object or an array of objects)
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    scenario: Option<PathBuf>,

    /// Run every bundled scenario
    #[arg(long)]
    all: bool,

    /// Directory for certificates and tables
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Dyadic grading levels toward singular points
    #[arg(long)]
    grid_levels: Option<usize>,

    /// Bases for the criterion integral, comma separated
    #[arg(long, value_delimiter = ',')]
    a_list: Option<Vec<f64>>,

    /// Tolerance for the equimeasurability identity
    #[arg(long)]
    tol: Option<f64>,

    /// Seed for randomized fields
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn run(args: RunArgs) -> ExitCode {
    let overrides = Overrides { grid_levels: args.grid_levels, a_list: args.a_list, tol: args.tol, seed: args.seed };
    let loaded = match &args.scenario {
        Some(path) => load_file(path, &overrides),
        None => load_bundled(&overrides),
    };
    let threads = thread_cap();
    let (prepared, threads) = match (loaded, threads) {
        (Ok(p), Ok(t)) => (p, t),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if prepared.is_empty() {
        return ExitCode::SUCCESS;
    }

    let outcomes = match run_all(&prepared, threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    let mut failed = false;
    for (p, outcome) in prepared.iter().zip(outcomes) {
        match outcome {
            Ok(o) => match write_artifacts(&args.out_dir, &o) {
                Ok(paths) => println!("{} [{}] {} ({} files)", o.name, o.task, o.summary, paths.len()),
                Err(e) => {
                    eprintln!("error: {}: writing artifacts: {e}", o.name);
                    failed = true;
                }
            },
            Err(e) => {
                eprintln!("error: {}: {e:#}", p.name);
                failed = true;
            }
        }
    }
    if failed {
        ExitCode::from(EXIT_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::List => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
