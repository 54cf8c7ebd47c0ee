use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tseba_cli::{parse_workers, run_document, CliError, Command, Format, Overrides, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "tseba", version, about = "Fixed-budget best-arm identification simulations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one instance and report regret and misidentification
    Simulate(RunArgs),
    /// Sweep adversarial gaps and compare with the worst-case constant
    Scan(RunArgs),
    /// Estimate prior-averaged regret and the Bayes constants
    Bayes(RunArgs),
    /// Evaluate the worst-case constant and gap
    Bounds(RunArgs),
    /// Compare KL divergence with its Fisher-information limit
    KlCheck(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    config: PathBuf,
    /// Base seed, overriding the file
    #[arg(long)]
    seed: Option<u64>,
    /// Replications (per prior draw for `bayes`), overriding the file
    #[arg(long)]
    reps: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Scan(a) => (Command::Scan, a),
        Cmd::Bayes(a) => (Command::Bayes, a),
        Cmd::Bounds(a) => (Command::Bounds, a),
        Cmd::KlCheck(a) => (Command::KlCheck, a),
    };
    match start(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn start(command: Command, args: RunArgs) -> Result<(), CliError> {
    let workers = parse_workers(std::env::var(WORKERS_ENV).ok().as_deref())?;
    // an unreadable config file is a configuration problem
    let text = fs::read_to_string(&args.config).map_err(|e| tseba_cli::ConfigError::Field {
        field: "config".into(),
        message: format!("{}: {e}", args.config.display()),
    })?;
    let overrides = Overrides {
        seed: args.seed,
        reps: args.reps,
        output: args.output,
        format: args.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }),
    };
    run_document(&text, command, &overrides, workers)?;
    Ok(())
}
