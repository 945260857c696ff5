use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relay_freshness::experiment::{self, ExperimentConfig, Mode, OutputFormat};
use relay_freshness::{Error, Execution};

/// Exit status for configuration problems.
const EXIT_CONFIG: u8 = 3;
/// Exit status for infeasible allocations.
const EXIT_CONSTRAINT: u8 = 4;
/// Exit status for I/O and other runtime failures.
const EXIT_RUNTIME: u8 = 5;

#[derive(Parser)]
#[command(
    name = "relayfresh",
    version,
    about = "Freshness-optimal update rates for parallel relay caches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score the allocation given in the config file.
    Eval(CommonArgs),
    /// Solve the pooled relaxation, pack it onto routes and score it.
    Optimize(CommonArgs),
    /// Optimize, then simulate the packed allocation.
    Simulate(CommonArgs),
    /// Run the full pipeline on the built-in K=5, N=30 preset.
    ReproducePaper(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML). Optional for reproduce-paper.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output` or `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Source cycles simulated per file.
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Delimited)]
    format: Format,
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Delimited,
    Structured,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => EXIT_CONFIG,
        Error::ConstraintViolation(_) => EXIT_CONSTRAINT,
        _ => EXIT_RUNTIME,
    }
}

fn load(mode: Mode, args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match (&args.config, mode) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::parse("--config", format!("cannot read {}: {e}", path.display()))
            })?;
            experiment::parse_config(&text)?
        }
        (None, Mode::ReproducePaper) => ExperimentConfig::paper_preset(),
        (None, _) => return Err(Error::parse("--config", "a configuration file is required")),
    };
    if mode == Mode::Eval && config.allocation.is_none() {
        return Err(Error::parse("allocation", "required in eval mode"));
    }
    config.mode = mode;
    if let Some(c) = args.cycles {
        if c == 0 {
            return Err(Error::parse("--cycles", "must be at least 1"));
        }
        config.cycles = c;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Eval(a) => (Mode::Eval, a),
        Command::Optimize(a) => (Mode::Optimize, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::ReproducePaper(a) => (Mode::ReproducePaper, a),
    };

    let result = load(mode, args).and_then(|config| {
        let exec = if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        let outcome = experiment::run(&config, exec)?;
        let dir = args
            .out
            .clone()
            .or_else(|| config.output_path.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let format = match args.format {
            Format::Delimited => OutputFormat::Delimited,
            Format::Structured => OutputFormat::Structured,
        };
        let written = experiment::write_report(&outcome.report, &dir, format)?;
        Ok((outcome, written))
    });

    match result {
        Ok((outcome, written)) => {
            let s = &outcome.report.summary;
            println!("F_ub   = {}", experiment::format_sig(s.f_ub));
            println!("F_so   = {}", experiment::format_sig(s.f_so));
            println!("gap    = {}", experiment::format_sig(s.gap));
            println!(
                "bounds = {} (split files), {} (0.5(K-1))",
                experiment::format_sig(s.gap_bound_fine),
                experiment::format_sig(s.gap_bound_coarse)
            );
            println!("split  = {:?}", s.split_files);
            if let (Some(t), Some(se)) = (s.simulated_total, s.simulated_total_std_err) {
                println!(
                    "F_sim  = {} ± {}",
                    experiment::format_sig(t),
                    experiment::format_sig(se)
                );
            }
            for path in written {
                println!("wrote {}", path.display());
            }
            eprintln!("runtime {:.3} s", outcome.runtime.as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
