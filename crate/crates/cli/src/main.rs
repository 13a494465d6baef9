//! `hetconv` command-line tool.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    BenchmarkArgs, EvaluateArgs, ExplainArgs, GenerateArgs, GradcheckArgs, TrainArgs, VerifyArgs,
};

#[derive(Debug, Parser)]
#[command(
    name = "hetconv",
    version,
    about = "Heterogeneous graph convolution with type-level attention"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write checkpoint, log, attention summary and metrics.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Rank meta-paths for a target type.
    Explain(ExplainArgs),
    /// Write a synthetic graph directory.
    Generate(GenerateArgs),
    /// Time training epochs over graphs of increasing size.
    Benchmark(BenchmarkArgs),
    /// Compare analytic and numeric gradients of a small model.
    Gradcheck(GradcheckArgs),
    /// Validate a graph directory and run the numerical self-checks.
    Verify(VerifyArgs),
}

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Code {
    Usage = 1,
    Data = 2,
    Check = 3,
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: Code, error: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<hetconv::Error> for Failure {
    fn from(e: hetconv::Error) -> Failure {
        use hetconv::Error as E;
        let code = match &e {
            E::Config(_) | E::UnknownType(_) | E::Json(_) => Code::Usage,
            E::NonFinite(_) => Code::Check,
            _ => Code::Data,
        };
        Failure::new(code, e)
    }
}

fn pin_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("HETCONV_THREADS") else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::new(
            Code::Usage,
            anyhow::anyhow!("HETCONV_THREADS must be a positive integer, got `{value}`"),
        )
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(Code::Usage, e))?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the parallel feature; HETCONV_THREADS={n} ignored");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Code::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = pin_threads().and_then(|()| match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Explain(a) => commands::explain(a),
        Command::Generate(a) => commands::generate(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Verify(a) => commands::verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
