//! `iclparse`: sample, emit-train, parse, eval and cache-stats over log datasets.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "iclparse", version, about = "Cached in-context-learning log parser")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Demonstrations per prompt (parse) or highest shot level (emit-train).
    #[arg(long, global = true)]
    pub shots: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Only run the configured dataset with this name.
    #[arg(long, global = true)]
    pub dataset: Option<String>,
    /// Ad-hoc dataset: raw log file.
    #[arg(long, global = true, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Ad-hoc dataset: LineId,Content,EventTemplate ground truth.
    #[arg(long, global = true, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Ad-hoc dataset: header regex with a `content` group.
    #[arg(long, global = true, value_name = "REGEX")]
    pub header_pattern: Option<String>,
    /// Ad-hoc dataset name, used as the output file prefix.
    #[arg(long, global = true)]
    pub name: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendArg {
    Http,
    Oracle,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw the meta and inference candidate pools.
    Sample {
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Write 0-shot..K-shot training examples from the meta pool.
    EmitTrain {
        /// Meta pool CSV; defaults to the one written by `sample`.
        #[arg(long, value_name = "PATH")]
        meta: Option<PathBuf>,
        /// Examples per shot level.
        #[arg(long)]
        per_shot: Option<usize>,
    },
    /// Parse every log line through the cache and the model.
    Parse {
        /// Labeled inference pool; defaults to the one written by `sample`.
        #[arg(long, value_name = "PATH")]
        inference: Option<PathBuf>,
        /// Start from a saved cache snapshot.
        #[arg(long, value_name = "PATH")]
        warm_cache: Option<PathBuf>,
    },
    /// Score structured output against ground truth.
    Eval {
        /// Structured CSV; defaults to the one written by `parse`.
        #[arg(long, value_name = "PATH")]
        parsed: Option<PathBuf>,
    },
    /// Summarize a saved cache snapshot.
    CacheStats {
        #[arg(long, value_name = "PATH")]
        cache: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample { ratio } => commands::sample(&cli.global, ratio),
        Command::EmitTrain { meta, per_shot } => commands::emit_train(&cli.global, meta, per_shot),
        Command::Parse { inference, warm_cache } => commands::parse(&cli.global, inference, warm_cache),
        Command::Eval { parsed } => commands::eval(&cli.global, parsed),
        Command::CacheStats { cache } => commands::cache_stats(&cli.global, cache),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
