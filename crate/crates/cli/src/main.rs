mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Reconstructs microservice architecture models from source repositories.
#[derive(Debug, Parser)]
#[command(name = "archrecon", version)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the extractors over one repository and write its model.
    Reconstruct {
        #[arg(long)]
        repo: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// JSON or YAML object merged into the initial model.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep transient `$`-keys such as `$path` in the output.
        #[arg(long)]
        keep_transient: bool,
    },
    /// Merge model files, left to right.
    Aggregate {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OnConflict::Fail)]
        on_conflict: OnConflict,
    },
    /// Resolve the links of an aggregated model.
    Resolve {
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        resolve: ResolveArgs,
    },
    /// Reconstruct several repositories, merge the models and resolve links.
    Pipeline {
        #[arg(long = "repo", required = true)]
        repos: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        resolve: ResolveArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Directory of `*.extractor.{json,yaml,yml}` files, `builtin` for every
    /// shipped extractor, or `builtin:<id>` for one of them.
    #[arg(long = "extractors")]
    extractors: Vec<String>,
    /// JSON or YAML object mapping extractor ids to config overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_rounds: usize,
    #[arg(long, default_value_t = 100_000)]
    max_entities: usize,
}

#[derive(Debug, Args)]
struct ResolveArgs {
    /// Fail with exit code 3 unless every link resolves.
    #[arg(long)]
    strict: bool,
    /// Write the resolution report (a JSON array) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnConflict {
    Fail,
    Collect,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Reconstruct {
            repo,
            run,
            init,
            out,
            keep_transient,
        } => commands::reconstruct(&repo, &run, init.as_deref(), &out, keep_transient),
        Command::Aggregate {
            models,
            out,
            on_conflict,
        } => commands::aggregate(&models, &out, on_conflict == OnConflict::Collect),
        Command::Resolve {
            model,
            out,
            resolve,
        } => commands::resolve(&model, &out, &resolve),
        Command::Pipeline {
            repos,
            run,
            out,
            resolve,
        } => commands::pipeline(&repos, &run, &out, &resolve),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            failure.report();
            ExitCode::from(failure.code())
        }
    }
}
