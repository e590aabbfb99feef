use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inoc_cli::commands::{self, RunArgs};
use inoc_cli::{exit_code, Context};

#[derive(Debug, Parser)]
#[command(name = "inoc", version, about = "Inoculation workbench for tabular NLI robustness")]
struct Cli {
    /// TOML run config; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` (and clears `seeds`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `paths.output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Forbid network access; backends must be served from the cache or a mock.
    #[arg(long, global = true)]
    offline: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build P/Q/Q′ challenge sets for each perturbation kind.
    Perturb {
        /// Comma-separated kinds; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
    },
    /// Pick a diverse subset of a dataset with a k-DPP (or greedy MAP).
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        greedy: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a cross-test matrix and write Mix/DynMix/Seq training plans.
    Plan {
        /// Accuracy CSV; defaults to `paths.matrix`.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Build prompt specs for the given strategies.
    Prompt {
        #[arg(long = "strategy")]
        strategies: Vec<String>,
        /// Print the chat request for this premise (needs --hypothesis).
        #[arg(long, requires = "hypothesis")]
        premise: Option<String>,
        #[arg(long, requires = "premise")]
        hypothesis: Option<String>,
    },
    /// Evaluate Q and Q′ sets end to end and write report bundles.
    Run {
        #[arg(long = "strategy")]
        strategies: Vec<String>,
        /// Comma-separated kinds to evaluate.
        #[arg(long, value_delimiter = ',')]
        sets: Option<Vec<String>>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Parse free-form responses (JSONL with a `text` field) into verdicts.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Aggregate report bundles across seeds; optionally assemble cross-test cells.
    Report {
        /// Bundle directories or roots to scan; defaults to `<out>/runs`.
        bundles: Vec<PathBuf>,
        /// CSV of `train,test,accuracy` cells.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let ctx = Context::load(cli.config.as_deref(), cli.out, cli.seed, cli.offline)?;
    match cli.command {
        Command::Perturb { kinds } => commands::cmd_perturb(&ctx, kinds.as_deref()).map(drop),
        Command::Sample { input, k, greedy, output } => {
            commands::cmd_sample(&ctx, &input, k, greedy, output.as_deref()).map(drop)
        }
        Command::Plan { matrix } => commands::cmd_plan(&ctx, matrix.as_deref()).map(drop),
        Command::Prompt {
            strategies,
            premise,
            hypothesis,
        } => {
            let preview = premise.as_deref().zip(hypothesis.as_deref());
            commands::cmd_prompt(&ctx, Some(&strategies), preview).map(drop)
        }
        Command::Run {
            strategies,
            sets,
            parallelism,
        } => {
            let args = RunArgs {
                strategies: Some(strategies),
                sets,
                parallelism,
            };
            commands::cmd_run(&ctx, &args).map(drop)
        }
        Command::Extract { input, output, lexicon } => {
            commands::cmd_extract(&ctx, &input, output.as_deref(), lexicon.as_deref()).map(drop)
        }
        Command::Report { bundles, cells } => commands::cmd_report(&ctx, &bundles, cells.as_deref()).map(drop),
    }
}
