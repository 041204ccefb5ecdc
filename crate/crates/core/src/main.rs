//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 partial
//! failures in the grid (or an early stop).

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emonli::catalog::load_catalogs;
use emonli::corpora::{self, CorpusName};
use emonli::runner::report::{load_report_spec, report};
use emonli::runner::{enumerate_combinations, run, RunConfig, RunOptions};

#[derive(Parser)]
#[command(
    name = "emonli",
    about = "NLI-based zero-shot emotion classification across languages",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the evaluation grid described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Fault-injection aid: abandon the run (no finalization) after this
        /// many combinations were committed by this process.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Emit report tables from an existing results store.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (default: <store>/reports).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check catalogs and corpora referenced by a config without scoring.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convert an upstream corpus distribution to the normal form.
    CorpusConvert {
        #[arg(long)]
        corpus: CorpusName,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Language filter / id component (required for multi-language raws).
        #[arg(long)]
        language: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, stop_after } => cmd_run(&config, stop_after),
        Command::Report { store, spec, out } => cmd_report(&store, &spec, out.as_deref()),
        Command::Validate { config } => cmd_validate(&config),
        Command::CorpusConvert {
            corpus,
            input,
            out,
            language,
        } => cmd_convert(corpus, language.as_deref(), &input, &out),
    }
}

fn cmd_run(config_path: &std::path::Path, stop_after: Option<usize>) -> ExitCode {
    let config = match RunConfig::load(config_path) {
        Ok(config) => config,
        Err(e) => return config_error(e),
    };
    let options = RunOptions { stop_after };
    match run(&config, &options) {
        Ok(summary) => {
            for warning in &summary.warnings {
                eprintln!("warning: {warning}");
            }
            println!(
                "completed {} of {} combinations ({} skipped as already complete)",
                summary.completed, summary.total_combinations, summary.skipped
            );
            for (id, message) in &summary.failed {
                eprintln!("failed: {id}: {message}");
            }
            println!("store: {}", summary.output_dir.display());
            if summary.stopped_early {
                eprintln!("stopped early after {} combinations", summary.completed);
                ExitCode::from(2)
            } else if summary.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => config_error(e),
    }
}

fn cmd_report(
    store: &std::path::Path,
    spec_path: &std::path::Path,
    out: Option<&std::path::Path>,
) -> ExitCode {
    let spec = match load_report_spec(spec_path) {
        Ok(spec) => spec,
        Err(e) => return config_error(e),
    };
    match report(store, &spec, out) {
        Ok(files) => {
            for file in &files {
                println!("wrote {}", file.path.display());
                for gap in &file.gaps {
                    eprintln!("  gap: {gap}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => config_error(e),
    }
}

fn cmd_validate(config_path: &std::path::Path) -> ExitCode {
    let config = match RunConfig::load(config_path) {
        Ok(config) => config,
        Err(e) => return config_error(e),
    };
    let catalog = match load_catalogs(&config.catalogs) {
        Ok(catalog) => catalog,
        Err(e) => return config_error(e),
    };

    let mut label_sets = std::collections::BTreeMap::new();
    for dataset in &config.datasets {
        for (language, path) in &dataset.languages {
            match corpora::load_corpus(dataset.name, language, path) {
                Ok(load) => {
                    for warning in &load.warnings {
                        eprintln!("warning: {warning}");
                    }
                    println!(
                        "{}/{}: {} instances, labels [{}]",
                        dataset.name,
                        language,
                        load.corpus.instances.len(),
                        load.corpus.label_set.join(", ")
                    );
                    label_sets.insert((dataset.name, language.clone()), load.corpus.label_set);
                }
                Err(e) => return config_error(e),
            }
        }
    }

    let combinations = match enumerate_combinations(&config) {
        Ok(combinations) => combinations,
        Err(e) => return config_error(e),
    };
    println!("grid: {} combinations", combinations.len());

    let mut required = BTreeSet::new();
    for combination in &combinations {
        for label in &label_sets[&(combination.dataset, combination.data_language.clone())] {
            required.insert((
                combination.prompt_language.clone(),
                combination.prompt_type,
                label.clone(),
            ));
        }
    }
    let report = catalog.validate(&required.into_iter().collect::<Vec<_>>());
    if report.is_empty() {
        println!("catalog: complete for this grid");
        ExitCode::SUCCESS
    } else {
        eprintln!("{report}");
        ExitCode::from(1)
    }
}

fn cmd_convert(
    corpus: CorpusName,
    language: Option<&str>,
    input: &std::path::Path,
    out: &std::path::Path,
) -> ExitCode {
    match corpora::convert::convert(corpus, language, input, out) {
        Ok(summary) => {
            println!(
                "converted {}: {} rows read, {} rows written -> {}",
                corpus,
                summary.rows_read,
                summary.rows_written,
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => config_error(e),
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}
