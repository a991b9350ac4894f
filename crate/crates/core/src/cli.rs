//! Command-line surface. `roster --help` lists the subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::pipeline::{export_team, token_report, ChatKind, Engine, RunConfig, RunRecord, RunStore};
use crate::selection::{Nsga2Params, SelectionStrategy, SizeBounds};
use crate::synthetic::evaluate_nsga2;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "roster", version, about = "Generate agent roles and select a balanced team")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Selection strategy (overrides the config).
    #[arg(long, global = true, value_name = "NAME")]
    pub strategy: Option<SelectionStrategy>,
    /// Chat provider kind: scripted or http (overrides the config).
    #[arg(long, global = true, value_name = "NAME")]
    pub provider: Option<ChatKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate roles for one query and select a team.
    Init {
        #[arg(long)]
        query: String,
        /// Also write the chosen team document here.
        #[arg(long, value_name = "PATH")]
        export: Option<PathBuf>,
        #[command(flatten)]
        log: LogArg,
    },
    /// Generate once from several queries and select against another set.
    InitBatch {
        /// Query for role generation (repeatable).
        #[arg(long = "gen-query", required = true)]
        gen_queries: Vec<String>,
        /// Query for relevance and selection (repeatable).
        #[arg(long = "sel-query", required = true)]
        sel_queries: Vec<String>,
        #[arg(long, value_name = "PATH")]
        export: Option<PathBuf>,
        #[command(flatten)]
        log: LogArg,
    },
    /// Print the Pareto front for a query without selecting.
    Front {
        #[arg(long)]
        query: String,
        /// Write the front as JSON here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        log: LogArg,
    },
    /// Compare NSGA-II against exhaustive enumeration on a synthetic pool.
    EvalFront {
        #[arg(long)]
        pool: usize,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 100)]
        population: usize,
        #[arg(long, default_value_t = 50)]
        generations: usize,
    },
    /// Token usage of a recorded run.
    Report {
        #[arg(long)]
        run_id: Option<String>,
        #[command(flatten)]
        log: LogArg,
    },
    /// Write the chosen team of a recorded run as a team document.
    Export {
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        log: LogArg,
    },
}

#[derive(Debug, Args)]
pub struct LogArg {
    /// Run log (JSONL). Defaults to the config's `run_log`.
    #[arg(long, value_name = "PATH")]
    pub run_log: Option<PathBuf>,
}

impl Cli {
    fn load_config(&self) -> crate::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(strategy) = self.strategy {
            config.strategy = strategy;
        }
        if let Some(kind) = self.provider {
            config.chat.kind = kind;
        }
        Ok(config)
    }
}

fn run_log(config: &RunConfig, arg: &LogArg) -> crate::Result<PathBuf> {
    arg.run_log
        .clone()
        .or_else(|| config.run_log.clone())
        .ok_or_else(|| Error::Config("no run log: pass --run-log or set run_log".into()))
}

fn engine(config: RunConfig, log: &LogArg) -> crate::Result<Engine> {
    let store = RunStore::new(run_log(&config, log)?);
    Ok(Engine::from_config(config)?.with_store(store))
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON values always serialize")
    );
}

fn summary(record: &RunRecord) -> serde_json::Value {
    json!({
        "run_id": record.run_id,
        "candidate_pool": record.candidate_pool.iter().map(|a| &a.name).collect::<Vec<_>>(),
        "front_size": record.front.as_ref().map(|f| f.len()),
        "front_method": record.front.as_ref().map(|f| f.method),
        "chosen_team": record.chosen_names(),
        "scores": record.chosen_team.as_ref().map(|t| t.scores),
        "selection": record.selection,
        "token_usage": record.token_usage,
    })
}

fn finish_run(record: &RunRecord, export: Option<&Path>) -> crate::Result<()> {
    if let Some(path) = export {
        export_team(record, path)?;
    }
    print_json(&summary(record));
    Ok(())
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> crate::Result<()> {
    let config = cli.load_config()?;
    match &cli.command {
        Command::Init { query, export, log } => {
            let record = engine(config, log)?.init_for_query(query)?;
            finish_run(&record, export.as_deref())
        }
        Command::InitBatch {
            gen_queries,
            sel_queries,
            export,
            log,
        } => {
            let record =
                engine(config, log)?.init_transferable(gen_queries.clone(), sel_queries.clone())?;
            finish_run(&record, export.as_deref())
        }
        Command::Front { query, out, log } => {
            let record = engine(config, log)?.front_only(vec![query.clone()], vec![query.clone()])?;
            let names: Vec<String> = record.candidate_pool.iter().map(|a| a.name.clone()).collect();
            let front = record.front.as_ref().expect("completed runs have a front");
            let doc = serde_json::to_value(front.export(&names))
                .map_err(|e| Error::json("front export", e))?;
            match out {
                Some(path) => {
                    let text = serde_json::to_string_pretty(&doc)
                        .map_err(|e| Error::json("front export", e))?;
                    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
                    print_json(&summary(&record));
                }
                None => print_json(&doc),
            }
            Ok(())
        }
        Command::EvalFront {
            pool,
            n_min,
            n_max,
            population,
            generations,
        } => {
            let bounds = SizeBounds::new(*n_min, *n_max)?;
            let params = Nsga2Params {
                population_size: *population,
                generations: *generations,
                seed: config.seed,
                ..config.nsga2.clone()
            };
            let eval = evaluate_nsga2(*pool, config.seed, bounds, &params, config.execution)?;
            print_json(&serde_json::to_value(eval).map_err(|e| Error::json("evaluation", e))?);
            Ok(())
        }
        Command::Report { run_id, log } => {
            let record = RunStore::find(&run_log(&config, log)?, run_id.as_deref())?;
            let usage = token_report(&record);
            print_json(&json!({
                "run_id": record.run_id,
                "status": record.status,
                "token_usage": usage,
            }));
            Ok(())
        }
        Command::Export { run_id, out, log } => {
            let record = RunStore::find(&run_log(&config, log)?, run_id.as_deref())?;
            let doc = export_team(&record, out)?;
            print_json(&json!({ "run_id": doc.provenance.run_id, "written": out }));
            Ok(())
        }
    }
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                crate::ErrorCategory::Usage.exit_code()
            } else {
                0
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.category().exit_code()
        }
    }
}
