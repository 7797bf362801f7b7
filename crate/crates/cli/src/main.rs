//! `vulnpatch` command-line driver.
//!
//! Exit codes: 0 success, 1 some tasks failed (or a run aborted on an I/O or
//! store error), 2 configuration or usage error, 3 a required external tool
//! is missing.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vulnpatch::harness::{
    self, build_analyzer, dataset_stats, load_dataset, read_jsonl, read_run_dir, CheckerKind,
    ConfigLayer, DatasetSpec, FixedClock, GenerationRecord, HarnessError, RunConfig, RunSummary,
    Toolchain,
};
use vulnpatch::llm::BackendKind;
use vulnpatch::metrics::ReportFormat;
use vulnpatch::strategies::StrategyId;
use vulnpatch::AnalyzerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exit {
    Ok = 0,
    PartialFailures = 1,
    ConfigError = 2,
    ToolMissing = 3,
}

#[derive(Debug, Parser)]
#[command(
    name = "vulnpatch",
    version,
    about = "Generate Python code with an LLM, scan it, and patch what the scanner flags"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Prompt dataset (.jsonl or .csv).
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Model id sent to the backend.
    #[arg(long, global = true, value_name = "ID")]
    model: Option<String>,
    /// direct, selfdebug, bandit, verbalize or fdsp.
    #[arg(long, global = true, value_name = "NAME")]
    strategy: Option<StrategyId>,
    /// Analyzer driving refinement: bandit or rulescan.
    #[arg(long, global = true, value_name = "NAME")]
    analyzer: Option<AnalyzerId>,
    /// Extra analyzer scoring initial and final code (repeatable).
    #[arg(long = "eval-analyzer", global = true, value_name = "NAME")]
    eval_analyzers: Vec<AnalyzerId>,
    /// Number of solutions J.
    #[arg(long, global = true, value_name = "J")]
    solutions: Option<u32>,
    /// Refinement rounds per solution K.
    #[arg(long, global = true, value_name = "K")]
    iters: Option<u32>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Run directory for records and reports.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// live, record, replay or scripted.
    #[arg(long, global = true, value_name = "KIND")]
    backend: Option<BackendKind>,
    /// Cassette (record/replay) or script (scripted) file.
    #[arg(long, global = true, value_name = "PATH")]
    cassette: Option<PathBuf>,
    /// Chat-completions base URL for live and record backends.
    #[arg(long, global = true, value_name = "URL")]
    endpoint: Option<String>,
    /// Sampling temperature.
    #[arg(long, global = true, value_name = "T")]
    temperature: Option<f64>,
    /// Completion token limit.
    #[arg(long = "max-tokens", global = true, value_name = "N")]
    max_tokens: Option<u32>,
    /// Directory of prompt template overrides.
    #[arg(long, global = true, value_name = "DIR")]
    templates: Option<PathBuf>,
    /// Syntax gate: auto, python or none.
    #[arg(long, global = true, value_name = "KIND")]
    checker: Option<CheckerKind>,
    /// Start over instead of skipping tasks already recorded.
    #[arg(long, global = true)]
    fresh: bool,
    /// Report format: md, csv or plotdata.
    #[arg(long, global = true, value_name = "FMT", default_value = "md")]
    format: ReportFormat,
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Stamp every record with this RFC 3339 instant (reproducible output).
    #[arg(long = "fixed-clock", global = true, value_name = "TIME")]
    fixed_clock: Option<DateTime<Utc>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate and scan code for every prompt, without refinement.
    Generate,
    /// Generate, scan and refine with the chosen strategy.
    Refine,
    /// Re-score stored run records with the --eval-analyzer tools.
    Evaluate,
    /// Build result tables and CWE histograms from stored records.
    Report {
        /// Entries per CWE histogram.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Inspect a prompt dataset.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
}

#[derive(Debug, Subcommand)]
enum DatasetAction {
    /// Check that the dataset parses and ids are unique.
    Validate,
    /// Count prompts per library domain.
    Stats,
}

/// Failure with its exit code.
struct Fail(Exit, String);

impl From<HarnessError> for Fail {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::ToolMissing(_) => Exit::ToolMissing,
            HarnessError::Config(_)
            | HarnessError::Dataset(_)
            | HarnessError::Llm(_)
            | HarnessError::Template(_) => Exit::ConfigError,
            HarnessError::Store(_) | HarnessError::Io(_) => Exit::PartialFailures,
        };
        Fail(code, e.to_string())
    }
}

fn config_error(e: impl ToString) -> Fail {
    Fail(Exit::ConfigError, e.to_string())
}

impl GlobalArgs {
    fn flag_layer(&self) -> ConfigLayer {
        let mut l = ConfigLayer::default();
        l.dataset.path = self.dataset.clone();
        l.model_id = self.model.clone();
        l.temperature = self.temperature;
        l.max_tokens = self.max_tokens;
        l.strategy = self.strategy;
        l.strategy_cfg.solutions_j = self.solutions;
        l.strategy_cfg.iterations_k = self.iters;
        l.analyzer = self.analyzer;
        if !self.eval_analyzers.is_empty() {
            l.eval_analyzers = Some(self.eval_analyzers.iter().copied().collect());
        }
        l.workers = self.workers;
        l.output_dir = self.out.clone();
        l.resume = self.fresh.then_some(false);
        l.syntax_checker = self.checker;
        l.templates_dir = self.templates.clone();
        l.provider.endpoint_url = self.endpoint.clone();
        l.provider.backend = self.backend;
        l.provider.cassette = self.cassette.clone();
        l
    }

    /// File values overlaid with flags. Defaults are applied by `resolve`.
    fn layer(&self) -> Result<ConfigLayer, Fail> {
        let file = match &self.config {
            Some(p) => ConfigLayer::load(p).map_err(config_error)?,
            None => ConfigLayer::default(),
        };
        Ok(file.overlay(self.flag_layer()))
    }

    fn run_config(&self) -> Result<RunConfig, Fail> {
        self.layer()?.resolve().map_err(config_error)
    }

    fn out_dir(&self) -> Result<PathBuf, Fail> {
        Ok(self
            .layer()?
            .output_dir
            .unwrap_or_else(|| PathBuf::from("runs")))
    }

    fn dataset_spec(&self) -> Result<DatasetSpec, Fail> {
        let layer = self.layer()?;
        let path = layer
            .dataset
            .path
            .ok_or_else(|| config_error("no dataset given (--dataset or [dataset] path)"))?;
        Ok(DatasetSpec {
            path,
            format: layer.dataset.format,
            name: layer.dataset.name,
        })
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    command: &'a str,
    #[serde(flatten)]
    summary: RunSummary,
    output: PathBuf,
}

fn toolchain(g: &GlobalArgs, cfg: &RunConfig) -> Result<Toolchain, Fail> {
    let mut tools = Toolchain::from_config(cfg)?;
    if let Some(t) = g.fixed_clock {
        tools.clock = Box::new(FixedClock(t));
    }
    Ok(tools)
}

fn finish_run(g: &GlobalArgs, command: &str, summary: RunSummary, output: PathBuf) -> Exit {
    if g.json {
        let report = RunReport {
            command,
            summary,
            output,
        };
        println!(
            "{}",
            serde_json::to_string(&report).expect("summary serializes")
        );
    } else {
        println!(
            "{command}: {} completed, {} skipped, {} failed -> {}",
            summary.completed,
            summary.skipped,
            summary.failed,
            output.display()
        );
    }
    if summary.failed > 0 {
        Exit::PartialFailures
    } else {
        Exit::Ok
    }
}

fn cmd_refine(g: &GlobalArgs) -> Result<Exit, Fail> {
    let cfg = g.run_config()?;
    let tasks = load_dataset(&cfg.dataset).map_err(HarnessError::from)?;
    let tools = toolchain(g, &cfg)?;
    let summary = harness::run_tasks(&cfg, &tasks, &tools)?;
    Ok(finish_run(g, "refine", summary, cfg.output_file()))
}

fn cmd_generate(g: &GlobalArgs) -> Result<Exit, Fail> {
    let cfg = g.run_config()?;
    let tasks = load_dataset(&cfg.dataset).map_err(HarnessError::from)?;
    let tools = toolchain(g, &cfg)?;
    let summary = harness::run_generation(&cfg, &tasks, &tools)?;
    Ok(finish_run(g, "generate", summary, cfg.generated_file()))
}

fn cmd_evaluate(g: &GlobalArgs) -> Result<Exit, Fail> {
    let layer = g.layer()?;
    let ids: BTreeSet<AnalyzerId> = layer.eval_analyzers.clone().unwrap_or_default();
    if ids.is_empty() {
        return Err(config_error("evaluate needs at least one --eval-analyzer"));
    }
    let dir = g.out_dir()?;
    let workdir = tempfile::Builder::new()
        .prefix("vulnpatch-")
        .tempdir()
        .map_err(|e| Fail(Exit::PartialFailures, e.to_string()))?;
    let evaluators = ids
        .iter()
        .map(|id| build_analyzer(*id, workdir.path()))
        .collect::<Result<Vec<_>, _>>()?;
    let updated = harness::evaluate_run_dir(&dir, &evaluators)?;
    if g.json {
        println!(
            "{}",
            serde_json::json!({"command": "evaluate", "records": updated, "output": dir})
        );
    } else {
        println!("evaluate: {updated} records re-scored in {}", dir.display());
    }
    Ok(Exit::Ok)
}

fn cmd_report(g: &GlobalArgs, top: usize) -> Result<Exit, Fail> {
    let dir = g.out_dir()?;
    let records = read_run_dir(&dir).map_err(HarnessError::from)?;
    if records.is_empty() {
        return Err(config_error(format!("no run records in {}", dir.display())));
    }
    let requested: Vec<AnalyzerId> = g.eval_analyzers.clone();
    let written = report::write_reports(&records, &requested, g.format, top, &dir.join("report"))
        .map_err(|e| Fail(Exit::PartialFailures, e.to_string()))?;
    if g.json {
        println!(
            "{}",
            serde_json::json!({"command": "report", "records": records.len(), "files": written})
        );
    } else {
        print!(
            "{}",
            report::main_table_text(&records, &requested, g.format)
        );
    }
    Ok(Exit::Ok)
}

/// Generated code by task id, from any run or generation file in `dir`.
fn known_codes(dir: &Path) -> BTreeMap<String, String> {
    let mut codes = BTreeMap::new();
    if !dir.is_dir() {
        return codes;
    }
    if let Ok(records) = read_run_dir(dir) {
        for r in records {
            codes
                .entry(r.task_id)
                .or_insert(r.trace.initial.candidate.code);
        }
    }
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            let path = e.path();
            if path.to_string_lossy().ends_with("__generated.jsonl") {
                for r in read_jsonl::<GenerationRecord>(&path).unwrap_or_default() {
                    codes.entry(r.task_id).or_insert(r.initial.candidate.code);
                }
            }
        }
    }
    codes
}

fn cmd_dataset(g: &GlobalArgs, action: &DatasetAction) -> Result<Exit, Fail> {
    let spec = g.dataset_spec()?;
    let tasks = load_dataset(&spec).map_err(HarnessError::from)?;
    match action {
        DatasetAction::Validate => {
            if g.json {
                println!(
                    "{}",
                    serde_json::json!({"command": "dataset validate", "prompts": tasks.len()})
                );
            } else {
                println!("{} prompts OK", tasks.len());
            }
        }
        DatasetAction::Stats => {
            let stats = dataset_stats(&tasks, &known_codes(&g.out_dir()?));
            if g.json {
                println!(
                    "{}",
                    serde_json::to_string(&stats).expect("stats serialize")
                );
            } else {
                print!("{}", stats.render_markdown());
            }
        }
    }
    Ok(Exit::Ok)
}

fn run(cli: &Cli) -> Result<Exit, Fail> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate => cmd_generate(g),
        Command::Refine => cmd_refine(g),
        Command::Evaluate => cmd_evaluate(g),
        Command::Report { top } => cmd_report(g, *top),
        Command::Dataset { action } => cmd_dataset(g, action),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Exit::ConfigError as u8
            } else {
                Exit::Ok as u8
            });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            if code == Exit::ToolMissing {
                eprintln!("hint: install the tool or point the BANDIT / CODEQL environment variable at it");
            }
            ExitCode::from(code as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("vulnpatch").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_work_after_the_subcommand() {
        let cli = parse(&[
            "refine",
            "--model",
            "m",
            "--solutions",
            "1",
            "--iters",
            "3",
            "--fresh",
        ]);
        let l = cli.global.flag_layer();
        assert_eq!(l.model_id.as_deref(), Some("m"));
        assert_eq!(l.strategy_cfg.solutions_j, Some(1));
        assert_eq!(l.strategy_cfg.iterations_k, Some(3));
        assert_eq!(l.resume, Some(false));
    }

    #[test]
    fn unset_flags_leave_the_layer_empty() {
        let l = parse(&["refine"]).global.flag_layer();
        assert!(l.model_id.is_none() && l.strategy.is_none() && l.eval_analyzers.is_none());
        assert_eq!(
            l.resume, None,
            "resume defaults come from the file or resolve"
        );
        assert_eq!(
            parse(&["report"]).global.out_dir().ok(),
            Some(PathBuf::from("runs"))
        );
    }

    #[test]
    fn harness_errors_map_to_exit_codes() {
        let io = || std::io::Error::other("disk");
        let Fail(code, _) = HarnessError::Io(io()).into();
        assert_eq!(code, Exit::PartialFailures);
        let Fail(code, _) =
            HarnessError::ToolMissing(vulnpatch::analysis::AnalysisError::ToolNotFound {
                tool: "codeql".into(),
                detail: "not on PATH".into(),
            })
            .into();
        assert_eq!(code, Exit::ToolMissing);
    }
}
