//! Batch orchestration: generate, scan, refine, evaluate, persist.
//!
//! Tasks are spread over a pool of worker threads. A single writer appends
//! finished records in dataset order, so output is identical for any worker
//! count. Analyzers that only run in batches (CodeQL) are applied in one pass
//! after all workers finish.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use super::config::{CheckerKind, ConfigError, RunConfig};
use super::dataset::{load_dataset, DatasetError};
use super::store::{
    read_jsonl, read_records, rewrite_jsonl, run_files, GenerationFailure, GenerationRecord,
    JsonlWriter, StoreError,
};
use crate::analysis::{
    AnalysisError, Analyzer, BanditAnalyzer, CodeQlAnalyzer, NoopChecker, PythonChecker, RuleScan,
    SyntaxChecker,
};
use crate::llm::{self, LlmClient, LlmError};
use crate::strategies::{
    generate_and_scan, run_strategy, PromptTemplates, RefineContext, TemplateError,
};
use crate::types::{AnalyzerId, Evaluation, RunRecord, TaskPrompt, Terminal};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("required tool unavailable: {0}")]
    ToolMissing(#[source] AnalysisError),
    #[error("model backend: {0}")]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant; makes output byte-reproducible.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Live components of a run.
pub struct Toolchain {
    pub llm: Box<dyn LlmClient>,
    pub analyzer: Box<dyn Analyzer>,
    /// Extra analyzers scoring the initial and final programs.
    pub evaluators: Vec<Box<dyn Analyzer>>,
    pub checker: Box<dyn SyntaxChecker>,
    pub templates: PromptTemplates,
    pub clock: Box<dyn Clock>,
    // scratch space for analyzer temp files, removed on drop
    _workdir: Option<tempfile::TempDir>,
}

/// Builds the analyzer for `id`, failing if its executable is missing.
pub fn build_analyzer(id: AnalyzerId, workdir: &Path) -> Result<Box<dyn Analyzer>, HarnessError> {
    Ok(match id {
        AnalyzerId::RuleScan => Box::new(RuleScan),
        AnalyzerId::Bandit => {
            Box::new(BanditAnalyzer::from_env(workdir).map_err(HarnessError::ToolMissing)?)
        }
        AnalyzerId::CodeQL => {
            Box::new(CodeQlAnalyzer::from_env(workdir).map_err(HarnessError::ToolMissing)?)
        }
    })
}

pub fn build_checker(kind: CheckerKind) -> Result<Box<dyn SyntaxChecker>, HarnessError> {
    Ok(match kind {
        CheckerKind::None => Box::new(NoopChecker),
        CheckerKind::Python => {
            Box::new(PythonChecker::from_env().map_err(HarnessError::ToolMissing)?)
        }
        CheckerKind::Auto => match PythonChecker::from_env() {
            Ok(c) => Box::new(c),
            Err(e) => {
                log::info!("no python interpreter found ({e}); syntax checks disabled");
                Box::new(NoopChecker)
            }
        },
    })
}

impl Toolchain {
    /// Connects the model backend and locates every configured tool.
    pub fn from_config(cfg: &RunConfig) -> Result<Self, HarnessError> {
        let workdir = tempfile::Builder::new().prefix("vulnpatch-").tempdir()?;
        let analyzer = build_analyzer(cfg.analyzer, workdir.path())?;
        let evaluators = cfg
            .eval_analyzers
            .iter()
            .filter(|id| **id != cfg.analyzer)
            .map(|id| build_analyzer(*id, workdir.path()))
            .collect::<Result<Vec<_>, _>>()?;
        let templates = match &cfg.templates_dir {
            Some(dir) => PromptTemplates::from_dir(dir)?,
            None => PromptTemplates::default(),
        };
        Ok(Self {
            llm: llm::connect(&cfg.provider)?,
            analyzer,
            evaluators,
            checker: build_checker(cfg.syntax_checker)?,
            templates,
            clock: Box::new(SystemClock),
            _workdir: Some(workdir),
        })
    }

    /// Assembles a toolchain from parts (tests, embedding).
    pub fn new(llm: Box<dyn LlmClient>, analyzer: Box<dyn Analyzer>) -> Self {
        Self {
            llm,
            analyzer,
            evaluators: Vec::new(),
            checker: Box::new(NoopChecker),
            templates: PromptTemplates::default(),
            clock: Box::new(SystemClock),
            _workdir: None,
        }
    }

    fn ctx<'a>(&'a self, cfg: &'a RunConfig, task_id: &'a str) -> RefineContext<'a> {
        RefineContext {
            task_id,
            llm: self.llm.as_ref(),
            analyzer: self.analyzer.as_ref(),
            checker: self.checker.as_ref(),
            templates: &self.templates,
            params: &cfg.params,
        }
    }
}

/// Loads the dataset, builds the toolchain and runs every task.
pub fn run_benchmark(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let tasks = load_dataset(&cfg.dataset)?;
    let tools = Toolchain::from_config(cfg)?;
    run_tasks(cfg, &tasks, &tools)
}

enum Outcome {
    Record(Box<RunRecord>),
    Failure(GenerationFailure),
}

fn process_task(cfg: &RunConfig, tools: &Toolchain, digest: &str, task: &TaskPrompt) -> Outcome {
    let started_at = tools.clock.now();
    let ctx = tools.ctx(cfg, &task.id);
    let failure = |error: String| {
        log::warn!("{}: {error}", task.id);
        Outcome::Failure(GenerationFailure {
            task_id: task.id.clone(),
            model_id: cfg.params.model_id.clone(),
            strategy: cfg.strategy,
            config_digest: digest.to_string(),
            error,
            at: tools.clock.now(),
        })
    };
    let initial = match generate_and_scan(&ctx, task, &cfg.strategy_cfg) {
        Ok(s) => s,
        Err(e) => return failure(format!("generation failed: {e}")),
    };
    let mut trace = match run_strategy(&ctx, cfg.strategy, &cfg.strategy_cfg, &initial) {
        Ok(t) => t,
        Err(e) => return failure(format!("{} failed: {e}", cfg.strategy)),
    };
    for ev in tools.evaluators.iter().filter(|e| !e.batch_only()) {
        let initial_report = ev.scan_or_error(&trace.original().code);
        let final_report = if trace.final_attempt.is_some() {
            ev.scan_or_error(&trace.final_candidate().code)
        } else {
            initial_report.clone()
        };
        trace.set_evaluation(Evaluation {
            tool: ev.id(),
            initial: initial_report,
            final_report,
        });
    }
    Outcome::Record(Box::new(RunRecord {
        task_id: task.id.clone(),
        model_id: cfg.params.model_id.clone(),
        strategy: cfg.strategy,
        trace,
        started_at,
        finished_at: tools.clock.now(),
        config_digest: digest.to_string(),
    }))
}

/// Scores the original and final program of every record with `ev`, in one
/// batch.
pub fn evaluate_records(records: &mut [RunRecord], ev: &dyn Analyzer) {
    let mut items = Vec::with_capacity(records.len() * 2);
    for (i, r) in records.iter().enumerate() {
        items.push((format!("{i}__initial"), r.trace.original().code.clone()));
        if r.trace.final_attempt.is_some() {
            items.push((
                format!("{i}__final"),
                r.trace.final_candidate().code.clone(),
            ));
        }
    }
    let mut reports = ev.scan_many(&items);
    for (i, r) in records.iter_mut().enumerate() {
        let Some(initial) = reports.remove(&format!("{i}__initial")) else {
            continue;
        };
        let final_report = reports
            .remove(&format!("{i}__final"))
            .unwrap_or_else(|| initial.clone());
        r.trace.set_evaluation(Evaluation {
            tool: ev.id(),
            initial,
            final_report,
        });
    }
}

/// Runs `f` over `items` on up to `workers` threads and hands results to
/// `sink` in input order.
fn ordered_pool<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
    mut sink: impl FnMut(R) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            let tx = tx.clone();
            let (next, f) = (&next, &f);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                if tx.send((i, f(item))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&expected) {
                sink(r)?;
                expected += 1;
            }
        }
        Ok(())
    })
}

/// Runs `tasks`, skipping those already recorded under the same config
/// digest, and appends the results to the run file.
pub fn run_tasks(
    cfg: &RunConfig,
    tasks: &[TaskPrompt],
    tools: &Toolchain,
) -> Result<RunSummary, HarnessError> {
    let digest = cfg.digest(&tools.templates.digest());
    let out_path = cfg.output_file();
    let done: HashSet<String> = if cfg.resume {
        read_records(&out_path)?
            .into_iter()
            .filter(|r| {
                r.model_id == cfg.params.model_id
                    && r.strategy == cfg.strategy
                    && r.config_digest == digest
            })
            .map(|r| r.task_id)
            .collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<&TaskPrompt> = tasks.iter().filter(|t| !done.contains(&t.id)).collect();
    let mut summary = RunSummary {
        skipped: tasks.len() - pending.len(),
        ..RunSummary::default()
    };
    log::info!(
        "{} / {}: {} tasks, {} already done",
        cfg.params.model_id,
        cfg.strategy,
        tasks.len(),
        summary.skipped
    );

    let mut out = JsonlWriter::open(&out_path, !cfg.resume)?;
    // failures of earlier runs are retried now, so the log starts over
    let mut failures = JsonlWriter::open(&cfg.failures_file(), true)?;
    let batch_evals: Vec<&dyn Analyzer> = tools
        .evaluators
        .iter()
        .filter(|e| e.batch_only())
        .map(|e| e.as_ref())
        .collect();
    let mut held: Vec<RunRecord> = Vec::new();

    ordered_pool(
        &pending,
        cfg.workers,
        |task| process_task(cfg, tools, &digest, task),
        |outcome| {
            match outcome {
                Outcome::Failure(f) => {
                    summary.failed += 1;
                    failures.append(&f)?;
                }
                Outcome::Record(r) => {
                    if r.trace.terminal == Terminal::Error {
                        summary.failed += 1;
                    } else {
                        summary.completed += 1;
                    }
                    if batch_evals.is_empty() {
                        out.append_line(&r.to_json_line())?;
                    } else {
                        held.push(*r);
                    }
                }
            }
            Ok(())
        },
    )?;

    for ev in &batch_evals {
        evaluate_records(&mut held, *ev);
    }
    for r in &held {
        out.append_line(&r.to_json_line())?;
    }
    Ok(summary)
}

/// Generation-only mode: writes one [`GenerationRecord`] per task.
pub fn run_generation(
    cfg: &RunConfig,
    tasks: &[TaskPrompt],
    tools: &Toolchain,
) -> Result<RunSummary, HarnessError> {
    let digest = cfg.generation_digest(&tools.templates.digest());
    let path = cfg.generated_file();
    let done: HashSet<String> = if cfg.resume {
        read_jsonl::<GenerationRecord>(&path)?
            .into_iter()
            .filter(|r| r.model_id == cfg.params.model_id && r.config_digest == digest)
            .map(|r| r.task_id)
            .collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<&TaskPrompt> = tasks.iter().filter(|t| !done.contains(&t.id)).collect();
    let mut summary = RunSummary {
        skipped: tasks.len() - pending.len(),
        ..RunSummary::default()
    };
    let mut out = JsonlWriter::open(&path, !cfg.resume)?;
    ordered_pool(
        &pending,
        cfg.workers,
        |task| {
            let started_at = tools.clock.now();
            generate_and_scan(&tools.ctx(cfg, &task.id), task, &cfg.strategy_cfg)
                .map(|initial| GenerationRecord {
                    task_id: task.id.clone(),
                    model_id: cfg.params.model_id.clone(),
                    initial,
                    started_at,
                    finished_at: tools.clock.now(),
                    config_digest: digest.clone(),
                })
                .map_err(|e| format!("{}: {e}", task.id))
        },
        |res| {
            match res {
                Ok(rec) => {
                    summary.completed += 1;
                    out.append(&rec)?;
                }
                Err(e) => {
                    log::warn!("generation failed for {e}");
                    summary.failed += 1;
                }
            }
            Ok(())
        },
    )?;
    Ok(summary)
}

/// Re-scores every run file in `dir` with `evaluators`, rewriting the files
/// in place. Returns the number of records updated.
pub fn evaluate_run_dir(
    dir: &Path,
    evaluators: &[Box<dyn Analyzer>],
) -> Result<usize, HarnessError> {
    let mut updated = 0;
    for file in run_files(dir)? {
        let mut records = read_records(&file)?;
        for ev in evaluators {
            evaluate_records(&mut records, ev.as_ref());
        }
        rewrite_jsonl(&file, &records)?;
        updated += records.len();
    }
    Ok(updated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ConfigLayer;
    use crate::llm::ScriptedClient;

    #[test]
    fn ordered_pool_preserves_order_for_any_worker_count() {
        let items: Vec<u64> = (0..50).collect();
        for workers in [1, 3, 8, 64] {
            let mut seen = Vec::new();
            ordered_pool(
                &items,
                workers,
                |x| {
                    std::thread::sleep(std::time::Duration::from_micros((50 - x) * 20));
                    x * 2
                },
                |r| {
                    seen.push(r);
                    Ok(())
                },
            )
            .unwrap();
            assert_eq!(seen, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        }
    }

    #[test]
    fn ordered_pool_handles_no_items() {
        let items: Vec<u8> = Vec::new();
        ordered_pool(&items, 4, |x| *x, |_| Ok(())).unwrap();
    }

    fn config(out: &Path) -> RunConfig {
        let mut layer = ConfigLayer::parse(
            "model_id = \"m\"\nanalyzer = \"rulescan\"\nstrategy = \"direct\"\nworkers = 2\n\
             [dataset]\npath = \"unused.jsonl\"\n[provider]\nbackend = \"scripted\"\ncassette = \"unused\"\n",
        )
        .unwrap();
        layer.output_dir = Some(out.to_path_buf());
        layer.resolve().unwrap()
    }

    fn task(id: &str) -> TaskPrompt {
        TaskPrompt {
            id: id.into(),
            text: format!("prompt {id}"),
            source_dataset: crate::types::SourceDataset::Custom,
            domains: Default::default(),
        }
    }

    #[test]
    fn generation_failure_is_isolated_and_retried() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let tasks = [task("a"), task("b")];
        let llm = ScriptedClient::default()
            .with_task("a", ["x = 1"])
            .with_task(
                "b",
                [crate::llm::ScriptEntry::Error {
                    error: "down".into(),
                }],
            );
        let tools = Toolchain::new(Box::new(llm), Box::new(RuleScan));
        let s = run_tasks(&cfg, &tasks, &tools).unwrap();
        assert_eq!(
            s,
            RunSummary {
                completed: 1,
                skipped: 0,
                failed: 1
            }
        );
        let failures: Vec<GenerationFailure> = read_jsonl(&cfg.failures_file()).unwrap();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].task_id, "b");

        let llm = ScriptedClient::default().with_task("b", ["y = 2"]);
        let tools = Toolchain::new(Box::new(llm), Box::new(RuleScan));
        let s = run_tasks(&cfg, &tasks, &tools).unwrap();
        assert_eq!(
            s,
            RunSummary {
                completed: 1,
                skipped: 1,
                failed: 0
            }
        );
        assert!(read_jsonl::<GenerationFailure>(&cfg.failures_file())
            .unwrap()
            .is_empty());
        assert_eq!(read_records(&cfg.output_file()).unwrap().len(), 2);
    }

    #[test]
    fn generation_mode_writes_generation_records() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let llm = ScriptedClient::default().with_task("a", ["x = eval(y)"]);
        let tools = Toolchain::new(Box::new(llm), Box::new(RuleScan));
        let s = run_generation(&cfg, &[task("a")], &tools).unwrap();
        assert_eq!(s.completed, 1);
        let recs: Vec<GenerationRecord> = read_jsonl(&cfg.generated_file()).unwrap();
        assert!(recs[0].initial.report.is_flagged());
        let tools = Toolchain::new(Box::new(ScriptedClient::default()), Box::new(RuleScan));
        assert_eq!(
            run_generation(&cfg, &[task("a")], &tools).unwrap().skipped,
            1
        );
    }

    /// Counts findings of one rule only; stands in for a second tool.
    struct EvalOnlyEval;

    impl Analyzer for EvalOnlyEval {
        fn id(&self) -> AnalyzerId {
            AnalyzerId::CodeQL
        }

        fn scan(&self, code: &str) -> Result<crate::types::AnalysisReport, AnalysisError> {
            let mut r = crate::analysis::rulescan(code);
            r.tool = AnalyzerId::CodeQL;
            r.findings.retain(|f| f.rule_id == "RS-B307");
            Ok(crate::types::AnalysisReport::from_findings(
                AnalyzerId::CodeQL,
                r.findings,
                r.raw,
            ))
        }

        fn batch_only(&self) -> bool {
            true
        }
    }

    #[test]
    fn batch_evaluators_score_initial_and_final() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let llm = ScriptedClient::default().with_task("a", ["x = eval(y)", "x = int(y)"]);
        let mut tools = Toolchain::new(Box::new(llm), Box::new(RuleScan));
        tools.evaluators.push(Box::new(EvalOnlyEval));
        run_tasks(&cfg, &[task("a")], &tools).unwrap();
        let recs = read_records(&cfg.output_file()).unwrap();
        let (initial, fin) = recs[0].trace.reports_for(AnalyzerId::CodeQL).unwrap();
        assert!(initial.is_flagged());
        assert!(!fin.is_flagged());
    }
}
