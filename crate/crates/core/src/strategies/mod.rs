//! Refinement strategies.
//!
//! Every strategy takes an initially flagged program and produces a
//! [`RefinementTrace`]. The four baselines make one or two calls; the
//! solution-guided strategy ([`fdsp_refine`]) asks for `J` mitigation
//! strategies and tries each for up to `K` rounds, stopping at the first
//! clean scan.
//!
//! Model failures during refinement never escape as `Err`: they end the trace
//! with [`Terminal::Error`] and the cause in `trace.errors`. `Err` is reserved
//! for misuse (violated preconditions, broken templates).

mod baselines;
mod fdsp;
mod feedback;
mod generate;
mod solutions;
mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, Analyzer, SyntaxChecker};
use crate::extract::{extract_code, ExtractError};
use crate::llm::{ChatRequest, LlmClient, LlmError, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use crate::types::{
    AnalysisReport, CodeCandidate, InitialState, Lineage, RefinementAttempt, RefinementTrace,
    ReportStatus, Terminal,
};

pub use baselines::{
    bandit_feedback_refine, direct_refine, self_debug_refine, verbalization_refine, verbalize,
};
pub use fdsp::fdsp_refine;
pub use feedback::render_report;
pub use generate::{generate_and_scan, generate_initial};
pub use solutions::{generate_solutions, parse_solutions, ParsedSolutions};
pub use templates::{PromptTemplates, TemplateError, TemplateName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyId {
    #[serde(rename = "direct")]
    DirectPrompt,
    #[serde(rename = "selfdebug")]
    SelfDebug,
    #[serde(rename = "bandit")]
    BanditFeedback,
    #[serde(rename = "verbalize")]
    Verbalization,
    #[serde(rename = "fdsp")]
    Fdsp,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] = [
        StrategyId::DirectPrompt,
        StrategyId::SelfDebug,
        StrategyId::BanditFeedback,
        StrategyId::Verbalization,
        StrategyId::Fdsp,
    ];

    /// Stable key used on the command line, in file names and in reports.
    pub fn key(self) -> &'static str {
        match self {
            StrategyId::DirectPrompt => "direct",
            StrategyId::SelfDebug => "selfdebug",
            StrategyId::BanditFeedback => "bandit",
            StrategyId::Verbalization => "verbalize",
            StrategyId::Fdsp => "fdsp",
        }
    }

    /// Row label in result tables.
    pub fn label(self) -> &'static str {
        match self {
            StrategyId::DirectPrompt => "Direct prompting",
            StrategyId::SelfDebug => "Self-debugging",
            StrategyId::BanditFeedback => "Bandit feedback",
            StrategyId::Verbalization => "Verbalization",
            StrategyId::Fdsp => "FDSP",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for StrategyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.key() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown strategy {s:?} (expected direct, selfdebug, bandit, verbalize or fdsp)"))
    }
}

/// Where each refinement round of a solution branch starts from. Every
/// branch starts from the original program in both modes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSeedMode {
    /// Round `k` refines the output of round `k - 1`.
    #[default]
    Chained,
    /// Every round refines the original program.
    FromOriginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    /// Number of solutions requested, `J`.
    pub solutions_j: u32,
    /// Refinement rounds per solution, `K`.
    pub iterations_k: u32,
    pub max_compile_fix_rounds: u32,
    pub branch_seed_mode: BranchSeedMode,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            solutions_j: 3,
            iterations_k: 2,
            max_compile_fix_rounds: 2,
            branch_seed_mode: BranchSeedMode::Chained,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.solutions_j == 0 {
            return Err(StrategyError::InvalidConfig(
                "solutions J must be at least 1".into(),
            ));
        }
        if self.iterations_k == 0 {
            return Err(StrategyError::InvalidConfig(
                "iterations K must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid strategy config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("syntax check failed: {0}")]
    Checker(#[from] AnalysisError),
}

/// Sampling parameters shared by every call of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub model_id: String,
    pub system: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            model_id: String::new(),
            system: String::new(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl ModelParams {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            ..Self::default()
        }
    }

    pub fn request(&self, user: String) -> ChatRequest {
        ChatRequest {
            model_id: self.model_id.clone(),
            system: self.system.clone(),
            user,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

/// Everything a strategy needs for one task.
#[derive(Clone, Copy)]
pub struct RefineContext<'a> {
    pub task_id: &'a str,
    pub llm: &'a dyn LlmClient,
    pub analyzer: &'a dyn Analyzer,
    pub checker: &'a dyn SyntaxChecker,
    pub templates: &'a PromptTemplates,
    pub params: &'a ModelParams,
}

impl RefineContext<'_> {
    fn ask(&self, user: String) -> Result<String, LlmError> {
        let req = self.params.request(user);
        req.validate()?;
        Ok(self.llm.complete(self.task_id, &req)?.text)
    }

    fn render(&self, name: TemplateName, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        self.templates.render(name, vars)
    }

    /// Syntax check of a refined program. Checker failures are logged and
    /// treated as "no error recorded".
    fn post_check(&self, code: &str) -> Option<crate::analysis::CompileError> {
        self.checker.check(code).unwrap_or_else(|e| {
            log::warn!("{}: syntax check unavailable: {e}", self.task_id);
            None
        })
    }

    fn new_trace(&self, strategy: StrategyId, initial: &InitialState) -> RefinementTrace {
        let terminal = Terminal::Unfixed;
        RefinementTrace::without_refinement(
            self.task_id,
            strategy,
            &self.templates.digest(),
            initial.clone(),
            terminal,
        )
    }

    /// Extracts, syntax-checks and rescans one refinement answer.
    fn attempt_from_answer(
        &self,
        answer: &str,
        lineage: Lineage,
        llm_calls_used: u32,
        feedback: Option<String>,
    ) -> Result<RefinementAttempt, ExtractError> {
        let code = extract_code(answer)?.code;
        let compile_error = self.post_check(&code);
        let report = self.analyzer.scan_or_error(&code);
        Ok(RefinementAttempt {
            solution_index: lineage.solution_index,
            iteration: lineage.iteration,
            candidate: CodeCandidate::refined(code, lineage),
            report,
            llm_calls_used,
            feedback,
            compile_error,
        })
    }
}

/// Fills in `total_llm_calls` from the per-attempt counts.
fn seal(mut trace: RefinementTrace) -> RefinementTrace {
    trace.total_llm_calls =
        trace.strategy_llm_calls + trace.attempts.iter().map(|a| a.llm_calls_used).sum::<u32>();
    debug_assert_eq!(trace.check_invariants(), Ok(()));
    trace
}

/// Verdict for a trace whose returned attempt is `trace.attempts[idx]`.
fn settle_on(trace: &mut RefinementTrace, idx: usize) {
    let status = trace.attempts[idx].report.exit_status;
    match status {
        ReportStatus::Clean => {
            trace.terminal = Terminal::Fixed;
            trace.final_attempt = Some(idx);
        }
        ReportStatus::FindingsPresent => {
            trace.terminal = Terminal::Unfixed;
            trace.final_attempt = Some(idx);
        }
        ReportStatus::ToolError => {
            // no verdict for the refined code; keep scoring the original
            trace.terminal = Terminal::Error;
            trace.final_attempt = None;
            trace.errors.push(format!(
                "analyzer failed on refined code: {}",
                trace.attempts[idx].report.raw
            ));
        }
    }
}

fn require_not_clean(report: &AnalysisReport) -> Result<(), StrategyError> {
    if report.is_clean() {
        return Err(StrategyError::Precondition(
            "initial report is clean; nothing to refine".into(),
        ));
    }
    Ok(())
}

fn require_findings(report: &AnalysisReport) -> Result<(), StrategyError> {
    if report.findings.is_empty() {
        return Err(StrategyError::Precondition("report has no findings".into()));
    }
    Ok(())
}

/// Runs `strategy` on a generated program.
///
/// Programs that scan clean skip refinement (`FixedAtGeneration`); programs
/// whose scan failed end as `Error` without any model call.
pub fn run_strategy(
    ctx: &RefineContext<'_>,
    strategy: StrategyId,
    cfg: &StrategyConfig,
    initial: &InitialState,
) -> Result<RefinementTrace, StrategyError> {
    let report = &initial.report;
    match report.exit_status {
        ReportStatus::Clean => {
            let mut trace = ctx.new_trace(strategy, initial);
            trace.terminal = Terminal::FixedAtGeneration;
            if strategy == StrategyId::Fdsp {
                trace.strategy_config = Some(cfg.clone());
            }
            return Ok(seal(trace));
        }
        ReportStatus::ToolError => {
            let mut trace = ctx.new_trace(strategy, initial);
            trace.terminal = Terminal::Error;
            trace
                .errors
                .push(format!("initial scan failed: {}", report.raw));
            if strategy == StrategyId::Fdsp {
                trace.strategy_config = Some(cfg.clone());
            }
            return Ok(seal(trace));
        }
        ReportStatus::FindingsPresent => {}
    }
    match strategy {
        StrategyId::DirectPrompt => direct_refine(ctx, initial),
        StrategyId::SelfDebug => self_debug_refine(ctx, initial),
        StrategyId::BanditFeedback => bandit_feedback_refine(ctx, initial),
        StrategyId::Verbalization => verbalization_refine(ctx, initial),
        StrategyId::Fdsp => fdsp_refine(ctx, initial, cfg),
    }
}
