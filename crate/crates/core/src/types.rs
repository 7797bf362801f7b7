//! Value types shared by every stage of the pipeline.
//!
//! Everything here is plain data: constructed once, then passed around by
//! reference or cloned. Serialized forms are part of the persisted JSONL
//! format, so field order and serde names must stay stable.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analysis::CompileError;
use crate::strategies::{StrategyConfig, StrategyId};

/// Benchmark a prompt came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceDataset {
    LLMSecEval,
    SecurityEval,
    PythonSecurityEval,
    Custom,
}

impl SourceDataset {
    /// Maps a dataset name onto a known benchmark, ignoring case and punctuation.
    pub fn from_name(name: &str) -> Self {
        let norm: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "llmseceval" => Self::LLMSecEval,
            "securityeval" => Self::SecurityEval,
            "pythonsecurityeval" => Self::PythonSecurityEval,
            _ => Self::Custom,
        }
    }
}

/// Application domain of a task, assigned from the libraries it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Computation,
    System,
    Network,
    Cryptography,
    General,
    Database,
    WebFrameworks,
}

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::Computation,
        Domain::System,
        Domain::Network,
        Domain::Cryptography,
        Domain::General,
        Domain::Database,
        Domain::WebFrameworks,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Domain::Computation => "Computation",
            Domain::System => "System",
            Domain::Network => "Network",
            Domain::Cryptography => "Cryptography",
            Domain::General => "General",
            Domain::Database => "Database",
            Domain::WebFrameworks => "Web Frameworks",
        }
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Domain::ALL
            .into_iter()
            .find(|d| d.label().replace(' ', "").to_ascii_lowercase() == norm)
            .ok_or_else(|| format!("unknown domain {s:?}"))
    }
}

/// One natural-language prompt from a benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPrompt {
    pub id: String,
    pub text: String,
    pub source_dataset: SourceDataset,
    #[serde(default)]
    pub domains: BTreeSet<Domain>,
}

/// How a candidate program came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    CompileFixed,
    Refined,
}

/// Where a refined candidate sits in the attempt tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lineage {
    pub strategy: StrategyId,
    /// 1-based solution index; 0 for strategies that do not propose solutions.
    pub solution_index: u32,
    pub iteration: u32,
}

/// A generated or refined program. The code is opaque text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCandidate {
    pub code: String,
    pub origin: Origin,
    #[serde(default)]
    pub lineage: Option<Lineage>,
}

impl CodeCandidate {
    pub fn initial(code: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            origin: Origin::Initial,
            lineage: None,
        }
    }

    pub fn compile_fixed(code: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            origin: Origin::CompileFixed,
            lineage: None,
        }
    }

    pub fn refined(code: impl Into<String>, lineage: Lineage) -> Self {
        Self {
            code: code.into(),
            origin: Origin::Refined,
            lineage: Some(lineage),
        }
    }

    /// Checks the structural invariants: non-empty code, lineage iff refined.
    pub fn is_well_formed(&self) -> bool {
        !self.code.trim().is_empty() && (self.origin == Origin::Refined) == self.lineage.is_some()
    }
}

/// Identifier of the analyzer that produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzerId {
    Bandit,
    CodeQL,
    RuleScan,
}

impl AnalyzerId {
    pub fn name(self) -> &'static str {
        match self {
            AnalyzerId::Bandit => "bandit",
            AnalyzerId::CodeQL => "codeql",
            AnalyzerId::RuleScan => "rulescan",
        }
    }

    /// Column label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            AnalyzerId::Bandit => "Bandit",
            AnalyzerId::CodeQL => "CodeQL",
            AnalyzerId::RuleScan => "RuleScan",
        }
    }
}

impl fmt::Display for AnalyzerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnalyzerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bandit" => Ok(AnalyzerId::Bandit),
            "codeql" => Ok(AnalyzerId::CodeQL),
            "rulescan" => Ok(AnalyzerId::RuleScan),
            other => Err(format!("unknown analyzer {other:?}")),
        }
    }
}

/// A CWE identifier, rendered as `CWE-<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CweId(pub u32);

impl fmt::Display for CweId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CWE-{}", self.0)
    }
}

impl FromStr for CweId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("CWE-")
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse().ok())
            .map(CweId)
            .ok_or_else(|| format!("not a CWE id: {s:?}"))
    }
}

impl TryFrom<String> for CweId {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<CweId> for String {
    fn from(value: CweId) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Low,
    Medium,
    High,
    Unknown,
}

impl Severity {
    /// Parses the upper-case levels Bandit emits; anything else is `Unknown`.
    pub fn from_tool(s: &str) -> Self {
        match s.to_ascii_uppercase().as_str() {
            "LOW" => Severity::Low,
            "MEDIUM" => Severity::Medium,
            "HIGH" => Severity::High,
            _ => Severity::Unknown,
        }
    }
}

impl Confidence {
    pub fn from_tool(s: &str) -> Self {
        match s.to_ascii_uppercase().as_str() {
            "LOW" => Confidence::Low,
            "MEDIUM" => Confidence::Medium,
            "HIGH" => Confidence::High,
            _ => Confidence::Unknown,
        }
    }
}

/// One issue reported by an analyzer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    /// Tool-native rule name, e.g. `hardcoded_sql_expressions`.
    #[serde(default)]
    pub test_name: Option<String>,
    pub cwe: Option<CweId>,
    pub severity: Severity,
    pub confidence: Confidence,
    pub message: String,
    pub line: u32,
    pub tool: AnalyzerId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Clean,
    FindingsPresent,
    ToolError,
}

/// Analyzer output for one program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: AnalyzerId,
    pub findings: Vec<Finding>,
    /// Verbatim tool payload.
    pub raw: String,
    pub exit_status: ReportStatus,
}

impl AnalysisReport {
    /// Builds a report from a successful tool run. Findings are put in
    /// canonical `(line, rule_id)` order.
    pub fn from_findings(tool: AnalyzerId, mut findings: Vec<Finding>, raw: String) -> Self {
        sort_findings(&mut findings);
        let exit_status = if findings.is_empty() {
            ReportStatus::Clean
        } else {
            ReportStatus::FindingsPresent
        };
        Self {
            tool,
            findings,
            raw,
            exit_status,
        }
    }

    /// A report for a run where the tool itself failed. Any findings it did
    /// produce are kept.
    pub fn tool_error(tool: AnalyzerId, mut findings: Vec<Finding>, raw: String) -> Self {
        sort_findings(&mut findings);
        Self {
            tool,
            findings,
            raw,
            exit_status: ReportStatus::ToolError,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.exit_status == ReportStatus::Clean
    }

    /// Binary vulnerability verdict used for scoring: at least one finding.
    pub fn is_flagged(&self) -> bool {
        !self.findings.is_empty()
    }
}

fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| (a.line, &a.rule_id).cmp(&(b.line, &b.rule_id)));
}

/// One proposed mitigation strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub index: u32,
    pub title: String,
    pub body: String,
}

impl Solution {
    /// Text handed to the model when asking it to apply this solution.
    pub fn prompt_text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{}: {}", self.title, self.body)
        }
    }
}

/// Outcome of initial generation: the candidate, its scan, and any syntax
/// error the compile-fix rounds could not resolve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialState {
    pub candidate: CodeCandidate,
    pub report: AnalysisReport,
    #[serde(default)]
    pub compile_error: Option<CompileError>,
    /// Generation plus compile-fix calls.
    pub llm_calls: u32,
}

/// One refine-and-rescan pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementAttempt {
    pub solution_index: u32,
    pub iteration: u32,
    pub candidate: CodeCandidate,
    pub report: AnalysisReport,
    pub llm_calls_used: u32,
    /// Model-written feedback consumed by this attempt (self-debug explanation).
    #[serde(default)]
    pub feedback: Option<String>,
    /// Syntax error in the refined code, recorded but not repaired.
    #[serde(default)]
    pub compile_error: Option<CompileError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    FixedAtGeneration,
    Fixed,
    Unfixed,
    Error,
}

/// Scores of the initial and final candidates under an extra evaluation tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub tool: AnalyzerId,
    pub initial: AnalysisReport,
    #[serde(rename = "final")]
    pub final_report: AnalysisReport,
}

/// Full record of one task under one strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub task_id: String,
    pub strategy: StrategyId,
    /// Governing configuration; present for the solution-guided strategy.
    #[serde(default)]
    pub strategy_config: Option<StrategyConfig>,
    pub template_digest: String,
    pub initial: InitialState,
    pub attempts: Vec<RefinementAttempt>,
    #[serde(default)]
    pub solutions: Vec<Solution>,
    #[serde(default)]
    pub solution_shortfall: bool,
    #[serde(default)]
    pub verbalization: Option<String>,
    pub terminal: Terminal,
    /// Index into `attempts` of the candidate returned by the strategy.
    #[serde(default)]
    pub final_attempt: Option<usize>,
    /// Calls made outside any attempt (solution generation, verbalization, ...).
    pub strategy_llm_calls: u32,
    /// Refinement-phase calls: `strategy_llm_calls` plus the sum over attempts.
    pub total_llm_calls: u32,
    #[serde(default)]
    pub errors: Vec<String>,
    #[serde(default)]
    pub evaluations: Vec<Evaluation>,
}

impl RefinementTrace {
    /// A trace with no refinement: the strategy never ran.
    pub fn without_refinement(
        task_id: &str,
        strategy: StrategyId,
        template_digest: &str,
        initial: InitialState,
        terminal: Terminal,
    ) -> Self {
        Self {
            task_id: task_id.to_string(),
            strategy,
            strategy_config: None,
            template_digest: template_digest.to_string(),
            initial,
            attempts: Vec::new(),
            solutions: Vec::new(),
            solution_shortfall: false,
            verbalization: None,
            terminal,
            final_attempt: None,
            strategy_llm_calls: 0,
            total_llm_calls: 0,
            errors: Vec::new(),
            evaluations: Vec::new(),
        }
    }

    pub fn original(&self) -> &CodeCandidate {
        &self.initial.candidate
    }

    pub fn final_candidate(&self) -> &CodeCandidate {
        self.final_attempt
            .and_then(|i| self.attempts.get(i))
            .map_or(&self.initial.candidate, |a| &a.candidate)
    }

    pub fn final_report(&self) -> &AnalysisReport {
        self.final_attempt
            .and_then(|i| self.attempts.get(i))
            .map_or(&self.initial.report, |a| &a.report)
    }

    /// Tool that drove refinement.
    pub fn refinement_tool(&self) -> AnalyzerId {
        self.initial.report.tool
    }

    /// Initial and final reports as seen by `tool`, if that tool scored this trace.
    pub fn reports_for(&self, tool: AnalyzerId) -> Option<(&AnalysisReport, &AnalysisReport)> {
        if let Some(e) = self.evaluations.iter().find(|e| e.tool == tool) {
            return Some((&e.initial, &e.final_report));
        }
        (tool == self.refinement_tool()).then(|| (&self.initial.report, self.final_report()))
    }

    /// Replaces (or inserts) the evaluation for `eval.tool`.
    pub fn set_evaluation(&mut self, eval: Evaluation) {
        self.evaluations.retain(|e| e.tool != eval.tool);
        self.evaluations.push(eval);
        self.evaluations.sort_by_key(|e| e.tool);
    }

    /// Checks the bookkeeping invariants every trace must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        let attempt_calls: u32 = self.attempts.iter().map(|a| a.llm_calls_used).sum();
        if self.total_llm_calls != self.strategy_llm_calls + attempt_calls {
            return Err(format!(
                "total_llm_calls {} != strategy {} + attempts {}",
                self.total_llm_calls, self.strategy_llm_calls, attempt_calls
            ));
        }
        if let Some(pos) = self.attempts.iter().position(|a| a.report.is_clean()) {
            if pos + 1 != self.attempts.len() {
                return Err(format!("attempt {} follows a clean report", pos + 1));
            }
        }
        match self.terminal {
            Terminal::Fixed => {
                let last = self.attempts.last().ok_or("Fixed trace without attempts")?;
                if !last.report.is_clean() {
                    return Err("Fixed trace whose last report is not clean".into());
                }
                if self.final_attempt != Some(self.attempts.len() - 1) {
                    return Err("Fixed trace must return its last attempt".into());
                }
            }
            Terminal::FixedAtGeneration => {
                if !self.attempts.is_empty() {
                    return Err("FixedAtGeneration trace has attempts".into());
                }
            }
            Terminal::Unfixed | Terminal::Error => {
                if self.attempts.iter().any(|a| a.report.is_clean()) {
                    return Err("non-fixed trace contains a clean attempt".into());
                }
            }
        }
        if let Some(cfg) = &self.strategy_config {
            if let Some(a) = self
                .attempts
                .iter()
                .find(|a| a.iteration > cfg.iterations_k)
            {
                return Err(format!(
                    "iteration {} exceeds K={}",
                    a.iteration, cfg.iterations_k
                ));
            }
        }
        if self
            .attempts
            .iter()
            .any(|a| a.llm_calls_used == 0 || a.iteration == 0)
        {
            return Err("attempt with zero calls or zero iteration".into());
        }
        if let Some(i) = self.final_attempt {
            if i >= self.attempts.len() {
                return Err(format!("final_attempt {i} out of range"));
            }
        }
        Ok(())
    }
}

/// One persisted line of a run file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub model_id: String,
    pub strategy: StrategyId,
    pub trace: RefinementTrace,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub config_digest: String,
}

impl RunRecord {
    /// Encodes the record as one JSONL line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("RunRecord serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
