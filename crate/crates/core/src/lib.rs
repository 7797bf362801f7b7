//! Security repair pipeline for LLM-generated Python code.
//!
//! The crate wires four pieces together:
//!
//! - [`llm`]: chat-completion access (live HTTP, record/replay cassettes, scripted queues)
//! - [`analysis`]: static analyzers (Bandit, CodeQL, the built-in RuleScan) and a syntax gate
//! - [`strategies`]: the refinement strategies, including solution-guided patching
//! - [`harness`] and [`metrics`]: batch orchestration, persistence and result tables
//!
//! Shared value types live in [`types`].

pub mod analysis;
pub mod extract;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod strategies;
pub mod types;

pub use extract::{extract_code, is_secure, ExtractError};
pub use types::{
    AnalysisReport, AnalyzerId, CodeCandidate, Confidence, CweId, Domain, Evaluation, Finding,
    InitialState, Lineage, Origin, RefinementAttempt, RefinementTrace, ReportStatus, RunRecord,
    Severity, Solution, SourceDataset, TaskPrompt, Terminal,
};
