//! Static analyzers behind one interface, plus the syntax gate used during
//! generation.
//!
//! Bandit drives refinement in real runs; CodeQL is evaluation-only; RuleScan
//! is a line-pattern approximation of a Bandit subset for hermetic tests and
//! offline demos. None of them execute the code under analysis.

pub mod bandit;
pub mod codeql;
pub mod cwe;
pub mod rulescan;
pub mod syntax;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AnalysisReport, AnalyzerId};

pub use bandit::{parse_bandit_json, BanditAnalyzer};
pub use codeql::{parse_sarif, CodeQlAnalyzer};
pub use cwe::{map_rule_to_cwe, registry, CweEntry};
pub use rulescan::{rulescan, RuleScan};
pub use syntax::{NoopChecker, PythonChecker, SyntaxChecker};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{tool} not found: {detail}")]
    ToolNotFound { tool: String, detail: String },
    #[error("{tool} exited with status {status}: {stderr}")]
    ToolCrashed {
        tool: String,
        status: i32,
        stderr: String,
    },
    #[error("could not parse {tool} output: {reason}; payload starts with {head:?}")]
    ParseError {
        tool: String,
        reason: String,
        head: String,
    },
    #[error("codeql database creation failed: {0}")]
    DatabaseCreationFailed(String),
    #[error("malformed SARIF: {0}")]
    SarifParseError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AnalysisError {
    pub(crate) fn parse(tool: &str, reason: impl fmt::Display, payload: &str) -> Self {
        let mut end = payload.len().min(200);
        while !payload.is_char_boundary(end) {
            end -= 1;
        }
        AnalysisError::ParseError {
            tool: tool.to_string(),
            reason: reason.to_string(),
            head: payload[..end].to_string(),
        }
    }

    pub fn is_tool_missing(&self) -> bool {
        matches!(self, AnalysisError::ToolNotFound { .. })
    }
}

/// A static analyzer that scores one program at a time.
pub trait Analyzer: Send + Sync {
    fn id(&self) -> AnalyzerId;

    fn scan(&self, code: &str) -> Result<AnalysisReport, AnalysisError>;

    /// Scan, folding adapter failures into a `ToolError` report.
    fn scan_or_error(&self, code: &str) -> AnalysisReport {
        self.scan(code).unwrap_or_else(|e| {
            log::warn!("{} scan failed: {e}", self.id());
            AnalysisReport::tool_error(self.id(), Vec::new(), e.to_string())
        })
    }

    /// Scans `(key, code)` pairs. Failures become `ToolError` reports.
    fn scan_many(&self, items: &[(String, String)]) -> BTreeMap<String, AnalysisReport> {
        items
            .iter()
            .map(|(key, code)| (key.clone(), self.scan_or_error(code)))
            .collect()
    }

    /// Whether the tool should only be run over whole batches (it has a high
    /// fixed cost per invocation).
    fn batch_only(&self) -> bool {
        false
    }
}

/// Syntax error reported by the compile gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileError {
    pub message: String,
    #[serde(default)]
    pub line: Option<u32>,
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Locates an executable on `PATH`.
pub(crate) fn which(program: &str) -> Option<std::path::PathBuf> {
    let candidate = std::path::Path::new(program);
    if candidate.components().count() > 1 {
        return candidate.is_file().then(|| candidate.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|p| p.is_file())
}
