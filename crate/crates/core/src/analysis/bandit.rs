//! Bandit adapter: `bandit -f json <file>`, parsed into findings.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;

use super::{cwe::map_rule_to_cwe, which, AnalysisError, Analyzer};
use crate::types::{AnalysisReport, AnalyzerId, Confidence, CweId, Finding, Severity};

#[derive(Debug, Deserialize)]
struct BanditOutput {
    #[serde(default)]
    errors: Vec<serde_json::Value>,
    #[serde(default)]
    results: Vec<BanditResult>,
}

#[derive(Debug, Deserialize)]
struct BanditResult {
    test_id: String,
    #[serde(default)]
    test_name: Option<String>,
    issue_text: String,
    line_number: u32,
    #[serde(default)]
    issue_severity: String,
    #[serde(default)]
    issue_confidence: String,
    #[serde(default)]
    issue_cwe: Option<BanditCwe>,
}

#[derive(Debug, Deserialize)]
struct BanditCwe {
    id: u32,
}

/// Parses Bandit's JSON report. `raw` is kept verbatim in the returned report.
///
/// A non-empty `errors` array (e.g. the file did not parse) yields a
/// `ToolError` report, since Bandit skipped at least part of the input.
pub fn parse_bandit_json(raw: &str) -> Result<AnalysisReport, AnalysisError> {
    let out: BanditOutput =
        serde_json::from_str(raw).map_err(|e| AnalysisError::parse("bandit", e, raw))?;
    let findings = out
        .results
        .into_iter()
        .map(|r| Finding {
            cwe: r
                .issue_cwe
                .map(|c| CweId(c.id))
                .or_else(|| map_rule_to_cwe(&r.test_id).map(|e| e.cwe_id)),
            rule_id: r.test_id,
            test_name: r.test_name,
            severity: Severity::from_tool(&r.issue_severity),
            confidence: Confidence::from_tool(&r.issue_confidence),
            message: r.issue_text,
            line: r.line_number.max(1),
            tool: AnalyzerId::Bandit,
        })
        .collect();
    if out.errors.is_empty() {
        Ok(AnalysisReport::from_findings(
            AnalyzerId::Bandit,
            findings,
            raw.to_string(),
        ))
    } else {
        Ok(AnalysisReport::tool_error(
            AnalyzerId::Bandit,
            findings,
            raw.to_string(),
        ))
    }
}

/// Runs the Bandit executable on candidates written to private temp files.
#[derive(Debug, Clone)]
pub struct BanditAnalyzer {
    program: PathBuf,
    workdir: PathBuf,
}

impl BanditAnalyzer {
    /// Resolves `program` (a name on `PATH` or a path) and checks `workdir`.
    pub fn new(program: &str, workdir: impl Into<PathBuf>) -> Result<Self, AnalysisError> {
        let program = which(program).ok_or_else(|| AnalysisError::ToolNotFound {
            tool: "bandit".into(),
            detail: format!("{program:?} is not an executable on PATH"),
        })?;
        let workdir = workdir.into();
        std::fs::create_dir_all(&workdir)?;
        Ok(Self { program, workdir })
    }

    /// Uses `$BANDIT` when set, otherwise `bandit` from `PATH`.
    pub fn from_env(workdir: impl Into<PathBuf>) -> Result<Self, AnalysisError> {
        let program = std::env::var("BANDIT").unwrap_or_else(|_| "bandit".into());
        Self::new(&program, workdir)
    }

    pub fn version(&self) -> Option<String> {
        let out = Command::new(&self.program).arg("--version").output().ok()?;
        let text = String::from_utf8_lossy(&out.stdout);
        text.lines().next().map(|l| l.trim().to_string())
    }

    pub fn scan_file(&self, file: &Path) -> Result<AnalysisReport, AnalysisError> {
        let out = Command::new(&self.program)
            .arg("-f")
            .arg("json")
            .arg(file)
            .output()
            .map_err(|e| AnalysisError::ToolNotFound {
                tool: "bandit".into(),
                detail: e.to_string(),
            })?;
        // 0 = clean, 1 = issues found; both carry a JSON report
        match out.status.code() {
            Some(0) | Some(1) => {}
            other => {
                return Err(AnalysisError::ToolCrashed {
                    tool: "bandit".into(),
                    status: other.unwrap_or(-1),
                    stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
                })
            }
        }
        let stdout = String::from_utf8(out.stdout)
            .map_err(|e| AnalysisError::parse("bandit", e, "<non-utf8 output>"))?;
        parse_bandit_json(&stdout)
    }
}

impl Analyzer for BanditAnalyzer {
    fn id(&self) -> AnalyzerId {
        AnalyzerId::Bandit
    }

    fn scan(&self, code: &str) -> Result<AnalysisReport, AnalysisError> {
        let dir = tempfile::Builder::new()
            .prefix("bandit-")
            .tempdir_in(&self.workdir)?;
        let file = dir.path().join("candidate.py");
        std::fs::write(&file, code)?;
        self.scan_file(&file)
    }
}
