//! CodeQL adapter. Evaluation only: candidates are laid out one file each in
//! a fresh source root, one database is built for the batch, and the SARIF
//! results are split back per task.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::process::Command;

use serde::Deserialize;
use serde_json::Value;

use super::{which, AnalysisError, Analyzer};
use crate::types::{AnalysisReport, AnalyzerId, Confidence, CweId, Finding, Severity};

pub const DEFAULT_SUITE: &str = "codeql/python-queries:codeql-suites/python-security-extended.qls";

#[derive(Debug, Deserialize)]
struct Sarif {
    #[serde(default)]
    runs: Vec<SarifRun>,
}

#[derive(Debug, Deserialize)]
struct SarifRun {
    #[serde(default)]
    tool: Option<SarifTool>,
    #[serde(default)]
    results: Vec<Value>,
}

#[derive(Debug, Deserialize)]
struct SarifTool {
    driver: SarifDriver,
}

#[derive(Debug, Deserialize)]
struct SarifDriver {
    #[serde(default)]
    rules: Vec<SarifRule>,
}

#[derive(Debug, Deserialize)]
struct SarifRule {
    id: String,
    #[serde(default)]
    properties: Option<SarifRuleProps>,
}

#[derive(Debug, Deserialize)]
struct SarifRuleProps {
    #[serde(default)]
    tags: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SarifResult {
    #[serde(rename = "ruleId")]
    rule_id: Option<String>,
    #[serde(rename = "ruleIndex")]
    rule_index: Option<usize>,
    #[serde(default)]
    level: Option<String>,
    message: SarifMessage,
    #[serde(default)]
    locations: Vec<SarifLocation>,
}

#[derive(Debug, Deserialize)]
struct SarifMessage {
    #[serde(default)]
    text: String,
}

#[derive(Debug, Deserialize)]
struct SarifLocation {
    #[serde(rename = "physicalLocation")]
    physical_location: Option<SarifPhysical>,
}

#[derive(Debug, Deserialize)]
struct SarifPhysical {
    #[serde(rename = "artifactLocation")]
    artifact_location: Option<SarifArtifact>,
    region: Option<SarifRegion>,
}

#[derive(Debug, Deserialize)]
struct SarifArtifact {
    uri: String,
}

#[derive(Debug, Deserialize)]
struct SarifRegion {
    #[serde(rename = "startLine")]
    start_line: Option<u32>,
}

fn cwe_from_tags(tags: &[String]) -> Option<CweId> {
    tags.iter().find_map(|t| {
        let digits = t.strip_prefix("external/cwe/cwe-")?;
        digits.parse::<u32>().ok().map(CweId)
    })
}

fn file_name(uri: &str) -> &str {
    uri.rsplit(['/', '\\']).next().unwrap_or(uri)
}

/// Splits a SARIF log into per-task reports.
///
/// `files` maps a source file name (e.g. `t1.py`) to its task id. Every task
/// in `files` gets a report; tasks without results are clean. Each report's
/// `raw` holds that task's SARIF result objects as a JSON array.
pub fn parse_sarif(
    raw: &str,
    files: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, AnalysisReport>, AnalysisError> {
    let sarif: Sarif =
        serde_json::from_str(raw).map_err(|e| AnalysisError::SarifParseError(e.to_string()))?;
    let mut per_task: BTreeMap<String, (Vec<Finding>, Vec<Value>)> = files
        .values()
        .map(|task| (task.clone(), (Vec::new(), Vec::new())))
        .collect();

    for run in sarif.runs {
        let rules = run.tool.map(|t| t.driver.rules).unwrap_or_default();
        let cwe_by_rule: HashMap<&str, Option<CweId>> = rules
            .iter()
            .map(|r| {
                let tags = r
                    .properties
                    .as_ref()
                    .map(|p| p.tags.as_slice())
                    .unwrap_or(&[]);
                (r.id.as_str(), cwe_from_tags(tags))
            })
            .collect();
        for value in run.results {
            let res: SarifResult = serde_json::from_value(value.clone())
                .map_err(|e| AnalysisError::SarifParseError(e.to_string()))?;
            let physical = res
                .locations
                .first()
                .and_then(|l| l.physical_location.as_ref());
            let Some(uri) = physical
                .and_then(|p| p.artifact_location.as_ref())
                .map(|a| a.uri.as_str())
            else {
                continue;
            };
            let Some(task) = files.get(file_name(uri)) else {
                log::warn!("SARIF result for unknown file {uri}");
                continue;
            };
            let rule_id = res
                .rule_id
                .clone()
                .or_else(|| {
                    res.rule_index
                        .and_then(|i| rules.get(i))
                        .map(|r| r.id.clone())
                })
                .ok_or_else(|| AnalysisError::SarifParseError("result without ruleId".into()))?;
            let line = physical
                .and_then(|p| p.region.as_ref())
                .and_then(|r| r.start_line)
                .unwrap_or(1)
                .max(1);
            let severity = match res.level.as_deref() {
                Some("error") => Severity::High,
                Some("warning") | None => Severity::Medium,
                Some("note") => Severity::Low,
                _ => Severity::Unknown,
            };
            let finding = Finding {
                cwe: cwe_by_rule.get(rule_id.as_str()).copied().flatten(),
                rule_id,
                test_name: None,
                severity,
                confidence: Confidence::Unknown,
                message: res.message.text,
                line,
                tool: AnalyzerId::CodeQL,
            };
            let slot = per_task
                .get_mut(task)
                .expect("every mapped task has a slot");
            slot.0.push(finding);
            slot.1.push(value);
        }
    }

    Ok(per_task
        .into_iter()
        .map(|(task, (findings, values))| {
            let raw = serde_json::to_string(&values).expect("JSON values serialize");
            (
                task,
                AnalysisReport::from_findings(AnalyzerId::CodeQL, findings, raw),
            )
        })
        .collect())
}

/// Assigns each task a distinct, filesystem-safe `.py` file name.
pub fn layout_names<'a>(task_ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (i, id) in task_ids.into_iter().enumerate() {
        let stem: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let mut name = format!("{stem}.py");
        if out.contains_key(&name) {
            name = format!("{stem}__{i}.py");
        }
        out.insert(name, id.to_string());
    }
    out
}

#[derive(Debug, Clone)]
pub struct CodeQlAnalyzer {
    program: PathBuf,
    workdir: PathBuf,
    suite: String,
}

impl CodeQlAnalyzer {
    pub fn new(
        program: &str,
        workdir: impl Into<PathBuf>,
        suite: Option<&str>,
    ) -> Result<Self, AnalysisError> {
        let program = which(program).ok_or_else(|| AnalysisError::ToolNotFound {
            tool: "codeql".into(),
            detail: format!("{program:?} is not an executable on PATH"),
        })?;
        let workdir = workdir.into();
        std::fs::create_dir_all(&workdir)?;
        Ok(Self {
            program,
            workdir,
            suite: suite.unwrap_or(DEFAULT_SUITE).to_string(),
        })
    }

    /// Uses `$CODEQL` when set, otherwise `codeql` from `PATH`.
    pub fn from_env(workdir: impl Into<PathBuf>) -> Result<Self, AnalysisError> {
        let program = std::env::var("CODEQL").unwrap_or_else(|_| "codeql".into());
        Self::new(&program, workdir, None)
    }

    fn run(&self, args: &[&std::ffi::OsStr]) -> Result<std::process::Output, AnalysisError> {
        Command::new(&self.program)
            .args(args)
            .output()
            .map_err(|e| AnalysisError::ToolNotFound {
                tool: "codeql".into(),
                detail: e.to_string(),
            })
    }

    /// Scans `(task_id, code)` pairs in one database.
    pub fn scan_batch(
        &self,
        candidates: &[(String, String)],
    ) -> Result<BTreeMap<String, AnalysisReport>, AnalysisError> {
        if candidates.is_empty() {
            return Ok(BTreeMap::new());
        }
        let scratch = tempfile::Builder::new()
            .prefix("codeql-")
            .tempdir_in(&self.workdir)?;
        let src = scratch.path().join("src");
        std::fs::create_dir_all(&src)?;
        let names = layout_names(candidates.iter().map(|(id, _)| id.as_str()));
        let by_task: HashMap<&str, &str> = names
            .iter()
            .map(|(file, task)| (task.as_str(), file.as_str()))
            .collect();
        for (task, code) in candidates {
            std::fs::write(src.join(by_task[task.as_str()]), code)?;
        }

        let db = scratch.path().join("db");
        let out = self.run(&[
            "database".as_ref(),
            "create".as_ref(),
            db.as_os_str(),
            "--language=python".as_ref(),
            "--source-root".as_ref(),
            src.as_os_str(),
            "--overwrite".as_ref(),
        ])?;
        if !out.status.success() {
            return Err(AnalysisError::DatabaseCreationFailed(
                String::from_utf8_lossy(&out.stderr).trim().to_string(),
            ));
        }

        let sarif_path = scratch.path().join("results.sarif");
        let output_arg = format!("--output={}", sarif_path.display());
        let out = self.run(&[
            "database".as_ref(),
            "analyze".as_ref(),
            db.as_os_str(),
            self.suite.as_ref(),
            "--format=sarifv2.1.0".as_ref(),
            output_arg.as_ref(),
        ])?;
        if !out.status.success() {
            return Err(AnalysisError::ToolCrashed {
                tool: "codeql".into(),
                status: out.status.code().unwrap_or(-1),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        let raw = std::fs::read_to_string(&sarif_path)?;
        parse_sarif(&raw, &names)
    }
}

impl Analyzer for CodeQlAnalyzer {
    fn id(&self) -> AnalyzerId {
        AnalyzerId::CodeQL
    }

    fn scan(&self, code: &str) -> Result<AnalysisReport, AnalysisError> {
        let mut map = self.scan_batch(&[("candidate".to_string(), code.to_string())])?;
        Ok(map.remove("candidate").expect("single-candidate batch"))
    }

    fn scan_many(&self, items: &[(String, String)]) -> BTreeMap<String, AnalysisReport> {
        match self.scan_batch(items) {
            Ok(map) => map,
            Err(e) => {
                log::warn!("codeql batch failed: {e}");
                items
                    .iter()
                    .map(|(k, _)| {
                        (
                            k.clone(),
                            AnalysisReport::tool_error(
                                AnalyzerId::CodeQL,
                                Vec::new(),
                                e.to_string(),
                            ),
                        )
                    })
                    .collect()
            }
        }
    }

    fn batch_only(&self) -> bool {
        true
    }
}
