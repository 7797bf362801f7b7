//! Pulling code out of chat answers, and the stop-condition check.

use thiserror::Error;

use crate::types::{AnalysisReport, CodeCandidate, ReportStatus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("model response is empty")]
    EmptyResponse,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("analyzer failed; security verdict unavailable")]
pub struct ToolErrorPropagated;

const PYTHON_TAGS: [&str; 3] = ["python", "py", "python3"];

struct Fence<'a> {
    tag: &'a str,
    body: Vec<&'a str>,
}

fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut open: Option<Fence<'_>> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        match open.take() {
            None => {
                if let Some(rest) = trimmed.strip_prefix("```") {
                    open = Some(Fence {
                        tag: rest.trim(),
                        body: Vec::new(),
                    });
                }
            }
            Some(mut f) => {
                if trimmed.trim_end() == "```" {
                    out.push(f);
                } else {
                    f.body.push(line);
                    open = Some(f);
                }
            }
        }
    }
    // an unterminated fence runs to the end of the response
    if let Some(f) = open {
        out.push(f);
    }
    out
}

fn join_block(lines: &[&str]) -> String {
    let start = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .unwrap_or(lines.len());
    let end = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(start, |i| i + 1);
    lines[start..end].join("\n")
}

/// Extracts the program from a model answer.
///
/// Preference order: the first fence tagged as Python, then the first fence
/// of any tag, then the whole trimmed response. Comment lines are kept.
pub fn extract_code(llm_response: &str) -> Result<CodeCandidate, ExtractError> {
    if llm_response.trim().is_empty() {
        return Err(ExtractError::EmptyResponse);
    }
    let blocks = fences(llm_response);
    let chosen = blocks
        .iter()
        .find(|f| PYTHON_TAGS.contains(&f.tag.to_ascii_lowercase().as_str()))
        .or_else(|| blocks.first());
    let code = match chosen {
        Some(f) => join_block(&f.body),
        None => llm_response.trim().to_string(),
    };
    if code.trim().is_empty() {
        return Err(ExtractError::EmptyResponse);
    }
    Ok(CodeCandidate::initial(code))
}

/// True when the analyzer found nothing.
pub fn is_secure(report: &AnalysisReport) -> Result<bool, ToolErrorPropagated> {
    match report.exit_status {
        ReportStatus::ToolError => Err(ToolErrorPropagated),
        _ => Ok(report.findings.is_empty()),
    }
}
