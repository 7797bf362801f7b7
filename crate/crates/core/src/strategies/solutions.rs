//! Asking for, and parsing, numbered mitigation strategies.

use std::sync::LazyLock;

use regex::Regex;

use super::{render_report, require_findings, RefineContext, StrategyError, TemplateName};
use crate::types::{AnalysisReport, Solution};

/// Parsed solution list. `shortfall` is set when the answer held fewer than
/// the requested number of items and was kept whole as a single solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSolutions {
    pub solutions: Vec<Solution>,
    pub shortfall: bool,
}

// `1)`, `1.`, `**1)**`, `**1. Title**`, `### 1.`, `- 1)`
static ITEM_START: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:#{1,6}\s*)?(?:[-*]\s+)?(\*\*)?(\d{1,3})[.)]\s*(.*)$").unwrap()
});

const MAX_BARE_TITLE: usize = 80;

fn strip_colon(s: &str) -> &str {
    s.trim().trim_end_matches(':').trim()
}

/// Splits an item's first line into `(title, rest of the line)`.
fn split_title(first: &str, bold_before_number: bool) -> (String, String) {
    let s = first.trim();
    if bold_before_number {
        // `**1) Title**: body`
        if let Some(end) = s.find("**") {
            let rest = s[end + 2..].trim_start().trim_start_matches(':');
            return (strip_colon(&s[..end]).to_string(), rest.trim().to_string());
        }
        let s = s.trim_start_matches("**").trim();
        return split_title(s, false);
    }
    if let Some(inner) = s.strip_prefix("**") {
        if let Some(end) = inner.find("**") {
            let rest = inner[end + 2..].trim_start().trim_start_matches(':');
            return (
                strip_colon(&inner[..end]).to_string(),
                rest.trim().to_string(),
            );
        }
    }
    match s.find(':') {
        Some(pos) if pos > 0 && pos <= MAX_BARE_TITLE => {
            (s[..pos].trim().to_string(), s[pos + 1..].trim().to_string())
        }
        _ => (String::new(), s.to_string()),
    }
}

/// Splits an answer into consecutively numbered items starting at 1.
///
/// Numbers that break the sequence (a nested list, say) stay inside the
/// current item's body. Fewer than `j` items yields the whole answer as
/// Solution 1 with `shortfall` set; more than `j` keeps the first `j`.
pub fn parse_solutions(text: &str, j: u32) -> ParsedSolutions {
    struct Item {
        title: String,
        lines: Vec<String>,
    }
    let mut items: Vec<Item> = Vec::new();
    for line in text.lines() {
        let next = items.len() as u32 + 1;
        if let Some(c) = ITEM_START.captures(line) {
            if c[2].parse::<u32>().ok() == Some(next) {
                let (title, rest) = split_title(&c[3], c.get(1).is_some());
                items.push(Item {
                    title,
                    lines: vec![rest],
                });
                continue;
            }
        }
        if let Some(item) = items.last_mut() {
            item.lines.push(line.to_string());
        }
    }
    let solutions: Vec<Solution> = items
        .into_iter()
        .take(j as usize)
        .zip(1..)
        .map(|(item, index)| {
            let body = item.lines.join("\n").trim().to_string();
            let body = if body.is_empty() {
                item.title.clone()
            } else {
                body
            };
            Solution {
                index,
                title: item.title,
                body,
            }
        })
        .collect();
    if solutions.len() < j as usize || solutions.iter().any(|s| s.body.is_empty()) {
        return ParsedSolutions {
            solutions: vec![Solution {
                index: 1,
                title: String::new(),
                body: text.trim().to_string(),
            }],
            shortfall: true,
        };
    }
    ParsedSolutions {
        solutions,
        shortfall: false,
    }
}

/// One call asking for exactly `j` distinct numbered strategies for the
/// reported issues, then [`parse_solutions`].
pub fn generate_solutions(
    ctx: &RefineContext<'_>,
    code: &str,
    report: &AnalysisReport,
    j: u32,
) -> Result<ParsedSolutions, StrategyError> {
    require_findings(report)?;
    if j == 0 {
        return Err(StrategyError::Precondition("J must be at least 1".into()));
    }
    let rendered = render_report(report, code);
    let j_text = j.to_string();
    let prompt = ctx.render(
        TemplateName::SolutionGen,
        &[("report", &rendered), ("code", code), ("J", &j_text)],
    )?;
    Ok(parse_solutions(&ctx.ask(prompt)?, j))
}
