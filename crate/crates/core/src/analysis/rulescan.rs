//! RuleScan: a line-oriented approximation of five Bandit checks.
//!
//! Good enough to drive hermetic pipeline runs. Not a substitute for Bandit
//! when producing comparable numbers.

use std::sync::LazyLock;

use regex::Regex;

use super::{cwe::map_rule_to_cwe, AnalysisError, Analyzer};
use crate::types::{AnalysisReport, AnalyzerId, Confidence, Finding, Severity};

struct Rule {
    id: &'static str,
    test_name: &'static str,
    severity: Severity,
    confidence: Confidence,
    matches: fn(&str) -> Option<String>,
}

static SQL_LITERAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)["']\s*(select\s.*\bfrom\b|insert\s+into\b|update\s+\S+\s+set\b|delete\s+from\b)"#,
    )
    .unwrap()
});
static EXECUTE_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\.execute(?:many|script)?\s*\(").unwrap());
static FORMAT_CALL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\.format\s*\(").unwrap());
static F_STRING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?:^|[^\w])(?:[fF][rR]?|[rR][fF])["'][^"']*\{"#).unwrap());
static PERCENT_FORMAT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"["']\s*%\s*[\w(\[]"#).unwrap());
static CONCAT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"["']\s*\+\s*\w|\w\s*\+\s*["']"#).unwrap());
static SHELL_TRUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bshell\s*=\s*True\b").unwrap());
static EVAL_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^\w.])(eval|exec)\s*\(").unwrap());
static PASSWORD_LITERAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)\b\w*(?:password|passwd|pwd)\w*["']?\]?\s*=\s*[rbu]?(["'])([^"']+)["']"#)
        .unwrap()
});
static FLASK_DEBUG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\.run\s*\(.*\bdebug\s*=\s*True\b").unwrap());

fn string_built(line: &str) -> bool {
    FORMAT_CALL.is_match(line)
        || F_STRING.is_match(line)
        || PERCENT_FORMAT.is_match(line)
        || CONCAT.is_match(line)
}

fn sql_rule(line: &str) -> Option<String> {
    let sql_here = SQL_LITERAL.is_match(line) || EXECUTE_CALL.is_match(line);
    (sql_here && string_built(line))
        .then(|| "Possible SQL injection vector through string-based query construction.".into())
}

fn shell_rule(line: &str) -> Option<String> {
    SHELL_TRUE
        .is_match(line)
        .then(|| "subprocess call with shell=True identified, security issue.".into())
}

fn eval_rule(line: &str) -> Option<String> {
    EVAL_CALL.captures(line).map(|c| {
        format!(
            "Use of possibly insecure function {}() - consider using safer ast.literal_eval.",
            &c[1]
        )
    })
}

fn password_rule(line: &str) -> Option<String> {
    let caps = PASSWORD_LITERAL.captures(line)?;
    // `==` comparisons are not assignments
    let eq = caps.get(0)?.as_str();
    if eq.contains("==") {
        return None;
    }
    Some(format!("Possible hardcoded password: '{}'", &caps[2]))
}

fn flask_debug_rule(line: &str) -> Option<String> {
    FLASK_DEBUG.is_match(line).then(|| {
        "A Flask app appears to be run with debug=True, which exposes the Werkzeug debugger \
         and allows the execution of arbitrary code."
            .into()
    })
}

static RULES: [Rule; 5] = [
    Rule {
        id: "RS-B608",
        test_name: "hardcoded_sql_expressions",
        severity: Severity::Medium,
        confidence: Confidence::Medium,
        matches: sql_rule,
    },
    Rule {
        id: "RS-B602",
        test_name: "subprocess_popen_with_shell_equals_true",
        severity: Severity::High,
        confidence: Confidence::High,
        matches: shell_rule,
    },
    Rule {
        id: "RS-B307",
        test_name: "blacklist",
        severity: Severity::Medium,
        confidence: Confidence::High,
        matches: eval_rule,
    },
    Rule {
        id: "RS-B105",
        test_name: "hardcoded_password_string",
        severity: Severity::Low,
        confidence: Confidence::Medium,
        matches: password_rule,
    },
    Rule {
        id: "RS-B201",
        test_name: "flask_debug_true",
        severity: Severity::High,
        confidence: Confidence::Medium,
        matches: flask_debug_rule,
    },
];

/// Ids of every RuleScan rule.
pub fn rule_ids() -> impl Iterator<Item = &'static str> {
    RULES.iter().map(|r| r.id)
}

/// Scans `code` line by line. Full-line comments are skipped.
pub fn rulescan(code: &str) -> AnalysisReport {
    let mut findings = Vec::new();
    for (idx, line) in code.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        for rule in &RULES {
            if let Some(message) = (rule.matches)(line) {
                findings.push(Finding {
                    rule_id: rule.id.to_string(),
                    test_name: Some(rule.test_name.to_string()),
                    cwe: map_rule_to_cwe(rule.id).map(|e| e.cwe_id),
                    severity: rule.severity,
                    confidence: rule.confidence,
                    message,
                    line: idx as u32 + 1,
                    tool: AnalyzerId::RuleScan,
                });
            }
        }
    }
    let raw = findings
        .iter()
        .map(|f| format!("{}:{}", f.line, f.rule_id))
        .collect::<Vec<_>>()
        .join("\n");
    AnalysisReport::from_findings(AnalyzerId::RuleScan, findings, raw)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RuleScan;

impl Analyzer for RuleScan {
    fn id(&self) -> AnalyzerId {
        AnalyzerId::RuleScan
    }

    fn scan(&self, code: &str) -> Result<AnalysisReport, AnalysisError> {
        Ok(rulescan(code))
    }
}
