use crate::types::{AnalysisReport, Confidence, Severity};

fn level(s: Severity) -> &'static str {
    match s {
        Severity::Low => "Low",
        Severity::Medium => "Medium",
        Severity::High => "High",
        Severity::Unknown => "Unknown",
    }
}

fn confidence(c: Confidence) -> &'static str {
    match c {
        Confidence::Low => "Low",
        Confidence::Medium => "Medium",
        Confidence::High => "High",
        Confidence::Unknown => "Unknown",
    }
}

/// Renders findings the way Bandit's console output presents them: the rule,
/// its message, and the offending source line.
///
/// ```text
/// Issue: [B608:hardcoded_sql_expressions] Possible SQL injection vector ...
/// Severity: Medium   Confidence: Medium   CWE: CWE-89
/// Line 7: cursor.execute("SELECT COUNT(*) FROM {}".format(table_name))
/// ```
pub fn render_report(report: &AnalysisReport, code: &str) -> String {
    let lines: Vec<&str> = code.lines().collect();
    let mut blocks = Vec::with_capacity(report.findings.len());
    for f in &report.findings {
        let rule = match &f.test_name {
            Some(name) => format!("{}:{}", f.rule_id, name),
            None => f.rule_id.clone(),
        };
        let mut meta = format!(
            "Severity: {}   Confidence: {}",
            level(f.severity),
            confidence(f.confidence)
        );
        if let Some(cwe) = f.cwe {
            meta.push_str(&format!("   CWE: {cwe}"));
        }
        let source = (f.line as usize)
            .checked_sub(1)
            .and_then(|i| lines.get(i))
            .map_or("", |l| l.trim());
        blocks.push(format!(
            "Issue: [{rule}] {}\n{meta}\nLine {}: {source}",
            f.message, f.line
        ));
    }
    blocks.join("\n\n")
}
