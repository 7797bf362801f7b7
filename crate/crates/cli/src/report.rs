//! Report artifacts written by `vulnpatch report`.

use std::collections::BTreeSet;
use std::path::Path;

use vulnpatch::metrics::{
    build_ablation_tables, build_main_table, cwe_histogram, render_ablation, render_histogram,
    render_table, write_artifact, MetricsError, Phase, ReportFormat,
};
use vulnpatch::strategies::StrategyId;
use vulnpatch::{AnalyzerId, RunRecord};

/// Tools to tabulate: the requested ones, or every tool that scored a record.
fn tools_for(records: &[RunRecord], requested: &[AnalyzerId]) -> Vec<AnalyzerId> {
    if !requested.is_empty() {
        return requested
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
    }
    let mut tools = BTreeSet::new();
    for r in records {
        tools.insert(r.trace.refinement_tool());
        tools.extend(r.trace.evaluations.iter().map(|e| e.tool));
    }
    tools.into_iter().collect()
}

fn file_name(stem: &str, format: ReportFormat) -> String {
    match format {
        ReportFormat::Plotdata => format!("{stem}.plot.csv"),
        f => format!("{stem}.{}", f.extension()),
    }
}

pub fn main_table_text(
    records: &[RunRecord],
    requested: &[AnalyzerId],
    format: ReportFormat,
) -> String {
    match build_main_table(records, &tools_for(records, requested)) {
        Ok(t) => render_table(&t, format),
        Err(e) => format!("{e}\n"),
    }
}

/// Writes the main table, the ablation table (when FDSP records exist) and
/// per-tool CWE histograms into `dir`. Returns the file names written.
pub fn write_reports(
    records: &[RunRecord],
    requested: &[AnalyzerId],
    format: ReportFormat,
    top: usize,
    dir: &Path,
) -> Result<Vec<String>, MetricsError> {
    let tools = tools_for(records, requested);
    let mut written = Vec::new();
    let mut emit = |stem: String, content: String| -> Result<(), MetricsError> {
        let name = file_name(&stem, format);
        write_artifact(&dir.join(&name), &content)?;
        log::info!("wrote {}", dir.join(&name).display());
        written.push(name);
        Ok(())
    };
    emit(
        "main_table".into(),
        render_table(&build_main_table(records, &tools)?, format),
    )?;
    if records.iter().any(|r| r.strategy == StrategyId::Fdsp) {
        emit(
            "ablation".into(),
            render_ablation(&build_ablation_tables(records, &tools)?, format),
        )?;
    }
    for tool in &tools {
        for (phase, name) in [
            (Phase::Generated, "generated"),
            (Phase::Unresolved, "unresolved"),
        ] {
            let h = cwe_histogram(records, phase, *tool, top);
            emit(
                format!("cwe_{name}_{}", tool.name()),
                render_histogram(&h, format),
            )?;
        }
    }
    Ok(written)
}
