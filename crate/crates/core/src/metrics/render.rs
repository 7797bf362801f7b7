//! Markdown, CSV and plot-data renderings. Output depends only on the input
//! value, so identical tables render to identical bytes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AblationTable, CellResult, CweHistogram, MainTable, MetricsError, Percent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Md,
    Csv,
    Plotdata,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Md => "md",
            ReportFormat::Csv | ReportFormat::Plotdata => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Md),
            "csv" => Ok(ReportFormat::Csv),
            "plotdata" => Ok(ReportFormat::Plotdata),
            other => Err(format!(
                "unknown format {other:?} (expected md, csv or plotdata)"
            )),
        }
    }
}

fn csv_out(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv of utf-8 input")
}

fn md_out(header: &[String], rows: Vec<Vec<String>>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", header.iter().map(|_| "---|").collect::<String>());
    for row in rows {
        let _ = writeln!(s, "| {} |", row.join(" | "));
    }
    s
}

fn delta_md(d: Percent) -> String {
    if d.tenths() < 0 {
        format!("↑{}", Percent::from_tenths(-d.tenths()))
    } else {
        format!("↓{d}")
    }
}

fn cell_md(cell: &Option<CellResult>) -> String {
    match cell {
        None => "-".to_string(),
        Some(c) => match c.delta_vs_generated {
            Some(d) => format!("{}% ({})", c.percent, delta_md(d)),
            None => format!("{}%", c.percent),
        },
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_table(table: &MainTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Md => {
            let mut header = vec!["Method".to_string()];
            header.extend(table.columns.iter().map(|c| c.label()));
            let rows = table
                .rows
                .iter()
                .map(|r| {
                    std::iter::once(r.label.clone())
                        .chain(r.cells.iter().map(cell_md))
                        .collect()
                })
                .collect();
            md_out(&header, rows)
        }
        ReportFormat::Csv => {
            let mut rows = Vec::new();
            for r in &table.rows {
                for (col, cell) in table.columns.iter().zip(&r.cells) {
                    let Some(c) = cell else { continue };
                    rows.push(vec![
                        r.label.clone(),
                        col.model_id.clone(),
                        col.tool.name().to_string(),
                        c.flagged.to_string(),
                        c.total.to_string(),
                        c.percent.to_string(),
                        opt(c.delta_vs_generated),
                    ]);
                }
            }
            csv_out(
                &[
                    "row", "model", "tool", "flagged", "total", "percent", "delta",
                ],
                rows,
            )
        }
        ReportFormat::Plotdata => {
            let mut rows = Vec::new();
            for r in &table.rows {
                for (col, cell) in table.columns.iter().zip(&r.cells) {
                    let Some(c) = cell else { continue };
                    let metric = format!("{}/{}", col.model_id, col.tool.name());
                    rows.push(vec![
                        r.label.clone(),
                        format!("{metric}/percent"),
                        c.percent.to_string(),
                    ]);
                    if let Some(d) = c.delta_vs_generated {
                        rows.push(vec![
                            r.label.clone(),
                            format!("{metric}/delta"),
                            d.to_string(),
                        ]);
                    }
                }
            }
            csv_out(&["row", "metric", "value"], rows)
        }
    }
}

pub fn render_ablation(tables: &[AblationTable], format: ReportFormat) -> String {
    match format {
        ReportFormat::Md => {
            let mut out = String::new();
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "### {}\n", t.model_id);
                let mut header = vec!["Method".to_string()];
                header.extend(t.tools.iter().map(|tool| tool.label().to_string()));
                header.push("Budget".into());
                header.push("Max calls".into());
                let rows = t
                    .rows
                    .iter()
                    .map(|r| {
                        let mut row = vec![r.label.clone()];
                        for c in &r.cells {
                            row.push(match c {
                                None => "-".into(),
                                Some(a) => match a.delta_vs_full {
                                    Some(d) if d.tenths() >= 0 => {
                                        format!("{}% (+{d})", a.cell.percent)
                                    }
                                    Some(d) => format!("{}% ({d})", a.cell.percent),
                                    None => format!("{}%", a.cell.percent),
                                },
                            });
                        }
                        row.push(opt(r.budget));
                        row.push(opt(r.max_calls));
                        row
                    })
                    .collect();
                out.push_str(&md_out(&header, rows));
            }
            out
        }
        ReportFormat::Csv => {
            let mut rows = Vec::new();
            for t in tables {
                for r in &t.rows {
                    for (tool, cell) in t.tools.iter().zip(&r.cells) {
                        let Some(a) = cell else { continue };
                        rows.push(vec![
                            r.label.clone(),
                            t.model_id.clone(),
                            tool.name().to_string(),
                            opt(r.config.map(|c| c.0)),
                            opt(r.config.map(|c| c.1)),
                            a.cell.flagged.to_string(),
                            a.cell.total.to_string(),
                            a.cell.percent.to_string(),
                            opt(a.delta_vs_full),
                            opt(r.budget),
                            opt(r.max_calls),
                        ]);
                    }
                }
            }
            csv_out(
                &[
                    "row",
                    "model",
                    "tool",
                    "j",
                    "k",
                    "flagged",
                    "total",
                    "percent",
                    "delta_vs_full",
                    "budget",
                    "max_calls",
                ],
                rows,
            )
        }
        ReportFormat::Plotdata => {
            let mut rows = Vec::new();
            for t in tables {
                for r in &t.rows {
                    for (tool, cell) in t.tools.iter().zip(&r.cells) {
                        let Some(a) = cell else { continue };
                        let metric = format!("{}/{}", t.model_id, tool.name());
                        rows.push(vec![
                            r.label.clone(),
                            format!("{metric}/percent"),
                            a.cell.percent.to_string(),
                        ]);
                        if let Some(d) = a.delta_vs_full {
                            rows.push(vec![
                                r.label.clone(),
                                format!("{metric}/delta_vs_full"),
                                d.to_string(),
                            ]);
                        }
                    }
                }
            }
            csv_out(&["row", "metric", "value"], rows)
        }
    }
}

pub fn render_histogram(h: &CweHistogram, format: ReportFormat) -> String {
    let rows: Vec<Vec<String>> = h
        .counts
        .iter()
        .map(|(b, n)| vec![b.to_string(), n.to_string()])
        .collect();
    match format {
        ReportFormat::Md => md_out(&["CWE".to_string(), "Count".to_string()], rows),
        ReportFormat::Csv | ReportFormat::Plotdata => csv_out(&["label", "count"], rows),
    }
}

/// Writes `content` to `path`, creating parent directories.
pub fn write_artifact(path: &Path, content: &str) -> Result<(), MetricsError> {
    let io = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, content).map_err(io)
}
