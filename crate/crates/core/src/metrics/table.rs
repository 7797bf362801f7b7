//! Main results table and the FDSP ablation table.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{percent_vulnerable, MetricsError, Percent};
use crate::strategies::{StrategyConfig, StrategyId};
use crate::types::{AnalyzerId, RunRecord, Terminal};

/// One table cell: the share of flagged programs among those the tool scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellResult {
    pub flagged: u64,
    pub total: u64,
    pub percent: Percent,
    /// Points fixed relative to the generated code of the same records.
    /// Absent on the generated-code row.
    pub delta_vs_generated: Option<Percent>,
}

impl CellResult {
    fn new(flagged: u64, total: u64, generated_flagged: Option<u64>) -> Result<Self, MetricsError> {
        let percent = percent_vulnerable(flagged, total)?;
        let delta_vs_generated = generated_flagged
            .map(|g| super::delta_from_counts(g, flagged, total))
            .transpose()?;
        Ok(Self {
            flagged,
            total,
            percent,
            delta_vs_generated,
        })
    }
}

/// Identifies a table row. FDSP runs with different `(J, K)` are separate rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RowKey {
    Generated,
    Strategy {
        strategy: StrategyId,
        /// Sorts the default FDSP configuration after its variants.
        is_default: bool,
        solutions_j: u32,
        iterations_k: u32,
    },
}

impl RowKey {
    fn of(record: &RunRecord) -> Self {
        let (j, k, is_default) = match (&record.strategy, &record.trace.strategy_config) {
            (StrategyId::Fdsp, Some(cfg)) => {
                let d = StrategyConfig::default();
                (
                    cfg.solutions_j,
                    cfg.iterations_k,
                    cfg.solutions_j == d.solutions_j && cfg.iterations_k == d.iterations_k,
                )
            }
            _ => (0, 0, true),
        };
        RowKey::Strategy {
            strategy: record.strategy,
            is_default,
            solutions_j: j,
            iterations_k: k,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            RowKey::Generated => "Generated code".to_string(),
            RowKey::Strategy {
                strategy: StrategyId::Fdsp,
                solutions_j,
                iterations_k,
                ..
            } => fdsp_row_label(solutions_j, iterations_k),
            RowKey::Strategy { strategy, .. } => strategy.label().to_string(),
        }
    }
}

/// Row label of an FDSP configuration.
pub fn fdsp_row_label(j: u32, k: u32) -> String {
    let d = StrategyConfig::default();
    match (j, k) {
        (j, k) if j == d.solutions_j && k == d.iterations_k => "FDSP".to_string(),
        (1, k) if k == d.iterations_k => "FDSP with single solution".to_string(),
        (j, 1) if j == d.solutions_j => "FDSP with single iteration".to_string(),
        (j, k) => format!("FDSP (J={j}, K={k})"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Column {
    pub model_id: String,
    pub tool: AnalyzerId,
}

impl Column {
    pub fn label(&self) -> String {
        format!("{} {}", self.model_id, self.tool.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub key: RowKey,
    pub label: String,
    /// Parallel to [`MainTable::columns`]; `None` where the tool did not score
    /// any record of this row.
    pub cells: Vec<Option<CellResult>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MainTable {
    pub columns: Vec<Column>,
    pub rows: Vec<TableRow>,
}

type Groups<'a> = BTreeMap<(String, RowKey), Vec<&'a RunRecord>>;

fn group(records: &[RunRecord]) -> Groups<'_> {
    let mut groups: Groups<'_> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.model_id.clone(), RowKey::of(r)))
            .or_default()
            .push(r);
    }
    groups
}

/// `(generated flagged, final flagged, scored)` for `tool` over `records`.
fn counts(records: &[&RunRecord], tool: AnalyzerId) -> (u64, u64, u64) {
    let mut out = (0, 0, 0);
    for r in records {
        if let Some((initial, fin)) = r.trace.reports_for(tool) {
            out.0 += initial.is_flagged() as u64;
            out.1 += fin.is_flagged() as u64;
            out.2 += 1;
        }
    }
    out
}

/// Builds the percentage table: columns are model × tool, rows are the
/// generated code followed by each strategy in canonical order.
///
/// The generated-code cell of a model comes from the first strategy row that
/// the tool scored; each strategy cell's delta is computed against the
/// initial reports of its own records.
pub fn build_main_table(
    records: &[RunRecord],
    tools: &[AnalyzerId],
) -> Result<MainTable, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRunSet);
    }
    let tools: BTreeSet<AnalyzerId> = tools.iter().copied().collect();
    let groups = group(records);
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    let columns: Vec<Column> = models
        .iter()
        .flat_map(|m| {
            tools.iter().map(|t| Column {
                model_id: m.to_string(),
                tool: *t,
            })
        })
        .collect();
    let row_keys: BTreeSet<RowKey> = groups.keys().map(|(_, k)| *k).collect();

    let mut generated = Vec::with_capacity(columns.len());
    for col in &columns {
        let first = groups
            .iter()
            .filter(|((m, _), _)| *m == col.model_id)
            .map(|(_, rs)| counts(rs, col.tool))
            .find(|c| c.2 > 0);
        generated.push(match first {
            Some((g, _, n)) => Some(CellResult::new(g, n, None)?),
            None => None,
        });
    }
    let mut rows = vec![TableRow {
        key: RowKey::Generated,
        label: RowKey::Generated.label(),
        cells: generated,
    }];
    for key in row_keys {
        let mut cells = Vec::with_capacity(columns.len());
        for col in &columns {
            let cell = match groups.get(&(col.model_id.clone(), key)) {
                Some(rs) => match counts(rs, col.tool) {
                    (_, _, 0) => None,
                    (g, f, n) => Some(CellResult::new(f, n, Some(g))?),
                },
                None => None,
            };
            cells.push(cell);
        }
        rows.push(TableRow {
            key,
            label: key.label(),
            cells,
        });
    }
    Ok(MainTable { columns, rows })
}

/// Checks that, for every `(model, strategy)` group, the programs flagged at
/// generation by the refinement tool are exactly those that ended Fixed,
/// Unfixed or Error.
pub fn check_conservation(records: &[RunRecord]) -> Result<(), String> {
    for ((model, key), rs) in group(records) {
        let flagged = rs
            .iter()
            .filter(|r| r.trace.initial.report.is_flagged())
            .count();
        let refined = rs
            .iter()
            .filter(|r| {
                matches!(
                    r.trace.terminal,
                    Terminal::Fixed | Terminal::Unfixed | Terminal::Error
                )
            })
            .count();
        if flagged != refined {
            return Err(format!(
                "{model} / {}: {flagged} flagged at generation but {refined} refined",
                key.label()
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationCell {
    pub cell: CellResult,
    /// Points above the full FDSP configuration (positive means more
    /// programs left vulnerable). Absent on the full row and where FDSP
    /// itself was not scored.
    pub delta_vs_full: Option<Percent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationRow {
    pub label: String,
    /// `(J, K)`, absent on the generated-code row.
    pub config: Option<(u32, u32)>,
    /// Call budget `1 + J·K`.
    pub budget: Option<u32>,
    /// Largest refinement-phase call count observed.
    pub max_calls: Option<u32>,
    pub cells: Vec<Option<AblationCell>>,
}

/// FDSP configurations of one model side by side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationTable {
    pub model_id: String,
    pub tools: Vec<AnalyzerId>,
    pub rows: Vec<AblationRow>,
}

/// One ablation table per model that has FDSP records. Rows are the
/// generated code, then the FDSP configurations with the default last.
pub fn build_ablation_tables(
    records: &[RunRecord],
    tools: &[AnalyzerId],
) -> Result<Vec<AblationTable>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRunSet);
    }
    let tools: Vec<AnalyzerId> = tools
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let fdsp: Vec<RunRecord> = records
        .iter()
        .filter(|r| r.strategy == StrategyId::Fdsp)
        .cloned()
        .collect();
    let mut by_model: BTreeMap<String, BTreeMap<RowKey, Vec<&RunRecord>>> = BTreeMap::new();
    for r in &fdsp {
        by_model
            .entry(r.model_id.clone())
            .or_default()
            .entry(RowKey::of(r))
            .or_default()
            .push(r);
    }
    let mut tables = Vec::new();
    for (model_id, rows_by_key) in by_model {
        let full = rows_by_key
            .iter()
            .find(|(k, _)| {
                matches!(
                    k,
                    RowKey::Strategy {
                        is_default: true,
                        ..
                    }
                )
            })
            .map(|(_, rs)| rs);
        let mut generated = Vec::new();
        for &tool in &tools {
            let first = rows_by_key
                .values()
                .map(|rs| counts(rs, tool))
                .find(|c| c.2 > 0);
            generated.push(match first {
                Some((g, _, n)) => Some(AblationCell {
                    cell: CellResult::new(g, n, None)?,
                    delta_vs_full: None,
                }),
                None => None,
            });
        }
        let mut rows = vec![AblationRow {
            label: RowKey::Generated.label(),
            config: None,
            budget: None,
            max_calls: None,
            cells: generated,
        }];
        for (key, rs) in &rows_by_key {
            let RowKey::Strategy {
                solutions_j: j,
                iterations_k: k,
                is_default,
                ..
            } = *key
            else {
                continue;
            };
            let mut cells = Vec::new();
            for &tool in &tools {
                let (g, f, n) = counts(rs, tool);
                if n == 0 {
                    cells.push(None);
                    continue;
                }
                let cell = CellResult::new(f, n, Some(g))?;
                let delta_vs_full = match full {
                    Some(full) if !is_default => match counts(full, tool) {
                        (_, _, 0) => None,
                        // compare shares exactly: f/n - ff/fn, rounded once
                        (_, ff, fnn) => Some(Percent::of_ratio(
                            f as i64 * fnn as i64 - ff as i64 * n as i64,
                            (n * fnn) as i64,
                        )),
                    },
                    _ => None,
                };
                cells.push(Some(AblationCell {
                    cell,
                    delta_vs_full,
                }));
            }
            rows.push(AblationRow {
                label: key.label(),
                config: Some((j, k)),
                budget: Some(1 + j * k),
                max_calls: rs.iter().map(|r| r.trace.total_llm_calls).max(),
                cells,
            });
        }
        tables.push(AblationTable {
            model_id,
            tools: tools.clone(),
            rows,
        });
    }
    Ok(tables)
}
