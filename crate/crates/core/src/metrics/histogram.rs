//! Per-CWE finding counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::types::{AnalyzerId, CweId, RunRecord, Terminal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Initial reports.
    Generated,
    /// Final reports of traces that did not end fixed.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CweBucket {
    Cwe(CweId),
    Unmapped,
}

impl fmt::Display for CweBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CweBucket::Cwe(id) => write!(f, "{id}"),
            CweBucket::Unmapped => f.write_str("Unmapped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CweHistogram {
    pub phase: Phase,
    pub tool: AnalyzerId,
    /// Descending by count, ties by CWE number; `Unmapped` last.
    pub counts: Vec<(CweBucket, u64)>,
}

impl CweHistogram {
    pub fn get(&self, bucket: CweBucket) -> u64 {
        self.counts
            .iter()
            .find(|(b, _)| *b == bucket)
            .map_or(0, |(_, n)| *n)
    }
}

/// Counts findings of `tool` per CWE.
///
/// Each `(model, task)` program is counted once in the generated phase even
/// when several strategies refined it. The unresolved phase counts every
/// record whose trace ended neither `Fixed` nor `FixedAtGeneration`.
pub fn cwe_histogram(
    records: &[RunRecord],
    phase: Phase,
    tool: AnalyzerId,
    top_n: usize,
) -> CweHistogram {
    let mut tally: BTreeMap<CweBucket, u64> = BTreeMap::new();
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    for r in records {
        let Some((initial, fin)) = r.trace.reports_for(tool) else {
            continue;
        };
        let report = match phase {
            Phase::Generated => {
                if !seen.insert((r.model_id.as_str(), r.task_id.as_str())) {
                    continue;
                }
                initial
            }
            Phase::Unresolved => {
                if matches!(
                    r.trace.terminal,
                    Terminal::Fixed | Terminal::FixedAtGeneration
                ) {
                    continue;
                }
                fin
            }
        };
        for f in &report.findings {
            let bucket = f.cwe.map_or(CweBucket::Unmapped, CweBucket::Cwe);
            *tally.entry(bucket).or_default() += 1;
        }
    }
    let mut counts: Vec<(CweBucket, u64)> = tally.into_iter().collect();
    counts.sort_by(|(a, na), (b, nb)| match (a, b) {
        (CweBucket::Unmapped, CweBucket::Unmapped) => std::cmp::Ordering::Equal,
        (CweBucket::Unmapped, _) => std::cmp::Ordering::Greater,
        (_, CweBucket::Unmapped) => std::cmp::Ordering::Less,
        _ => nb.cmp(na).then(a.cmp(b)),
    });
    counts.truncate(top_n);
    CweHistogram {
        phase,
        tool,
        counts,
    }
}
