//! Property tests for metric arithmetic and run accounting.

use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use vulnpatch::analysis::RuleScan;
use vulnpatch::harness::{read_records, run_tasks, ConfigLayer, FixedClock, Toolchain};
use vulnpatch::llm::ScriptedClient;
use vulnpatch::metrics::{
    build_main_table, check_conservation, cwe_histogram, delta_from_counts, percent_vulnerable,
    CweBucket, Percent, Phase,
};
use vulnpatch::{AnalyzerId, TaskPrompt};

const VULNERABLE: [&str; 3] = [
    "def calc(expr):\n    return eval(expr)",
    "import subprocess\n\ndef ls(p):\n    return subprocess.call(\"ls \" + p, shell=True)",
    "def creds():\n    password = \"hunter2\"\n    return password",
];
const CLEAN: &str = "def add(a, b):\n    return a + b";

fn fenced(code: &str) -> String {
    format!("```python\n{code}\n```")
}

proptest! {
    #[test]
    fn percent_is_bounded_and_within_half_a_tenth(total in 1u64..100_000, frac in 0.0f64..=1.0) {
        let flagged = ((total as f64) * frac).floor() as u64;
        let p = percent_vulnerable(flagged, total).unwrap();
        prop_assert!((0..=1000).contains(&p.tenths()));
        // |1000·f/t − p| ≤ 1/2
        let err = (2000 * flagged as i128 - 2 * p.tenths() as i128 * total as i128).abs();
        prop_assert!(err <= total as i128);
    }

    #[test]
    fn percent_is_monotone(total in 1u64..5000, a in 0u64..5000, b in 0u64..5000) {
        let (lo, hi) = (a.min(b).min(total), a.max(b).min(total));
        prop_assert!(percent_vulnerable(lo, total).unwrap() <= percent_vulnerable(hi, total).unwrap());
    }

    #[test]
    fn count_delta_matches_exact_difference(total in 1u64..5000, g in 0u64..5000, r in 0u64..5000) {
        let (g, r) = (g.min(total), r.min(total));
        let d = delta_from_counts(g, r, total).unwrap();
        let err = (2000 * (g as i128 - r as i128) - 2 * d.tenths() as i128 * total as i128).abs();
        prop_assert!(err <= total as i128);
        prop_assert_eq!(delta_from_counts(g, g, total).unwrap(), Percent::ZERO);
    }

    #[test]
    fn percent_text_round_trips(tenths in -100_000i64..100_000) {
        let p = Percent::from_tenths(tenths);
        prop_assert_eq!(p.to_string().parse::<Percent>().unwrap(), p);
    }
}

/// Per task: which vulnerable program (if any) is generated and whether the
/// direct fix succeeds.
fn scenario() -> impl Strategy<Value = Vec<(Option<usize>, bool)>> {
    proptest::collection::vec((proptest::option::of(0usize..3), any::<bool>()), 1..12)
}

fn run(plan: &[(Option<usize>, bool)], workers: usize) -> (Vec<u8>, Vec<vulnpatch::RunRecord>) {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "model_id = \"m\"\nstrategy = \"direct\"\nanalyzer = \"rulescan\"\nsyntax_checker = \"none\"\n\
         workers = {workers}\noutput_dir = {:?}\n[dataset]\npath = \"unused.jsonl\"\n\
         [provider]\nbackend = \"scripted\"\ncassette = \"unused.json\"\n",
        dir.path()
    );
    let cfg = ConfigLayer::parse(&text).unwrap().resolve().unwrap();
    let mut llm = ScriptedClient::default();
    let mut tasks = Vec::new();
    for (i, (vuln, fixes)) in plan.iter().enumerate() {
        let id = format!("task{i:02}");
        let queue = match vuln {
            None => vec![fenced(CLEAN)],
            Some(v) if *fixes => vec![fenced(VULNERABLE[*v]), fenced(CLEAN)],
            Some(v) => vec![
                fenced(VULNERABLE[*v]),
                fenced(&format!("{}\n# retry", VULNERABLE[*v])),
            ],
        };
        llm = llm.with_task(&id, queue);
        tasks.push(TaskPrompt {
            id,
            text: format!("prompt {i}"),
            source_dataset: vulnpatch::SourceDataset::Custom,
            domains: Default::default(),
        });
    }
    let mut tools = Toolchain::new(Box::new(llm), Box::new(RuleScan));
    tools.clock = Box::new(FixedClock(
        Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
    ));
    run_tasks(&cfg, &tasks, &tools).unwrap();
    let bytes = std::fs::read(cfg.output_file()).unwrap();
    (bytes, read_records(&cfg.output_file()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn worker_count_does_not_change_output(plan in scenario(), workers in 2usize..8) {
        let (one, recs) = run(&plan, 1);
        let (many, _) = run(&plan, workers);
        prop_assert_eq!(one, many);
        prop_assert_eq!(recs.len(), plan.len());
    }

    #[test]
    fn accounting_is_conserved_and_monotone(plan in scenario()) {
        let (_, recs) = run(&plan, 2);
        check_conservation(&recs).map_err(TestCaseError::fail)?;
        let table = build_main_table(&recs, &[AnalyzerId::RuleScan]).unwrap();
        let generated = table.rows[0].cells[0].as_ref().unwrap();
        let refined = table.rows[1].cells[0].as_ref().unwrap();
        prop_assert!(refined.percent <= generated.percent);
        let expected_flagged = plan.iter().filter(|(v, _)| v.is_some()).count() as u64;
        let expected_left = plan.iter().filter(|(v, f)| v.is_some() && !f).count() as u64;
        prop_assert_eq!(generated.flagged, expected_flagged);
        prop_assert_eq!(refined.flagged, expected_left);

        let gen = cwe_histogram(&recs, Phase::Generated, AnalyzerId::RuleScan, usize::MAX);
        let unres = cwe_histogram(&recs, Phase::Unresolved, AnalyzerId::RuleScan, usize::MAX);
        let gen_counts: BTreeMap<CweBucket, u64> = gen.counts.iter().copied().collect();
        for (bucket, n) in &unres.counts {
            prop_assert!(*n <= gen_counts.get(bucket).copied().unwrap_or(0));
        }
    }
}
