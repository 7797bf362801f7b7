//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::{json, Value};

use vulnpatch::analysis::{
    parse_bandit_json, rulescan, Analyzer, BanditAnalyzer, NoopChecker, RuleScan,
};
use vulnpatch::llm::{ScriptEntry, ScriptedClient};
use vulnpatch::metrics::{percent_vulnerable, reduction_delta, Percent};
use vulnpatch::strategies::{
    run_strategy, ModelParams, PromptTemplates, RefineContext, StrategyConfig, StrategyId,
};
use vulnpatch::{CodeCandidate, CweId, InitialState, RunRecord, Terminal};

const FIXED_CLOCK: &str = "2025-01-01T00:00:00Z";
/// Allowed gap between a recomputed delta and the printed one, in points.
const DELTA_TOLERANCE_TENTHS: i64 = 1;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn acceptance_fixtures() -> PathBuf {
    fixtures().join("acceptance")
}

fn vulnpatch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulnpatch"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn vulnpatch")
}

fn expect_exit(out: &Output, code: i32) -> Result<(), String> {
    if out.status.code() == Some(code) {
        Ok(())
    } else {
        Err(format!(
            "exit {:?}, expected {code}; stderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn records(path: &Path) -> Result<Vec<RunRecord>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .map(|l| RunRecord::from_json_line(l).map_err(|e| e.to_string()))
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn unfence(answer: &str) -> String {
    vulnpatch::extract_code(answer)
        .expect("fixture answers carry code")
        .code
}

/// The committed per-task script of the hermetic corpus.
fn fdsp_script() -> BTreeMap<String, Vec<String>> {
    let text = std::fs::read_to_string(acceptance_fixtures().join("fdsp_script.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    v["tasks"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, q)| {
            let q = q
                .as_array()
                .unwrap()
                .iter()
                .map(|e| e.as_str().unwrap().to_string())
                .collect();
            (k.clone(), q)
        })
        .collect()
}

fn refine_fdsp(out: &Path, work: &Path, j: &str, k: &str) -> Output {
    let fx = acceptance_fixtures();
    vulnpatch(
        &[
            "refine",
            "--dataset",
            s(&fx.join("prompts.jsonl")),
            "--model",
            "scripted-model",
            "--strategy",
            "fdsp",
            "--solutions",
            j,
            "--iters",
            k,
            "--backend",
            "scripted",
            "--cassette",
            s(&fx.join("fdsp_script.json")),
            "--analyzer",
            "rulescan",
            "--checker",
            "none",
            "--out",
            s(out),
            "--json",
        ],
        work,
    )
}

fn criterion_1() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let start = Instant::now();
    let run = refine_fdsp(&out, tmp.path(), "3", "2");
    let elapsed = start.elapsed();
    expect_exit(&run, 0)?;
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    let recs = records(&out.join("scripted-model__fdsp.jsonl"))?;
    ensure(recs.len() == 5, || format!("{} records", recs.len()))?;
    let mut terminals: BTreeMap<Terminal, usize> = BTreeMap::new();
    for r in &recs {
        *terminals.entry(r.trace.terminal).or_default() += 1;
    }
    let expected = BTreeMap::from([
        (Terminal::FixedAtGeneration, 1),
        (Terminal::Fixed, 3),
        (Terminal::Unfixed, 1),
    ]);
    ensure(terminals == expected, || format!("terminals {terminals:?}"))?;
    let unfixed = recs
        .iter()
        .find(|r| r.trace.terminal == Terminal::Unfixed)
        .unwrap();
    ensure(unfixed.trace.total_llm_calls == 7, || {
        format!("unfixed task used {} calls", unfixed.trace.total_llm_calls)
    })
}

const VULNERABLE: &str = "import sqlite3\n\ndef count_rows(db, table_name):\n    conn = sqlite3.connect(db)\n    cursor = conn.cursor()\n    cursor.execute(\"SELECT COUNT(*) FROM {}\".format(table_name))\n    return cursor.fetchone()[0]";
const FIXED: &str = "import sqlite3\n\ndef count_rows(db, table_name):\n    conn = sqlite3.connect(db)\n    cursor = conn.cursor()\n    cursor.execute(\"SELECT COUNT(*) FROM t WHERE name = ?\", (table_name,))\n    return cursor.fetchone()[0]";

#[derive(Debug, Clone, Copy)]
enum Reply {
    Fixed,
    StillVulnerable,
    Fails,
    Prose,
}

fn reply_entry(r: Reply, n: usize) -> ScriptEntry {
    match r {
        Reply::Fixed => ScriptEntry::Text(format!("```python\n{FIXED}\n```")),
        // vary the text so each attempt is distinguishable
        Reply::StillVulnerable => {
            ScriptEntry::Text(format!("```python\n{VULNERABLE}\n# v{n}\n```"))
        }
        Reply::Fails => ScriptEntry::Error {
            error: "upstream failure".into(),
        },
        Reply::Prose => ScriptEntry::Text("I cannot help with that.".into()),
    }
}

fn fdsp_case(
    j: u32,
    k: u32,
    solutions_listed: u32,
    solutions_fail: bool,
    replies: &[Reply],
) -> Result<(), TestCaseError> {
    let mut script = Vec::new();
    if solutions_fail {
        script.push(ScriptEntry::Error {
            error: "no solutions".into(),
        });
    } else {
        let list: Vec<String> = (1..=solutions_listed)
            .map(|i| format!("{i}) Fix {i}: apply mitigation {i}."))
            .collect();
        script.push(ScriptEntry::Text(list.join("\n")));
    }
    script.extend(replies.iter().enumerate().map(|(n, r)| reply_entry(*r, n)));
    let llm = ScriptedClient::from_queue(script);
    let templates = PromptTemplates::default();
    let params = ModelParams::new("m");
    let ctx = RefineContext {
        task_id: "t",
        llm: &llm,
        analyzer: &RuleScan,
        checker: &NoopChecker,
        templates: &templates,
        params: &params,
    };
    let initial = InitialState {
        candidate: CodeCandidate::initial(VULNERABLE),
        report: RuleScan.scan(VULNERABLE).unwrap(),
        compile_error: None,
        llm_calls: 1,
    };
    let cfg = StrategyConfig {
        solutions_j: j,
        iterations_k: k,
        ..StrategyConfig::default()
    };
    let trace = run_strategy(&ctx, StrategyId::Fdsp, &cfg, &initial)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let made = llm.requests().len() as u32;
    prop_assert!(
        trace.total_llm_calls <= 1 + j * k,
        "{} calls > budget {}",
        trace.total_llm_calls,
        1 + j * k
    );
    prop_assert_eq!(
        made,
        trace.total_llm_calls,
        "recorded calls differ from calls made"
    );
    trace.check_invariants().map_err(TestCaseError::fail)?;
    let clean: Vec<usize> = trace
        .attempts
        .iter()
        .enumerate()
        .filter(|(_, a)| a.report.is_clean())
        .map(|(i, _)| i)
        .collect();
    match clean.first() {
        Some(&i) => {
            prop_assert_eq!(clean.len(), 1, "more than one clean attempt");
            prop_assert_eq!(
                i,
                trace.attempts.len() - 1,
                "an attempt followed a clean report"
            );
            prop_assert_eq!(trace.terminal, Terminal::Fixed);
            prop_assert_eq!(trace.final_attempt, Some(i));
        }
        None => prop_assert_ne!(trace.terminal, Terminal::Fixed),
    }
    Ok(())
}

fn criterion_2() -> Result<(), String> {
    let reply = prop_oneof![
        Just(Reply::Fixed),
        Just(Reply::StillVulnerable),
        Just(Reply::StillVulnerable),
        Just(Reply::Fails),
        Just(Reply::Prose),
    ];
    let strategy = (
        1u32..=4,
        1u32..=3,
        1u32..=5,
        proptest::bool::weighted(0.05),
        proptest::collection::vec(reply, 12),
    );
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |(j, k, listed, fail, replies)| {
            fdsp_case(j, k, listed, fail, &replies)
        })
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn criterion_3() -> Result<(), String> {
    let p = percent_vulnerable(189, 470).map_err(|e| e.to_string())?;
    ensure(p.to_string() == "40.2", || format!("189/470 -> {p}"))?;
    let text = std::fs::read_to_string(fixtures().join("table_anchors.csv")).unwrap();
    let mut misses = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let [dataset, model, tool, gen, refined, printed] = f[..] else {
            return Err(format!("bad anchor line {line:?}"));
        };
        let parse = |v: &str| v.parse::<Percent>();
        let delta = reduction_delta(parse(gen)?, parse(refined)?).map_err(|e| e.to_string())?;
        let gap = (delta.tenths() - parse(printed)?.tenths()).abs();
        let verdict = if gap <= DELTA_TOLERANCE_TENTHS {
            "ok"
        } else {
            "MISMATCH"
        };
        println!("    anchor {dataset}/{model}/{tool}: {gen} -> {refined} recomputed {delta} printed {printed} ({verdict})");
        if gap > DELTA_TOLERANCE_TENTHS {
            misses.push(format!(
                "{dataset}/{model}/{tool} off by {}",
                Percent::from_tenths(gap)
            ));
        }
    }
    ensure(misses.is_empty(), || misses.join("; "))
}

fn criterion_4() -> Result<(), String> {
    let raw = std::fs::read_to_string(fixtures().join("bandit_listing1.json")).unwrap();
    let listing = std::fs::read_to_string(fixtures().join("listing1.py")).unwrap();
    let report = parse_bandit_json(&raw).map_err(|e| e.to_string())?;
    ensure(report.findings.len() == 1, || {
        format!("{} findings", report.findings.len())
    })?;
    let f = &report.findings[0];
    let execute_line = listing
        .lines()
        .position(|l| l.contains("cursor.execute"))
        .unwrap() as u32
        + 1;
    ensure(f.rule_id == "B608", || format!("rule {}", f.rule_id))?;
    ensure(f.line == execute_line, || {
        format!("line {} != {execute_line}", f.line)
    })?;
    ensure(f.cwe == Some(CweId(89)), || format!("cwe {:?}", f.cwe))?;
    ensure(report.raw == raw, || {
        "raw payload differs from fixture".into()
    })
}

/// Minimal OpenAI-style endpoint answering from the hermetic corpus.
fn mock_endpoint() -> (String, std::sync::Arc<std::sync::atomic::AtomicUsize>) {
    let script = fdsp_script();
    let prompts: Vec<(String, String)> =
        std::fs::read_to_string(acceptance_fixtures().join("prompts.jsonl"))
            .unwrap()
            .lines()
            .map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                (
                    v["id"].as_str().unwrap().to_string(),
                    v["prompt"].as_str().unwrap().to_string(),
                )
            })
            .collect();
    let answer = move |user: &str| -> String {
        if user.contains("Propose exactly") {
            return script["t2"][1].clone();
        }
        for queue in script.values() {
            if queue.len() > 2 && user.contains(&unfence(&queue[0])) {
                return queue[2].clone();
            }
        }
        for (id, prompt) in &prompts {
            if user.contains(prompt.as_str()) {
                return script[id][0].clone();
            }
        }
        "```python\npass\n```".into()
    };
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).ok();
            counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            let req: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let user = req["messages"]
                .as_array()
                .and_then(|m| m.last())
                .and_then(|m| m["content"].as_str())
                .unwrap_or("")
                .to_string();
            let payload =
                json!({"choices": [{"message": {"role": "assistant", "content": answer(&user)}}]})
                    .to_string();
            let reply = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            stream.write_all(reply.as_bytes()).ok();
        }
    });
    (format!("http://{addr}/v1"), hits)
}

fn criterion_5() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path();
    let fx = acceptance_fixtures();
    let dataset = fx.join("prompts.jsonl");
    let cassette = work.join("cassette.jsonl");
    std::fs::write(
        work.join("provider.toml"),
        "[provider]\napi_key_env = \"VULNPATCH_ACCEPTANCE_KEY\"\nrequests_per_minute = 0\nbackoff_base_ms = 1\n",
    )
    .unwrap();
    let (url, hits) = mock_endpoint();
    let common = |out: &str, backend: &str| -> Vec<String> {
        [
            "refine",
            "--config",
            "provider.toml",
            "--dataset",
            s(&dataset),
            "--model",
            "mock-model",
            "--strategy",
            "fdsp",
            "--analyzer",
            "rulescan",
            "--checker",
            "none",
            "--out",
            out,
            "--backend",
            backend,
            "--cassette",
            s(&cassette),
            "--fixed-clock",
            FIXED_CLOCK,
            "--json",
        ]
        .iter()
        .map(|a| a.to_string())
        .collect()
    };
    let run = |args: Vec<String>| {
        Command::new(env!("CARGO_BIN_EXE_vulnpatch"))
            .args(&args)
            .current_dir(work)
            .env("VULNPATCH_ACCEPTANCE_KEY", "sk-test")
            .output()
            .expect("spawn vulnpatch")
    };

    let mut rec = common("recorded", "record");
    rec.extend(["--endpoint".to_string(), url]);
    expect_exit(&run(rec), 0)?;
    let recorded_calls = hits.load(std::sync::atomic::Ordering::SeqCst);
    ensure(recorded_calls > 5, || {
        format!("only {recorded_calls} calls recorded")
    })?;

    expect_exit(&run(common("replay_a", "replay")), 0)?;
    expect_exit(&run(common("replay_b", "replay")), 0)?;
    let a = std::fs::read(work.join("replay_a/mock-model__fdsp.jsonl")).unwrap();
    let b = std::fs::read(work.join("replay_b/mock-model__fdsp.jsonl")).unwrap();
    ensure(!a.is_empty() && a == b, || "replayed runs differ".into())?;
    ensure(
        hits.load(std::sync::atomic::Ordering::SeqCst) == recorded_calls,
        || "replay reached the network".into(),
    )?;

    // any model call on resume would hit an empty script and fail the task
    std::fs::write(work.join("empty_script.json"), "[]").unwrap();
    let mut resume = common("replay_a", "scripted");
    let pos = resume.iter().position(|a| a == "--cassette").unwrap();
    resume[pos + 1] = "empty_script.json".into();
    let out = run(resume);
    expect_exit(&out, 0)?;
    let summary: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure(
        summary["skipped"] == 5 && summary["completed"] == 0 && summary["failed"] == 0,
        || format!("resume summary {summary}"),
    )?;
    let after = std::fs::read(work.join("replay_a/mock-model__fdsp.jsonl")).unwrap();
    ensure(after == a, || "resume changed the run file".into())
}

fn baseline_script(strategy: StrategyId) -> Value {
    let mut tasks = serde_json::Map::new();
    for (id, queue) in fdsp_script() {
        let mut q = vec![queue[0].clone()];
        if queue.len() > 1 {
            match strategy {
                StrategyId::SelfDebug => {
                    q.push("Line 1 imports a module. Line 2 defines the function.".into())
                }
                StrategyId::Verbalization => {
                    q.push("The tool found an injection risk in the query call.".into())
                }
                _ => {}
            }
            q.push(queue.last().unwrap().clone());
        }
        tasks.insert(id, Value::from(q));
    }
    json!({ "tasks": tasks })
}

fn criterion_6() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let fx = acceptance_fixtures();
    let expected = [
        (StrategyId::DirectPrompt, 1),
        (StrategyId::SelfDebug, 2),
        (StrategyId::BanditFeedback, 1),
        (StrategyId::Verbalization, 2),
    ];
    for (strategy, calls) in expected {
        let script = tmp.path().join(format!("{}.json", strategy.key()));
        std::fs::write(&script, baseline_script(strategy).to_string()).unwrap();
        let out = tmp.path().join("runs");
        let run = vulnpatch(
            &[
                "refine",
                "--dataset",
                s(&fx.join("prompts.jsonl")),
                "--model",
                "m",
                "--strategy",
                strategy.key(),
                "--backend",
                "scripted",
                "--cassette",
                s(&script),
                "--analyzer",
                "rulescan",
                "--checker",
                "none",
                "--out",
                s(&out),
            ],
            tmp.path(),
        );
        expect_exit(&run, 0)?;
        let recs = records(&out.join(format!("m__{}.jsonl", strategy.key())))?;
        ensure(recs.len() == 5, || {
            format!("{strategy}: {} records", recs.len())
        })?;
        for r in &recs {
            let want = if r.trace.terminal == Terminal::FixedAtGeneration {
                0
            } else {
                calls
            };
            ensure(r.trace.total_llm_calls == want, || {
                format!(
                    "{strategy} {}: {} calls, expected {want}",
                    r.task_id, r.trace.total_llm_calls
                )
            })?;
        }
    }
    Ok(())
}

fn criterion_7() -> Result<(), String> {
    let cases = [
        (
            "RS-B608",
            "cursor.execute(\"SELECT * FROM users WHERE name = '%s'\" % name)",
            "cursor.execute(\"SELECT * FROM users WHERE name = ?\", (name,))",
        ),
        (
            "RS-B602",
            "subprocess.call(\"ls \" + path, shell=True)",
            "subprocess.call([\"ls\", path])",
        ),
        (
            "RS-B307",
            "value = eval(expr)",
            "value = ast.literal_eval(expr)",
        ),
        (
            "RS-B105",
            "password = \"hunter2\"",
            "password = os.environ[\"APP_PASSWORD\"]",
        ),
        ("RS-B201", "app.run(debug=True)", "app.run(debug=False)"),
    ];
    let mut passed = 0;
    let mut problems = Vec::new();
    for (rule, positive, negative) in cases {
        let hit = |code: &str| rulescan(code).findings.iter().any(|f| f.rule_id == rule);
        if hit(positive) {
            passed += 1;
        } else {
            problems.push(format!("{rule} missed {positive:?}"));
        }
        if !hit(negative) {
            passed += 1;
        } else {
            problems.push(format!("{rule} flagged {negative:?}"));
        }
    }
    println!("    {passed}/10 rule assertions hold");
    ensure(problems.is_empty(), || problems.join("; "))
}

fn criterion_8() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    expect_exit(&refine_fdsp(&out, tmp.path(), "1", "2"), 0)?;
    expect_exit(&refine_fdsp(&out, tmp.path(), "3", "1"), 0)?;
    let report = vulnpatch(&["report", "--out", s(&out), "--format", "csv"], tmp.path());
    expect_exit(&report, 0)?;
    let csv =
        std::fs::read_to_string(out.join("report/ablation.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let find = |label: &str| rows.iter().find(|r| r[0] == label).cloned();
    let single_solution = find("FDSP with single solution").ok_or("no single-solution row")?;
    let single_iteration = find("FDSP with single iteration").ok_or("no single-iteration row")?;
    // columns: row,model,tool,j,k,flagged,total,percent,delta_vs_full,budget,max_calls
    let num = |r: &Vec<&str>, i: usize| r[i].parse::<u32>().map_err(|e| format!("{r:?}: {e}"));
    ensure(num(&single_solution, 9)? == 1 + 2, || {
        format!("budget {:?}", single_solution)
    })?;
    ensure(num(&single_solution, 10)? <= 1 + 2, || {
        format!("calls {:?}", single_solution)
    })?;
    ensure(num(&single_iteration, 9)? == 1 + 3, || {
        format!("budget {:?}", single_iteration)
    })?;
    ensure(num(&single_iteration, 10)? <= 1 + 3, || {
        format!("calls {:?}", single_iteration)
    })?;
    ensure(find("FDSP").is_none(), || {
        "a full FDSP row appeared without a full run".into()
    })
}

/// `None` when Bandit is not installed.
fn criterion_9() -> Option<Result<(), String>> {
    let tmp = tempfile::tempdir().unwrap();
    let bandit = BanditAnalyzer::from_env(tmp.path()).ok()?;
    let listing = std::fs::read_to_string(fixtures().join("listing1.py")).unwrap();
    Some((|| {
        let report = bandit.scan(&listing).map_err(|e| e.to_string())?;
        ensure(
            report.findings.iter().any(|f| {
                f.rule_id == "B608" && f.message.contains("Possible SQL injection vector")
            }),
            || {
                format!(
                    "findings {:?}",
                    report
                        .findings
                        .iter()
                        .map(|f| &f.rule_id)
                        .collect::<Vec<_>>()
                )
            },
        )
    })())
}

/// `None` means skipped.
type Check = Box<dyn FnOnce() -> Option<Result<(), String>>>;

fn main() {
    let criteria: Vec<(u32, &str, Check)> = vec![
        (
            1,
            "hermetic FDSP run on the 5-prompt corpus",
            Box::new(|| Some(criterion_1())),
        ),
        (
            2,
            "FDSP call budget and early stop (256 random scenarios)",
            Box::new(|| Some(criterion_2())),
        ),
        (
            3,
            "percentage arithmetic and table anchors",
            Box::new(|| Some(criterion_3())),
        ),
        (
            4,
            "Bandit JSON fixture parsing",
            Box::new(|| Some(criterion_4())),
        ),
        (
            5,
            "record, replay determinism and resume",
            Box::new(|| Some(criterion_5())),
        ),
        (
            6,
            "baseline strategy call counts",
            Box::new(|| Some(criterion_6())),
        ),
        (7, "RuleScan rule suite", Box::new(|| Some(criterion_7()))),
        (
            8,
            "ablation rows and budgets",
            Box::new(|| Some(criterion_8())),
        ),
        (9, "real Bandit on the SQL listing", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Some(Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into())))
        });
        match outcome {
            None => println!("criterion {n} SKIP {name} (tool not installed)"),
            Some(Ok(())) => println!("criterion {n} PASS {name}"),
            Some(Err(why)) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {why}");
            }
        }
    }
    std::io::stdout().flush().ok();
    if failed > 0 {
        std::process::exit(1);
    }
}
