//! Solution-guided refinement.
//!
//! One call proposes `J` solutions. Each solution opens a branch that starts
//! from the original program and runs up to `K` refine-and-rescan rounds.
//! The first clean scan ends the whole search.

use super::{
    generate_solutions, require_findings, seal, settle_on, BranchSeedMode, RefineContext,
    StrategyConfig, StrategyError, StrategyId, TemplateName,
};
use crate::types::{InitialState, Lineage, RefinementTrace, ReportStatus, Terminal};

/// Ranking cost of an attempt for the unfixed fallback; failed scans rank last.
fn cost(status: ReportStatus, findings: usize) -> usize {
    match status {
        ReportStatus::ToolError => usize::MAX,
        _ => findings,
    }
}

pub fn fdsp_refine(
    ctx: &RefineContext<'_>,
    initial: &InitialState,
    cfg: &StrategyConfig,
) -> Result<RefinementTrace, StrategyError> {
    require_findings(&initial.report)?;
    cfg.validate()?;
    let original = &initial.candidate.code;
    let mut trace = ctx.new_trace(StrategyId::Fdsp, initial);
    trace.strategy_config = Some(cfg.clone());

    trace.strategy_llm_calls = 1;
    let parsed = match generate_solutions(ctx, original, &initial.report, cfg.solutions_j) {
        Ok(p) => p,
        Err(StrategyError::Llm(e)) => {
            trace.terminal = Terminal::Error;
            trace.errors.push(format!("solution generation: {e}"));
            return Ok(seal(trace));
        }
        Err(e) => return Err(e),
    };
    trace.solutions = parsed.solutions;
    trace.solution_shortfall = parsed.shortfall;

    let mut branches_errored = 0;
    let solutions = trace.solutions.clone();
    for solution in &solutions {
        let solution_text = solution.prompt_text();
        let mut current = original.clone();
        for k in 1..=cfg.iterations_k {
            let seed = match cfg.branch_seed_mode {
                BranchSeedMode::Chained => &current,
                BranchSeedMode::FromOriginal => original,
            };
            let prompt = ctx.render(
                TemplateName::FdspFix,
                &[("solution", &solution_text), ("code", seed)],
            )?;
            let lineage = Lineage {
                strategy: StrategyId::Fdsp,
                solution_index: solution.index,
                iteration: k,
            };
            let outcome = ctx
                .ask(prompt)
                .map_err(|e| e.to_string())
                .and_then(|answer| {
                    ctx.attempt_from_answer(&answer, lineage, 1, None)
                        .map_err(|e| e.to_string())
                });
            let attempt = match outcome {
                Ok(a) => a,
                Err(cause) => {
                    // the failed call still counts; the branch is abandoned
                    trace.strategy_llm_calls += 1;
                    trace.errors.push(format!(
                        "solution {} iteration {k}: {cause}",
                        solution.index
                    ));
                    branches_errored += 1;
                    break;
                }
            };
            let clean = attempt.report.is_clean();
            current = attempt.candidate.code.clone();
            trace.attempts.push(attempt);
            if clean {
                let last = trace.attempts.len() - 1;
                settle_on(&mut trace, last);
                return Ok(seal(trace));
            }
        }
    }

    if branches_errored == solutions.len() {
        trace.terminal = Terminal::Error;
        trace.final_attempt = None;
        return Ok(seal(trace));
    }
    let best = trace
        .attempts
        .iter()
        .enumerate()
        .min_by_key(|(i, a)| (cost(a.report.exit_status, a.report.findings.len()), *i))
        .map(|(i, _)| i);
    match best {
        Some(i) => settle_on(&mut trace, i),
        None => {
            trace.terminal = Terminal::Error;
            trace.errors.push("no refinement attempt completed".into());
        }
    }
    Ok(seal(trace))
}
