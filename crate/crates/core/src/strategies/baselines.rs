//! Single-shot refinement baselines.

use super::{
    render_report, require_findings, require_not_clean, seal, settle_on, RefineContext,
    StrategyError, StrategyId, TemplateName,
};
use crate::types::{AnalysisReport, InitialState, Lineage, RefinementTrace, Terminal};

fn lineage(strategy: StrategyId) -> Lineage {
    Lineage {
        strategy,
        solution_index: 0,
        iteration: 1,
    }
}

/// Ends `trace` in `Error` after a failed call or unusable answer.
/// `calls` counts every call issued so far, successful or not.
fn fail(mut trace: RefinementTrace, calls: u32, cause: String) -> RefinementTrace {
    trace.strategy_llm_calls += calls;
    trace.terminal = Terminal::Error;
    trace.errors.push(cause);
    seal(trace)
}

/// Sends `prompt` and records the answer as the trace's only attempt.
/// `prior_calls` were made earlier in the same attempt (self-debug's
/// explanation pass).
fn single_attempt(
    ctx: &RefineContext<'_>,
    mut trace: RefinementTrace,
    prompt: String,
    prior_calls: u32,
    feedback: Option<String>,
) -> RefinementTrace {
    let answer = match ctx.ask(prompt) {
        Ok(a) => a,
        Err(e) => return fail(trace, prior_calls + 1, e.to_string()),
    };
    match ctx.attempt_from_answer(&answer, lineage(trace.strategy), prior_calls + 1, feedback) {
        Ok(attempt) => {
            trace.attempts.push(attempt);
            settle_on(&mut trace, 0);
            seal(trace)
        }
        Err(e) => fail(trace, prior_calls + 1, e.to_string()),
    }
}

/// Asks the model whether the code has a security issue and to fix it.
pub fn direct_refine(
    ctx: &RefineContext<'_>,
    initial: &InitialState,
) -> Result<RefinementTrace, StrategyError> {
    require_not_clean(&initial.report)?;
    let prompt = ctx.render(TemplateName::Direct, &[("code", &initial.candidate.code)])?;
    let trace = ctx.new_trace(StrategyId::DirectPrompt, initial);
    Ok(single_attempt(ctx, trace, prompt, 0, None))
}

/// Has the model explain the code line by line, then fix it using that
/// explanation. Both calls belong to the one attempt.
pub fn self_debug_refine(
    ctx: &RefineContext<'_>,
    initial: &InitialState,
) -> Result<RefinementTrace, StrategyError> {
    require_not_clean(&initial.report)?;
    let code = &initial.candidate.code;
    let explain = ctx.render(TemplateName::Explain, &[("code", code)])?;
    let trace = ctx.new_trace(StrategyId::SelfDebug, initial);
    let explanation = match ctx.ask(explain) {
        Ok(e) => e,
        Err(e) => return Ok(fail(trace, 1, e.to_string())),
    };
    let fix = ctx.render(
        TemplateName::DebugFix,
        &[("code", code), ("feedback", &explanation)],
    )?;
    Ok(single_attempt(ctx, trace, fix, 1, Some(explanation)))
}

/// Feeds the rendered analyzer report back with the code.
pub fn bandit_feedback_refine(
    ctx: &RefineContext<'_>,
    initial: &InitialState,
) -> Result<RefinementTrace, StrategyError> {
    require_findings(&initial.report)?;
    let code = &initial.candidate.code;
    let report = render_report(&initial.report, code);
    let prompt = ctx.render(
        TemplateName::BanditFix,
        &[("report", &report), ("code", code)],
    )?;
    let trace = ctx.new_trace(StrategyId::BanditFeedback, initial);
    Ok(single_attempt(ctx, trace, prompt, 0, None))
}

/// Asks the model to explain an analyzer report in plain language.
pub fn verbalize(
    ctx: &RefineContext<'_>,
    report: &AnalysisReport,
    code: &str,
) -> Result<String, StrategyError> {
    require_findings(report)?;
    let rendered = render_report(report, code);
    let prompt = ctx.render(
        TemplateName::Verbalize,
        &[("code", code), ("report", &rendered)],
    )?;
    Ok(ctx.ask(prompt)?)
}

/// Verbalizes the report (one strategy-level call), then asks for a fix
/// guided by that prose (one attempt call).
pub fn verbalization_refine(
    ctx: &RefineContext<'_>,
    initial: &InitialState,
) -> Result<RefinementTrace, StrategyError> {
    require_findings(&initial.report)?;
    let code = &initial.candidate.code;
    let mut trace = ctx.new_trace(StrategyId::Verbalization, initial);
    let prose = match verbalize(ctx, &initial.report, code) {
        Ok(p) => p,
        Err(StrategyError::Llm(e)) => return Ok(fail(trace, 1, e.to_string())),
        Err(e) => return Err(e),
    };
    trace.strategy_llm_calls = 1;
    trace.verbalization = Some(prose.clone());
    let prompt = ctx.render(
        TemplateName::VerbalizedFix,
        &[("code", code), ("feedback", &prose)],
    )?;
    Ok(single_attempt(ctx, trace, prompt, 0, None))
}
