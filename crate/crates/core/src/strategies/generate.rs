//! Initial generation with compile-error repair.

use super::{RefineContext, StrategyConfig, StrategyError, TemplateName};
use crate::analysis::CompileError;
use crate::extract::extract_code;
use crate::types::{CodeCandidate, InitialState, TaskPrompt};

/// Generates a program for `task`, then feeds syntax errors back for up to
/// `max_compile_fix_rounds` repair calls.
///
/// Returns the first candidate that compiles, with the number of calls made.
/// When every round still fails to compile, the last candidate comes back
/// with `origin = Initial` and the unresolved error alongside it.
pub fn generate_initial(
    ctx: &RefineContext<'_>,
    task: &TaskPrompt,
    max_compile_fix_rounds: u32,
) -> Result<(CodeCandidate, u32, Option<CompileError>), StrategyError> {
    let prompt = ctx.render(TemplateName::Generation, &[("task", &task.text)])?;
    let mut candidate = extract_code(&ctx.ask(prompt)?)?;
    let mut calls = 1;
    let mut rounds = 0;
    loop {
        let Some(err) = ctx.checker.check(&candidate.code)? else {
            return Ok((candidate, calls, None));
        };
        if rounds == max_compile_fix_rounds {
            log::debug!("{}: syntax error left unresolved: {err}", ctx.task_id);
            candidate.origin = crate::types::Origin::Initial;
            return Ok((candidate, calls, Some(err)));
        }
        let message = err.to_string();
        let prompt = ctx.render(
            TemplateName::CompileFix,
            &[
                ("task", &task.text),
                ("code", &candidate.code),
                ("error", &message),
            ],
        )?;
        let answer = ctx.ask(prompt)?;
        calls += 1;
        rounds += 1;
        candidate = CodeCandidate::compile_fixed(extract_code(&answer)?.code);
    }
}

/// [`generate_initial`] followed by a scan with the context's analyzer.
pub fn generate_and_scan(
    ctx: &RefineContext<'_>,
    task: &TaskPrompt,
    cfg: &StrategyConfig,
) -> Result<InitialState, StrategyError> {
    let (candidate, llm_calls, compile_error) =
        generate_initial(ctx, task, cfg.max_compile_fix_rounds)?;
    let report = ctx.analyzer.scan_or_error(&candidate.code);
    Ok(InitialState {
        candidate,
        report,
        compile_error,
        llm_calls,
    })
}
