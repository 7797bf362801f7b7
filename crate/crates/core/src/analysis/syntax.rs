//! Compile-only syntax gate. Source is compiled, never executed.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use serde::Deserialize;

use super::{which, AnalysisError, CompileError};

pub trait SyntaxChecker: Send + Sync {
    /// `Ok(None)` when the code compiles, `Ok(Some(err))` on a syntax error.
    fn check(&self, code: &str) -> Result<Option<CompileError>, AnalysisError>;
}

/// Accepts everything. Used when no interpreter is configured.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoopChecker;

impl SyntaxChecker for NoopChecker {
    fn check(&self, _code: &str) -> Result<Option<CompileError>, AnalysisError> {
        Ok(None)
    }
}

impl<F> SyntaxChecker for F
where
    F: Fn(&str) -> Option<CompileError> + Send + Sync,
{
    fn check(&self, code: &str) -> Result<Option<CompileError>, AnalysisError> {
        Ok(self(code))
    }
}

const COMPILE_SCRIPT: &str = r#"
import json, sys
src = sys.stdin.buffer.read().decode("utf-8", "replace")
try:
    compile(src, "<candidate>", "exec")
except (SyntaxError, ValueError) as e:
    print(json.dumps({"message": str(getattr(e, "msg", e)), "line": getattr(e, "lineno", None)}))
    sys.exit(3)
"#;

#[derive(Deserialize)]
struct PyError {
    message: String,
    line: Option<u32>,
}

/// Runs `python3 -c` with a compile-only script, feeding the code on stdin.
#[derive(Debug, Clone)]
pub struct PythonChecker {
    interpreter: PathBuf,
}

impl PythonChecker {
    pub fn new(interpreter: &str) -> Result<Self, AnalysisError> {
        let interpreter = which(interpreter).ok_or_else(|| AnalysisError::ToolNotFound {
            tool: "python".into(),
            detail: format!("{interpreter:?} is not an executable on PATH"),
        })?;
        Ok(Self { interpreter })
    }

    /// `$PYTHON` when set, else `python3`.
    pub fn from_env() -> Result<Self, AnalysisError> {
        Self::new(&std::env::var("PYTHON").unwrap_or_else(|_| "python3".into()))
    }
}

impl SyntaxChecker for PythonChecker {
    fn check(&self, code: &str) -> Result<Option<CompileError>, AnalysisError> {
        let mut child = Command::new(&self.interpreter)
            .args(["-I", "-c", COMPILE_SCRIPT])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| AnalysisError::ToolNotFound {
                tool: "python".into(),
                detail: e.to_string(),
            })?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(code.as_bytes())?;
        let out = child.wait_with_output()?;
        match out.status.code() {
            Some(0) => Ok(None),
            Some(3) => {
                let stdout = String::from_utf8_lossy(&out.stdout);
                let err: PyError = serde_json::from_str(stdout.trim())
                    .map_err(|e| AnalysisError::parse("python", e, &stdout))?;
                let message = if err.message.is_empty() {
                    "invalid syntax".to_string()
                } else {
                    err.message
                };
                Ok(Some(CompileError {
                    message,
                    line: err.line,
                }))
            }
            other => Err(AnalysisError::ToolCrashed {
                tool: "python".into(),
                status: other.unwrap_or(-1),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            }),
        }
    }
}
