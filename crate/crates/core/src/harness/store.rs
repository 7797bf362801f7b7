//! JSONL persistence for run records.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strategies::StrategyId;
use crate::types::{InitialState, RunRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Corrupt {
        path: String,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A task whose generation step failed; retried on resume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub task_id: String,
    pub model_id: String,
    pub strategy: StrategyId,
    pub config_digest: String,
    pub error: String,
    pub at: DateTime<Utc>,
}

/// Output line of the generation-only mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub task_id: String,
    pub model_id: String,
    pub initial: InitialState,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub config_digest: String,
}

/// Reads every line of a JSONL file. A final line that does not parse is
/// taken to be an interrupted write and dropped with a warning; any other
/// bad line is an error. A missing file reads as empty.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let mut out = Vec::with_capacity(lines.len());
    for (pos, (idx, line)) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) if pos + 1 == lines.len() => {
                log::warn!(
                    "{}:{}: ignoring truncated last line ({e})",
                    path.display(),
                    idx + 1
                );
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.display().to_string(),
                    line: idx + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, StoreError> {
    read_jsonl(path)
}

/// Run files in `dir` (`*.jsonl`, excluding failure logs and generation
/// output), in file-name order.
pub fn run_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".jsonl")
                && name.contains("__")
                && !name.ends_with(".failures.jsonl")
                && !name.ends_with("__generated.jsonl")
        })
        .collect();
    files.sort();
    Ok(files)
}

/// All records of every run file in `dir`.
pub fn read_run_dir(dir: &Path) -> Result<Vec<RunRecord>, StoreError> {
    let mut out = Vec::new();
    for f in run_files(dir)? {
        out.extend(read_records(&f)?);
    }
    Ok(out)
}

/// Appends JSON lines, flushing after each one so a crash loses at most the
/// line being written.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    /// Opens `path` for appending. With `fresh`, existing content is
    /// discarded; otherwise a partial trailing line is cut off first.
    pub fn open(path: &Path, fresh: bool) -> Result<Self, StoreError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(fresh)
            .open(path)
            .map_err(io_err(path))?;
        if !fresh {
            let mut bytes = Vec::new();
            file.read_to_end(&mut bytes).map_err(io_err(path))?;
            if bytes.last().is_some_and(|b| *b != b'\n') {
                let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                log::warn!("{}: dropping partial last line", path.display());
                file.set_len(keep as u64).map_err(io_err(path))?;
            }
        }
        file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, value: &T) -> Result<(), StoreError> {
        let line = serde_json::to_string(value).expect("records serialize");
        self.append_line(&line)
    }

    pub fn append_line(&mut self, line: &str) -> Result<(), StoreError> {
        let path = self.path.clone();
        self.out.write_all(line.as_bytes()).map_err(io_err(&path))?;
        self.out.write_all(b"\n").map_err(io_err(&path))?;
        self.out.flush().map_err(io_err(&path))
    }
}

/// Replaces `path` with `lines`, via a temp file in the same directory.
pub fn rewrite_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), StoreError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    for v in values {
        let line = serde_json::to_string(v).expect("records serialize");
        writeln!(tmp, "{line}").map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}
