//! Prompt datasets on disk.
//!
//! JSONL: one object per line with string `id` and `prompt`, optional
//! `domains` (array of domain names). CSV: header row containing `id` and
//! `prompt`, optional `domains` column with `;`-separated names.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::types::{Domain, SourceDataset, TaskPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    #[serde(rename = "jsonl")]
    JsonlPrompts,
    #[serde(rename = "csv")]
    CsvPrompts,
}

impl DatasetFormat {
    /// `.csv` files are CSV; everything else is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::CsvPrompts,
            _ => DatasetFormat::JsonlPrompts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default)]
    pub format: Option<DatasetFormat>,
    /// Defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            format: None,
            name: None,
        }
    }

    pub fn format(&self) -> DatasetFormat {
        self.format
            .unwrap_or_else(|| DatasetFormat::from_path(&self.path))
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: duplicate id {id:?} on lines {first} and {second}")]
    DuplicateId {
        path: String,
        id: String,
        first: usize,
        second: usize,
    },
    #[error("{path}:{line}: missing field {field:?}")]
    MissingField {
        path: String,
        line: usize,
        field: &'static str,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct Row {
    line: usize,
    id: String,
    prompt: String,
    domains: BTreeSet<Domain>,
}

fn parse_domains(
    names: impl IntoIterator<Item = String>,
    path: &str,
    line: usize,
) -> Result<BTreeSet<Domain>, DatasetError> {
    names
        .into_iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| {
            n.trim()
                .parse::<Domain>()
                .map_err(|reason| DatasetError::Malformed {
                    path: path.to_string(),
                    line,
                    reason,
                })
        })
        .collect()
}

fn jsonl_rows(text: &str, path: &str) -> Result<Vec<Row>, DatasetError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| DatasetError::Malformed {
            path: path.to_string(),
            line,
            reason,
        };
        let value: Value = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".into()))?;
        let field = |name: &'static str| -> Result<String, DatasetError> {
            match obj.get(name) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) if name == "id" => Ok(n.to_string()),
                Some(_) => Err(malformed(format!("field {name:?} must be a string"))),
                None => Err(DatasetError::MissingField {
                    path: path.to_string(),
                    line,
                    field: name,
                }),
            }
        };
        let id = field("id")?;
        let prompt = field("prompt")?;
        let domains = match obj.get("domains") {
            None | Some(Value::Null) => BTreeSet::new(),
            Some(Value::Array(items)) => {
                let names = items
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| malformed("domains must be strings".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                parse_domains(names, path, line)?
            }
            Some(_) => return Err(malformed("domains must be an array".into())),
        };
        rows.push(Row {
            line,
            id,
            prompt,
            domains,
        });
    }
    Ok(rows)
}

fn csv_rows(text: &str, path: &str) -> Result<Vec<Row>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(text.as_bytes());
    let malformed = |line: usize, reason: String| DatasetError::Malformed {
        path: path.to_string(),
        line,
        reason,
    };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let col = |name: &'static str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("id").ok_or(DatasetError::MissingField {
        path: path.to_string(),
        line: 1,
        field: "id",
    })?;
    let prompt_col = col("prompt").ok_or(DatasetError::MissingField {
        path: path.to_string(),
        line: 1,
        field: "prompt",
    })?;
    let domains_col = col("domains");
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let domains = match domains_col.and_then(|c| record.get(c)) {
            Some(cell) => parse_domains(cell.split(';').map(str::to_string), path, line)?,
            None => BTreeSet::new(),
        };
        rows.push(Row {
            line,
            id: record[id_col].to_string(),
            prompt: record[prompt_col].to_string(),
            domains,
        });
    }
    Ok(rows)
}

/// Reads the dataset described by `spec`, preserving file order.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Vec<TaskPrompt>, DatasetError> {
    let path = spec.path.display().to_string();
    let text = std::fs::read_to_string(&spec.path).map_err(|source| DatasetError::Io {
        path: path.clone(),
        source,
    })?;
    let rows = match spec.format() {
        DatasetFormat::JsonlPrompts => jsonl_rows(&text, &path)?,
        DatasetFormat::CsvPrompts => csv_rows(&text, &path)?,
    };
    if rows.is_empty() {
        log::warn!("dataset {path} contains no prompts");
    }
    let source_dataset = SourceDataset::from_name(&spec.name());
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut tasks = Vec::with_capacity(rows.len());
    for row in rows {
        if row.id.trim().is_empty() {
            return Err(DatasetError::MissingField {
                path,
                line: row.line,
                field: "id",
            });
        }
        if let Some(&first) = seen.get(&row.id) {
            return Err(DatasetError::DuplicateId {
                path,
                id: row.id,
                first,
                second: row.line,
            });
        }
        seen.insert(row.id.clone(), row.line);
        tasks.push(TaskPrompt {
            id: row.id,
            text: row.prompt,
            source_dataset,
            domains: row.domains,
        });
    }
    Ok(tasks)
}
