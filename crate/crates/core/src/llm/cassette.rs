//! JSONL cassettes: one `{hash, request, response}` object per line.
//!
//! Recording appends under an exclusive file lock. On load, a later line for
//! the same hash replaces an earlier one.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{canonical_request_hash, non_empty, ChatRequest, ChatResponse, LlmClient, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub hash: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

/// Reads a cassette into a hash → response map.
pub fn load_cassette(path: &Path) -> Result<HashMap<String, ChatResponse>, LlmError> {
    let file = File::open(path)?;
    let mut map = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CassetteEntry =
            serde_json::from_str(&line).map_err(|e| LlmError::CorruptCassette {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        map.insert(entry.hash, entry.response);
    }
    Ok(map)
}

/// Appends one exchange to the cassette.
pub fn record(
    req: &ChatRequest,
    resp: &ChatResponse,
    cassette_path: &Path,
) -> Result<(), LlmError> {
    let entry = CassetteEntry {
        hash: canonical_request_hash(req),
        request: req.clone(),
        response: resp.clone(),
    };
    let mut line = serde_json::to_string(&entry).expect("cassette entries serialize");
    line.push('\n');
    if let Some(parent) = cassette_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(cassette_path)?;
    file.lock()?;
    let written = file.write_all(line.as_bytes()).and_then(|_| file.flush());
    file.unlock()?;
    written?;
    Ok(())
}

/// Looks up the recorded response for `req`.
pub fn replay(req: &ChatRequest, cassette_path: &Path) -> Result<ChatResponse, LlmError> {
    let digest = canonical_request_hash(req);
    load_cassette(cassette_path)?
        .remove(&digest)
        .ok_or(LlmError::CassetteMiss { digest })
}

/// Replay backend. The cassette is read once, at construction.
#[derive(Debug)]
pub struct ReplayClient {
    entries: HashMap<String, ChatResponse>,
}

impl ReplayClient {
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        Ok(Self {
            entries: load_cassette(path)?,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, _task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let digest = canonical_request_hash(req);
        let resp = self
            .entries
            .get(&digest)
            .cloned()
            .ok_or(LlmError::CassetteMiss { digest })?;
        non_empty(resp)
    }
}

/// Forwards to an inner client and appends every successful exchange.
pub struct RecordingClient<C> {
    inner: C,
    path: PathBuf,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(inner: C, path: PathBuf) -> Self {
        Self { inner, path }
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let resp = self.inner.complete(task_id, req)?;
        record(req, &resp, &self.path)?;
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedClient;

    fn req(user: &str) -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            system: "sys".into(),
            user: user.into(),
            temperature: 0.0,
            max_tokens: 64,
        }
    }

    #[test]
    fn record_then_replay_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let resp = ChatResponse {
            text: "```python\nx = 1\n```".into(),
            prompt_tokens: 3,
            completion_tokens: 5,
        };
        record(&req("a"), &resp, &path).unwrap();
        assert_eq!(replay(&req("a"), &path).unwrap(), resp);
    }

    #[test]
    fn unknown_request_misses_with_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        record(&req("a"), &ChatResponse::text("A"), &path).unwrap();
        match replay(&req("b"), &path) {
            Err(LlmError::CassetteMiss { digest }) => {
                assert_eq!(digest, canonical_request_hash(&req("b")))
            }
            other => panic!("expected miss, got {other:?}"),
        }
    }

    #[test]
    fn later_duplicate_entry_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let hash = canonical_request_hash(&req("a"));
        let line = |text: &str| {
            format!(
                "{{\"hash\":\"{hash}\",\"request\":{{\"model_id\":\"m\",\"system\":\"sys\",\"user\":\"a\",\
                 \"temperature\":0.0,\"max_tokens\":64}},\"response\":{{\"text\":\"{text}\"}}}}\n"
            )
        };
        std::fs::write(&path, format!("{}{}", line("first"), line("second"))).unwrap();
        assert_eq!(replay(&req("a"), &path).unwrap().text, "second");
    }

    #[test]
    fn corrupt_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        record(&req("a"), &ChatResponse::text("A"), &path).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "{{not json").unwrap();
        match load_cassette(&path) {
            Err(LlmError::CorruptCassette { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corrupt cassette, got {other:?}"),
        }
    }

    #[test]
    fn recording_client_persists_each_exchange() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let rec = RecordingClient::new(ScriptedClient::from_queue(["A", "B"]), path.clone());
        rec.complete("t", &req("one")).unwrap();
        rec.complete("t", &req("two")).unwrap();
        let replayer = ReplayClient::open(&path).unwrap();
        assert_eq!(replayer.len(), 2);
        assert_eq!(replayer.complete("x", &req("two")).unwrap().text, "B");
        assert_eq!(replayer.complete("y", &req("one")).unwrap().text, "A");
    }
}
