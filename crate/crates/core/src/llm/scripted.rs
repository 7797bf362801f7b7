//! Scripted backend: canned answers, consumed in order.
//!
//! Script files are JSON, either a bare array (one shared queue) or
//! `{"default": [...], "tasks": {"<task id>": [...]}}`. Each entry is a
//! string (the answer) or `{"error": "..."}` (the call fails). A task's own
//! queue is used first, then the shared one.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{non_empty, ChatRequest, ChatResponse, LlmClient, LlmError};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Text(String),
    Error { error: String },
}

impl From<&str> for ScriptEntry {
    fn from(s: &str) -> Self {
        ScriptEntry::Text(s.to_string())
    }
}

impl From<String> for ScriptEntry {
    fn from(s: String) -> Self {
        ScriptEntry::Text(s)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Queue(Vec<ScriptEntry>),
    Keyed {
        #[serde(default)]
        default: Vec<ScriptEntry>,
        #[serde(default)]
        tasks: HashMap<String, Vec<ScriptEntry>>,
    },
}

#[derive(Default)]
struct Queues {
    shared: VecDeque<ScriptEntry>,
    per_task: HashMap<String, VecDeque<ScriptEntry>>,
    log: Vec<(String, ChatRequest)>,
}

#[derive(Default)]
pub struct ScriptedClient {
    queues: Mutex<Queues>,
}

impl ScriptedClient {
    pub fn from_queue<I, E>(entries: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<ScriptEntry>,
    {
        let client = Self::default();
        client.queues.lock().unwrap().shared = entries.into_iter().map(Into::into).collect();
        client
    }

    /// Adds a queue dedicated to `task_id`.
    pub fn with_task<I, E>(self, task_id: &str, entries: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<ScriptEntry>,
    {
        self.queues.lock().unwrap().per_task.insert(
            task_id.to_string(),
            entries.into_iter().map(Into::into).collect(),
        );
        self
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let parsed: ScriptFile =
            serde_json::from_str(text).map_err(|e| LlmError::Config(format!("bad script: {e}")))?;
        let queues = match parsed {
            ScriptFile::Queue(q) => Queues {
                shared: q.into(),
                ..Queues::default()
            },
            ScriptFile::Keyed { default, tasks } => Queues {
                shared: default.into(),
                per_task: tasks.into_iter().map(|(k, v)| (k, v.into())).collect(),
                log: Vec::new(),
            },
        };
        Ok(Self {
            queues: Mutex::new(queues),
        })
    }

    /// Every request seen so far, with its task id.
    pub fn requests(&self) -> Vec<(String, ChatRequest)> {
        self.queues.lock().unwrap().log.clone()
    }

    /// Entries not yet consumed, across all queues.
    pub fn remaining(&self) -> usize {
        let q = self.queues.lock().unwrap();
        q.shared.len() + q.per_task.values().map(VecDeque::len).sum::<usize>()
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut q = self.queues.lock().unwrap();
        q.log.push((task_id.to_string(), req.clone()));
        let next = q
            .per_task
            .get_mut(task_id)
            .and_then(VecDeque::pop_front)
            .or_else(|| q.shared.pop_front());
        match next {
            Some(ScriptEntry::Text(t)) => non_empty(ChatResponse::text(t)),
            Some(ScriptEntry::Error { error }) => Err(LlmError::Scripted(error)),
            None => Err(LlmError::ScriptExhausted {
                task: task_id.to_string(),
            }),
        }
    }
}
