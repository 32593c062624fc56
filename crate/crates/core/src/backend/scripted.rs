//! Deterministic scripted backend: replays fixture responses in order,
//! optionally asserting that each incoming prompt contains an expected
//! substring.

use super::{approx_tokens, Backend, BackendError, CompletionRequest, CompletionResponse};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_substring: Option<String>,
    pub response: String,
}

impl FixtureEntry {
    pub fn response(text: impl Into<String>) -> Self {
        FixtureEntry {
            expect_substring: None,
            response: text.into(),
        }
    }

    pub fn expecting(expect: impl Into<String>, text: impl Into<String>) -> Self {
        FixtureEntry {
            expect_substring: Some(expect.into()),
            response: text.into(),
        }
    }
}

#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<FixtureEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        ScriptedBackend {
            entries: entries.into_iter().collect(),
            cursor: Mutex::new(0),
        }
    }

    /// Number of fixture entries consumed so far.
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.consumed()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let mut cursor = self.cursor.lock().unwrap();
        let entry = self.entries.get(*cursor).ok_or_else(|| {
            BackendError::exhausted(format!(
                "scripted backend exhausted after {} responses",
                self.entries.len()
            ))
        })?;
        if let Some(expected) = &entry.expect_substring {
            if !request.prompt.contains(expected.as_str()) {
                return Err(BackendError::protocol(format!(
                    "fixture entry {} expected prompt to contain {expected:?}",
                    *cursor + 1
                )));
            }
        }
        *cursor += 1;
        Ok(CompletionResponse {
            text: entry.response.clone(),
            prompt_tokens: approx_tokens(&request.prompt),
            completion_tokens: approx_tokens(&entry.response),
        })
    }
}

/// Loads a scripted backend from a JSON Lines fixture file of
/// `{expect_substring?, response}` entries.
pub fn load_scripted(path: impl AsRef<Path>) -> Result<ScriptedBackend, BackendError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| BackendError::protocol(format!("unreadable fixture file: {e}")))?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureEntry = serde_json::from_str(line).map_err(|e| {
            BackendError::protocol(format!("fixture line {}: {e}", idx + 1))
        })?;
        entries.push(entry);
    }
    Ok(ScriptedBackend::from_entries(entries))
}
