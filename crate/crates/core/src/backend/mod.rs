//! Pluggable text-completion boundary with budget accounting: a trait, a
//! deterministic scripted backend for tests, a chat-completions HTTP
//! backend, and an atomically updated query/token ledger.

mod http;
mod scripted;

pub use http::HttpBackend;
pub use scripted::{load_scripted, FixtureEntry, ScriptedBackend};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Transport,
    Exhausted,
    Protocol,
}

#[derive(Debug, Clone, Error)]
#[error("backend error ({kind:?}): {message}")]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub message: String,
}

impl BackendError {
    pub fn transport(message: impl Into<String>) -> Self {
        BackendError {
            kind: BackendErrorKind::Transport,
            message: message.into(),
        }
    }

    pub fn exhausted(message: impl Into<String>) -> Self {
        BackendError {
            kind: BackendErrorKind::Exhausted,
            message: message.into(),
        }
    }

    pub fn protocol(message: impl Into<String>) -> Self {
        BackendError {
            kind: BackendErrorKind::Protocol,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    /// Defaults: temperature 0, completion budget 2500 tokens.
    pub fn new(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 2500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Behavioral contract for completion providers. Implementations must be
/// shareable across workers.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

/// Which pipeline phase issued a query; drives the per-phase ledger split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Description,
    Solution,
}

impl Phase {
    const ALL: [Phase; 2] = [Phase::Description, Phase::Solution];

    fn index(self) -> usize {
        match self {
            Phase::Description => 0,
            Phase::Solution => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Description => "description",
            Phase::Solution => "solution",
        }
    }
}

#[derive(Debug, Default)]
struct PhaseCounters {
    queries: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

/// Monotone query/token accounting, split by phase. Counters update
/// atomically so the ledger can be shared across campaign workers.
#[derive(Debug, Default)]
pub struct BudgetLedger {
    phases: [PhaseCounters; 2],
}

/// Plain-data view of a ledger, suitable for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub queries: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub per_phase: BTreeMap<String, PhaseSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSnapshot {
    pub queries: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, phase: Phase, prompt_tokens: u64, completion_tokens: u64) {
        let c = &self.phases[phase.index()];
        c.queries.fetch_add(1, Ordering::Relaxed);
        c.prompt_tokens.fetch_add(prompt_tokens, Ordering::Relaxed);
        c.completion_tokens
            .fetch_add(completion_tokens, Ordering::Relaxed);
    }

    pub fn queries(&self) -> u64 {
        Phase::ALL.iter().map(|p| self.phase_queries(*p)).sum()
    }

    pub fn phase_queries(&self, phase: Phase) -> u64 {
        self.phases[phase.index()].queries.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let mut per_phase = BTreeMap::new();
        let mut totals = PhaseSnapshot {
            queries: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
        };
        for phase in Phase::ALL {
            let c = &self.phases[phase.index()];
            let snap = PhaseSnapshot {
                queries: c.queries.load(Ordering::Relaxed),
                prompt_tokens: c.prompt_tokens.load(Ordering::Relaxed),
                completion_tokens: c.completion_tokens.load(Ordering::Relaxed),
            };
            totals.queries += snap.queries;
            totals.prompt_tokens += snap.prompt_tokens;
            totals.completion_tokens += snap.completion_tokens;
            per_phase.insert(phase.name().to_string(), snap);
        }
        LedgerSnapshot {
            queries: totals.queries,
            prompt_tokens: totals.prompt_tokens,
            completion_tokens: totals.completion_tokens,
            per_phase,
        }
    }
}

/// Documented approximation used when a backend reports no token counts:
/// whitespace-delimited word count.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Issues one completion, recording it on the ledger under the caller's
/// phase, and returns the response text verbatim.
pub fn complete(
    backend: &dyn Backend,
    request: &CompletionRequest,
    ledger: &BudgetLedger,
    phase: Phase,
) -> Result<String, BackendError> {
    if request.prompt.is_empty() {
        return Err(BackendError::protocol("completion prompt is empty"));
    }
    if !(0.0..=1.0).contains(&request.temperature) {
        return Err(BackendError::protocol(format!(
            "temperature {} outside [0, 1]",
            request.temperature
        )));
    }
    let response = backend.complete(request)?;
    ledger.record(phase, response.prompt_tokens, response.completion_tokens);
    Ok(response.text)
}

/// Backend construction settings, loadable from a `key = value` file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackendConfig {
    /// "scripted" or "http".
    pub kind: String,
    /// Fixture path (scripted).
    pub fixtures: Option<String>,
    /// Endpoint URL (http).
    pub endpoint: Option<String>,
    /// Model name sent on each request (http).
    pub model: Option<String>,
    /// Name of the environment variable holding the credential (http).
    pub credential_env: Option<String>,
    /// Transport retry count (http), default 2.
    pub retries: u32,
}

impl BackendConfig {
    /// Parses a config file of `key = value` lines (`#` comments allowed).
    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| BackendError::protocol(format!("unreadable backend config: {e}")))?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self, BackendError> {
        let mut cfg = BackendConfig {
            retries: 2,
            ..BackendConfig::default()
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BackendError::protocol(format!("config line {}: expected key = value", idx + 1))
            })?;
            let value = value.trim().to_string();
            match key.trim() {
                "kind" => cfg.kind = value,
                "fixtures" => cfg.fixtures = Some(value),
                "endpoint" => cfg.endpoint = Some(value),
                "model" => cfg.model = Some(value),
                "credential_env" => cfg.credential_env = Some(value),
                "retries" => {
                    cfg.retries = value.parse().map_err(|_| {
                        BackendError::protocol(format!("config line {}: bad retry count", idx + 1))
                    })?
                }
                other => {
                    return Err(BackendError::protocol(format!(
                        "config line {}: unknown key `{other}`",
                        idx + 1
                    )))
                }
            }
        }
        if cfg.kind.is_empty() {
            return Err(BackendError::protocol("config missing `kind`"));
        }
        Ok(cfg)
    }

    /// Builds the configured backend.
    pub fn build(&self) -> Result<Box<dyn Backend>, BackendError> {
        match self.kind.as_str() {
            "scripted" => {
                let path = self.fixtures.as_ref().ok_or_else(|| {
                    BackendError::protocol("scripted backend requires `fixtures`")
                })?;
                Ok(Box::new(load_scripted(path)?))
            }
            "http" => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| BackendError::protocol("http backend requires `endpoint`"))?;
                let model = self
                    .model
                    .clone()
                    .ok_or_else(|| BackendError::protocol("http backend requires `model`"))?;
                Ok(Box::new(HttpBackend::new(
                    endpoint,
                    model,
                    self.credential_env.clone(),
                    self.retries,
                )))
            }
            other => Err(BackendError::protocol(format!(
                "unknown backend kind `{other}`"
            ))),
        }
    }
}
