//! Chat-completions-style HTTP backend. Speaks the de-facto wire shape
//! (`{model, messages, temperature, max_tokens}` in, `choices[0].message.
//! content` out) without binding to any vendor SDK. Transient transport
//! failures are retried up to a configured count.

use super::{approx_tokens, Backend, BackendError, CompletionRequest, CompletionResponse};
use serde::Deserialize;
use std::time::Duration;

pub struct HttpBackend {
    endpoint: String,
    model: String,
    credential_env: Option<String>,
    retries: u32,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

impl HttpBackend {
    pub fn new(
        endpoint: String,
        model: String,
        credential_env: Option<String>,
        retries: u32,
    ) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("default TLS client");
        HttpBackend {
            endpoint,
            model,
            credential_env,
            retries,
            client,
        }
    }

    fn credential(&self) -> Result<Option<String>, BackendError> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(value) => Ok(Some(value)),
                Err(_) => Err(BackendError::protocol(format!(
                    "credential environment variable {var} is not set"
                ))),
            },
        }
    }

    fn attempt(
        &self,
        request: &CompletionRequest,
        credential: Option<&str>,
    ) -> Result<CompletionResponse, BackendError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = credential {
            req = req.bearer_auth(token);
        }
        let response = req
            .send()
            .map_err(|e| BackendError::transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::transport(format!(
                "http status {status}: {text}"
            )));
        }
        let wire: WireResponse = serde_json::from_str(&text)
            .map_err(|e| BackendError::protocol(format!("malformed response body: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::protocol("response carries no choices"))?;
        let usage = wire.usage.unwrap_or_default();
        Ok(CompletionResponse {
            prompt_tokens: usage
                .prompt_tokens
                .unwrap_or_else(|| approx_tokens(&request.prompt)),
            completion_tokens: usage
                .completion_tokens
                .unwrap_or_else(|| approx_tokens(&choice.message.content)),
            text: choice.message.content,
        })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let credential = self.credential()?;
        let mut last_err = None;
        for _ in 0..=self.retries {
            match self.attempt(request, credential.as_deref()) {
                Ok(response) => return Ok(response),
                Err(e) if e.kind == super::BackendErrorKind::Transport => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt ran"))
    }
}
