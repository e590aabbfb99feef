use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

use super::{Backend, BackendError, ChatRequest, Completion, Job};

/// Chat-completions endpoint over blocking HTTPS with bearer auth.
pub struct HttpBackend {
    endpoint: String,
    token: Option<String>,
    agent: Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            endpoint: endpoint.into(),
            token,
            agent,
        }
    }
}

fn retryable_status(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

/// Pulls `choices[0].message.content` out of a chat-completions response.
pub fn parse_completion(body: &Value) -> Option<String> {
    body.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

impl Backend for HttpBackend {
    fn name(&self) -> String {
        format!("http/{}", self.endpoint)
    }

    fn uses_network(&self) -> bool {
        true
    }

    fn complete(&self, _job: &Job, request: &ChatRequest) -> Result<Completion, BackendError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call.send_json(request).map_err(|e| BackendError {
            message: e.to_string(),
            status: None,
            retryable: true,
        })?;
        let status = response.status().as_u16();
        let body: Value = response.body_mut().read_json().map_err(|e| BackendError {
            message: format!("unreadable body: {e}"),
            status: Some(status),
            retryable: retryable_status(status),
        })?;
        if !(200..300).contains(&status) {
            return Err(BackendError {
                message: body.to_string(),
                status: Some(status),
                retryable: retryable_status(status),
            });
        }
        let text = parse_completion(&body).ok_or_else(|| BackendError {
            message: "response has no choices[0].message.content".into(),
            status: Some(status),
            retryable: false,
        })?;
        Ok(Completion { text, latency_ms: None })
    }
}
