//! Provider transports. The gateway only needs "prompt in, text out"; the
//! HTTP adapter speaks the common chat-completions JSON contract.

use std::time::Duration;

use serde_json::{json, Value};

use super::ModelRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Worth retrying: timeouts, 429, 5xx, connection resets.
    Transient,
    /// Retrying will not help: auth failures, 4xx.
    Fatal,
    /// The provider answered but the payload had no completion text.
    Malformed,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub kind: FailureKind,
    pub message: String,
}

impl TransportError {
    pub fn transient(message: impl Into<String>) -> Self {
        TransportError { kind: FailureKind::Transient, message: message.into() }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError { kind: FailureKind::Fatal, message: message.into() }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        TransportError { kind: FailureKind::Malformed, message: message.into() }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ModelRequest) -> Result<String, TransportError>;
}

/// OpenAI-style `POST /chat/completions` client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::fatal(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpTransport { client, endpoint: endpoint.into(), api_key })
    }
}

pub fn chat_payload(request: &ModelRequest) -> Value {
    json!({
        "model": request.model_name,
        "messages": [{"role": "user", "content": request.prompt}],
        "max_tokens": request.max_output_tokens,
        "temperature": request.temperature,
        "top_p": request.top_p,
        "top_k": request.top_k,
    })
}

/// Pull `choices[0].message.content` out of a chat-completions response.
pub fn completion_text(payload: &Value) -> Result<String, TransportError> {
    payload
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| TransportError::malformed("response has no choices[0].message.content string"))
}

impl Transport for HttpTransport {
    fn send(&self, request: &ModelRequest) -> Result<String, TransportError> {
        let mut builder = self.client.post(&self.endpoint).json(&chat_payload(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| TransportError::transient(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::transient(format!("provider returned {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::fatal(format!("provider returned {status}")));
        }
        let payload: Value = response.json().map_err(|e| TransportError::malformed(e.to_string()))?;
        completion_text(&payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_completion_text() {
        let payload = json!({"choices": [{"message": {"role": "assistant", "content": "Hi"}}]});
        assert_eq!(completion_text(&payload).unwrap(), "Hi");
        let err = completion_text(&json!({"choices": []})).unwrap_err();
        assert_eq!(err.kind, FailureKind::Malformed);
    }

    #[test]
    fn payload_carries_decoding_params() {
        let req = ModelRequest::new("p", "m");
        let p = chat_payload(&req);
        assert_eq!(p["max_tokens"], 8192);
        assert_eq!(p["top_k"], 50);
        assert_eq!(p["messages"][0]["content"], "p");
    }
}
