//! Chat-completion client speaking the OpenAI-style JSON wire protocol.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fanout::Semaphore;

/// Environment variable holding the bearer token for the LLM endpoint.
pub const LLM_KEY_ENV: &str = "FACTREASON_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub logprobs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_logprobs: Option<u8>,
}

impl ChatRequest {
    /// Content of the last user message, which is where every prompt in this
    /// crate goes.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
    #[serde(default)]
    pub top_logprobs: Vec<TopLogprob>,
}

/// The first choice of a completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<TokenLogprob>>,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            logprobs: None,
        }
    }

    /// Extracts the first choice from a raw wire response.
    pub fn from_wire(body: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            choices: Vec<Choice>,
        }
        #[derive(Deserialize)]
        struct Choice {
            message: Message,
            #[serde(default)]
            logprobs: Option<Logprobs>,
        }
        #[derive(Deserialize)]
        struct Message {
            #[serde(default)]
            content: Option<String>,
        }
        #[derive(Deserialize)]
        struct Logprobs {
            #[serde(default)]
            content: Option<Vec<TokenLogprob>>,
        }

        let wire: Wire =
            serde_json::from_str(body).map_err(|e| Error::Transport(format!("malformed completion response: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Transport("completion response has no choices".into()))?;
        Ok(Self {
            text: choice.message.content.unwrap_or_default(),
            logprobs: choice.logprobs.and_then(|l| l.content),
        })
    }
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        (**self).complete(request)
    }
}

/// Blocking HTTP transport with retries on connection failures, rate limits
/// and server errors.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

impl HttpTransport {
    /// `endpoint` is the full chat-completions URL. The API key, if any, is
    /// read from [`LLM_KEY_ENV`].
    pub fn new(endpoint: impl Into<String>, max_retries: u32) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            api_key: std::env::var(LLM_KEY_ENV).ok().filter(|k| !k.is_empty()),
            max_retries,
            backoff: Duration::from_millis(500),
        })
    }

    fn attempt(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, Attempt> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder
            .send()
            .map_err(|e| Attempt::Retry(Error::Transport(e.to_string())))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| Attempt::Retry(Error::Transport(e.to_string())))?;
        if status.is_success() {
            return ChatResponse::from_wire(&body).map_err(Attempt::Fail);
        }
        let msg = format!("HTTP {status}: {}", body.chars().take(300).collect::<String>());
        if status.as_u16() == 402 || (status.as_u16() == 429 && body.contains("quota")) {
            Err(Attempt::Fail(Error::Quota(msg)))
        } else if status.as_u16() == 429 || status.is_server_error() {
            Err(Attempt::Retry(Error::Transport(msg)))
        } else {
            Err(Attempt::Fail(Error::Transport(msg)))
        }
    }
}

enum Attempt {
    Retry(Error),
    Fail(Error),
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let mut tries = 0;
        loop {
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) if tries >= self.max_retries => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("chat request failed (attempt {}): {e}", tries + 1);
                    std::thread::sleep(self.backoff * 2u32.pow(tries.min(6)));
                    tries += 1;
                }
            }
        }
    }
}

/// Caps the number of requests in flight through the wrapped transport.
pub struct LimitedTransport<T> {
    inner: T,
    permits: Semaphore,
}

impl<T> LimitedTransport<T> {
    pub fn new(inner: T, limit: usize) -> Self {
        Self {
            inner,
            permits: Semaphore::new(limit.max(1)),
        }
    }
}

impl<T: ChatTransport> ChatTransport for LimitedTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let _permit = self.permits.acquire();
        self.inner.complete(request)
    }
}

/// Decoding settings shared by every request a stage sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl LlmConfig {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

/// A transport paired with the decoding settings of one pipeline stage.
#[derive(Clone)]
pub struct LlmClient {
    pub transport: Arc<dyn ChatTransport>,
    pub config: LlmConfig,
}

impl LlmClient {
    pub fn new(transport: Arc<dyn ChatTransport>, config: LlmConfig) -> Self {
        Self { transport, config }
    }

    pub fn request(&self, prompt: &str, top_logprobs: Option<u8>) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            logprobs: top_logprobs.is_some(),
            top_logprobs,
        }
    }

    pub fn chat(&self, prompt: &str) -> Result<ChatResponse> {
        self.transport.complete(&self.request(prompt, None))
    }

    pub fn chat_with_logprobs(&self, prompt: &str, top: u8) -> Result<ChatResponse> {
        self.transport.complete(&self.request(prompt, Some(top)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::*;

    #[test]
    fn request_wire_format() {
        let client = LlmClient::new(
            Arc::new(FnTransport(|_: &ChatRequest| Ok(ChatResponse::text("")))),
            LlmConfig::new("m"),
        );
        let plain = serde_json::to_value(client.request("hi", None)).unwrap();
        assert_eq!(
            plain,
            serde_json::json!({
                "model": "m",
                "messages": [{"role": "user", "content": "hi"}],
                "temperature": 0.0
            })
        );
        let lp = serde_json::to_value(client.request("hi", Some(5))).unwrap();
        assert_eq!(lp["logprobs"], true);
        assert_eq!(lp["top_logprobs"], 5);
    }

    #[test]
    fn parses_first_choice_with_logprobs() {
        let body = r#"{
            "id": "x",
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": "entailment"},
                "logprobs": {"content": [{
                    "token": "ent", "logprob": -0.1, "bytes": [101],
                    "top_logprobs": [{"token": "ent", "logprob": -0.1}, {"token": "neutral", "logprob": -2.5}]
                }]}
            }]
        }"#;
        let r = ChatResponse::from_wire(body).unwrap();
        assert_eq!(r.text, "entailment");
        let lp = r.logprobs.unwrap();
        assert_eq!(lp[0].token, "ent");
        assert_eq!(lp[0].top_logprobs.len(), 2);
    }

    #[test]
    fn missing_logprobs_and_bad_bodies() {
        let r = ChatResponse::from_wire(r#"{"choices":[{"message":{"content":"ok"}}]}"#).unwrap();
        assert_eq!(r, ChatResponse::text("ok"));
        assert!(ChatResponse::from_wire(r#"{"choices":[]}"#).is_err());
        assert!(ChatResponse::from_wire("not json").is_err());
    }

    #[test]
    fn counting_transport_counts() {
        let t = CountingTransport::new(FnTransport(|r: &ChatRequest| {
            Ok(ChatResponse::text(r.prompt().to_uppercase()))
        }));
        let req = LlmClient::new(
            Arc::new(FnTransport(|_: &ChatRequest| Ok(ChatResponse::text("")))),
            LlmConfig::new("m"),
        )
        .request("abc", None);
        assert_eq!(t.complete(&req).unwrap().text, "ABC");
        assert_eq!(t.complete(&req).unwrap().text, "ABC");
        assert_eq!(t.calls(), 2);
    }
}
