//! Chat-completion access with two model tiers.
//!
//! The [`Gateway`] wraps a [`ChatProvider`], extracts JSON payloads from raw
//! model text, retries malformed output and keeps a transcript of every
//! request/response pair.

pub mod prompts;
mod remote;
mod scripted;

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use remote::{RemoteConfig, RemoteProvider};
pub use scripted::{ScriptEntry, ScriptedProvider};

/// Retries after the first malformed answer.
pub const MALFORMED_RETRIES: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("malformed model output: {0}")]
    MalformedOutput(String),
    #[error("scripted fixture exhausted")]
    FixtureExhausted,
    #[error("no scripted entry matches {tier} request starting {system_head:?}")]
    MatcherMiss { tier: Tier, system_head: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Planning and decision making.
    Strong,
    /// Element descriptions.
    Cheap,
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tier::Strong => "strong",
            Tier::Cheap => "cheap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedShape {
    FreeText,
    JsonObject,
}

#[derive(Clone, PartialEq, Eq)]
pub enum UserPart {
    Text(String),
    Image { bytes: Vec<u8>, media_type: String },
}

impl std::fmt::Debug for UserPart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UserPart::Text(t) => f.debug_tuple("Text").field(t).finish(),
            UserPart::Image { bytes, media_type } => f
                .debug_struct("Image")
                .field("bytes", &bytes.len())
                .field("media_type", media_type)
                .finish(),
        }
    }
}

impl UserPart {
    pub fn png(bytes: Vec<u8>) -> Self {
        UserPart::Image {
            bytes,
            media_type: "image/png".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub tier: Tier,
    pub system_prompt: String,
    pub user_parts: Vec<UserPart>,
    pub temperature: f64,
    pub expected_shape: ExpectedShape,
}

impl CompletionRequest {
    pub fn new(tier: Tier, system_prompt: impl Into<String>, expected_shape: ExpectedShape) -> Self {
        CompletionRequest {
            tier,
            system_prompt: system_prompt.into(),
            user_parts: Vec::new(),
            temperature: 0.0,
            expected_shape,
        }
    }

    pub fn text(mut self, t: impl Into<String>) -> Self {
        self.user_parts.push(UserPart::Text(t.into()));
        self
    }

    pub fn image_png(mut self, bytes: Vec<u8>) -> Self {
        self.user_parts.push(UserPart::png(bytes));
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn user_text(&self) -> String {
        self.user_parts
            .iter()
            .filter_map(|p| match p {
                UserPart::Text(t) => Some(t.as_str()),
                UserPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.user_parts
            .iter()
            .filter(|p| matches!(p, UserPart::Image { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub raw_text: String,
    pub parsed_json: Option<Value>,
}

pub trait ChatProvider: Send + Sync {
    /// Returns the model's raw text for one request.
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

/// Finds the first well-formed JSON object embedded in `text`, including one
/// wrapped in a code fence.
pub fn extract_json_object(text: &str) -> Option<Value> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(v @ Value::Object(_))) = stream.next() {
            return Some(v);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub tier: Tier,
    pub system_prompt: String,
    pub user_text: String,
    pub image_bytes: Vec<usize>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Shared front door for all model calls.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    transcript: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Gateway {
            provider,
            transcript: Arc::new(Mutex::new(Vec::new())),
        }
    }

    /// Same provider, empty transcript. Used to give each run its own log.
    pub fn with_fresh_transcript(&self) -> Self {
        Gateway {
            provider: Arc::clone(&self.provider),
            transcript: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    pub fn transcript_jsonl(&self) -> String {
        self.transcript()
            .iter()
            .map(|e| serde_json::to_string(e).expect("transcript entry serializes") + "\n")
            .collect()
    }

    fn call(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        if request.user_parts.is_empty() {
            return Err(LlmError::InvalidRequest("no user parts".into()));
        }
        let result = self.provider.complete_raw(request).map_err(|e| match e {
            LlmError::FixtureExhausted | LlmError::MatcherMiss { .. } => {
                LlmError::ProviderUnreachable(e.to_string())
            }
            other => other,
        });
        let entry = TranscriptEntry {
            tier: request.tier,
            system_prompt: request.system_prompt.clone(),
            user_text: request.user_text(),
            image_bytes: request
                .user_parts
                .iter()
                .filter_map(|p| match p {
                    UserPart::Image { bytes, .. } => Some(bytes.len()),
                    UserPart::Text(_) => None,
                })
                .collect(),
            temperature: request.temperature,
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
        };
        self.transcript.lock().expect("transcript lock").push(entry);
        result
    }

    /// One logical completion. For `JsonObject` requests the embedded object
    /// is extracted, retrying up to [`MALFORMED_RETRIES`] times.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        match request.expected_shape {
            ExpectedShape::FreeText => Ok(CompletionResponse {
                raw_text: self.call(request)?,
                parsed_json: None,
            }),
            ExpectedShape::JsonObject => self.complete_json_with(request, |v| Ok(v.clone())).map(
                |(raw_text, v)| CompletionResponse {
                    raw_text,
                    parsed_json: Some(v),
                },
            ),
        }
    }

    /// Like [`Gateway::complete`] but also retries when `validate` rejects the
    /// parsed object.
    pub fn complete_json_with<T>(
        &self,
        request: &CompletionRequest,
        validate: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<(String, T), LlmError> {
        let mut last = String::new();
        for _ in 0..=MALFORMED_RETRIES {
            let raw = self.call(request)?;
            match extract_json_object(&raw) {
                None => last = format!("no JSON object in {raw:?}"),
                Some(v) => match validate(&v) {
                    Ok(t) => return Ok((raw, t)),
                    Err(e) => last = e,
                },
            }
            log::warn!("malformed model output: {last}");
        }
        Err(LlmError::MalformedOutput(last))
    }

    /// Free-text completion that retries while `validate` rejects the text.
    pub fn complete_text_with<T>(
        &self,
        request: &CompletionRequest,
        validate: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, LlmError> {
        let mut last = String::new();
        for _ in 0..=MALFORMED_RETRIES {
            let raw = self.call(request)?;
            match validate(&raw) {
                Ok(t) => return Ok(t),
                Err(e) => last = e,
            }
            log::warn!("malformed model output: {last}");
        }
        Err(LlmError::MalformedOutput(last))
    }
}
