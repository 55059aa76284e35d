use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{ChatProvider, CompletionRequest, ExpectedShape, LlmError, Tier, UserPart};

/// OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub strong_model: String,
    pub cheap_model: String,
    pub timeout: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key: None,
            strong_model: "gpt-4o".into(),
            cheap_model: "gpt-4o-mini".into(),
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .expect("http client");
        RemoteProvider { config, client }
    }

    pub fn model_for(&self, tier: Tier) -> &str {
        match tier {
            Tier::Strong => &self.config.strong_model,
            Tier::Cheap => &self.config.cheap_model,
        }
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let content: Vec<Value> = request
            .user_parts
            .iter()
            .map(|p| match p {
                UserPart::Text(t) => json!({"type": "text", "text": t}),
                UserPart::Image { bytes, media_type } => {
                    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
                    json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:{media_type};base64,{b64}")}
                    })
                }
            })
            .collect();
        let mut body = json!({
            "model": self.model_for(request.tier),
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": content},
            ],
        });
        if request.expected_shape == ExpectedShape::JsonObject {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }
}

impl ChatProvider for RemoteProvider {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let mut http = self.client.post(&self.config.endpoint).json(&self.request_body(request));
        if let Some(key) = &self.config.api_key {
            http = http.bearer_auth(key);
        }
        let resp = http
            .send()
            .map_err(|e| LlmError::ProviderUnreachable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(LlmError::ProviderUnreachable(format!(
                "status {status}: {}",
                text.chars().take(300).collect::<String>()
            )));
        }
        let v: Value = resp
            .json()
            .map_err(|e| LlmError::MalformedOutput(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| LlmError::MalformedOutput("response without message content".into()))
    }
}
