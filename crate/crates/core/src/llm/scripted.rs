use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, CompletionRequest, CompletionResponse, LlmError, Tier};

/// One scripted answer. Matches a request by tier and a substring of the
/// system prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tier: Tier,
    #[serde(default)]
    pub system_contains: String,
    pub response_text: String,
}

impl ScriptEntry {
    pub fn new(tier: Tier, system_contains: &str, response_text: &str) -> Self {
        ScriptEntry {
            tier,
            system_contains: system_contains.into(),
            response_text: response_text.into(),
        }
    }

    fn matches(&self, request: &CompletionRequest) -> bool {
        self.tier == request.tier && request.system_prompt.contains(&self.system_contains)
    }
}

/// Deterministic test double: each request consumes the first unconsumed
/// entry that matches it.
#[derive(Debug)]
pub struct ScriptedProvider {
    entries: Vec<ScriptEntry>,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let consumed = Mutex::new(vec![false; entries.len()]);
        ScriptedProvider { entries, consumed }
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(json)?))
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn remaining(&self) -> usize {
        self.consumed
            .lock()
            .expect("script lock")
            .iter()
            .filter(|c| !**c)
            .count()
    }

    pub fn next_scripted(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let mut consumed = self.consumed.lock().expect("script lock");
        if consumed.iter().all(|c| *c) {
            return Err(LlmError::FixtureExhausted);
        }
        let hit = self
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| !consumed[*i] && e.matches(request));
        match hit {
            Some((i, e)) => {
                consumed[i] = true;
                Ok(CompletionResponse {
                    raw_text: e.response_text.clone(),
                    parsed_json: None,
                })
            }
            None => Err(LlmError::MatcherMiss {
                tier: request.tier,
                system_head: request.system_prompt.chars().take(60).collect(),
            }),
        }
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        self.next_scripted(request).map(|r| r.raw_text)
    }
}
