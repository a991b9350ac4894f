use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    CallContext, ChatError, ChatProvider, ChatProviderDescriptor, ChatRequest, ChatResponse,
    Stage, Usage,
};

/// One canned response. `round` and `attempt` left out match any value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<usize>,
    pub text: String,
    /// Reported usage; whitespace token counts when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatScript {
    pub responses: Vec<ScriptEntry>,
}

impl ChatScript {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::Error::json(format!("chat script {}", path.display()), e))
    }

    /// The most specific entry matching `ctx`; earlier entries win ties.
    fn lookup(&self, ctx: &CallContext) -> Option<&ScriptEntry> {
        self.responses
            .iter()
            .filter(|e| {
                e.stage == ctx.stage
                    && e.round.is_none_or(|r| r == ctx.round)
                    && e.attempt.is_none_or(|a| a == ctx.attempt)
            })
            .min_by_key(|e| 2 - e.round.is_some() as u8 - e.attempt.is_some() as u8)
    }
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Offline provider replaying responses keyed by (stage, round, attempt).
pub struct ScriptedChatProvider {
    script: ChatScript,
    descriptor: ChatProviderDescriptor,
    calls: Mutex<BTreeMap<Stage, usize>>,
}

impl ScriptedChatProvider {
    pub fn new(script: ChatScript, temperature: f64) -> Result<Self, ChatError> {
        if script.responses.is_empty() {
            return Err(ChatError::InvalidScript("no responses".into()));
        }
        let digest = Sha256::digest(
            serde_json::to_vec(&script).map_err(|e| ChatError::InvalidScript(e.to_string()))?,
        );
        let short: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
        let descriptor = ChatProviderDescriptor {
            provider_id: format!("scripted-{short}"),
            model_name: "scripted".into(),
            temperature,
            deterministic: true,
        };
        descriptor.validate()?;
        Ok(ScriptedChatProvider {
            script,
            descriptor,
            calls: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn from_file(path: &Path, temperature: f64) -> crate::Result<Self> {
        Ok(Self::new(ChatScript::load(path)?, temperature)?)
    }

    /// Completions served so far for `stage`.
    pub fn call_count(&self, stage: Stage) -> usize {
        let calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
        calls.get(&stage).copied().unwrap_or(0)
    }
}

impl ChatProvider for ScriptedChatProvider {
    fn descriptor(&self) -> &ChatProviderDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let entry = self
            .script
            .lookup(&request.context)
            .ok_or(ChatError::ScriptExhausted(request.context))?;
        *self
            .calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(request.context.stage)
            .or_default() += 1;
        let usage = entry.usage.unwrap_or_else(|| Usage {
            prompt_tokens: request.messages.iter().map(|m| word_count(&m.content)).sum(),
            completion_tokens: word_count(&entry.text),
        });
        Ok(ChatResponse {
            text: entry.text.clone(),
            usage,
        })
    }
}
