use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatError, ChatProvider, ChatProviderDescriptor, ChatRequest, ChatResponse, Usage};

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct HttpChatProvider {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
    descriptor: ChatProviderDescriptor,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpChatProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        token: Option<String>,
    ) -> Result<Self, ChatError> {
        let endpoint = endpoint.into();
        let model = model.into();
        let descriptor = ChatProviderDescriptor {
            provider_id: format!("http:{endpoint}"),
            model_name: model,
            temperature,
            deterministic: false,
        };
        descriptor.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Ok(HttpChatProvider {
            endpoint,
            token,
            agent,
            descriptor,
        })
    }
}

impl ChatProvider for HttpChatProvider {
    fn descriptor(&self) -> &ChatProviderDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(status) => ChatError::Status {
                status,
                body: String::new(),
            },
            other => ChatError::Transport(other.to_string()),
        })?;
        let parsed: CompletionBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| ChatError::MalformedResponse(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ChatError::MalformedResponse("no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        let usage = parsed.usage.map_or_else(Usage::default, |u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        });
        Ok(ChatResponse { text, usage })
    }
}
