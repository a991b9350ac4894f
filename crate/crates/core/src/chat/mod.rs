//! Chat-model provider abstraction shared by generation and selection.
//!
//! A request is an ordered list of messages plus model name and temperature;
//! a response is the completion text plus token usage. Every request also
//! carries a [`CallContext`] naming the pipeline stage, round and retry
//! attempt, which the scripted provider uses as its lookup key.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[cfg(feature = "http")]
mod http;
mod scripted;

#[cfg(feature = "http")]
pub use http::HttpChatProvider;
pub use scripted::{ScriptEntry, ChatScript, ScriptedChatProvider};

/// Environment variable that overrides the configured chat API key.
pub const CHAT_TOKEN_ENV: &str = "ROSTER_CHAT_TOKEN";

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error("script has no response for {0}")]
    ScriptExhausted(CallContext),
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("temperature must be finite and non-negative, got {0}")]
    InvalidTemperature(f64),
}

/// A call site in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Planner,
    Formatter,
    RoleObserver,
    PlanObserver,
    Selector,
}

impl Stage {
    pub fn kind(self) -> StageKind {
        match self {
            Stage::Planner => StageKind::Planner,
            Stage::Formatter => StageKind::Formatter,
            Stage::RoleObserver | Stage::PlanObserver => StageKind::Observer,
            Stage::Selector => StageKind::Selector,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Planner => "planner",
            Stage::Formatter => "formatter",
            Stage::RoleObserver => "role_observer",
            Stage::PlanObserver => "plan_observer",
            Stage::Selector => "selector",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reporting granularity for token usage: both observers count as one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Planner,
    Formatter,
    Observer,
    Selector,
}

impl StageKind {
    pub const ALL: [StageKind; 4] = [
        StageKind::Planner,
        StageKind::Formatter,
        StageKind::Observer,
        StageKind::Selector,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallContext {
    pub stage: Stage,
    /// Generation round (1-based); 0 for the selector.
    pub round: usize,
    /// Retry attempt, 0 for the first try.
    pub attempt: usize,
}

impl fmt::Display for CallContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stage {} round {} attempt {}",
            self.stage, self.round, self.attempt
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub model: String,
    pub temperature: f64,
    pub context: CallContext,
}

impl ChatRequest {
    /// Concatenated message contents, as recorded in run logs.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatProviderDescriptor {
    pub provider_id: String,
    pub model_name: String,
    pub temperature: f64,
    pub deterministic: bool,
}

impl ChatProviderDescriptor {
    pub fn validate(&self) -> Result<(), ChatError> {
        if self.temperature.is_finite() && self.temperature >= 0.0 {
            Ok(())
        } else {
            Err(ChatError::InvalidTemperature(self.temperature))
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn descriptor(&self) -> &ChatProviderDescriptor;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

/// One provider round trip, as persisted in a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub stage: Stage,
    pub round: usize,
    pub attempt: usize,
    pub prompt: String,
    pub response: String,
    pub usage: Usage,
}

/// Prompt and completion token totals with a per-stage breakdown.
///
/// Every [`StageKind`] has an entry, zero when the stage made no calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub per_stage: BTreeMap<StageKind, Usage>,
}

impl Default for TokenUsage {
    fn default() -> Self {
        TokenUsage {
            prompt_tokens: 0,
            completion_tokens: 0,
            per_stage: StageKind::ALL.iter().map(|&k| (k, Usage::default())).collect(),
        }
    }
}

impl TokenUsage {
    pub fn from_calls<'a>(calls: impl IntoIterator<Item = &'a CallRecord>) -> Self {
        let mut usage = TokenUsage::default();
        for call in calls {
            usage.record(call.stage.kind(), call.usage);
        }
        usage
    }

    pub fn record(&mut self, kind: StageKind, usage: Usage) {
        self.prompt_tokens += usage.prompt_tokens;
        self.completion_tokens += usage.completion_tokens;
        *self.per_stage.entry(kind).or_default() += usage;
    }

    pub fn merge(&mut self, other: &TokenUsage) {
        for (&kind, &usage) in &other.per_stage {
            self.record(kind, usage);
        }
    }

    pub fn stage(&self, kind: StageKind) -> Usage {
        self.per_stage.get(&kind).copied().unwrap_or_default()
    }

    /// Totals equal the per-stage sums.
    pub fn is_consistent(&self) -> bool {
        let mut sum = Usage::default();
        for &u in self.per_stage.values() {
            sum += u;
        }
        sum.prompt_tokens == self.prompt_tokens && sum.completion_tokens == self.completion_tokens
    }
}

/// Issues a single-message completion and records it.
pub(crate) fn call(
    provider: &dyn ChatProvider,
    context: CallContext,
    prompt: String,
    temperature: f64,
) -> Result<(ChatResponse, CallRecord), ChatError> {
    let request = ChatRequest {
        messages: vec![ChatMessage {
            role: MessageRole::User,
            content: prompt,
        }],
        model: provider.descriptor().model_name.clone(),
        temperature,
        context,
    };
    let response = provider.complete(&request)?;
    let record = CallRecord {
        stage: context.stage,
        round: context.round,
        attempt: context.attempt,
        prompt: request.prompt_text(),
        response: response.text.clone(),
        usage: response.usage,
    };
    Ok((response, record))
}

/// Wraps a provider so that successive calls start at least `interval` apart,
/// across all threads sharing it.
pub struct RateLimited<P> {
    inner: P,
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl<P: ChatProvider> RateLimited<P> {
    pub fn new(inner: P, interval: Duration) -> Self {
        RateLimited {
            inner,
            interval,
            next_slot: Mutex::new(None),
        }
    }

    pub fn per_minute(inner: P, requests: u32) -> Self {
        Self::new(inner, Duration::from_secs(60) / requests.max(1))
    }

    fn wait_turn(&self) {
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + self.interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

impl<P: ChatProvider> ChatProvider for RateLimited<P> {
    fn descriptor(&self) -> &ChatProviderDescriptor {
        self.inner.descriptor()
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        self.wait_turn();
        self.inner.complete(request)
    }
}
