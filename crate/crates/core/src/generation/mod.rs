//! Iterative role generation: planner, formatter and observer over `K` rounds.
//!
//! Each round the planner writes free-form roles and an execution plan, the
//! formatter standardizes them into [`AgentSpec`] records and [`SubTask`]s, and
//! (except in the last round) two observers critique roles and plan. Their
//! suggestions feed the next round's planner. The candidate pool is the last
//! round's agents.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::chat::{self, CallContext, CallRecord, ChatError, ChatProvider, Stage, TokenUsage};

pub mod formatter;
pub mod prompts;

pub use formatter::{parse_formatted, render_formatted, FormattedOutput};

/// Default number of generation rounds.
pub const DEFAULT_ROUNDS: usize = 3;
/// Default extra formatter attempts after a parse failure.
pub const DEFAULT_FORMATTER_RETRIES: usize = 2;

const NONE_SLOT: &str = "None";
const NO_SUGGESTIONS: &str = "no suggestions";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentOrigin {
    SelectedExisting,
    #[default]
    Created,
}

/// A standardized agent role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub description: String,
    pub suggestions: String,
    pub prompt: String,
    #[serde(default)]
    pub origin: AgentOrigin,
    /// Keys beyond the four standard ones, kept but unused.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl AgentSpec {
    pub fn validate(&self) -> Result<(), FormatError> {
        let fail = |reason: &str| {
            Err(FormatError::InvalidRole {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.name.trim().is_empty() {
            return fail("empty name");
        }
        if self.description.trim().is_empty() {
            return fail("empty description");
        }
        if self.prompt.trim().is_empty() {
            return fail("empty prompt");
        }
        if !self.prompt.starts_with("You are ") {
            return fail("prompt does not start with \"You are \"");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTask {
    /// 1-based position in the execution plan.
    pub index: usize,
    pub description: String,
    pub assigned_roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub role_feedback: String,
    pub plan_feedback: String,
    pub has_suggestions: bool,
}

impl Feedback {
    pub fn new(role_feedback: String, plan_feedback: String) -> Self {
        let has_suggestions = !(is_no_suggestions(&role_feedback) && is_no_suggestions(&plan_feedback));
        Feedback {
            role_feedback,
            plan_feedback,
            has_suggestions,
        }
    }
}

/// `true` for the literal "No Suggestions", ignoring case, quotes and a
/// trailing period.
pub fn is_no_suggestions(text: &str) -> bool {
    text.trim()
        .trim_matches(|c| matches!(c, '"' | '\'' | '`' | '*'))
        .trim_end_matches('.')
        .trim()
        .eq_ignore_ascii_case(NO_SUGGESTIONS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRound {
    pub round_index: usize,
    pub subtasks: Vec<SubTask>,
    pub raw_planner_output: String,
    pub agents: Vec<AgentSpec>,
    /// Present for every round but the last.
    pub feedback: Option<Feedback>,
    pub token_usage: TokenUsage,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("formatter output is empty")]
    EmptyDocument,
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("role record lacks key `{key}`: {record}")]
    MalformedRoleRecord { key: &'static str, record: String },
    #[error("role record is not valid JSON ({detail}): {record}")]
    InvalidJson { detail: String, record: String },
    #[error("role `{name}` is invalid: {reason}")]
    InvalidRole { name: String, reason: String },
    #[error("plan step has no assigned roles: {0}")]
    StepWithoutRoles(String),
    #[error("execution plan has no steps")]
    EmptyPlan,
}

/// Why a round could not complete.
#[derive(Debug, thiserror::Error)]
pub enum RoundFailure {
    #[error("{stage} call failed: {source}")]
    Chat {
        stage: Stage,
        #[source]
        source: ChatError,
    },
    #[error("{0} returned an empty completion")]
    EmptyCompletion(Stage),
    #[error("formatter output unparseable after {attempts} attempts: {error}")]
    Format { attempts: usize, error: FormatError },
    #[error("{0} output has no `## Suggestions` section")]
    SuggestionsMissing(Stage),
}

/// Rounds finished before a failure, plus the calls of the failing round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialGeneration {
    pub rounds: Vec<GenerationRound>,
    pub failed_round_calls: Vec<CallRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("round count must be at least 1")]
    NoRounds,
    #[error("query is empty")]
    EmptyQuery,
    #[error("round {round}: {failure}")]
    Round {
        round: usize,
        failure: RoundFailure,
        partial: Box<PartialGeneration>,
    },
}

impl GenerationError {
    pub fn partial(&self) -> Option<&PartialGeneration> {
        match self {
            GenerationError::Round { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationSettings {
    pub temperature: f64,
    pub formatter_retries: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            temperature: 1.0,
            formatter_retries: DEFAULT_FORMATTER_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    /// Final-round agents, first occurrence of each trimmed name.
    pub candidate_pool: Vec<AgentSpec>,
    pub rounds: Vec<GenerationRound>,
}

/// Observer suggestions accumulated across rounds, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    entries: Vec<(usize, Feedback)>,
}

impl History {
    pub fn push(&mut self, round: usize, feedback: Feedback) {
        self.entries.push((round, feedback));
    }

    fn join(&self, part: impl Fn(usize, &Feedback) -> String) -> String {
        if self.entries.is_empty() {
            return NONE_SLOT.into();
        }
        self.entries
            .iter()
            .map(|(r, f)| part(*r, f))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Planner history: every round's role and plan suggestions.
    pub fn planner_text(&self) -> String {
        self.join(|r, f| {
            format!(
                "Round {r} role suggestions:\n{}\nRound {r} plan suggestions:\n{}",
                f.role_feedback, f.plan_feedback
            )
        })
    }

    /// Roles observer history.
    pub fn role_text(&self) -> String {
        self.join(|r, f| format!("Round {r}:\n{}", f.role_feedback))
    }

    /// Plan observer history.
    pub fn plan_text(&self) -> String {
        self.join(|r, f| format!("Round {r}:\n{}", f.plan_feedback))
    }
}

/// Planner prompt for a round. `prior` is the previous round, if any.
pub fn planner_prompt(query: &str, prior: Option<&GenerationRound>, history: &History) -> String {
    let existing = prior.map_or_else(|| NONE_SLOT.into(), |p| formatter::role_blobs(&p.agents));
    let suggestions = match prior {
        Some(GenerationRound {
            subtasks,
            feedback: Some(fb),
            ..
        }) => format!(
            "Previous execution plan:\n{}\n\nRole suggestions:\n{}\n\nPlan suggestions:\n{}",
            formatter::render_plan(subtasks),
            fb.role_feedback,
            fb.plan_feedback
        ),
        _ => NONE_SLOT.into(),
    };
    prompts::render(
        prompts::PLANNER,
        &[
            ("context", query),
            ("existing_roles", &existing),
            ("history", &history.planner_text()),
            ("suggestions", &suggestions),
        ],
    )
}

pub fn formatter_prompt(raw_planner_text: &str) -> String {
    prompts::render(
        prompts::FORMATTER,
        &[
            ("raw_content", raw_planner_text),
            ("format_example", prompts::FORMATTER_FORMAT_EXAMPLE),
        ],
    )
}

fn split_by_origin(agents: &[AgentSpec], origin: AgentOrigin) -> Vec<AgentSpec> {
    agents.iter().filter(|a| a.origin == origin).cloned().collect()
}

pub fn role_observer_prompt(
    query: &str,
    existing: &[AgentSpec],
    agents: &[AgentSpec],
    history: &History,
) -> String {
    prompts::render(
        prompts::ROLE_OBSERVER,
        &[
            ("question", query),
            ("existing_roles", &formatter::role_blobs(existing)),
            (
                "selected_roles",
                &formatter::role_blobs(&split_by_origin(agents, AgentOrigin::SelectedExisting)),
            ),
            (
                "created_roles",
                &formatter::role_blobs(&split_by_origin(agents, AgentOrigin::Created)),
            ),
            ("history", &history.role_text()),
            ("format_example", prompts::ROLE_OBSERVER_FORMAT_EXAMPLE),
        ],
    )
}

pub fn plan_observer_prompt(
    query: &str,
    agents: &[AgentSpec],
    subtasks: &[SubTask],
    history: &History,
) -> String {
    prompts::render(
        prompts::PLAN_OBSERVER,
        &[
            ("context", query),
            ("roles", &formatter::role_blobs(agents)),
            ("plan", &formatter::render_plan(subtasks)),
            ("history", &history.plan_text()),
            ("format_example", prompts::PLAN_OBSERVER_FORMAT_EXAMPLE),
        ],
    )
}

/// Body of the `## Suggestions` section, if present and nonempty.
pub fn extract_suggestions(text: &str) -> Option<String> {
    formatter::split_sections(text)
        .into_iter()
        .find(|(h, _)| h.trim_end_matches(':').trim().eq_ignore_ascii_case("suggestions"))
        .map(|(_, body)| {
            body.lines()
                .take_while(|l| l.trim() != "---")
                .collect::<Vec<_>>()
                .join("\n")
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty())
}

/// Drives one query through the rounds, collecting call records as it goes.
struct RoundRunner<'a> {
    provider: &'a dyn ChatProvider,
    settings: GenerationSettings,
    round: usize,
    calls: Vec<CallRecord>,
}

impl RoundRunner<'_> {
    fn call(&mut self, stage: Stage, attempt: usize, prompt: String) -> Result<String, RoundFailure> {
        let ctx = CallContext {
            stage,
            round: self.round,
            attempt,
        };
        let (response, record) = chat::call(self.provider, ctx, prompt, self.settings.temperature)
            .map_err(|source| RoundFailure::Chat { stage, source })?;
        self.calls.push(record);
        if response.text.trim().is_empty() {
            return Err(RoundFailure::EmptyCompletion(stage));
        }
        Ok(response.text)
    }

    fn plan(&mut self, query: &str, prior: Option<&GenerationRound>, history: &History) -> Result<String, RoundFailure> {
        self.call(Stage::Planner, 0, planner_prompt(query, prior, history))
    }

    fn format(&mut self, raw: &str) -> Result<FormattedOutput, RoundFailure> {
        let base = formatter_prompt(raw);
        let mut prompt = base.clone();
        let mut attempt = 0;
        loop {
            let text = self.call(Stage::Formatter, attempt, prompt)?;
            match parse_formatted(&text) {
                Ok(out) => return Ok(out),
                Err(error) if attempt >= self.settings.formatter_retries => {
                    return Err(RoundFailure::Format {
                        attempts: attempt + 1,
                        error,
                    })
                }
                Err(error) => {
                    attempt += 1;
                    prompt = format!(
                        "{base}\n\nYour previous output could not be parsed: {error}. \
                         Reformat the content exactly as specified."
                    );
                }
            }
        }
    }

    fn observe(
        &mut self,
        query: &str,
        existing: &[AgentSpec],
        formatted: &FormattedOutput,
        history: &History,
    ) -> Result<Feedback, RoundFailure> {
        let agents = formatted.agents();
        let roles = self.call(
            Stage::RoleObserver,
            0,
            role_observer_prompt(query, existing, &agents, history),
        )?;
        let role_feedback =
            extract_suggestions(&roles).ok_or(RoundFailure::SuggestionsMissing(Stage::RoleObserver))?;
        let plan = self.call(
            Stage::PlanObserver,
            0,
            plan_observer_prompt(query, &agents, &formatted.subtasks, history),
        )?;
        let plan_feedback =
            extract_suggestions(&plan).ok_or(RoundFailure::SuggestionsMissing(Stage::PlanObserver))?;
        Ok(Feedback::new(role_feedback, plan_feedback))
    }
}

/// First occurrence of each trimmed name.
pub fn dedup_by_name(agents: Vec<AgentSpec>) -> Vec<AgentSpec> {
    let mut seen = HashSet::new();
    agents
        .into_iter()
        .filter(|a| seen.insert(a.name.trim().to_string()))
        .collect()
}

/// Runs `rounds` generation rounds for `query`.
pub fn run_generation(
    query: &str,
    rounds: usize,
    provider: &dyn ChatProvider,
    settings: GenerationSettings,
) -> Result<GenerationOutcome, GenerationError> {
    if rounds == 0 {
        return Err(GenerationError::NoRounds);
    }
    if query.trim().is_empty() {
        return Err(GenerationError::EmptyQuery);
    }
    let mut done: Vec<GenerationRound> = Vec::with_capacity(rounds);
    let mut history = History::default();

    for t in 1..=rounds {
        let mut runner = RoundRunner {
            provider,
            settings,
            round: t,
            calls: Vec::new(),
        };
        let result = (|| {
            let prior = done.last();
            let raw = runner.plan(query, prior, &history)?;
            let formatted = runner.format(&raw)?;
            let feedback = if t < rounds {
                let existing = prior.map_or(&[][..], |p| &p.agents[..]);
                Some(runner.observe(query, existing, &formatted, &history)?)
            } else {
                None
            };
            Ok((raw, formatted, feedback))
        })();

        match result {
            Ok((raw, formatted, feedback)) => {
                if let Some(fb) = &feedback {
                    history.push(t, fb.clone());
                }
                done.push(GenerationRound {
                    round_index: t,
                    agents: formatted.agents(),
                    subtasks: formatted.subtasks,
                    raw_planner_output: raw,
                    feedback,
                    token_usage: TokenUsage::from_calls(&runner.calls),
                    calls: runner.calls,
                });
            }
            Err(failure) => {
                return Err(GenerationError::Round {
                    round: t,
                    failure,
                    partial: Box::new(PartialGeneration {
                        rounds: done,
                        failed_round_calls: runner.calls,
                    }),
                })
            }
        }
    }

    let candidate_pool = dedup_by_name(done.last().map(|r| r.agents.clone()).unwrap_or_default());
    Ok(GenerationOutcome {
        candidate_pool,
        rounds: done,
    })
}
