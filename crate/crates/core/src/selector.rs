//! The selector agent: presents front teams to a chat model and parses its
//! `Choice: Group X` answer.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::chat::{self, CallContext, CallRecord, ChatError, ChatProvider, Stage};
use crate::generation::{prompts, AgentSpec};
use crate::selection::{knee_point, score_cmp, tie_order, ParetoFront, ScoredTeam, TeamPicker};

pub const DEFAULT_SELECTOR_RETRIES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum SelectorError {
    #[error("front is empty")]
    EmptyFront,
    #[error("group count must be at least 1")]
    NoGroups,
    #[error("team member {index} is outside the candidate pool of {pool_size}")]
    UnknownMember { index: usize, pool_size: usize },
    #[error("selector call failed: {0}")]
    Chat(#[from] ChatError),
    #[error("no `Choice: Group X` line in selector output")]
    NoMatch,
    #[error("group {choice} is outside 1..={group_count}")]
    OutOfRange { choice: String, group_count: usize },
}

/// One numbered group shown to the selector.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPresentation {
    pub group_number: usize,
    pub team: ScoredTeam,
    /// Other front teams with the same objective vector.
    pub alternates: Vec<ScoredTeam>,
    pub rendered_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorSettings {
    pub temperature: f64,
    pub retries: usize,
    /// Append objective scores to each group.
    pub show_scores: bool,
}

impl Default for SelectorSettings {
    fn default() -> Self {
        SelectorSettings {
            temperature: 1.0,
            retries: DEFAULT_SELECTOR_RETRIES,
            show_scores: false,
        }
    }
}

/// Groups front teams by objective vector, ordered by descending relevance
/// (then descending diversity). Each group's representative is its smallest,
/// then lexicographically first, team.
pub fn present_groups(
    front: &ParetoFront,
    pool: &[AgentSpec],
    show_scores: bool,
) -> Result<Vec<GroupPresentation>, SelectorError> {
    if front.is_empty() {
        return Err(SelectorError::EmptyFront);
    }
    let mut teams = front.teams.clone();
    teams.sort_by(|a, b| {
        score_cmp(b.scores.relevance, a.scores.relevance)
            .then(score_cmp(b.scores.diversity, a.scores.diversity))
            .then_with(|| tie_order(&a.team, &b.team))
    });
    let mut groups: Vec<Vec<ScoredTeam>> = Vec::new();
    for team in teams {
        match groups.last_mut() {
            Some(g) if g[0].point() == team.point() => g.push(team),
            _ => groups.push(vec![team]),
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, mut members)| {
            let team = members.remove(0);
            let mut lines = vec![format!("Group {}:", i + 1)];
            for &m in team.team.members() {
                let agent = pool.get(m).ok_or(SelectorError::UnknownMember {
                    index: m,
                    pool_size: pool.len(),
                })?;
                lines.push(format!("- {}: {}", agent.name, agent.description));
            }
            if show_scores {
                lines.push(format!(
                    "(Relevance: {:.4}, Diversity: {:.4})",
                    team.scores.relevance, team.scores.diversity
                ));
            }
            Ok(GroupPresentation {
                group_number: i + 1,
                team,
                alternates: members,
                rendered_text: lines.join("\n"),
            })
        })
        .collect()
}

pub fn selector_prompt(context: &str, groups: &[GroupPresentation]) -> String {
    let rendered = groups
        .iter()
        .map(|g| g.rendered_text.as_str())
        .collect::<Vec<_>>()
        .join("\n\n");
    prompts::render(prompts::SELECTOR, &[("context", context), ("groups", &rendered)])
}

fn choice_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)choice:\s*group\s*(\d+)").expect("valid regex"))
}

/// The last `Choice: Group N` in `text`, checked against `1..=group_count`.
pub fn parse_choice(text: &str, group_count: usize) -> Result<usize, SelectorError> {
    if group_count == 0 {
        return Err(SelectorError::NoGroups);
    }
    let caps = choice_pattern()
        .captures_iter(text)
        .last()
        .ok_or(SelectorError::NoMatch)?;
    let raw = &caps[1];
    match raw.parse::<usize>() {
        Ok(n) if (1..=group_count).contains(&n) => Ok(n),
        _ => Err(SelectorError::OutOfRange {
            choice: raw.to_string(),
            group_count,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub team: ScoredTeam,
    /// The chosen group, or `None` when no provider call was needed or the
    /// knee-point fallback was used.
    pub group_number: Option<usize>,
    pub fallback: bool,
    pub calls: Vec<CallRecord>,
}

/// Asks `provider` to pick a group. A front with a single objective vector
/// returns without a call; unparseable answers are retried, then fall back to
/// the knee point.
pub fn select_team(
    front: &ParetoFront,
    pool: &[AgentSpec],
    context: &str,
    provider: &dyn ChatProvider,
    settings: &SelectorSettings,
) -> Result<Selection, SelectorError> {
    let groups = present_groups(front, pool, settings.show_scores)?;
    if groups.len() == 1 {
        return Ok(Selection {
            team: groups[0].team.clone(),
            group_number: None,
            fallback: false,
            calls: Vec::new(),
        });
    }
    let base = selector_prompt(context, &groups);
    let mut prompt = base.clone();
    let mut calls = Vec::new();
    for attempt in 0..=settings.retries {
        let ctx = CallContext {
            stage: Stage::Selector,
            round: 0,
            attempt,
        };
        let (response, record) = chat::call(provider, ctx, prompt, settings.temperature)?;
        calls.push(record);
        match parse_choice(&response.text, groups.len()) {
            Ok(n) => {
                return Ok(Selection {
                    team: groups[n - 1].team.clone(),
                    group_number: Some(n),
                    fallback: false,
                    calls,
                })
            }
            Err(e) => {
                prompt = format!(
                    "{base}\n\nYour previous answer was rejected ({e}). \
                     End with 'Choice: Group X' where X is between 1 and {}.",
                    groups.len()
                );
            }
        }
    }
    let team = knee_point(front).ok_or(SelectorError::EmptyFront)?.clone();
    Ok(Selection {
        team,
        group_number: None,
        fallback: true,
        calls,
    })
}

/// [`TeamPicker`] backed by a chat provider; keeps the last selection.
pub struct ChatSelector<'a> {
    pub provider: &'a dyn ChatProvider,
    pub pool: &'a [AgentSpec],
    pub context: &'a str,
    pub settings: SelectorSettings,
    pub last: Option<Selection>,
}

impl TeamPicker for ChatSelector<'_> {
    fn pick(&mut self, front: &ParetoFront) -> crate::Result<ScoredTeam> {
        let selection = select_team(front, self.pool, self.context, self.provider, &self.settings)?;
        let team = selection.team.clone();
        self.last = Some(selection);
        Ok(team)
    }
}
