//! Candidate teams, Pareto dominance, exact and NSGA-II fronts, front-quality
//! metrics and the ablation selection strategies.

mod metrics;
mod nsga2;
mod pareto;
mod strategy;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use metrics::{coverage, generational_distance};
pub use nsga2::{nsga2_front, nsga2_front_observed, Nsga2Params};
pub use pareto::{dominates, pareto_front_exact};
pub use strategy::{
    apply_strategy, knee_point, normalized_sums, unrank_combination, SelectionStrategy,
    StrategyInputs, TeamPicker,
};

use crate::objectives::{ObjectiveError, ObjectivePair, ObjectiveScores, PoolScorer};

/// Default ceiling on `Σ_r C(pool, r)` for exact enumeration.
pub const DEFAULT_EXACT_ENUMERATION_CAP: u128 = 4096;

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("invalid size bounds: n_min = {min}, n_max = {max} (need 1 <= n_min <= n_max)")]
    BoundsInvalid { min: usize, max: usize },
    #[error("pool of {pool_size} agents cannot fill a team of at least {n_min}")]
    DegeneratePool { pool_size: usize, n_min: usize },
    #[error("no scored teams given")]
    EmptyInput,
    #[error("exact front is empty")]
    EmptyExactFront,
    #[error("front is empty")]
    EmptyFront,
    #[error("team {0} has non-finite objective scores")]
    NonFiniteScores(Team),
    #[error("invalid team {0:?}: indices must be strictly increasing")]
    InvalidTeam(Vec<usize>),
    #[error("invalid NSGA-II parameters: {0}")]
    InvalidParams(String),
    #[error("strategy unavailable: {0}")]
    StrategyUnavailable(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Sorted, duplicate-free indices into the candidate pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Team(Vec<usize>);

impl Team {
    pub fn new(members: Vec<usize>) -> Result<Self, SelectionError> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SelectionError::InvalidTeam(members));
        }
        Ok(Team(members))
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Team(members)
    }

    /// Every agent of a pool of `pool_size`.
    pub fn full(pool_size: usize) -> Self {
        Team((0..pool_size).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for Team {
    type Error = SelectionError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Team::new(v)
    }
}

impl From<Team> for Vec<usize> {
    fn from(t: Team) -> Self {
        t.0
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTeam {
    pub team: Team,
    pub scores: ObjectiveScores,
}

impl ScoredTeam {
    pub fn point(&self) -> (f64, f64) {
        (self.scores.relevance, self.scores.diversity)
    }
}

/// Inclusive team-size bounds `[n_min, n_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub min: usize,
    pub max: usize,
}

impl SizeBounds {
    pub fn new(min: usize, max: usize) -> Result<Self, SelectionError> {
        if min < 1 || min > max {
            return Err(SelectionError::BoundsInvalid { min, max });
        }
        Ok(SizeBounds { min, max })
    }

    /// `n_max` capped at the pool size.
    pub fn effective_max(&self, pool_size: usize) -> usize {
        self.max.min(pool_size)
    }

    pub fn contains(&self, size: usize) -> bool {
        (self.min..=self.max).contains(&size)
    }
}

/// Scores a team given its member indices.
pub trait TeamObjective: Sync {
    fn evaluate(&self, members: &[usize]) -> Result<ObjectiveScores, ObjectiveError>;
}

impl TeamObjective for PoolScorer {
    fn evaluate(&self, members: &[usize]) -> Result<ObjectiveScores, ObjectiveError> {
        self.score(members)
    }
}

impl<F> TeamObjective for F
where
    F: Fn(&[usize]) -> Result<ObjectiveScores, ObjectiveError> + Sync,
{
    fn evaluate(&self, members: &[usize]) -> Result<ObjectiveScores, ObjectiveError> {
        self(members)
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of teams [`enumerate_teams`] yields: `Σ_r C(pool, r)`.
pub fn team_count(pool_size: usize, bounds: SizeBounds) -> u128 {
    (bounds.min..=bounds.effective_max(pool_size))
        .map(|r| binomial(pool_size, r))
        .sum()
}

/// All teams with sizes in `bounds`: size-major, lexicographic within a size.
pub fn enumerate_teams(
    pool_size: usize,
    n_min: usize,
    n_max: usize,
) -> Result<TeamEnumerator, SelectionError> {
    let bounds = SizeBounds::new(n_min, n_max)?;
    Ok(TeamEnumerator {
        pool_size,
        size: bounds.min,
        max_size: bounds.effective_max(pool_size),
        current: None,
    })
}

/// Iterator returned by [`enumerate_teams`].
#[derive(Debug, Clone)]
pub struct TeamEnumerator {
    pool_size: usize,
    size: usize,
    max_size: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for TeamEnumerator {
    type Item = Team;

    fn next(&mut self) -> Option<Team> {
        let n = self.pool_size;
        loop {
            if self.size > self.max_size {
                return None;
            }
            let r = self.size;
            match &mut self.current {
                None => {
                    let first: Vec<usize> = (0..r).collect();
                    self.current = Some(first.clone());
                    return Some(Team(first));
                }
                Some(idx) => {
                    // Rightmost position that can still move right.
                    if let Some(i) = (0..r).rev().find(|&i| idx[i] < n - r + i) {
                        idx[i] += 1;
                        for j in (i + 1)..r {
                            idx[j] = idx[j - 1] + 1;
                        }
                        return Some(Team(idx.clone()));
                    }
                    self.size += 1;
                    self.current = None;
                }
            }
        }
    }
}

/// Enumerates every team within bounds and scores them in input order.
pub fn score_all_teams(
    objective: &dyn TeamObjective,
    pool_size: usize,
    bounds: SizeBounds,
    exec: crate::Execution,
) -> Result<Vec<ScoredTeam>, SelectionError> {
    if pool_size < bounds.min {
        return Err(SelectionError::DegeneratePool {
            pool_size,
            n_min: bounds.min,
        });
    }
    let teams: Vec<Team> = enumerate_teams(pool_size, bounds.min, bounds.max)?.collect();
    let scores = exec.try_map(&teams, |t| objective.evaluate(t.members()))?;
    Ok(teams
        .into_iter()
        .zip(scores)
        .map(|(team, scores)| ScoredTeam { team, scores })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontMethod {
    Exact,
    Nsga2,
}

impl fmt::Display for FrontMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrontMethod::Exact => "exact",
            FrontMethod::Nsga2 => "nsga2",
        })
    }
}

/// Non-dominated teams, sorted by descending relevance, then descending
/// diversity, then member indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub teams: Vec<ScoredTeam>,
    pub method: FrontMethod,
    pub objective_pair: ObjectivePair,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.teams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teams.is_empty()
    }

    pub fn contains(&self, team: &Team) -> bool {
        self.teams.iter().any(|t| &t.team == team)
    }

    /// Audit/prompt-builder view with member names resolved from `pool_names`.
    pub fn export(&self, pool_names: &[String]) -> FrontExport {
        FrontExport {
            method: self.method,
            objective_pair: self.objective_pair,
            teams: self
                .teams
                .iter()
                .map(|t| FrontTeamExport {
                    members: t.team.members().to_vec(),
                    names: t
                        .team
                        .members()
                        .iter()
                        .map(|&i| pool_names.get(i).cloned().unwrap_or_default())
                        .collect(),
                    relevance: t.scores.relevance,
                    diversity: t.scores.diversity,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontExport {
    pub method: FrontMethod,
    pub objective_pair: ObjectivePair,
    pub teams: Vec<FrontTeamExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTeamExport {
    pub members: Vec<usize>,
    pub names: Vec<String>,
    pub relevance: f64,
    pub diversity: f64,
}

/// Front display order.
pub(crate) fn front_order(a: &ScoredTeam, b: &ScoredTeam) -> Ordering {
    score_cmp(b.scores.relevance, a.scores.relevance)
        .then_with(|| score_cmp(b.scores.diversity, a.scores.diversity))
        .then_with(|| a.team.cmp(&b.team))
}

/// Numeric order on scores, so `-0.0` and `0.0` tie.
pub(crate) fn score_cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.total_cmp(&b))
}

/// Smaller team first, then lexicographic member indices.
pub(crate) fn tie_order(a: &Team, b: &Team) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}
