use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    binomial, score_cmp, tie_order, ParetoFront, ScoredTeam, SelectionError, Team, TeamObjective,
};

/// How the final team is chosen once teams are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Selector model chooses from the Pareto front.
    #[default]
    ParetoBest,
    /// Front member with the lowest normalized objective sum.
    ParetoWorst,
    /// Lowest normalized objective sum over every scored team.
    GlobalWorst,
    /// Uniform team of the size `ParetoBest` picks.
    Random,
    /// The whole candidate pool.
    None,
    OnlyRel,
    OnlyDiv,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 7] = [
        SelectionStrategy::ParetoBest,
        SelectionStrategy::ParetoWorst,
        SelectionStrategy::GlobalWorst,
        SelectionStrategy::Random,
        SelectionStrategy::None,
        SelectionStrategy::OnlyRel,
        SelectionStrategy::OnlyDiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::ParetoBest => "pareto_best",
            SelectionStrategy::ParetoWorst => "pareto_worst",
            SelectionStrategy::GlobalWorst => "global_worst",
            SelectionStrategy::Random => "random",
            SelectionStrategy::None => "none",
            SelectionStrategy::OnlyRel => "only_rel",
            SelectionStrategy::OnlyDiv => "only_div",
        }
    }

    /// Strategies that scan every enumerated team rather than the front.
    pub fn needs_all_teams(self) -> bool {
        matches!(
            self,
            SelectionStrategy::GlobalWorst | SelectionStrategy::OnlyRel | SelectionStrategy::OnlyDiv
        )
    }

    pub fn needs_selector(self) -> bool {
        matches!(self, SelectionStrategy::ParetoBest | SelectionStrategy::Random)
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        SelectionStrategy::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<&str> = SelectionStrategy::ALL.iter().map(|k| k.name()).collect();
                format!("unknown strategy `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Chooses a team from a front (the selector model, in production).
pub trait TeamPicker {
    fn pick(&mut self, front: &ParetoFront) -> crate::Result<ScoredTeam>;
}

pub struct StrategyInputs<'a> {
    pub pool_size: usize,
    /// Every enumerated team; `None` when the front came from NSGA-II.
    pub scored_teams: Option<&'a [ScoredTeam]>,
    pub front: &'a ParetoFront,
    pub rng_seed: u64,
}

/// Per-team `norm(relevance) + norm(diversity)`, min-max over `teams`.
pub fn normalized_sums(teams: &[ScoredTeam]) -> Vec<f64> {
    let span = |pick: fn(&ScoredTeam) -> f64| {
        let lo = teams.iter().map(pick).fold(f64::INFINITY, f64::min);
        let hi = teams.iter().map(pick).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (rl, rh) = span(|t| t.scores.relevance);
    let (dl, dh) = span(|t| t.scores.diversity);
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    teams
        .iter()
        .map(|t| norm(t.scores.relevance, rl, rh) + norm(t.scores.diversity, dl, dh))
        .collect()
}

fn extreme_by_sum(teams: &[ScoredTeam], maximize: bool) -> Option<&ScoredTeam> {
    let sums = normalized_sums(teams);
    (0..teams.len())
        .min_by(|&a, &b| {
            let by_value = if maximize {
                score_cmp(sums[b], sums[a])
            } else {
                score_cmp(sums[a], sums[b])
            };
            by_value.then_with(|| tie_order(&teams[a].team, &teams[b].team))
        })
        .map(|i| &teams[i])
}

/// Front member maximizing the normalized objective sum; ties go to the
/// smaller team, then lexicographic indices.
pub fn knee_point(front: &ParetoFront) -> Option<&ScoredTeam> {
    extreme_by_sum(&front.teams, true)
}

fn argmax_by(teams: &[ScoredTeam], value: fn(&ScoredTeam) -> f64) -> Option<&ScoredTeam> {
    teams.iter().min_by(|a, b| {
        score_cmp(value(b), value(a))
            .then_with(|| tie_order(&a.team, &b.team))
    })
}

/// The `rank`-th size-`size` subset of `0..pool_size` in lexicographic order.
pub fn unrank_combination(pool_size: usize, size: usize, mut rank: u128) -> Team {
    let mut members = Vec::with_capacity(size);
    let mut next = 0;
    for slot in 0..size {
        let remaining = size - slot - 1;
        loop {
            let block = binomial(pool_size - next - 1, remaining);
            if rank < block {
                break;
            }
            rank -= block;
            next += 1;
        }
        members.push(next);
        next += 1;
    }
    Team(members)
}

/// Applies `strategy`. `picker` is required for `pareto_best` and `random`.
pub fn apply_strategy(
    strategy: SelectionStrategy,
    inputs: &StrategyInputs<'_>,
    objective: &dyn TeamObjective,
    picker: Option<&mut dyn TeamPicker>,
) -> crate::Result<ScoredTeam> {
    let all_teams = || {
        inputs.scored_teams.ok_or_else(|| {
            SelectionError::StrategyUnavailable(format!(
                "{strategy} needs exhaustive enumeration, but the front was approximated"
            ))
        })
    };
    let picked = |picker: Option<&mut dyn TeamPicker>| match picker {
        Some(p) => p.pick(inputs.front),
        None => Err(SelectionError::StrategyUnavailable(format!(
            "{strategy} requires a selector"
        ))
        .into()),
    };
    let non_empty = |t: Option<&ScoredTeam>| -> crate::Result<ScoredTeam> {
        t.cloned().ok_or_else(|| SelectionError::EmptyInput.into())
    };

    match strategy {
        SelectionStrategy::ParetoBest => picked(picker),
        SelectionStrategy::ParetoWorst => non_empty(extreme_by_sum(&inputs.front.teams, false)),
        SelectionStrategy::GlobalWorst => non_empty(extreme_by_sum(all_teams()?, false)),
        SelectionStrategy::OnlyRel => non_empty(argmax_by(all_teams()?, |t| t.scores.relevance)),
        SelectionStrategy::OnlyDiv => non_empty(argmax_by(all_teams()?, |t| t.scores.diversity)),
        SelectionStrategy::None => {
            let team = Team::full(inputs.pool_size);
            let scores = objective
                .evaluate(team.members())
                .map_err(SelectionError::from)?;
            Ok(ScoredTeam { team, scores })
        }
        SelectionStrategy::Random => {
            let size = picked(picker)?.team.len();
            let total = binomial(inputs.pool_size, size);
            let mut rng = ChaCha8Rng::seed_from_u64(inputs.rng_seed);
            let rank = rng.random_range(0..total);
            let team = unrank_combination(inputs.pool_size, size, rank);
            let scores = objective
                .evaluate(team.members())
                .map_err(SelectionError::from)?;
            Ok(ScoredTeam { team, scores })
        }
    }
}
