use super::{front_order, FrontMethod, ParetoFront, ScoredTeam, SelectionError};
use crate::objectives::{ObjectivePair, ObjectiveScores};

/// `a` is at least as good as `b` on both objectives and strictly better on
/// one.
pub fn dominates(a: &ObjectiveScores, b: &ObjectiveScores) -> bool {
    a.relevance >= b.relevance
        && a.diversity >= b.diversity
        && (a.relevance > b.relevance || a.diversity > b.diversity)
}

/// Every team not dominated by another input team. Teams sharing an objective
/// vector are all kept.
///
/// Sorted by relevance, a team survives iff it has the best diversity within
/// its relevance tie group and beats every team of strictly higher relevance
/// on diversity, so one sweep after the sort suffices.
pub fn pareto_front_exact(
    teams: &[ScoredTeam],
    objective_pair: ObjectivePair,
) -> Result<ParetoFront, SelectionError> {
    if teams.is_empty() {
        return Err(SelectionError::EmptyInput);
    }
    if let Some(bad) = teams
        .iter()
        .find(|t| !t.scores.relevance.is_finite() || !t.scores.diversity.is_finite())
    {
        return Err(SelectionError::NonFiniteScores(bad.team.clone()));
    }

    let mut sorted: Vec<&ScoredTeam> = teams.iter().collect();
    sorted.sort_by(|a, b| front_order(a, b));

    let mut front = Vec::new();
    let mut best_higher = f64::NEG_INFINITY;
    let mut start = 0;
    while start < sorted.len() {
        let rel = sorted[start].scores.relevance;
        let end = sorted[start..]
            .iter()
            .position(|t| t.scores.relevance != rel)
            .map_or(sorted.len(), |p| start + p);
        // Groups are sorted by descending diversity, so the head holds the max.
        let group_max = sorted[start].scores.diversity;
        if group_max > best_higher {
            front.extend(
                sorted[start..end]
                    .iter()
                    .take_while(|t| t.scores.diversity == group_max)
                    .map(|t| (*t).clone()),
            );
            best_higher = group_max;
        }
        start = end;
    }

    Ok(ParetoFront {
        teams: front,
        method: FrontMethod::Exact,
        objective_pair,
    })
}
