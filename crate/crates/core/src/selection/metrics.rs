use std::collections::HashSet;

use super::{ParetoFront, SelectionError, Team};

/// Fraction of the exact front's member sets that appear in `approx`.
pub fn coverage(approx: &ParetoFront, exact: &ParetoFront) -> Result<f64, SelectionError> {
    if exact.is_empty() {
        return Err(SelectionError::EmptyExactFront);
    }
    let found: HashSet<&Team> = approx.teams.iter().map(|t| &t.team).collect();
    let hits = exact.teams.iter().filter(|t| found.contains(&t.team)).count();
    Ok(hits as f64 / exact.len() as f64)
}

/// Mean distance from each approximate point to its nearest exact point.
///
/// Each objective is min-max normalized over the union of both fronts first;
/// an objective with zero range normalizes to 0 everywhere.
pub fn generational_distance(
    approx: &ParetoFront,
    exact: &ParetoFront,
) -> Result<f64, SelectionError> {
    if approx.is_empty() || exact.is_empty() {
        return Err(SelectionError::EmptyFront);
    }
    let points = |f: &ParetoFront| f.teams.iter().map(|t| t.point()).collect::<Vec<_>>();
    let a = points(approx);
    let e = points(exact);

    let range = |pick: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = a
            .iter()
            .chain(&e)
            .map(pick)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        move |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }
    };
    let norm_rel = range(|p| p.0);
    let norm_div = range(|p| p.1);
    let normalize = |p: &(f64, f64)| (norm_rel(p.0), norm_div(p.1));

    let exact_norm: Vec<(f64, f64)> = e.iter().map(normalize).collect();
    let total: f64 = a
        .iter()
        .map(normalize)
        .map(|(x, y)| {
            exact_norm
                .iter()
                .map(|(u, v)| ((x - u).powi(2) + (y - v).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / a.len() as f64)
}
