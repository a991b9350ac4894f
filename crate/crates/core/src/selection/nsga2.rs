//! NSGA-II over inclusion bitstrings.
//!
//! Genome `g` has one bit per pool agent. Offspring come from binary
//! tournaments on (rank, crowding), uniform crossover and per-bit mutation;
//! a repair step keeps every genome within the size bounds. Survivors are the
//! best `population_size` distinct teams of parents ∪ offspring.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    dominates, front_order, FrontMethod, ParetoFront, ScoredTeam, SelectionError, SizeBounds,
    Team, TeamObjective,
};
use crate::objectives::{ObjectivePair, ObjectiveScores};
use crate::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Nsga2Params {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / pool_size`.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Nsga2Params {
            population_size: 100,
            generations: 50,
            crossover_rate: 0.9,
            mutation_rate: None,
            seed: 0,
        }
    }
}

impl Nsga2Params {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.population_size < 2 {
            return Err(SelectionError::InvalidParams(format!(
                "population_size must be >= 2, got {}",
                self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(SelectionError::InvalidParams(
                "generations must be positive".into(),
            ));
        }
        let rates = [Some(self.crossover_rate), self.mutation_rate];
        if rates.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(SelectionError::InvalidParams(
                "rates must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Individual {
    team: Team,
    scores: ObjectiveScores,
    rank: usize,
    crowding: f64,
}

/// Approximates the Pareto front of all teams within `bounds`.
///
/// Returns the rank-0 teams of the final population. Deterministic for a
/// given seed regardless of `exec`.
pub fn nsga2_front(
    objective: &dyn TeamObjective,
    pool_size: usize,
    bounds: SizeBounds,
    objective_pair: ObjectivePair,
    params: &Nsga2Params,
    exec: Execution,
) -> Result<ParetoFront, SelectionError> {
    nsga2_front_observed(
        objective,
        pool_size,
        bounds,
        objective_pair,
        params,
        exec,
        &mut |_, _| {},
    )
}

/// [`nsga2_front`] that reports each generation's population (generation 0 is
/// the initial one) to `observe`.
pub fn nsga2_front_observed(
    objective: &dyn TeamObjective,
    pool_size: usize,
    bounds: SizeBounds,
    objective_pair: ObjectivePair,
    params: &Nsga2Params,
    exec: Execution,
    observe: &mut dyn FnMut(usize, &[Team]),
) -> Result<ParetoFront, SelectionError> {
    params.validate()?;
    let bounds = SizeBounds::new(bounds.min, bounds.max)?;
    if pool_size < bounds.min {
        return Err(SelectionError::DegeneratePool {
            pool_size,
            n_min: bounds.min,
        });
    }
    let max_size = bounds.effective_max(pool_size);
    let mutation_rate = params.mutation_rate.unwrap_or(1.0 / pool_size as f64);
    let diversity_scale = match objective_pair {
        ObjectivePair::RelVendi => max_size as f64,
        ObjectivePair::RelDivAvg => 2.0,
    };
    let repair = Repair {
        objective,
        max_size,
        diversity_scale,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let initial: Vec<Vec<bool>> = (0..params.population_size)
        .map(|_| {
            let size = rng.random_range(bounds.min..=max_size);
            let mut genome = vec![false; pool_size];
            for i in sample(&mut rng, pool_size, size) {
                genome[i] = true;
            }
            genome
        })
        .collect();
    let mut population = evaluate(&repair, initial, exec)?;
    population = survivors(population, params.population_size);
    observe(0, &teams_of(&population));

    for generation in 1..=params.generations {
        let mut children = Vec::with_capacity(params.population_size);
        for _ in 0..params.population_size {
            let a = tournament(&population, &mut rng);
            let b = tournament(&population, &mut rng);
            let mut child: Vec<bool> = if rng.random_bool(params.crossover_rate) {
                (0..pool_size)
                    .map(|i| {
                        let from_a = rng.random_bool(0.5);
                        let parent = if from_a { a } else { b };
                        parent.team.members().binary_search(&i).is_ok()
                    })
                    .collect()
            } else {
                genome_of(&a.team, pool_size)
            };
            for bit in child.iter_mut() {
                if rng.random_bool(mutation_rate) {
                    *bit = !*bit;
                }
            }
            grow(&mut child, bounds.min, &mut rng);
            children.push(child);
        }
        let offspring = evaluate(&repair, children, exec)?;
        population.extend(offspring);
        population = survivors(population, params.population_size);
        observe(generation, &teams_of(&population));
    }

    let mut front: Vec<ScoredTeam> = population
        .into_iter()
        .filter(|ind| ind.rank == 0)
        .map(|ind| ScoredTeam {
            team: ind.team,
            scores: ind.scores,
        })
        .collect();
    front.sort_by(front_order);
    Ok(ParetoFront {
        teams: front,
        method: FrontMethod::Nsga2,
        objective_pair,
    })
}

fn teams_of(pop: &[Individual]) -> Vec<Team> {
    pop.iter().map(|i| i.team.clone()).collect()
}

fn genome_of(team: &Team, pool_size: usize) -> Vec<bool> {
    let mut g = vec![false; pool_size];
    for &i in team.members() {
        g[i] = true;
    }
    g
}

fn members_of(genome: &[bool]) -> Vec<usize> {
    genome
        .iter()
        .enumerate()
        .filter_map(|(i, &on)| on.then_some(i))
        .collect()
}

/// Adds random absent agents until the genome reaches `min` members.
fn grow(genome: &mut [bool], min: usize, rng: &mut ChaCha8Rng) {
    let count = genome.iter().filter(|&&b| b).count();
    if count >= min {
        return;
    }
    let absent: Vec<usize> = (0..genome.len()).filter(|&i| !genome[i]).collect();
    for k in sample(rng, absent.len(), min - count) {
        genome[absent[k]] = true;
    }
}

struct Repair<'a> {
    objective: &'a dyn TeamObjective,
    max_size: usize,
    diversity_scale: f64,
}

impl Repair<'_> {
    fn normalized_sum(&self, s: &ObjectiveScores) -> f64 {
        (s.relevance + 1.0) / 2.0 + s.diversity / self.diversity_scale
    }

    /// Drops, one at a time, the member whose removal leaves the best
    /// normalized objective sum, until the team fits. Then scores it.
    fn shrink_and_score(
        &self,
        genome: &[bool],
    ) -> Result<(Team, ObjectiveScores), SelectionError> {
        let mut members = members_of(genome);
        while members.len() > self.max_size {
            let mut best: Option<(usize, f64)> = None;
            for drop in 0..members.len() {
                let rest: Vec<usize> = members
                    .iter()
                    .enumerate()
                    .filter_map(|(k, &m)| (k != drop).then_some(m))
                    .collect();
                let v = self.normalized_sum(&self.objective.evaluate(&rest)?);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((drop, v));
                }
            }
            members.remove(best.expect("team has members").0);
        }
        let scores = self.objective.evaluate(&members)?;
        Ok((Team(members), scores))
    }
}

fn evaluate(
    repair: &Repair<'_>,
    genomes: Vec<Vec<bool>>,
    exec: Execution,
) -> Result<Vec<Individual>, SelectionError> {
    let scored = exec.try_map(&genomes, |g| repair.shrink_and_score(g))?;
    Ok(scored
        .into_iter()
        .map(|(team, scores)| Individual {
            team,
            scores,
            rank: 0,
            crowding: 0.0,
        })
        .collect())
}

fn tournament<'p>(pop: &'p [Individual], rng: &mut ChaCha8Rng) -> &'p Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if a.rank != b.rank {
        return if a.rank < b.rank { a } else { b };
    }
    if b.crowding > a.crowding {
        b
    } else {
        a
    }
}

/// Deduplicates by team, ranks, and keeps the best `size` by (rank, crowding).
fn survivors(pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let mut seen = HashSet::new();
    let mut unique: Vec<Individual> = pool
        .into_iter()
        .filter(|ind| seen.insert(ind.team.clone()))
        .collect();

    let fronts = non_dominated_sort(&unique);
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            unique[i].rank = rank;
        }
        assign_crowding(&mut unique, front);
    }

    let mut order: Vec<usize> = (0..unique.len()).collect();
    order.sort_by(|&x, &y| {
        let (a, b) = (&unique[x], &unique[y]);
        a.rank
            .cmp(&b.rank)
            .then_with(|| b.crowding.total_cmp(&a.crowding))
            .then_with(|| a.team.cmp(&b.team))
    });
    order.truncate(size);
    let mut slots: Vec<Option<Individual>> = unique.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|i| slots[i].take().expect("each index taken once"))
        .collect()
}

fn non_dominated_sort(pop: &[Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&pop[i].scores, &pop[j].scores) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(&pop[j].scores, &pop[i].scores) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        fronts.push(current);
        current = next;
    }
    fronts
}

fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let objectives: [fn(&ObjectiveScores) -> f64; 2] = [|s| s.relevance, |s| s.diversity];
    for value in objectives {
        let mut idx = front.to_vec();
        idx.sort_by(|&a, &b| value(&pop[a].scores).total_cmp(&value(&pop[b].scores)));
        let lo = value(&pop[idx[0]].scores);
        let hi = value(&pop[idx[idx.len() - 1]].scores);
        pop[idx[0]].crowding = f64::INFINITY;
        pop[idx[idx.len() - 1]].crowding = f64::INFINITY;
        if hi <= lo {
            continue;
        }
        for k in 1..idx.len() - 1 {
            let gap = value(&pop[idx[k + 1]].scores) - value(&pop[idx[k - 1]].scores);
            pop[idx[k]].crowding += gap / (hi - lo);
        }
    }
}
