//! Seeded synthetic candidate pools for benchmarking and front-quality checks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed, embed_all, HashEmbedder};
use crate::generation::{AgentOrigin, AgentSpec};
use crate::objectives::{ObjectivePair, PoolScorer};
use crate::selection::{
    coverage, generational_distance, nsga2_front, pareto_front_exact, score_all_teams,
    Nsga2Params, SizeBounds,
};
use crate::Execution;

const VOCABULARY: &[&str] = &[
    "algebra", "geometry", "calculus", "statistics", "probability", "proof", "lemma",
    "equation", "python", "testing", "review", "debugging", "compiler", "database",
    "history", "law", "economics", "finance", "biology", "chemistry", "physics",
    "medicine", "genetics", "ecology", "writing", "editing", "poetry", "translation",
    "planning", "logistics", "negotiation", "ethics", "philosophy", "psychology",
    "education", "security", "networking", "hardware", "robotics", "vision", "audio",
    "optimization", "simulation", "forecasting", "verification", "summarization",
    "critique", "synthesis",
];

fn phrase(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| *VOCABULARY.choose(rng).expect("vocabulary is not empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `pool_size` agents with random keyword descriptions, plus a query drawn
/// from the same vocabulary. Identical seeds give identical pools.
pub fn synthetic_pool(pool_size: usize, seed: u64) -> (Vec<AgentSpec>, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let query_len = rng.random_range(4..=8);
    let query = phrase(&mut rng, query_len);
    let agents = (0..pool_size)
        .map(|i| {
            let len = rng.random_range(3..=8);
            let description = phrase(&mut rng, len);
            AgentSpec {
                name: format!("Expert {}", i + 1),
                prompt: format!("You are an expert in {description}, named Expert {}.", i + 1),
                suggestions: String::new(),
                description,
                origin: AgentOrigin::Created,
                extras: Default::default(),
            }
        })
        .collect();
    (agents, query)
}

/// NSGA-II front quality against the exact front on one synthetic pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEvaluation {
    pub pool_size: usize,
    pub seed: u64,
    pub team_count: usize,
    pub exact_front_size: usize,
    pub approx_front_size: usize,
    pub coverage: f64,
    pub generational_distance: f64,
}

/// Builds `synthetic_pool(pool_size, seed)`, embeds it with a hash embedder
/// seeded by `seed`, and compares `nsga2_front` against exhaustive
/// enumeration under the relevance/Vendi pair.
pub fn evaluate_nsga2(
    pool_size: usize,
    seed: u64,
    bounds: SizeBounds,
    params: &Nsga2Params,
    exec: Execution,
) -> crate::Result<FrontEvaluation> {
    let (agents, query) = synthetic_pool(pool_size, seed);
    let embedder = HashEmbedder::with_seed(seed);
    let texts: Vec<String> = agents.iter().map(|a| a.description.clone()).collect();
    let pool = embed_all(&texts, &embedder, exec)?;
    let query = embed(&query, &embedder)?;
    let pair = ObjectivePair::RelVendi;
    let scorer = PoolScorer::new(&pool, &query, pair)?;

    let scored = score_all_teams(&scorer, pool_size, bounds, exec)?;
    let exact = pareto_front_exact(&scored, pair)?;
    let approx = nsga2_front(&scorer, pool_size, bounds, pair, params, exec)?;
    Ok(FrontEvaluation {
        pool_size,
        seed,
        team_count: scored.len(),
        exact_front_size: exact.len(),
        approx_front_size: approx.len(),
        coverage: coverage(&approx, &exact)?,
        generational_distance: generational_distance(&approx, &exact)?,
    })
}
