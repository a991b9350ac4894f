//! End-to-end runs: generation, scoring, front construction, selection,
//! persistence and export.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::chat::{ChatProvider, ScriptedChatProvider, TokenUsage};
use crate::embedding::{self, Embedding, EmbeddingProvider, HashEmbedder};
use crate::generation::{self, GenerationError, GenerationSettings};
use crate::objectives::{agent_text, PoolScorer};
use crate::selection::{
    apply_strategy, nsga2_front, pareto_front_exact, score_all_teams, team_count, ParetoFront,
    ScoredTeam, StrategyInputs,
};
use crate::selector::{ChatSelector, SelectorSettings};
use crate::Error;

mod config;
mod export;
mod record;

pub use config::{
    derive_seed, ChatConfig, ChatKind, EmbeddingConfig, EmbeddingKind, RunConfig, SeedPurpose,
};
pub use export::{
    export_team, import_team, ExportedAgent, TeamDocument, TeamProvenance, TEAM_SCHEMA,
    TEAM_SCHEMA_VERSION,
};
pub use record::{
    token_report, ProviderInfo, QuerySet, RunRecord, RunStatus, RunStore, SelectionInfo,
    RUN_SCHEMA_VERSION,
};

/// Environment variable that overrides `embedding.api_key`.
pub const EMBEDDING_TOKEN_ENV: &str = "ROSTER_EMBEDDING_TOKEN";

/// Several queries become one numbered task description.
pub fn joint_context(queries: &[String]) -> String {
    match queries {
        [single] => single.clone(),
        many => many
            .iter()
            .enumerate()
            .map(|(i, q)| format!("Query {}: {q}", i + 1))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

/// Deterministic id from the config snapshot and the queries.
pub fn run_id(config: &RunConfig, queries: &QuerySet) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(serde_json::to_vec(queries).expect("queries serialize"));
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

#[derive(Clone, Copy, PartialEq)]
enum Until {
    Front,
    Selection,
}

pub struct Engine {
    config: RunConfig,
    chat: Box<dyn ChatProvider>,
    embedder: Box<dyn EmbeddingProvider>,
    store: Option<RunStore>,
}

impl Engine {
    pub fn new(
        config: RunConfig,
        chat: Box<dyn ChatProvider>,
        embedder: Box<dyn EmbeddingProvider>,
    ) -> crate::Result<Self> {
        config.bounds()?;
        if config.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        config.nsga2.validate()?;
        Ok(Engine {
            config,
            chat,
            embedder,
            store: None,
        })
    }

    /// Builds providers and the run store described by `config`.
    pub fn from_config(config: RunConfig) -> crate::Result<Self> {
        config.validate()?;
        let chat = build_chat(&config)?;
        let embedder = build_embedder(&config)?;
        let store = config.run_log.clone().map(RunStore::new);
        let mut engine = Engine::new(config, chat, embedder)?;
        engine.store = store;
        Ok(engine)
    }

    pub fn with_store(mut self, store: RunStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn store(&self) -> Option<&RunStore> {
        self.store.as_ref()
    }

    /// Generates a pool for `query`, scores it and selects a team.
    pub fn init_for_query(&self, query: &str) -> crate::Result<RunRecord> {
        self.init_transferable(vec![query.to_string()], vec![query.to_string()])
    }

    /// Generation over the `generation` queries jointly; relevance against the
    /// renormalized centroid of the `selection` query embeddings.
    pub fn init_transferable(
        &self,
        generation: Vec<String>,
        selection: Vec<String>,
    ) -> crate::Result<RunRecord> {
        self.run(QuerySet { generation, selection }, Until::Selection)
    }

    /// Like [`Engine::init_transferable`] but stops after the front.
    pub fn front_only(
        &self,
        generation: Vec<String>,
        selection: Vec<String>,
    ) -> crate::Result<RunRecord> {
        self.run(QuerySet { generation, selection }, Until::Front)
    }

    /// Runs independent jobs on up to `parallelism` threads. Results follow
    /// job order.
    pub fn init_many(
        &self,
        jobs: &[QuerySet],
        parallelism: usize,
    ) -> Vec<crate::Result<RunRecord>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<crate::Result<RunRecord>>>> =
            Mutex::new((0..jobs.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..parallelism.clamp(1, jobs.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let out = self.run(job.clone(), Until::Selection);
                    results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(out);
                });
            }
        });
        results
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|r| r.expect("every job ran"))
            .collect()
    }

    fn persist(&self, record: &RunRecord) -> crate::Result<()> {
        match &self.store {
            Some(store) => store.append(record),
            None => Ok(()),
        }
    }

    fn fail(
        &self,
        mut record: RunRecord,
        stage: &str,
        round: Option<usize>,
        error: Error,
    ) -> Error {
        record.token_usage = token_report(&record);
        record.finished_at = Some(now());
        record.status = RunStatus::Failed {
            stage: stage.to_string(),
            round,
            message: error.to_string(),
        };
        if let Err(persist_error) = self.persist(&record) {
            return persist_error;
        }
        Error::RunFailed {
            stage: stage.to_string(),
            record: Box::new(record),
            source: Box::new(error),
        }
    }

    fn run(&self, queries: QuerySet, until: Until) -> crate::Result<RunRecord> {
        if queries.generation.is_empty()
            || queries.selection.is_empty()
            || queries.generation.iter().chain(&queries.selection).any(|q| q.trim().is_empty())
        {
            return Err(GenerationError::EmptyQuery.into());
        }
        let mut snapshot = self.config.clone();
        snapshot.chat.api_key = None;
        snapshot.embedding.api_key = None;
        let cfg = &self.config;

        let mut record = RunRecord {
            schema_version: RUN_SCHEMA_VERSION,
            run_id: run_id(&snapshot, &queries),
            queries,
            config: snapshot,
            rounds: Vec::new(),
            failed_round_calls: Vec::new(),
            candidate_pool: Vec::new(),
            scored_teams: None,
            front: None,
            chosen_team: None,
            selection: None,
            selector_calls: Vec::new(),
            token_usage: TokenUsage::default(),
            started_at: now(),
            finished_at: None,
            providers: ProviderInfo {
                chat: self.chat.descriptor().clone(),
                embedding: self.embedder.descriptor().clone(),
            },
            status: RunStatus::Running,
        };

        let settings = GenerationSettings {
            temperature: cfg.temperature,
            formatter_retries: cfg.formatter_retries,
        };
        let task = joint_context(&record.queries.generation);
        let outcome = match generation::run_generation(&task, cfg.rounds, &*self.chat, settings) {
            Ok(o) => o,
            Err(e) => {
                let round = match &e {
                    GenerationError::Round { round, .. } => Some(*round),
                    _ => None,
                };
                if let Some(partial) = e.partial() {
                    record.rounds = partial.rounds.clone();
                    record.failed_round_calls = partial.failed_round_calls.clone();
                }
                return Err(self.fail(record, "generation", round, e.into()));
            }
        };
        record.rounds = outcome.rounds;
        record.candidate_pool = outcome.candidate_pool;
        record.token_usage = token_report(&record);

        let scorer = match self.scorer(&record) {
            Ok(s) => s,
            Err(e) => return Err(self.fail(record, "embedding", None, e)),
        };
        let (scored, front) = match self.front(&scorer) {
            Ok(v) => v,
            Err(e) => return Err(self.fail(record, "front", None, e)),
        };
        record.scored_teams = scored;
        record.front = Some(front);

        if until == Until::Selection {
            let context = joint_context(&record.queries.selection);
            let mut picker = ChatSelector {
                provider: &*self.chat,
                pool: &record.candidate_pool,
                context: &context,
                settings: SelectorSettings {
                    temperature: cfg.temperature,
                    retries: cfg.selector_retries,
                    show_scores: cfg.selector_shows_scores,
                },
                last: None,
            };
            let front = record.front.as_ref().expect("front was just set");
            let inputs = StrategyInputs {
                pool_size: record.candidate_pool.len(),
                scored_teams: record.scored_teams.as_deref(),
                front,
                rng_seed: cfg.seed_for(SeedPurpose::RandomStrategy),
            };
            let picked = apply_strategy(cfg.strategy, &inputs, &scorer, Some(&mut picker));
            let last = picker.last.take();
            if let Some(sel) = &last {
                record.selector_calls = sel.calls.clone();
            }
            let chosen: ScoredTeam = match picked {
                Ok(t) => t,
                Err(e) => return Err(self.fail(record, "selection", None, e)),
            };
            record.selection = Some(SelectionInfo {
                strategy: cfg.strategy,
                group_number: last.as_ref().and_then(|s| s.group_number),
                fallback: last.as_ref().is_some_and(|s| s.fallback),
            });
            record.chosen_team = Some(chosen);
        }

        record.token_usage = token_report(&record);
        record.finished_at = Some(now());
        record.status = RunStatus::Completed;
        self.persist(&record)?;
        Ok(record)
    }

    fn scorer(&self, record: &RunRecord) -> crate::Result<PoolScorer> {
        let cfg = &self.config;
        let texts: Vec<String> = record
            .candidate_pool
            .iter()
            .map(|a| agent_text(a, cfg.embed_policy))
            .collect();
        let pool = embedding::embed_all(&texts, &*self.embedder, cfg.execution)?;
        let query_vectors =
            embedding::embed_all(&record.queries.selection, &*self.embedder, cfg.execution)?;
        let query = Embedding::centroid(&query_vectors)?;
        Ok(PoolScorer::new(&pool, &query, cfg.objective_pair)?)
    }

    fn front(&self, scorer: &PoolScorer) -> crate::Result<(Option<Vec<ScoredTeam>>, ParetoFront)> {
        let cfg = &self.config;
        let bounds = cfg.bounds()?;
        let pool_size = scorer.pool_size();
        if team_count(pool_size, bounds) <= cfg.exact_enumeration_cap as u128 {
            let scored = score_all_teams(scorer, pool_size, bounds, cfg.execution)?;
            let front = pareto_front_exact(&scored, cfg.objective_pair)?;
            Ok((Some(scored), front))
        } else {
            let front = nsga2_front(
                scorer,
                pool_size,
                bounds,
                cfg.objective_pair,
                &cfg.nsga2_params(),
                cfg.execution,
            )?;
            Ok((None, front))
        }
    }
}

#[cfg(feature = "http")]
fn token(env: &str, configured: &Option<String>) -> Option<String> {
    std::env::var(env).ok().filter(|t| !t.is_empty()).or_else(|| configured.clone())
}

fn build_chat(config: &RunConfig) -> crate::Result<Box<dyn ChatProvider>> {
    match config.chat.kind {
        ChatKind::Scripted => {
            let path = config
                .chat
                .script
                .as_ref()
                .ok_or_else(|| Error::Config("chat.script is required".into()))?;
            Ok(Box::new(ScriptedChatProvider::from_file(path, config.temperature)?))
        }
        #[cfg(feature = "http")]
        ChatKind::Http => {
            let chat = &config.chat;
            let provider = crate::chat::HttpChatProvider::new(
                chat.endpoint.clone().unwrap_or_default(),
                chat.model.clone().unwrap_or_default(),
                config.temperature,
                token(crate::chat::CHAT_TOKEN_ENV, &chat.api_key),
            )?;
            Ok(match chat.requests_per_minute {
                Some(rpm) => Box::new(crate::chat::RateLimited::per_minute(provider, rpm)),
                None => Box::new(provider),
            })
        }
        #[cfg(not(feature = "http"))]
        ChatKind::Http => Err(Error::Config("built without the `http` feature".into())),
    }
}

fn build_embedder(config: &RunConfig) -> crate::Result<Box<dyn EmbeddingProvider>> {
    let emb = &config.embedding;
    match emb.kind {
        EmbeddingKind::Hash => Ok(Box::new(HashEmbedder::new(
            config.seed_for(SeedPurpose::HashEmbedder),
            emb.dimension,
        ))),
        #[cfg(feature = "http")]
        EmbeddingKind::Http => Ok(Box::new(embedding::HttpEmbedder::new(
            emb.endpoint.clone().unwrap_or_default(),
            emb.model.clone().unwrap_or_default(),
            emb.dimension,
            token(EMBEDDING_TOKEN_ENV, &emb.api_key),
        ))),
        #[cfg(not(feature = "http"))]
        EmbeddingKind::Http => Err(Error::Config("built without the `http` feature".into())),
    }
}
