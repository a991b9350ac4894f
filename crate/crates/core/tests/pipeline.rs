mod common;

use common::{engine_with, entry, k3_config, k3_engine, k3_script, query};
use roster::chat::{Stage, StageKind, TokenUsage};
use roster::embedding::{cosine, embed, Embedding, HashEmbedder};
use roster::objectives::{agent_text, relevance};
use roster::pipeline::{
    joint_context, token_report, QuerySet, RunStatus, RunStore, SeedPurpose,
};
use roster::selection::{FrontMethod, SelectionError, SelectionStrategy, Team};
use roster::Error;

#[test]
fn k3_run_end_to_end() {
    let record = k3_engine(k3_config()).init_for_query(&query()).unwrap();
    assert_eq!(record.status, RunStatus::Completed);
    assert_eq!(record.candidate_pool.len(), 4);
    // Σ_{r=1..4} C(4, r)
    assert_eq!(record.scored_teams.as_ref().unwrap().len(), 15);
    let front = record.front.as_ref().unwrap();
    assert_eq!(front.method, FrontMethod::Exact);
    assert_eq!(front.len(), 6);
    assert_eq!(record.chosen_names(), ["Planetary Scientist", "Data Verifier"]);
    let sel = record.selection.unwrap();
    assert_eq!(sel.group_number, Some(3));
    assert!(!sel.fallback);
    assert_eq!(record.selector_calls.len(), 1);
    assert_eq!(record.run_id.len(), 16);
}

#[test]
fn token_totals_follow_provider_usage() {
    let record = k3_engine(k3_config()).init_for_query(&query()).unwrap();
    let u = &record.token_usage;
    assert_eq!((u.prompt_tokens, u.completion_tokens), (1740, 510));
    assert!(u.is_consistent());
    assert_eq!(u.stage(StageKind::Planner).prompt_tokens, 300);
    assert_eq!(u.stage(StageKind::Formatter).prompt_tokens, 600);
    assert_eq!(u.stage(StageKind::Observer).prompt_tokens, 540);
    assert_eq!(u.stage(StageKind::Selector).completion_tokens, 10);
    // Independent replay over the raw call list.
    let (p, c) = record.all_calls().fold((0, 0), |(p, c), call| {
        (p + call.usage.prompt_tokens, c + call.usage.completion_tokens)
    });
    assert_eq!((p, c), (1740, 510));
    assert_eq!(token_report(&record), *u);
}

#[test]
fn token_report_lists_idle_stages() {
    let mut config = k3_config();
    config.strategy = SelectionStrategy::None;
    let record = k3_engine(config).init_for_query(&query()).unwrap();
    let usage = token_report(&record);
    assert_eq!(usage.stage(StageKind::Selector), TokenUsage::default().stage(StageKind::Selector));
    assert_eq!(usage.stage(StageKind::Selector).prompt_tokens, 0);
    let json = serde_json::to_value(&usage).unwrap();
    assert!(json.to_string().contains("selector"));
}

#[test]
fn strategy_none_returns_full_pool() {
    let mut config = k3_config();
    config.strategy = SelectionStrategy::None;
    let record = k3_engine(config).init_for_query(&query()).unwrap();
    assert_eq!(record.chosen_team.unwrap().team, Team::full(4));
    assert!(record.selector_calls.is_empty());
}

#[test]
fn repeated_runs_are_identical_modulo_timestamps() {
    let a = k3_engine(k3_config()).init_for_query(&query()).unwrap();
    let b = k3_engine(k3_config()).init_for_query(&query()).unwrap();
    assert_eq!(a.without_timestamps(), b.without_timestamps());
}

#[test]
fn single_query_transfer_equals_init_for_query() {
    let q = query();
    let a = k3_engine(k3_config()).init_for_query(&q).unwrap();
    let b = k3_engine(k3_config())
        .init_transferable(vec![q.clone()], vec![q.clone()])
        .unwrap();
    assert_eq!(a.without_timestamps(), b.without_timestamps());
}

#[test]
fn identical_selection_queries_collapse_to_one() {
    let q = query();
    let one = k3_engine(k3_config())
        .init_transferable(vec![q.clone()], vec![q.clone()])
        .unwrap();
    let ten = k3_engine(k3_config())
        .init_transferable(vec![q.clone()], vec![q.clone(); 10])
        .unwrap();
    let (f1, f10) = (one.front.unwrap(), ten.front.unwrap());
    assert_eq!(f1.len(), f10.len());
    for (a, b) in f1.teams.iter().zip(&f10.teams) {
        assert_eq!(a.team, b.team);
        assert!((a.scores.relevance - b.scores.relevance).abs() < 1e-12);
        assert_eq!(a.scores.diversity, b.scores.diversity);
    }
    assert_eq!(one.chosen_team.unwrap().team, ten.chosen_team.unwrap().team);
}

#[test]
fn multi_query_generation_uses_numbered_context() {
    let gen = vec!["first question".to_string(), "second question".to_string()];
    let record = k3_engine(k3_config())
        .init_transferable(gen.clone(), vec![query()])
        .unwrap();
    let planner = &record.rounds[0].calls[0].prompt;
    assert!(planner.contains(&joint_context(&gen)));
    assert!(planner.contains("Query 2: second question"));
}

#[test]
fn relevance_uses_the_selection_centroid() {
    let config = k3_config();
    let embedder = HashEmbedder::new(config.seed_for(SeedPurpose::HashEmbedder), 64);
    let sel = vec![
        "moons of jupiter and saturn".to_string(),
        "history of telescope discoveries".to_string(),
    ];
    let record = k3_engine(config.clone())
        .init_transferable(vec![query()], sel.clone())
        .unwrap();
    let qs: Vec<Embedding> = sel.iter().map(|q| embed(q, &embedder).unwrap()).collect();
    let centroid = Embedding::centroid(&qs).unwrap();
    for st in record.scored_teams.as_ref().unwrap() {
        let members: Vec<Embedding> = st
            .team
            .members()
            .iter()
            .map(|&i| embed(&agent_text(&record.candidate_pool[i], config.embed_policy), &embedder).unwrap())
            .collect();
        let refs: Vec<&Embedding> = members.iter().collect();
        let oracle = members.iter().map(|m| cosine(m, &centroid).unwrap()).sum::<f64>()
            / members.len() as f64;
        assert!((st.scores.relevance - oracle).abs() < 1e-12);
        assert!((relevance(&refs, &centroid).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn records_round_trip_through_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let engine = k3_engine(k3_config()).with_store(RunStore::new(&log));
    let a = engine.init_for_query(&query()).unwrap();
    let b = engine.init_for_query("A second unrelated question").unwrap();
    let loaded = RunStore::load_all(&log).unwrap();
    assert_eq!(loaded, vec![a.clone(), b.clone()]);
    assert_eq!(RunStore::find(&log, None).unwrap(), b);
    assert_eq!(RunStore::find(&log, Some(&a.run_id)).unwrap(), a);
    assert!(matches!(RunStore::find(&log, Some("nope")), Err(Error::NotFound(_))));
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn failed_runs_persist_partial_records() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let mut script = k3_script();
    script
        .responses
        .retain(|e| !(e.stage == Stage::Formatter && e.round == Some(3)));
    script
        .responses
        .push(entry(Stage::Formatter, Some(3), None, "no sections at all"));
    let engine = engine_with(k3_config(), script).with_store(RunStore::new(&log));
    let err = engine.init_for_query(&query()).unwrap_err();
    let Error::RunFailed { stage, record, .. } = &err else {
        panic!("unexpected {err:?}");
    };
    assert_eq!(stage, "generation");
    assert_eq!(record.rounds.len(), 2);
    assert!(!record.failed_round_calls.is_empty());
    assert!(matches!(
        &record.status,
        RunStatus::Failed { stage, round: Some(3), .. } if stage == "generation"
    ));
    assert!(record.chosen_team.is_none());
    let stored = RunStore::find(&log, None).unwrap();
    assert_eq!(&stored, record.as_ref());
    assert_eq!(stored.token_usage, token_report(&stored));
}

#[test]
fn approximated_front_rejects_exhaustive_strategies() {
    let mut config = k3_config();
    config.exact_enumeration_cap = 1;
    config.nsga2.population_size = 20;
    config.nsga2.generations = 10;
    let record = k3_engine(config.clone()).init_for_query(&query()).unwrap();
    assert_eq!(record.front.as_ref().unwrap().method, FrontMethod::Nsga2);
    assert!(record.scored_teams.is_none());
    assert!(record.chosen_team.is_some());

    config.strategy = SelectionStrategy::GlobalWorst;
    let err = k3_engine(config).init_for_query(&query()).unwrap_err();
    let Error::RunFailed { stage, source, .. } = err else {
        panic!("expected a failed run");
    };
    assert_eq!(stage, "selection");
    assert!(matches!(
        *source,
        Error::Selection(SelectionError::StrategyUnavailable(_))
    ));
}

#[test]
fn front_only_skips_selection() {
    let record = k3_engine(k3_config())
        .front_only(vec![query()], vec![query()])
        .unwrap();
    assert!(record.front.is_some());
    assert!(record.chosen_team.is_none());
    assert!(record.selector_calls.is_empty());
}

#[test]
fn init_many_matches_individual_runs() {
    let jobs: Vec<QuerySet> = ["alpha question", "beta question", "gamma question"]
        .iter()
        .map(|q| QuerySet {
            generation: vec![q.to_string()],
            selection: vec![q.to_string()],
        })
        .collect();
    let engine = k3_engine(k3_config());
    let batch = engine.init_many(&jobs, 3);
    assert_eq!(batch.len(), 3);
    for (job, result) in jobs.iter().zip(batch) {
        let single = k3_engine(k3_config())
            .init_transferable(job.generation.clone(), job.selection.clone())
            .unwrap();
        assert_eq!(result.unwrap().without_timestamps(), single.without_timestamps());
    }
}

#[test]
fn empty_queries_are_rejected() {
    let engine = k3_engine(k3_config());
    assert!(engine.init_for_query("  ").is_err());
    assert!(engine.init_transferable(vec![query()], vec![]).is_err());
}
