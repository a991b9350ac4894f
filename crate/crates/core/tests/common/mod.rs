#![allow(dead_code)]

use std::path::PathBuf;

use roster::chat::{ChatScript, ScriptEntry, ScriptedChatProvider, Stage};
use roster::embedding::HashEmbedder;
use roster::pipeline::{Engine, RunConfig, SeedPurpose};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn query() -> String {
    std::fs::read_to_string(fixture("query.txt"))
        .unwrap()
        .trim()
        .to_string()
}

pub fn k3_script() -> ChatScript {
    ChatScript::load(&fixture("script_k3.json")).unwrap()
}

pub fn provider(script: ChatScript) -> ScriptedChatProvider {
    ScriptedChatProvider::new(script, 1.0).unwrap()
}

pub fn entry(stage: Stage, round: Option<usize>, attempt: Option<usize>, text: &str) -> ScriptEntry {
    ScriptEntry {
        stage,
        round,
        attempt,
        text: text.to_string(),
        usage: None,
    }
}

/// The fixture config with the script path resolved.
pub fn k3_config() -> RunConfig {
    RunConfig::load(&fixture("run_k3.toml")).unwrap()
}

pub fn engine_with(config: RunConfig, script: ChatScript) -> Engine {
    let embedder = HashEmbedder::new(
        config.seed_for(SeedPurpose::HashEmbedder),
        config.embedding.dimension,
    );
    Engine::new(config, Box::new(provider(script)), Box::new(embedder)).unwrap()
}

pub fn k3_engine(config: RunConfig) -> Engine {
    engine_with(config, k3_script())
}
