use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::DEFAULT_DIMENSION;
use crate::generation::{DEFAULT_FORMATTER_RETRIES, DEFAULT_ROUNDS};
use crate::objectives::{ObjectivePair, TextPolicy};
use crate::selection::{Nsga2Params, SelectionStrategy, SizeBounds, DEFAULT_EXACT_ENUMERATION_CAP};
use crate::selector::DEFAULT_SELECTOR_RETRIES;
use crate::{Error, Execution};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatKind {
    #[default]
    Scripted,
    Http,
}

impl std::str::FromStr for ChatKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scripted" => Ok(ChatKind::Scripted),
            "http" => Ok(ChatKind::Http),
            other => Err(format!("unknown provider `{other}` (expected scripted or http)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    pub kind: ChatKind,
    /// Script file for the scripted provider.
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Overridden by the `ROSTER_CHAT_TOKEN` environment variable.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub requests_per_minute: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    #[default]
    Hash,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Overridden by the `ROSTER_EMBEDDING_TOKEN` environment variable.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: EmbeddingKind::Hash,
            dimension: DEFAULT_DIMENSION,
            endpoint: None,
            model: None,
            api_key: None,
        }
    }
}

/// Everything a run depends on. Loaded from TOML; every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Generation rounds `K`.
    pub rounds: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub temperature: f64,
    pub objective_pair: ObjectivePair,
    pub strategy: SelectionStrategy,
    /// Above this many candidate teams, the front is approximated with NSGA-II.
    pub exact_enumeration_cap: u64,
    /// `nsga2.seed` is ignored; the run derives it from `seed`.
    pub nsga2: Nsga2Params,
    pub embed_policy: TextPolicy,
    /// Master seed for NSGA-II, the random strategy and the hash embedder.
    pub seed: u64,
    pub selector_shows_scores: bool,
    pub formatter_retries: usize,
    pub selector_retries: usize,
    pub execution: Execution,
    /// JSONL file receiving one record per run; relative to the config file.
    pub run_log: Option<PathBuf>,
    pub chat: ChatConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rounds: DEFAULT_ROUNDS,
            n_min: 1,
            n_max: 5,
            temperature: 1.0,
            objective_pair: ObjectivePair::default(),
            strategy: SelectionStrategy::default(),
            exact_enumeration_cap: DEFAULT_EXACT_ENUMERATION_CAP as u64,
            nsga2: Nsga2Params::default(),
            embed_policy: TextPolicy::default(),
            seed: 0,
            selector_shows_scores: false,
            formatter_retries: DEFAULT_FORMATTER_RETRIES,
            selector_retries: DEFAULT_SELECTOR_RETRIES,
            execution: Execution::default(),
            run_log: None,
            chat: ChatConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

/// Purposes that receive their own seed derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Nsga2,
    RandomStrategy,
    HashEmbedder,
}

impl SeedPurpose {
    fn label(self) -> &'static [u8] {
        match self {
            SeedPurpose::Nsga2 => b"nsga2",
            SeedPurpose::RandomStrategy => b"random-strategy",
            SeedPurpose::HashEmbedder => b"hash-embedder",
        }
    }
}

/// `sha256(master_le || label)`, first 8 bytes little-endian.
pub fn derive_seed(master: u64, purpose: SeedPurpose) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.label());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

impl RunConfig {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.chat.script);
        fix(&mut self.run_log);
    }

    pub fn bounds(&self) -> crate::Result<SizeBounds> {
        Ok(SizeBounds::new(self.n_min, self.n_max)?)
    }

    pub fn seed_for(&self, purpose: SeedPurpose) -> u64 {
        derive_seed(self.seed, purpose)
    }

    /// NSGA-II parameters with the derived seed applied.
    pub fn nsga2_params(&self) -> Nsga2Params {
        Nsga2Params {
            seed: self.seed_for(SeedPurpose::Nsga2),
            ..self.nsga2.clone()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        self.bounds()?;
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if self.exact_enumeration_cap == 0 {
            return Err(Error::Config("exact_enumeration_cap must be positive".into()));
        }
        if self.embedding.dimension == 0 {
            return Err(Error::Config("embedding.dimension must be positive".into()));
        }
        self.nsga2.validate()?;
        match self.chat.kind {
            ChatKind::Scripted if self.chat.script.is_none() => {
                Err(Error::Config("chat.script is required for the scripted provider".into()))
            }
            ChatKind::Http if self.chat.endpoint.is_none() || self.chat.model.is_none() => Err(
                Error::Config("chat.endpoint and chat.model are required for http".into()),
            ),
            _ => Ok(()),
        }?;
        if self.embedding.kind == EmbeddingKind::Http
            && (self.embedding.endpoint.is_none() || self.embedding.model.is_none())
        {
            return Err(Error::Config(
                "embedding.endpoint and embedding.model are required for http".into(),
            ));
        }
        Ok(())
    }
}
