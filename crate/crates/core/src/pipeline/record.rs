use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::chat::{CallRecord, ChatProviderDescriptor, TokenUsage};
use crate::embedding::EmbeddingProviderDescriptor;
use crate::generation::{AgentSpec, GenerationRound};
use crate::selection::{ParetoFront, ScoredTeam, SelectionStrategy};
use crate::Error;

pub const RUN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    /// Queries fed to the planner (`x`).
    pub generation: Vec<String>,
    /// Queries used for relevance and shown to the selector (`y`).
    pub selection: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub chat: ChatProviderDescriptor,
    pub embedding: EmbeddingProviderDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed {
        stage: String,
        round: Option<usize>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionInfo {
    pub strategy: SelectionStrategy,
    /// Group picked by the selector model, if one was asked.
    pub group_number: Option<usize>,
    /// The selector's answer was unusable and the knee point was taken.
    pub fallback: bool,
}

/// Everything one run produced. Appended to the run log as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub queries: QuerySet,
    pub config: RunConfig,
    pub rounds: Vec<GenerationRound>,
    /// Calls made by a generation round that did not complete.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_round_calls: Vec<CallRecord>,
    pub candidate_pool: Vec<AgentSpec>,
    /// Every enumerated team; absent when the front was approximated.
    pub scored_teams: Option<Vec<ScoredTeam>>,
    pub front: Option<ParetoFront>,
    pub chosen_team: Option<ScoredTeam>,
    pub selection: Option<SelectionInfo>,
    pub selector_calls: Vec<CallRecord>,
    pub token_usage: TokenUsage,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub providers: ProviderInfo,
    pub status: RunStatus,
}

impl RunRecord {
    /// Every provider call in the record, in issue order.
    pub fn all_calls(&self) -> impl Iterator<Item = &CallRecord> {
        self.rounds
            .iter()
            .flat_map(|r| &r.calls)
            .chain(&self.failed_round_calls)
            .chain(&self.selector_calls)
    }

    /// Names of the chosen team's members.
    pub fn chosen_names(&self) -> Vec<&str> {
        self.chosen_team
            .iter()
            .flat_map(|t| t.team.members())
            .filter_map(|&i| self.candidate_pool.get(i))
            .map(|a| a.name.as_str())
            .collect()
    }

    /// A copy with timestamps blanked, for comparing runs.
    pub fn without_timestamps(&self) -> RunRecord {
        RunRecord {
            started_at: String::new(),
            finished_at: None,
            ..self.clone()
        }
    }
}

/// Prompt/completion totals per stage, recomputed from the recorded calls.
pub fn token_report(record: &RunRecord) -> TokenUsage {
    TokenUsage::from_calls(record.all_calls())
}

/// Append-only JSONL run log. Appends from concurrent runs are serialized.
#[derive(Debug)]
pub struct RunStore {
    path: PathBuf,
    lock: Mutex<()>,
}

impl RunStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        RunStore {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &RunRecord) -> crate::Result<()> {
        let mut line =
            serde_json::to_string(record).map_err(|e| Error::json("serializing run record", e))?;
        line.push('\n');
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn load_all(path: &Path) -> crate::Result<Vec<RunRecord>> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), e))?;
            out.push(record);
        }
        Ok(out)
    }

    /// The last record with `run_id`, or the last record when `run_id` is
    /// `None`.
    pub fn find(path: &Path, run_id: Option<&str>) -> crate::Result<RunRecord> {
        Self::load_all(path)?
            .into_iter()
            .rev()
            .find(|r| run_id.is_none_or(|id| r.run_id == id))
            .ok_or_else(|| {
                Error::NotFound(match run_id {
                    Some(id) => format!("run {id} in {}", path.display()),
                    None => format!("any run in {}", path.display()),
                })
            })
    }
}
