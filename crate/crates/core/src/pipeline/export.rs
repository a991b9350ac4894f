use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::objectives::ObjectiveScores;
use crate::selection::{FrontMethod, SelectionStrategy};
use crate::Error;

pub const TEAM_SCHEMA_VERSION: u32 = 1;

/// JSON Schema for [`TeamDocument`].
pub const TEAM_SCHEMA: &str = include_str!("../../schemas/team-v1.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedAgent {
    pub name: String,
    pub description: String,
    pub suggestions: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamProvenance {
    pub run_id: String,
    pub strategy: SelectionStrategy,
    pub method: Option<FrontMethod>,
}

/// A selected team in a form other multi-agent frameworks can load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamDocument {
    pub schema_version: u32,
    pub queries: Vec<String>,
    /// Members in chosen-team order.
    pub agents: Vec<ExportedAgent>,
    pub scores: ObjectiveScores,
    pub provenance: TeamProvenance,
}

impl TeamDocument {
    pub fn from_record(record: &RunRecord) -> crate::Result<Self> {
        let chosen = record
            .chosen_team
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("chosen team in run {}", record.run_id)))?;
        let agents = chosen
            .team
            .members()
            .iter()
            .map(|&i| {
                record
                    .candidate_pool
                    .get(i)
                    .map(|a| ExportedAgent {
                        name: a.name.clone(),
                        description: a.description.clone(),
                        suggestions: a.suggestions.clone(),
                        prompt: a.prompt.clone(),
                    })
                    .ok_or_else(|| Error::NotFound(format!("pool member {i}")))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(TeamDocument {
            schema_version: TEAM_SCHEMA_VERSION,
            queries: record.queries.selection.clone(),
            agents,
            scores: chosen.scores,
            provenance: TeamProvenance {
                run_id: record.run_id.clone(),
                strategy: record.config.strategy,
                method: record.front.as_ref().map(|f| f.method),
            },
        })
    }
}

/// Writes the chosen team of `record` to `destination` as pretty JSON.
pub fn export_team(record: &RunRecord, destination: &Path) -> crate::Result<TeamDocument> {
    let doc = TeamDocument::from_record(record)?;
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::json("team document", e))?;
    std::fs::write(destination, text + "\n").map_err(|e| Error::io(destination, e))?;
    Ok(doc)
}

pub fn import_team(path: &Path) -> crate::Result<TeamDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: TeamDocument = serde_json::from_str(&text)
        .map_err(|e| Error::json(format!("team document {}", path.display()), e))?;
    if doc.schema_version != TEAM_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported team schema_version {}",
            doc.schema_version
        )));
    }
    Ok(doc)
}
