//! Parsing of the formatter's sectioned output into agent records and plan
//! steps, plus the inverse serializer.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::{Map, Value};

use super::{AgentOrigin, AgentSpec, FormatError, SubTask};

pub const REQUIRED_KEYS: [&str; 4] = ["name", "description", "suggestions", "prompt"];

/// A parsed formatter document.
#[derive(Debug, Clone, PartialEq)]
pub struct FormattedOutput {
    pub selected: Vec<AgentSpec>,
    pub created: Vec<AgentSpec>,
    pub subtasks: Vec<SubTask>,
    pub role_feedback: Option<String>,
    pub plan_feedback: Option<String>,
}

impl FormattedOutput {
    /// Selected roles followed by created roles.
    pub fn agents(&self) -> Vec<AgentSpec> {
        self.selected.iter().chain(&self.created).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Selected,
    Created,
    Plan,
    RoleFeedback,
    PlanFeedback,
}

impl Section {
    fn title(self) -> &'static str {
        match self {
            Section::Selected => "Selected Roles List",
            Section::Created => "Created Roles List",
            Section::Plan => "Execution Plan",
            Section::RoleFeedback => "RoleFeedback",
            Section::PlanFeedback => "PlanFeedback",
        }
    }

    fn from_header(header: &str) -> Option<Section> {
        let key: String = header
            .trim()
            .trim_end_matches(':')
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "selectedroleslist" => Some(Section::Selected),
            "createdroleslist" => Some(Section::Created),
            "executionplan" => Some(Section::Plan),
            "rolefeedback" => Some(Section::RoleFeedback),
            "planfeedback" => Some(Section::PlanFeedback),
            _ => None,
        }
    }
}

/// Splits `text` on `##` headers. Returns (header, body) pairs in order.
pub(crate) fn split_sections(text: &str) -> Vec<(&str, String)> {
    let mut out: Vec<(&str, Vec<&str>)> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(header) = trimmed.strip_prefix("##") {
            if !header.starts_with('#') {
                out.push((header.trim(), Vec::new()));
                continue;
            }
        }
        if let Some((_, body)) = out.last_mut() {
            body.push(line);
        }
    }
    out.into_iter()
        .map(|(h, body)| (h, body.join("\n")))
        .collect()
}

fn find_section(sections: &[(&str, String)], which: Section) -> Option<String> {
    sections
        .iter()
        .find(|(h, _)| Section::from_header(h) == Some(which))
        .map(|(_, body)| body.clone())
}

/// Top-level `{...}` spans in `text`, matched with awareness of JSON strings.
fn json_objects(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    out
}

/// Drops commas that directly precede a closing brace or bracket.
fn strip_trailing_commas(json: &str) -> String {
    let mut out = String::with_capacity(json.len());
    let mut in_string = false;
    let mut escaped = false;
    let chars: Vec<char> = json.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn field_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Array(items) => Some(
            items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.trim().to_string(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

/// Parses one JSON blob into an [`AgentSpec`] and checks its invariants.
pub fn parse_role_record(blob: &str, origin: AgentOrigin) -> Result<AgentSpec, FormatError> {
    let cleaned = strip_trailing_commas(blob);
    let value: Value = serde_json::from_str(&cleaned).map_err(|e| FormatError::InvalidJson {
        detail: e.to_string(),
        record: blob.to_string(),
    })?;
    let Value::Object(mut map) = value else {
        return Err(FormatError::InvalidJson {
            detail: "role record is not an object".into(),
            record: blob.to_string(),
        });
    };
    let mut take = |key: &'static str| {
        map.remove(key)
            .as_ref()
            .and_then(field_text)
            .ok_or_else(|| FormatError::MalformedRoleRecord {
                key,
                record: blob.to_string(),
            })
    };
    let spec = AgentSpec {
        name: take("name")?,
        description: take("description")?,
        suggestions: take("suggestions")?,
        prompt: take("prompt")?,
        origin,
        extras: map.into_iter().collect(),
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_roles(body: &str, origin: AgentOrigin) -> Result<Vec<AgentSpec>, FormatError> {
    json_objects(body)
        .into_iter()
        .map(|blob| parse_role_record(blob, origin))
        .collect()
}

fn step_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\.\s*\[([^\]]*)\]\s*:?\s*(.*)$").expect("valid regex"))
}

fn numbered_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+\.\s").expect("valid regex"))
}

/// Parses `N. [ROLE, ...]: STEP` lines. Unnumbered lines continue the previous
/// step; indices follow line order starting at 1.
pub fn parse_plan(body: &str) -> Result<Vec<SubTask>, FormatError> {
    let mut steps: Vec<SubTask> = Vec::new();
    for line in body.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("```") || trimmed == "---" {
            continue;
        }
        if let Some(caps) = step_line().captures(line) {
            let roles: Vec<String> = caps[2]
                .split(',')
                .map(str::trim)
                .filter(|r| !r.is_empty())
                .map(String::from)
                .collect();
            if roles.is_empty() {
                return Err(FormatError::StepWithoutRoles(trimmed.to_string()));
            }
            steps.push(SubTask {
                index: steps.len() + 1,
                description: caps[3].trim().to_string(),
                assigned_roles: roles,
            });
        } else if numbered_line().is_match(line) {
            return Err(FormatError::StepWithoutRoles(trimmed.to_string()));
        } else if let Some(last) = steps.last_mut() {
            if !last.description.is_empty() {
                last.description.push('\n');
            }
            last.description.push_str(trimmed);
        }
    }
    if steps.is_empty() {
        return Err(FormatError::EmptyPlan);
    }
    Ok(steps)
}

fn optional_text(body: Option<String>) -> Option<String> {
    body.map(|b| {
        b.lines()
            .filter(|l| l.trim() != "---")
            .collect::<Vec<_>>()
            .join("\n")
            .trim()
            .to_string()
    })
}

/// Parses a complete formatter document.
pub fn parse_formatted(text: &str) -> Result<FormattedOutput, FormatError> {
    if text.trim().is_empty() {
        return Err(FormatError::EmptyDocument);
    }
    let sections = split_sections(text);
    let required = |which: Section| {
        find_section(&sections, which).ok_or(FormatError::MissingSection(which.title()))
    };
    let selected = parse_roles(&required(Section::Selected)?, AgentOrigin::SelectedExisting)?;
    let created = parse_roles(&required(Section::Created)?, AgentOrigin::Created)?;
    let subtasks = parse_plan(&required(Section::Plan)?)?;
    Ok(FormattedOutput {
        selected,
        created,
        subtasks,
        role_feedback: optional_text(find_section(&sections, Section::RoleFeedback)),
        plan_feedback: optional_text(find_section(&sections, Section::PlanFeedback)),
    })
}

/// A role as a JSON blob: the four standard keys first, then extras.
pub fn role_blob(agent: &AgentSpec) -> String {
    let mut map = Map::new();
    map.insert("name".into(), Value::String(agent.name.clone()));
    map.insert("description".into(), Value::String(agent.description.clone()));
    map.insert("suggestions".into(), Value::String(agent.suggestions.clone()));
    map.insert("prompt".into(), Value::String(agent.prompt.clone()));
    for (k, v) in &agent.extras {
        map.insert(k.clone(), v.clone());
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("JSON values always serialize")
}

/// Blobs joined by `,\n`, or `None` for an empty list.
pub fn role_blobs(agents: &[AgentSpec]) -> String {
    if agents.is_empty() {
        "None".into()
    } else {
        agents.iter().map(role_blob).collect::<Vec<_>>().join(",\n")
    }
}

/// Plan steps as `N. [A, B]: step` lines.
pub fn render_plan(subtasks: &[SubTask]) -> String {
    subtasks
        .iter()
        .map(|s| format!("{}. [{}]: {}", s.index, s.assigned_roles.join(", "), s.description))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Serializes back to the sectioned format accepted by [`parse_formatted`].
pub fn render_formatted(output: &FormattedOutput) -> String {
    let list = |agents: &[AgentSpec]| {
        let body = agents.iter().map(role_blob).collect::<Vec<_>>().join(",\n");
        format!("```\n{body}\n```")
    };
    let mut doc = format!(
        "## Selected Roles List:\n{}\n\n## Created Roles List:\n{}\n\n## Execution Plan:\n{}\n",
        list(&output.selected),
        list(&output.created),
        render_plan(&output.subtasks)
    );
    if let Some(fb) = &output.role_feedback {
        doc.push_str(&format!("\n## RoleFeedback\n{fb}\n"));
    }
    if let Some(fb) = &output.plan_feedback {
        doc.push_str(&format!("\n## PlanFeedback\n{fb}\n"));
    }
    doc
}
