//! JSON-Lines dataset loading.
//!
//! Three line schemas are accepted:
//!
//! * labeled: `{"id", "prompt", "response", "atoms": [{"text", "label": "S" | "NS"}]}`
//! * unlabeled: `{"id", "prompt", "response"}`
//! * conflicts: `{"id", "claim", "contexts": [{"text", "stance": "support" | "conflict"}]}`

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Labeled,
    Unlabeled,
    Conflicts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAtom {
    pub text: String,
    pub supported: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Support,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlineContext {
    pub text: String,
    pub stance: Stance,
}

/// One dataset line. Exactly one of `response` and `claim` is set; gold
/// atoms only come with a response and inline contexts only with a claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub prompt: String,
    pub response: Option<String>,
    pub gold_atoms: Option<Vec<GoldAtom>>,
    pub inline_contexts: Option<Vec<InlineContext>>,
    pub claim: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("dataset has no entries")]
    Empty,
}

fn schema(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Schema {
        line,
        message: message.into(),
    }
}

fn text_field(obj: &Map<String, Value>, field: &str, line: usize) -> Result<String, DatasetError> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(schema(line, format!("field `{field}` is empty"))),
        Some(_) => Err(schema(line, format!("field `{field}` must be a string"))),
        None => Err(schema(line, format!("missing field `{field}`"))),
    }
}

fn array_field<'a>(obj: &'a Map<String, Value>, field: &str, line: usize) -> Result<&'a [Value], DatasetError> {
    match obj.get(field) {
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(schema(line, format!("field `{field}` must be an array"))),
        None => Err(schema(line, format!("missing field `{field}`"))),
    }
}

fn item_object<'a>(
    item: &'a Value,
    field: &str,
    i: usize,
    line: usize,
) -> Result<&'a Map<String, Value>, DatasetError> {
    item.as_object()
        .ok_or_else(|| schema(line, format!("`{field}[{i}]` must be an object")))
}

fn nested_text(
    obj: &Map<String, Value>,
    outer: &str,
    i: usize,
    field: &str,
    line: usize,
) -> Result<String, DatasetError> {
    text_field(obj, field, line).map_err(|e| match e {
        DatasetError::Schema { message, .. } => schema(line, format!("{message} in `{outer}[{i}]`")),
        other => other,
    })
}

fn parse_entry(value: &Value, format: DatasetFormat, line: usize) -> Result<DatasetEntry, DatasetError> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema(line, "entry must be a JSON object"))?;
    let id = text_field(obj, "id", line)?;
    match format {
        DatasetFormat::Labeled | DatasetFormat::Unlabeled => {
            if obj.contains_key("claim") {
                return Err(schema(line, "field `claim` is not allowed alongside a response"));
            }
            let prompt = text_field(obj, "prompt", line)?;
            let response = text_field(obj, "response", line)?;
            let gold_atoms = if format == DatasetFormat::Labeled {
                let items = array_field(obj, "atoms", line)?;
                if items.is_empty() {
                    return Err(schema(line, "field `atoms` is empty"));
                }
                let mut atoms = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let a = item_object(item, "atoms", i, line)?;
                    let text = nested_text(a, "atoms", i, "text", line)?;
                    let supported = match a.get("label").and_then(Value::as_str) {
                        Some("S") => true,
                        Some("NS") => false,
                        Some(other) => {
                            return Err(schema(
                                line,
                                format!("field `label` in `atoms[{i}]` is `{other}`, expected S or NS"),
                            ))
                        }
                        None => return Err(schema(line, format!("missing field `label` in `atoms[{i}]`"))),
                    };
                    atoms.push(GoldAtom { text, supported });
                }
                Some(atoms)
            } else {
                None
            };
            Ok(DatasetEntry {
                id,
                prompt,
                response: Some(response),
                gold_atoms,
                inline_contexts: None,
                claim: None,
            })
        }
        DatasetFormat::Conflicts => {
            if obj.contains_key("response") {
                return Err(schema(line, "field `response` is not allowed alongside a claim"));
            }
            let claim = text_field(obj, "claim", line)?;
            let items = array_field(obj, "contexts", line)?;
            let mut contexts = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let c = item_object(item, "contexts", i, line)?;
                let text = nested_text(c, "contexts", i, "text", line)?;
                let stance = match c.get("stance").and_then(Value::as_str) {
                    Some("support") => Stance::Support,
                    Some("conflict") => Stance::Conflict,
                    Some(other) => {
                        return Err(schema(
                            line,
                            format!("field `stance` in `contexts[{i}]` is `{other}`, expected support or conflict"),
                        ))
                    }
                    None => return Err(schema(line, format!("missing field `stance` in `contexts[{i}]`"))),
                };
                contexts.push(InlineContext { text, stance });
            }
            let prompt = obj
                .get("prompt")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            Ok(DatasetEntry {
                id,
                prompt,
                response: None,
                gold_atoms: None,
                inline_contexts: Some(contexts),
                claim: Some(claim),
            })
        }
    }
}

/// Parses dataset text. Blank lines are skipped; line numbers in errors are
/// one-based. Entry ids must be unique.
pub fn parse_dataset(text: &str, format: DatasetFormat) -> Result<Vec<DatasetEntry>, DatasetError> {
    let mut entries = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| DatasetError::Parse {
            line,
            message: e.to_string(),
        })?;
        let entry = parse_entry(&value, format, line)?;
        if !ids.insert(entry.id.clone()) {
            return Err(schema(line, format!("duplicate id `{}`", entry.id)));
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(entries)
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<DatasetEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, format)
}
