use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenging: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl PromptRecord {
    pub fn is_challenging(&self) -> bool {
        self.challenging == Some(true)
    }
}

fn id_field(obj: &Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_record(line: &str, line_no: usize) -> std::result::Result<PromptRecord, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = v.as_object().ok_or("expected a JSON object")?;
    let text = match (obj.get("text"), obj.get("prompt")) {
        (Some(Value::String(t)), _) => t.clone(),
        (_, Some(Value::Object(p))) => match p.get("text") {
            Some(Value::String(t)) => t.clone(),
            _ => return Err("prompt object has no string field text".into()),
        },
        _ => return Err("record has neither text nor prompt.text".into()),
    };
    let id = id_field(obj, "id")
        .or_else(|| id_field(obj, "filename"))
        .unwrap_or_else(|| line_no.to_string());
    let challenging = match obj.get("challenging") {
        None | Some(Value::Null) => None,
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => return Err("field challenging must be a boolean".into()),
    };
    let domain = match obj.get("domain") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("field domain must be a string".into()),
    };
    Ok(PromptRecord {
        id,
        text,
        challenging,
        domain,
    })
}

/// Parses flat `{id, text}` or nested `{prompt: {text}, challenging}`
/// records. Records without an `id` fall back to `filename`, then to the
/// line number. The filter runs after parsing.
pub fn parse_prompts<R: BufRead>(
    reader: R,
    filter: Option<&dyn Fn(&PromptRecord) -> bool>,
) -> Result<Vec<PromptRecord>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line, line_no).map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        if !ids.insert(rec.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate prompt id {:?}", rec.id),
            });
        }
        if filter.is_none_or(|f| f(&rec)) {
            out.push(rec);
        }
    }
    Ok(out)
}

pub fn load_prompts(
    path: impl AsRef<Path>,
    filter: Option<&dyn Fn(&PromptRecord) -> bool>,
) -> Result<Vec<PromptRecord>> {
    parse_prompts(BufReader::new(File::open(path)?), filter)
}
