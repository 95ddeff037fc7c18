//! Versioned TOML scenario documents and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::Scenario;

pub const CONFIG_VERSION: u32 = 1;

/// Bundled case-study scenario.
pub const CASE_STUDY_TOML: &str = include_str!("../configs/case_study.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub version: u32,
    pub scenario: Scenario,
}

impl ConfigDocument {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }
}

pub fn case_study() -> ConfigDocument {
    parse_config(CASE_STUDY_TOML, &[]).expect("bundled case study parses")
}

pub fn load_config(path: impl AsRef<Path>, overrides: &[String]) -> Result<ConfigDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text, overrides)
}

/// Parses a document, applies `key=value` overrides in order, then checks
/// it. Errors carry the dotted path of the offending field.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ConfigDocument> {
    let mut tree: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("", e.message()))?;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let doc = from_tree(tree)?;
    if doc.version != CONFIG_VERSION {
        return Err(Error::config(
            "version",
            format!("unsupported version {}, expected {CONFIG_VERSION}", doc.version),
        ));
    }
    doc.scenario.validate()?;
    Ok(doc)
}

fn from_tree(tree: toml::Table) -> Result<ConfigDocument> {
    serde_path_to_error::deserialize(toml::Value::Table(tree)).map_err(|e| {
        let mut path = e.path().to_string();
        if path == "." {
            path.clear();
        }
        let message = e.inner().message().to_string();
        // Name the missing key itself rather than its parent.
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|r| r.split('`').next())
        {
            path = if path.is_empty() { field.to_string() } else { format!("{path}.{field}") };
        }
        Error::config(path, message)
    })
}

enum Segment {
    Key(String),
    Index(usize),
}

fn parse_key(key: &str) -> Result<Vec<Segment>> {
    let bad = || Error::config(key, "malformed override key");
    let mut out = Vec::new();
    for part in key.split('.') {
        let (name, mut rest) = part.split_at(part.find('[').unwrap_or(part.len()));
        if name.is_empty() {
            return Err(bad());
        }
        out.push(Segment::Key(name.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            out.push(Segment::Index(rest[1..close].parse().map_err(|_| bad())?));
            rest = &rest[close + 1..];
        }
    }
    if !matches!(out.first(), Some(Segment::Key(k)) if k == "version" || k == "scenario") {
        out.insert(0, Segment::Key("scenario".into()));
    }
    Ok(out)
}

/// Reads `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies one `key=value` override. Keys are relative to `scenario`
/// unless they start with `version` or `scenario`, may index arrays as
/// `stages[1].repeat`, and create missing tables on the way. A scalar
/// assigned to an array-valued key becomes a one-element array.
pub fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let segments = parse_key(key)?;
    let mut value = parse_value(value.trim());
    let (last, parents) = segments.split_last().expect("at least one segment");
    let cur = tree;
    let mut slot: Option<&mut toml::Value> = None;
    for seg in parents {
        let next: &mut toml::Value = match (slot.take(), seg) {
            (None, Segment::Key(k)) => cur
                .entry(k.clone())
                .or_insert_with(|| toml::Value::Table(Default::default())),
            (Some(toml::Value::Table(t)), Segment::Key(k)) => {
                t.entry(k.clone()).or_insert_with(|| toml::Value::Table(Default::default()))
            }
            (Some(toml::Value::Array(a)), Segment::Index(i)) => {
                let len = a.len();
                a.get_mut(*i)
                    .ok_or_else(|| Error::config(key, format!("index {i} out of range (length {len})")))?
            }
            _ => return Err(Error::config(key, "path does not match the document structure")),
        };
        slot = Some(next);
    }
    let target: &mut toml::Value = match (slot, last) {
        (None, Segment::Key(k)) => {
            let existing = cur.get(k);
            if matches!(existing, Some(toml::Value::Array(_))) && !value.is_array() {
                value = toml::Value::Array(vec![value]);
            }
            cur.insert(k.clone(), value);
            return Ok(());
        }
        (Some(toml::Value::Table(t)), Segment::Key(k)) => {
            if matches!(t.get(k), Some(toml::Value::Array(_))) && !value.is_array() {
                value = toml::Value::Array(vec![value]);
            }
            t.insert(k.clone(), value);
            return Ok(());
        }
        (Some(toml::Value::Array(a)), Segment::Index(i)) => {
            let len = a.len();
            a.get_mut(*i)
                .ok_or_else(|| Error::config(key, format!("index {i} out of range (length {len})")))?
        }
        _ => return Err(Error::config(key, "path does not match the document structure")),
    };
    *target = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_round_trips() {
        let doc = case_study();
        let text = doc.to_toml().unwrap();
        assert_eq!(parse_config(&text, &[]).unwrap(), doc);
    }

    #[test]
    fn scalar_override_wraps_into_list() {
        let doc = parse_config(CASE_STUDY_TOML, &["snr_db=0".into()]).unwrap();
        assert_eq!(doc.scenario.snr_db, vec![0.0]);
        let doc = parse_config(CASE_STUDY_TOML, &["scenario.snr_db=[1, 2.5]".into()]).unwrap();
        assert_eq!(doc.scenario.snr_db, vec![1.0, 2.5]);
    }

    #[test]
    fn indexed_override() {
        let doc = parse_config(CASE_STUDY_TOML, &["pipeline.stages[1].repeat=20".into()]).unwrap();
        assert_eq!(doc.scenario.pipeline.stages[1].repeat, 20);
        let err = parse_config(CASE_STUDY_TOML, &["pipeline.stages[9].repeat=20".into()]).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn bare_string_override() {
        let doc = parse_config(CASE_STUDY_TOML, &["name=other".into(), "mechanism=\"SEU\"".into()]).unwrap();
        assert_eq!(doc.scenario.name, "other");
    }

    #[test]
    fn unknown_key_names_path() {
        let err = parse_config(CASE_STUDY_TOML, &["channel.speed=3".into()]).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "scenario.channel.speed", "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_key_names_path() {
        let text = CASE_STUDY_TOML.replace("split_index = 2\n", "");
        match parse_config(&text, &[]).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "scenario.pipeline.split_index"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_scheme_list_rejected() {
        match parse_config(CASE_STUDY_TOML, &["schemes=[]".into()]).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "scenario.schemes"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        match parse_config(CASE_STUDY_TOML, &["version=2".into()]).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "version"),
            other => panic!("{other:?}"),
        }
    }
}
