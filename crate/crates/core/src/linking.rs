//! Resolution of `$LINK` entities against the aggregated model.

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{
    get_path, get_path_mut, is_link, visit_objects, ModelPath, LINK_TYPE, ROOT_KEY, TARGET_KEY,
    TYPE_KEY,
};
use crate::schema::{load_schema, Schema};

/// Key written on a link once it resolves.
pub const RESOLVED_KEY: &str = "target";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("malformed link at {path}: {reason}")]
pub struct MalformedLink {
    pub path: ModelPath,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LinkEntity<'a> {
    pub node: &'a Value,
    pub root: ModelPath,
    pub target: Schema,
}

/// Every `$LINK` object in preorder, with its search root and target schema.
pub fn collect_links(model: &Value) -> Result<Vec<(ModelPath, LinkEntity<'_>)>, MalformedLink> {
    let mut found = Vec::new();
    let mut error = None;
    visit_objects(model, |path, map, node| {
        if error.is_some() || !is_link(node) {
            return;
        }
        let malformed = |reason: String| MalformedLink {
            path: path.clone(),
            reason,
        };
        let root = match map.get(ROOT_KEY) {
            Some(Value::String(text)) => {
                ModelPath::parse(text).map_err(|e| malformed(format!("{ROOT_KEY}: {e}")))
            }
            Some(_) => Err(malformed(format!("{ROOT_KEY} must be a string"))),
            None => Err(malformed(format!("missing {ROOT_KEY}"))),
        };
        let target = match map.get(TARGET_KEY) {
            Some(doc @ Value::Object(_)) => {
                load_schema(doc).map_err(|e| malformed(format!("{TARGET_KEY}: {e}")))
            }
            Some(_) => Err(malformed(format!("{TARGET_KEY} must be a schema object"))),
            None => Err(malformed(format!("missing {TARGET_KEY}"))),
        };
        match (root, target) {
            (Ok(root), Ok(target)) => found.push((path.clone(), LinkEntity { node, root, target })),
            (Err(e), _) | (_, Err(e)) => error = Some(e),
        }
    });
    match error {
        Some(e) => Err(e),
        None => Ok(found),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Resolved(ModelPath),
    Unresolved,
    Ambiguous(Vec<ModelPath>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkResolution {
    pub link: ModelPath,
    pub outcome: Outcome,
}

impl fmt::Display for LinkResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Resolved(target) => write!(f, "link {} resolved to {}", self.link, target),
            Outcome::Unresolved => write!(f, "link {} unresolved", self.link),
            Outcome::Ambiguous(candidates) => {
                let list: Vec<String> = candidates.iter().map(ToString::to_string).collect();
                write!(f, "link {} ambiguous: {}", self.link, list.join(", "))
            }
        }
    }
}

/// One entry per link, in model preorder.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolutionReport {
    pub entries: Vec<LinkResolution>,
}

impl ResolutionReport {
    pub fn all_resolved(&self) -> bool {
        self.entries
            .iter()
            .all(|e| matches!(e.outcome, Outcome::Resolved(_)))
    }

    pub fn failures(&self) -> impl Iterator<Item = &LinkResolution> {
        self.entries
            .iter()
            .filter(|e| !matches!(e.outcome, Outcome::Resolved(_)))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.entries
                .iter()
                .map(|e| match &e.outcome {
                    Outcome::Resolved(target) => {
                        json!({"link": e.link.to_string(), "outcome": "resolved", "target": target.to_string()})
                    }
                    Outcome::Unresolved => json!({"link": e.link.to_string(), "outcome": "unresolved"}),
                    Outcome::Ambiguous(candidates) => json!({
                        "link": e.link.to_string(),
                        "outcome": "ambiguous",
                        "candidates": candidates.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    }),
                })
                .collect(),
        )
    }
}

fn candidates(model: &Value, link: &LinkEntity<'_>) -> Vec<ModelPath> {
    let Ok(scope) = get_path(model, &link.root) else {
        return Vec::new();
    };
    let mut found = Vec::new();
    visit_objects(scope, |path, _, node| {
        if !is_link(node) && link.target.conforms(node) {
            found.push(link.root.join(path));
        }
    });
    found
}

/// Resolves every link. A unique candidate sets the link's `target` to its
/// path; otherwise any earlier `target` is removed.
pub fn resolve_links(model: &Value) -> Result<(Value, ResolutionReport), MalformedLink> {
    let links = collect_links(model)?;
    let entries: Vec<LinkResolution> = links
        .iter()
        .map(|(path, link)| {
            let mut found = candidates(model, link);
            let outcome = match found.len() {
                0 => Outcome::Unresolved,
                1 => Outcome::Resolved(found.remove(0)),
                _ => Outcome::Ambiguous(found),
            };
            LinkResolution {
                link: path.clone(),
                outcome,
            }
        })
        .collect();

    let mut resolved = model.clone();
    for entry in &entries {
        let Ok(Value::Object(node)) = get_path_mut(&mut resolved, &entry.link) else {
            continue;
        };
        match &entry.outcome {
            Outcome::Resolved(target) => {
                node.insert(RESOLVED_KEY.to_string(), Value::String(target.to_string()));
            }
            _ => {
                node.shift_remove(RESOLVED_KEY);
            }
        }
    }
    Ok((resolved, ResolutionReport { entries }))
}

/// Replaces every resolved `target` path with a copy of the node it names
/// (itself stripped of `target` keys). Two models that differ only in array
/// order compare equal up to array order after this.
pub fn dereference_targets(model: &Value) -> Value {
    fn strip_targets(value: &mut Value) {
        match value {
            Value::Object(map) => {
                if map.get(TYPE_KEY).and_then(Value::as_str) == Some(LINK_TYPE) {
                    map.shift_remove(RESOLVED_KEY);
                }
                map.values_mut().for_each(strip_targets);
            }
            Value::Array(items) => items.iter_mut().for_each(strip_targets),
            _ => {}
        }
    }
    fn go(node: &mut Value, model: &Value) {
        match node {
            Value::Object(map) => {
                let link = map.get(TYPE_KEY).and_then(Value::as_str) == Some(LINK_TYPE);
                if link {
                    if let Some(Value::String(path)) = map.get(RESOLVED_KEY) {
                        if let Some(mut target) = ModelPath::parse(path)
                            .ok()
                            .and_then(|p| get_path(model, &p).ok())
                            .cloned()
                        {
                            strip_targets(&mut target);
                            map.insert(RESOLVED_KEY.to_string(), target);
                        }
                    }
                }
                for (key, child) in map.iter_mut() {
                    if key != RESOLVED_KEY && key != TARGET_KEY {
                        go(child, model);
                    }
                }
            }
            Value::Array(items) => items.iter_mut().for_each(|i| go(i, model)),
            _ => {}
        }
    }
    let mut out = model.clone();
    go(&mut out, model);
    out
}
