//! The architecture model: a recursive JSON document tree whose typed object
//! nodes are model entities.
//!
//! Keys of the form `$lowercase` are transient. They carry intra-run plumbing
//! such as local directories (`$path`) or instance ids (`$uid`) and are removed
//! before a model leaves the process. Uppercase framework keys (`$TYPE`,
//! `$ROOT`, `$TARGET`) are part of the exported document.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Number, Value};
use thiserror::Error;

/// A node of the model tree.
pub type FieldValue = Value;

/// An object node.
pub type Object = Map<String, Value>;

pub const TYPE_KEY: &str = "$TYPE";
pub const ROOT_KEY: &str = "$ROOT";
pub const TARGET_KEY: &str = "$TARGET";
/// Transient key holding an entity's local directory.
pub const PATH_KEY: &str = "$path";
/// Transient key holding an entity's instance id during one orchestration run.
pub const UID_KEY: &str = "$uid";

/// `$TYPE` tag of the top-level model entity.
pub const MODEL_TYPE: &str = "$MODEL";
/// `$TYPE` tag of retroactive link entities.
pub const LINK_TYPE: &str = "$LINK";

const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed model path `{path}`: {reason}")]
    PathMalformed { path: String, reason: String },
    #[error("model path `{path}` not found")]
    PathNotFound { path: String },
    #[error("invalid model document: {0}")]
    Parse(String),
    #[error("model document must be a JSON object")]
    NotAnObject,
}

/// True for keys matching `^\$[a-z0-9_]+$`.
pub fn is_transient_key(key: &str) -> bool {
    match key.strip_prefix('$') {
        Some(rest) if !rest.is_empty() => rest
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'),
        _ => false,
    }
}

/// Location of a node in the model tree, rendered JSON-Pointer style.
///
/// The empty path denotes the root. Object keys and array indices are both
/// stored as plain segments; `~` and `/` are escaped only in the string form.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelPath(Vec<String>);

impl ModelPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn child(&self, segment: impl Into<String>) -> Self {
        let mut segments = self.0.clone();
        segments.push(segment.into());
        Self(segments)
    }

    pub fn index(&self, index: usize) -> Self {
        self.child(index.to_string())
    }

    pub fn join(&self, other: &ModelPath) -> Self {
        let mut segments = self.0.clone();
        segments.extend(other.0.iter().cloned());
        Self(segments)
    }

    pub fn push(&mut self, segment: impl Into<String>) {
        self.0.push(segment.into());
    }

    pub fn pop(&mut self) -> Option<String> {
        self.0.pop()
    }

    /// True when `self` is `other` or lies beneath it.
    pub fn starts_with(&self, other: &ModelPath) -> bool {
        self.0.starts_with(&other.0)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        if text.is_empty() {
            return Ok(Self::root());
        }
        let Some(body) = text.strip_prefix('/') else {
            return Err(ModelError::PathMalformed {
                path: text.to_string(),
                reason: "must be empty or start with `/`".into(),
            });
        };
        body.split('/')
            .map(|raw| {
                unescape_segment(raw).ok_or_else(|| ModelError::PathMalformed {
                    path: text.to_string(),
                    reason: format!("invalid `~` escape in segment `{raw}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

fn unescape_segment(raw: &str) -> Option<String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c == '~' {
            match chars.next() {
                Some('0') => out.push('~'),
                Some('1') => out.push('/'),
                _ => return None,
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

impl fmt::Display for ModelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for segment in &self.0 {
            f.write_str("/")?;
            f.write_str(&segment.replace('~', "~0").replace('/', "~1"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for ModelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelPath({:?})", self.to_string())
    }
}

impl FromStr for ModelPath {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for ModelPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::parse(&text).map_err(serde::de::Error::custom)
    }
}

fn array_index(segment: &str) -> Option<usize> {
    let well_formed = !segment.is_empty()
        && segment.bytes().all(|b| b.is_ascii_digit())
        && (segment == "0" || !segment.starts_with('0'));
    if well_formed {
        segment.parse().ok()
    } else {
        None
    }
}

/// Resolves `path` against `root`.
pub fn get_path<'a>(root: &'a Value, path: &ModelPath) -> Result<&'a Value, ModelError> {
    let mut node = root;
    for segment in path.segments() {
        let next = match node {
            Value::Object(map) => map.get(segment),
            Value::Array(items) => array_index(segment).and_then(|i| items.get(i)),
            _ => None,
        };
        node = next.ok_or_else(|| ModelError::PathNotFound {
            path: path.to_string(),
        })?;
    }
    Ok(node)
}

pub fn get_path_mut<'a>(
    root: &'a mut Value,
    path: &ModelPath,
) -> Result<&'a mut Value, ModelError> {
    let mut node = root;
    for segment in path.segments() {
        let next = match node {
            Value::Object(map) => map.get_mut(segment),
            Value::Array(items) => array_index(segment).and_then(move |i| items.get_mut(i)),
            _ => None,
        };
        node = next.ok_or_else(|| ModelError::PathNotFound {
            path: path.to_string(),
        })?;
    }
    Ok(node)
}

/// Parses a textual path and resolves it.
pub fn get_path_str<'a>(root: &'a Value, path: &str) -> Result<&'a Value, ModelError> {
    get_path(root, &ModelPath::parse(path)?)
}

/// Deep copy of `value` with every transient key removed at every depth.
pub fn strip_transient(value: &Value) -> Value {
    let mut copy = value.clone();
    strip_transient_in_place(&mut copy);
    copy
}

pub fn strip_transient_in_place(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|key, _| !is_transient_key(key));
            map.values_mut().for_each(strip_transient_in_place);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_transient_in_place),
        _ => {}
    }
}

/// The `$TYPE` tag of an object node, if it has a string one.
pub fn entity_type(value: &Value) -> Option<&str> {
    value.as_object()?.get(TYPE_KEY)?.as_str()
}

pub fn is_link(value: &Value) -> bool {
    entity_type(value) == Some(LINK_TYPE)
}

/// Visits every object node in preorder, never descending into `$TARGET`
/// values (those are schemas, not model content).
pub(crate) fn visit_objects<'a, F>(root: &'a Value, mut visit: F)
where
    F: FnMut(&ModelPath, &'a Object, &'a Value),
{
    fn go<'a, F: FnMut(&ModelPath, &'a Object, &'a Value)>(
        node: &'a Value,
        path: &mut ModelPath,
        visit: &mut F,
    ) {
        match node {
            Value::Object(map) => {
                visit(path, map, node);
                for (key, child) in map {
                    if key == TARGET_KEY {
                        continue;
                    }
                    path.push(key.clone());
                    go(child, path, visit);
                    path.pop();
                }
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    path.push(i.to_string());
                    go(child, path, visit);
                    path.pop();
                }
            }
            _ => {}
        }
    }
    go(root, &mut ModelPath::root(), &mut visit);
}

/// Every dispatchable entity in depth-first preorder: object nodes with a
/// string `$TYPE`, except `$LINK` nodes and anything inside a `$TARGET`.
pub fn find_entities(root: &Value) -> Vec<(ModelPath, &Value)> {
    let mut found = Vec::new();
    visit_objects(root, |path, map, node| {
        match map.get(TYPE_KEY).and_then(Value::as_str) {
            Some(tag) if tag != LINK_TYPE => found.push((path.clone(), node)),
            _ => {}
        }
    });
    found
}

/// Value equality with numeric comparison by magnitude, so `1` equals `1.0`.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => numbers_equal(x, y),
        (Value::Array(xs), Value::Array(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y))
        }
        (Value::Object(xs), Value::Object(ys)) => {
            xs.len() == ys.len()
                && xs
                    .iter()
                    .all(|(k, x)| ys.get(k).is_some_and(|y| values_equal(x, y)))
        }
        _ => a == b,
    }
}

fn numbers_equal(x: &Number, y: &Number) -> bool {
    if let (Some(a), Some(b)) = (x.as_i64(), y.as_i64()) {
        return a == b;
    }
    if let (Some(a), Some(b)) = (x.as_u64(), y.as_u64()) {
        return a == b;
    }
    x.as_f64() == y.as_f64()
}

pub fn is_scalar(value: &Value) -> bool {
    !matches!(value, Value::Object(_) | Value::Array(_))
}

/// Rewrites integral floats within ±2^53 as integers so that every number
/// has a single representation.
pub fn normalize_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() && f.fract() == 0.0 && f.abs() <= MAX_EXACT_INT {
                    *n = Number::from(f as i64);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize_numbers),
        Value::Object(map) => map.values_mut().for_each(normalize_numbers),
        _ => {}
    }
}

/// Copy of `value` with object keys sorted lexicographically at every depth.
pub fn canonicalize(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            Value::Object(
                keys.into_iter()
                    .map(|k| (k.clone(), canonicalize(&map[k])))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

/// Canonical copy with every array additionally sorted by the compact
/// rendering of its (recursively sorted) elements. Two trees that differ only
/// in array element order map to the same value.
pub fn sort_arrays_canonically(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            Value::Object(
                keys.into_iter()
                    .map(|k| (k.clone(), sort_arrays_canonically(&map[k])))
                    .collect(),
            )
        }
        Value::Array(items) => {
            let mut sorted: Vec<(String, Value)> = items
                .iter()
                .map(|item| {
                    let item = sort_arrays_canonically(item);
                    (item.to_string(), item)
                })
                .collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Array(sorted.into_iter().map(|(_, v)| v).collect())
        }
        other => other.clone(),
    }
}

/// Total order on canonical renderings; used to compare trees up to array order.
pub fn cmp_up_to_array_order(a: &Value, b: &Value) -> Ordering {
    sort_arrays_canonically(a)
        .to_string()
        .cmp(&sort_arrays_canonically(b).to_string())
}

pub fn equal_up_to_array_order(a: &Value, b: &Value) -> bool {
    cmp_up_to_array_order(a, b) == Ordering::Equal
}

/// Parses a model document: UTF-8 JSON with a top-level object.
pub fn parse_model(text: &str) -> Result<Value, ModelError> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    if !value.is_object() {
        return Err(ModelError::NotAnObject);
    }
    normalize_numbers(&mut value);
    Ok(value)
}

/// Renders a model for export: transients stripped unless `keep_transient`,
/// keys sorted, two-space indentation, trailing newline.
pub fn export_model(model: &Value, keep_transient: bool) -> String {
    let exported = if keep_transient {
        canonicalize(model)
    } else {
        canonicalize(&strip_transient(model))
    };
    let mut text = serde_json::to_string_pretty(&exported).expect("JSON values always serialize");
    text.push('\n');
    text
}
