//! Recursive-union merging of model trees.
//!
//! Objects merge key by key, equal scalars unify, and arrays pair up elements
//! that describe the same thing while appending the rest. Two different values
//! at the same object key are a [`Conflict`]; nothing is ever resolved
//! silently.
//!
//! Array elements pair when they are [`aggregatable`]: equal values, or objects
//! of the same `$TYPE` that merge without conflict and agree on at least one
//! scalar field. Arrays therefore never raise conflicts themselves. Elements
//! that contradict each other are kept side by side.

// Conflicts carry both values by design and are rare.
#![allow(clippy::result_large_err)]

use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{
    get_path, is_scalar, is_transient_key, values_equal, ModelPath, Object, TYPE_KEY, UID_KEY,
};

/// Label naming where a tree came from (an extractor id, an input file).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Provenance(String);

impl Provenance {
    pub fn new(label: impl Into<String>) -> Self {
        let label = label.into();
        if label.is_empty() {
            Self("<unnamed>".to_string())
        } else {
            Self(label)
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Provenance {
    fn from(label: &str) -> Self {
        Self::new(label)
    }
}

impl From<String> for Provenance {
    fn from(label: String) -> Self {
        Self::new(label)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("conflict at {path}: {left} (from {left_source}) vs {right} (from {right_source})")]
pub struct Conflict {
    pub path: ModelPath,
    pub left: Value,
    pub right: Value,
    pub left_source: Provenance,
    pub right_source: Provenance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ConflictMode {
    /// Stop at the first conflict.
    #[default]
    Fail,
    /// Keep the left value, record the conflict and carry on.
    Collect,
}

/// Configurable merge of two trees.
#[derive(Debug, Clone)]
pub struct Aggregator {
    left: Provenance,
    right: Provenance,
    mode: ConflictMode,
    base: ModelPath,
}

impl Aggregator {
    pub fn new(left: impl Into<Provenance>, right: impl Into<Provenance>) -> Self {
        Self {
            left: left.into(),
            right: right.into(),
            mode: ConflictMode::Fail,
            base: ModelPath::root(),
        }
    }

    pub fn mode(mut self, mode: ConflictMode) -> Self {
        self.mode = mode;
        self
    }

    /// Prefix for reported conflict paths, for merges into a subtree.
    pub fn at(mut self, base: ModelPath) -> Self {
        self.base = base;
        self
    }

    /// Merges `a` and `b`. In [`ConflictMode::Fail`] the error holds exactly
    /// one conflict; in collect mode it holds all of them.
    pub fn run(&self, a: &Value, b: &Value) -> Result<Value, Vec<Conflict>> {
        let mut pass = Pass {
            config: self,
            conflicts: Vec::new(),
        };
        let mut path = self.base.clone();
        match pass.merge(a, b, &mut path) {
            Ok(merged) if pass.conflicts.is_empty() => Ok(merged),
            Ok(_) => Err(pass.conflicts),
            Err(conflict) => Err(vec![conflict]),
        }
    }

    /// Collect-mode merge that also returns the partial result, where every
    /// conflicting position keeps the left value.
    pub fn run_collecting(&self, a: &Value, b: &Value) -> (Value, Vec<Conflict>) {
        let config = self.clone().mode(ConflictMode::Collect);
        let mut pass = Pass {
            config: &config,
            conflicts: Vec::new(),
        };
        let mut path = self.base.clone();
        let merged = pass
            .merge(a, b, &mut path)
            .expect("collect mode never aborts");
        (merged, pass.conflicts)
    }
}

struct Pass<'a> {
    config: &'a Aggregator,
    conflicts: Vec<Conflict>,
}

impl Pass<'_> {
    fn conflict(&mut self, a: &Value, b: &Value, path: &ModelPath) -> Result<Value, Conflict> {
        let conflict = Conflict {
            path: path.clone(),
            left: a.clone(),
            right: b.clone(),
            left_source: self.config.left.clone(),
            right_source: self.config.right.clone(),
        };
        match self.config.mode {
            ConflictMode::Fail => Err(conflict),
            ConflictMode::Collect => {
                self.conflicts.push(conflict);
                Ok(a.clone())
            }
        }
    }

    fn merge(&mut self, a: &Value, b: &Value, path: &mut ModelPath) -> Result<Value, Conflict> {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                self.merge_objects(x, y, path).map(Value::Object)
            }
            (Value::Array(x), Value::Array(y)) => Ok(Value::Array(merge_arrays(x, y))),
            _ if is_scalar(a) && is_scalar(b) && values_equal(a, b) => Ok(a.clone()),
            _ => self.conflict(a, b, path),
        }
    }

    fn merge_objects(
        &mut self,
        a: &Object,
        b: &Object,
        path: &mut ModelPath,
    ) -> Result<Object, Conflict> {
        let mut out = a.clone();
        // Sorted so the first conflict found does not depend on argument order.
        let mut keys: Vec<&String> = b.keys().collect();
        keys.sort();
        for key in keys {
            let incoming = &b[key];
            let merged = match a.get(key) {
                Some(existing) => {
                    path.push(key.clone());
                    let merged = self.merge(existing, incoming, path);
                    path.pop();
                    merged?
                }
                None => incoming.clone(),
            };
            out.insert(key.clone(), merged);
        }
        Ok(out)
    }
}

fn merge_arrays(a: &[Value], b: &[Value]) -> Vec<Value> {
    let mut out = a.to_vec();
    for element in b {
        if out.iter().any(|r| values_equal(r, element)) {
            continue;
        }
        match out.iter().position(|r| aggregatable(r, element)) {
            Some(i) => {
                let merged = Aggregator::new("left", "right")
                    .run(&out[i], element)
                    .expect("aggregatable elements merge without conflict");
                out[i] = merged;
            }
            None => out.push(element.clone()),
        }
    }
    out
}

/// Merges two trees, failing on the first conflict.
pub fn aggregate(
    a: &Value,
    b: &Value,
    left: &Provenance,
    right: &Provenance,
) -> Result<Value, Conflict> {
    Aggregator::new(left.clone(), right.clone())
        .run(a, b)
        .map_err(|mut conflicts| conflicts.remove(0))
}

/// Merges two trees and reports every conflict.
pub fn aggregate_collect(
    a: &Value,
    b: &Value,
    left: &Provenance,
    right: &Provenance,
) -> Result<Value, Vec<Conflict>> {
    Aggregator::new(left.clone(), right.clone())
        .mode(ConflictMode::Collect)
        .run(a, b)
}

pub fn aggregate_objects(
    a: &Object,
    b: &Object,
    left: &Provenance,
    right: &Provenance,
) -> Result<Object, Conflict> {
    let merged = aggregate(
        &Value::Object(a.clone()),
        &Value::Object(b.clone()),
        left,
        right,
    )?;
    match merged {
        Value::Object(map) => Ok(map),
        _ => unreachable!("two objects merge into an object"),
    }
}

/// Element-wise array merge. Equal elements dedupe, aggregatable ones merge
/// into the first partner found, everything else is appended in order.
pub fn aggregate_arrays(a: &[Value], b: &[Value]) -> Vec<Value> {
    merge_arrays(a, b)
}

/// Whether two array elements describe the same thing.
pub fn aggregatable(x: &Value, y: &Value) -> bool {
    if values_equal(x, y) {
        return true;
    }
    let (Value::Object(a), Value::Object(b)) = (x, y) else {
        return false;
    };
    if let (Some(ta), Some(tb)) = (a.get(TYPE_KEY), b.get(TYPE_KEY)) {
        if !values_equal(ta, tb) {
            return false;
        }
    }
    shares_identity(a, b) && compatible_objects(a, b)
}

// At least one shared field with equal scalar values. `$TYPE` is compared
// above and carries no identity; transient keys are machine-specific, except
// `$uid`, which names the same instance within a run.
fn shares_identity(a: &Object, b: &Object) -> bool {
    a.iter().any(|(key, x)| {
        if key == TYPE_KEY || (is_transient_key(key) && key != UID_KEY) {
            return false;
        }
        b.get(key)
            .is_some_and(|y| is_scalar(x) && is_scalar(y) && values_equal(x, y))
    })
}

// Would merging raise a conflict? Arrays always merge, so only object keys
// can clash.
fn compatible(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => compatible_objects(x, y),
        (Value::Array(_), Value::Array(_)) => true,
        _ => is_scalar(a) && is_scalar(b) && values_equal(a, b),
    }
}

fn compatible_objects(a: &Object, b: &Object) -> bool {
    a.iter()
        .all(|(key, x)| b.get(key).is_none_or(|y| compatible(x, y)))
}

/// Left fold of several labelled models. A conflict's left side is
/// attributed to the first input that holds the conflicting value.
pub fn aggregate_models(
    inputs: &[(Provenance, Value)],
    mode: ConflictMode,
) -> Result<Value, Vec<Conflict>> {
    let Some((first_label, first)) = inputs.first() else {
        return Ok(Value::Object(Map::new()));
    };
    let mut acc = first.clone();
    let mut conflicts = Vec::new();
    for (i, (label, model)) in inputs.iter().enumerate().skip(1) {
        let left_label = if i == 1 {
            first_label.clone()
        } else {
            Provenance::new(format!("aggregate of {} inputs", i))
        };
        let step = Aggregator::new(left_label, label.clone());
        let found = match mode {
            ConflictMode::Fail => match step.run(&acc, model) {
                Ok(merged) => {
                    acc = merged;
                    Vec::new()
                }
                Err(found) => found,
            },
            ConflictMode::Collect => {
                let (merged, found) = step.run_collecting(&acc, model);
                acc = merged;
                found
            }
        };
        if found.is_empty() {
            continue;
        }
        conflicts.extend(found.into_iter().map(|mut c| {
            if let Some((source, _)) = inputs[..i]
                .iter()
                .find(|(_, m)| get_path(m, &c.path).is_ok_and(|v| values_equal(v, &c.left)))
            {
                c.left_source = source.clone();
            }
            c
        }));
        if mode == ConflictMode::Fail {
            return Err(conflicts);
        }
    }
    if conflicts.is_empty() {
        Ok(acc)
    } else {
        Err(conflicts)
    }
}
