//! Synthetic extractors for orchestrator properties.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use archrecon::model::{equal_up_to_array_order, find_entities, strip_transient};
use archrecon::orchestrator::{BoxError, ExtractContext};
use archrecon::{
    load_schema, run, ExtractorDescriptor, Limits, OrchestrationError, Reconstruction, Registry,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use serde_json::{json, Value};

const TYPES: &[&str] = &["$MODEL", "svc", "db"];

/// One extractor: gated on `on_type` (and on `requires` being present),
/// writes `field = value`, and optionally creates named children.
#[derive(Debug, Clone)]
pub struct Synth {
    pub id: String,
    pub on_type: String,
    pub requires: Option<String>,
    pub field: String,
    pub value: i64,
    pub child_type: String,
    pub children: Vec<String>,
}

impl Synth {
    fn schema(&self) -> Value {
        let mut required = vec![json!("$TYPE")];
        required.extend(self.requires.iter().map(|f| json!(f)));
        json!({
            "type": "object",
            "properties": {"$TYPE": {"const": self.on_type}},
            "required": required
        })
    }

    fn apply(&self, mut entity: Value) -> Value {
        entity[&self.field] = json!(self.value);
        if !self.children.is_empty() {
            let kids: Vec<Value> = self
                .children
                .iter()
                .map(|name| json!({"$TYPE": self.child_type, "name": format!("{}-{}", self.id, name)}))
                .collect();
            entity[format!("kids_{}", self.id)] = Value::Array(kids);
        }
        entity
    }
}

/// Invocation counts per (extractor id, entity uid).
pub type Calls = Arc<Mutex<BTreeMap<(String, u64), usize>>>;

pub fn registry(synths: &[Synth]) -> (Registry, Calls) {
    let calls: Calls = Arc::default();
    let mut registry = Registry::new();
    for synth in synths {
        let schema = load_schema(&synth.schema()).expect("synthetic schema loads");
        let (s, c) = (synth.clone(), calls.clone());
        let behavior = move |entity: Value, ctx: &ExtractContext<'_>| -> Result<Value, BoxError> {
            let uid = entity
                .get("$uid")
                .and_then(Value::as_u64)
                .ok_or("entity without $uid")?;
            *c.lock()
                .expect("no poisoning")
                .entry((ctx.id.to_string(), uid))
                .or_default() += 1;
            Ok(s.apply(entity))
        };
        registry
            .register(ExtractorDescriptor::native(&synth.id, schema, behavior))
            .expect("synthetic ids are unique");
    }
    (registry, calls)
}

/// Extractors with disjoint fields whose created entities have distinct
/// names. With `bounded`, only `$MODEL` extractors create children, and
/// never `$MODEL` children, so runs terminate; otherwise a type may spawn
/// its own type forever.
pub fn synths(bounded: bool) -> impl Strategy<Value = Vec<Synth>> {
    (1usize..6).prop_flat_map(move |n| {
        let one = (
            prop::sample::select(TYPES.to_vec()),
            proptest::option::of(0..n),
            -3i64..4,
            prop::sample::select(vec!["svc", "db"]),
            proptest::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..3),
        );
        proptest::collection::vec(one, n).prop_map(move |raw| {
            raw.into_iter()
                .enumerate()
                .map(
                    |(i, (on_type, requires, value, child_type, mut children))| {
                        children.sort();
                        children.dedup();
                        if bounded && on_type != "$MODEL" {
                            children.clear();
                        }
                        let child_type = if bounded { child_type } else { on_type };
                        Synth {
                            id: format!("e{i}"),
                            on_type: on_type.to_string(),
                            requires: requires.filter(|&j| j != i).map(|j| format!("f{j}")),
                            field: format!("f{i}"),
                            value,
                            child_type: child_type.to_string(),
                            children: children.into_iter().map(str::to_string).collect(),
                        }
                    },
                )
                .collect()
        })
    })
}

fn initial() -> Value {
    json!({"$TYPE": "$MODEL", "$path": "/nonexistent"})
}

fn go(
    synths: &[Synth],
    limits: Limits,
) -> (Result<Reconstruction, OrchestrationError>, Calls, Registry) {
    let (registry, calls) = registry(synths);
    let result = run(&initial(), &registry, limits, std::path::Path::new("/"));
    (result, calls, registry)
}

fn assert_fixpoint(out: &Reconstruction, registry: &Registry) -> Result<(), TestCaseError> {
    for (path, entity) in find_entities(&out.model) {
        let uid = entity
            .get("$uid")
            .and_then(Value::as_u64)
            .ok_or_else(|| TestCaseError::fail(format!("{path} has no $uid")))?;
        for d in registry.iter() {
            prop_assert!(
                !d.input_schema.conforms(entity) || out.ledger.contains(&d.id, uid),
                "{} conforms to {path} but never ran",
                d.id
            );
        }
    }
    Ok(())
}

/// Each (extractor, entity) pair runs at most once.
pub fn check_run_once(synths: Vec<Synth>) -> Result<(), TestCaseError> {
    let (result, calls, _) = go(&synths, Limits::default());
    let out = result.map_err(|e| TestCaseError::fail(e.to_string()))?;
    let calls = calls.lock().expect("no poisoning");
    for (pair, n) in calls.iter() {
        prop_assert_eq!(*n, 1, "{:?} ran {} times", pair, n);
    }
    prop_assert_eq!(calls.len(), out.ledger.len());
    Ok(())
}

/// After a normal return no conforming extractor is missing from the ledger.
pub fn check_fixpoint(synths: Vec<Synth>) -> Result<(), TestCaseError> {
    let (result, _, registry) = go(&synths, Limits::default());
    let out = result.map_err(|e| TestCaseError::fail(e.to_string()))?;
    assert_fixpoint(&out, &registry)
}

/// Any run reaches a fixpoint or reports divergence within its limits.
pub fn check_termination(synths: Vec<Synth>) -> Result<(), TestCaseError> {
    let limits = Limits {
        max_rounds: 25,
        max_entities: 200,
    };
    let (result, _, registry) = go(&synths, limits);
    match result {
        Ok(out) => {
            prop_assert!(out.rounds <= limits.max_rounds);
            prop_assert!(find_entities(&out.model).len() <= limits.max_entities);
            assert_fixpoint(&out, &registry)
        }
        Err(OrchestrationError::Divergence(_)) => Ok(()),
        Err(other) => Err(TestCaseError::fail(format!("unexpected error: {other}"))),
    }
}

/// Registration order does not change the stripped result.
pub fn check_order_independence(
    (synths, shuffled): (Vec<Synth>, Vec<Synth>),
) -> Result<(), TestCaseError> {
    let (a, _, _) = go(&synths, Limits::default());
    let (b, _, _) = go(&shuffled, Limits::default());
    let a = strip_transient(&a.map_err(|e| TestCaseError::fail(e.to_string()))?.model);
    let b = strip_transient(&b.map_err(|e| TestCaseError::fail(e.to_string()))?.model);
    prop_assert!(equal_up_to_array_order(&a, &b), "{a}\nvs\n{b}");
    Ok(())
}

/// A bounded registry together with a permutation of it.
pub fn synths_and_permutation() -> impl Strategy<Value = (Vec<Synth>, Vec<Synth>)> {
    synths(true).prop_flat_map(|s| {
        let shuffled = Just(s.clone()).prop_shuffle();
        (Just(s), shuffled)
    })
}
