//! Property checks over model trees.

use std::collections::BTreeSet;

use archrecon::model::{
    equal_up_to_array_order, export_model, find_entities, get_path, parse_model, strip_transient,
    values_equal, ModelPath,
};
use archrecon::{aggregate, Provenance};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use regex::Regex;
use serde_json::Value;

fn provs() -> (Provenance, Provenance) {
    (Provenance::new("a"), Provenance::new("b"))
}

/// aggregate(x, x) == x.
pub fn check_idempotence(x: Value) -> Result<(), TestCaseError> {
    let (pa, pb) = provs();
    let merged = aggregate(&x, &x, &pa, &pb)
        .map_err(|c| TestCaseError::fail(format!("self-conflict: {c}")))?;
    prop_assert_eq!(merged, x);
    Ok(())
}

/// Both orders agree up to array order, or both conflict at the same path
/// with the sides swapped.
pub fn check_commutativity((a, b): (Value, Value)) -> Result<(), TestCaseError> {
    let (pa, pb) = provs();
    match (aggregate(&a, &b, &pa, &pb), aggregate(&b, &a, &pb, &pa)) {
        (Ok(ab), Ok(ba)) => {
            prop_assert!(equal_up_to_array_order(&ab, &ba), "a+b = {ab}\nb+a = {ba}");
        }
        (Err(x), Err(y)) => {
            prop_assert_eq!(&x.path, &y.path);
            prop_assert!(values_equal(&x.left, &y.right) && values_equal(&x.right, &y.left));
            prop_assert_eq!(x.left_source.as_str(), y.right_source.as_str());
        }
        (l, r) => {
            return Err(TestCaseError::fail(format!(
                "one order conflicts: {l:?} / {r:?}"
            )))
        }
    }
    Ok(())
}

/// Every fold order of a non-contradicting family gives the same tree up to
/// array order.
pub fn check_fold_order(family: Vec<Value>) -> Result<(), TestCaseError> {
    let fold = |order: &[usize]| -> Result<Value, TestCaseError> {
        let (pa, pb) = provs();
        order
            .iter()
            .skip(1)
            .try_fold(family[order[0]].clone(), |acc, &i| {
                aggregate(&acc, &family[i], &pa, &pb)
                    .map_err(|c| TestCaseError::fail(c.to_string()))
            })
    };
    let reference = fold(&(0..family.len()).collect::<Vec<_>>())?;
    let mut orders: Vec<Vec<usize>> = vec![(0..family.len()).rev().collect()];
    if family.len() >= 3 {
        orders.push(vec![1, 0, 2]);
        orders.push(vec![2, 0, 1]);
    }
    for order in orders {
        let other = fold(&order)?;
        prop_assert!(
            equal_up_to_array_order(&reference, &other),
            "order {order:?}: {other} vs {reference}"
        );
    }
    Ok(())
}

/// (path with array indices erased, scalar rendering) for every leaf, plus
/// the erased path of every object key.
fn leaves(value: &Value) -> BTreeSet<(String, String)> {
    fn go(value: &Value, path: &mut Vec<String>, out: &mut BTreeSet<(String, String)>) {
        match value {
            Value::Object(map) => {
                for (k, v) in map {
                    path.push(format!("{k:?}"));
                    out.insert((path.join("/"), "<key>".into()));
                    go(v, path, out);
                    path.pop();
                }
            }
            Value::Array(items) => {
                path.push("[]".into());
                items.iter().for_each(|v| go(v, path, out));
                path.pop();
            }
            Value::Number(n) => {
                out.insert((
                    path.join("/"),
                    format!("{}", n.as_f64().unwrap_or(f64::NAN)),
                ));
            }
            scalar => {
                out.insert((path.join("/"), scalar.to_string()));
            }
        }
    }
    let mut out = BTreeSet::new();
    go(value, &mut Vec::new(), &mut out);
    out
}

/// A conflict-free merge keeps every key and leaf of both inputs.
pub fn check_no_information_loss((a, b): (Value, Value)) -> Result<(), TestCaseError> {
    let (pa, pb) = provs();
    if let Ok(merged) = aggregate(&a, &b, &pa, &pb) {
        let kept = leaves(&merged);
        for leaf in leaves(&a).union(&leaves(&b)) {
            prop_assert!(kept.contains(leaf), "lost {leaf:?} in {merged}");
        }
    }
    Ok(())
}

/// A reported conflict path resolves in both inputs to the reported values.
pub fn check_conflict_path((a, b): (Value, Value)) -> Result<(), TestCaseError> {
    let (pa, pb) = provs();
    if let Err(c) = aggregate(&a, &b, &pa, &pb) {
        let left =
            get_path(&a, &c.path).map_err(|e| TestCaseError::fail(format!("{}: {e}", c.path)))?;
        let right =
            get_path(&b, &c.path).map_err(|e| TestCaseError::fail(format!("{}: {e}", c.path)))?;
        prop_assert!(
            values_equal(left, &c.left),
            "left {left} vs reported {}",
            c.left
        );
        prop_assert!(
            values_equal(right, &c.right),
            "right {right} vs reported {}",
            c.right
        );
        prop_assert!(!values_equal(&c.left, &c.right));
    }
    Ok(())
}

/// strip(strip(x)) == strip(x).
pub fn check_strip_idempotent(x: Value) -> Result<(), TestCaseError> {
    let once = strip_transient(&x);
    prop_assert_eq!(strip_transient(&once), once);
    Ok(())
}

/// Independent oracle for transient stripping.
pub fn oracle_strip(value: &Value) -> Value {
    let pattern = Regex::new(r"^\$[a-z0-9_]+$").expect("valid pattern");
    fn go(value: &Value, pattern: &Regex) -> Value {
        match value {
            Value::Object(map) => Value::Object(
                map.iter()
                    .filter(|(k, _)| !pattern.is_match(k))
                    .map(|(k, v)| (k.clone(), go(v, pattern)))
                    .collect(),
            ),
            Value::Array(items) => Value::Array(items.iter().map(|v| go(v, pattern)).collect()),
            other => other.clone(),
        }
    }
    go(value, &pattern)
}

/// strip_transient removes exactly the keys matching `^\$[a-z0-9_]+$`.
pub fn check_strip_exact(x: Value) -> Result<(), TestCaseError> {
    prop_assert_eq!(strip_transient(&x), oracle_strip(&x));
    Ok(())
}

/// Every (path, entity) found resolves back to that entity; the root comes
/// first when it is an entity.
pub fn check_entities_resolve(x: Value) -> Result<(), TestCaseError> {
    let found = find_entities(&x);
    for (path, entity) in &found {
        let at = get_path(&x, path).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(std::ptr::eq(at, *entity), "{path} resolves elsewhere");
        prop_assert!(!path.segments().iter().any(|s| s == "$TARGET"));
        let reparsed =
            ModelPath::parse(&path.to_string()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&reparsed, path);
    }
    let root_is_entity = x
        .get("$TYPE")
        .and_then(Value::as_str)
        .is_some_and(|t| t != "$LINK");
    if root_is_entity {
        prop_assert!(found.first().is_some_and(|(p, _)| p.is_root()));
    }
    Ok(())
}

/// Export then parse preserves the tree up to key order.
pub fn check_round_trip(x: Value) -> Result<(), TestCaseError> {
    if !x.is_object() {
        return Ok(());
    }
    let text = export_model(&x, true);
    let back = parse_model(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(values_equal(&back, &x), "{back} vs {x}");
    Ok(())
}
