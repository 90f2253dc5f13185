//! Value-tree generators.

use proptest::collection::{btree_map, btree_set, vec};
use proptest::prelude::*;
use proptest::sample::subsequence;
use serde_json::{json, Map, Value};

/// Small pools so that independent draws collide often enough to exercise
/// equality, identity and conflicts.
pub fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-2i64..3).prop_map(Value::from),
        Just(json!(0.5)),
        prop::sample::select(vec!["a", "b", "1.0", "2.0", ""]).prop_map(Value::from),
    ]
}

/// Object keys, including transient keys, near misses of the transient
/// pattern, framework keys and keys that need path escaping.
pub fn key() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "a", "b", "c", "name", "version", "$TYPE", "$ROOT", "$path", "$uid", "$x_1", "$9", "$A",
        "$", "$a-b", "$aB", "a$b", "a/b", "t~1", "",
    ])
    .prop_map(str::to_string)
}

pub fn tree() -> impl Strategy<Value = Value> {
    scalar().prop_recursive(4, 48, 5, |inner| {
        prop_oneof![
            vec(inner.clone(), 0..4).prop_map(Value::Array),
            vec((key(), inner), 0..5)
                .prop_map(|entries| Value::Object(entries.into_iter().collect())),
        ]
    })
}

pub fn object_tree() -> impl Strategy<Value = Value> {
    vec((key(), tree()), 0..6).prop_map(|entries| Value::Object(entries.into_iter().collect()))
}

/// Trees whose `$TYPE` values are strings and which carry entities at
/// several depths, some of them links or inside `$TARGET`.
pub fn entity_tree() -> impl Strategy<Value = Value> {
    let tag = prop::sample::select(vec!["$MODEL", "microservice", "db", "$LINK"]);
    let leaf = scalar();
    leaf.prop_recursive(4, 48, 4, move |inner| {
        let tag = tag.clone();
        prop_oneof![
            vec(inner.clone(), 0..4).prop_map(Value::Array),
            (
                proptest::option::of(tag),
                vec(
                    (
                        prop::sample::select(vec!["a", "b", "items", "$TARGET", "$path"]),
                        inner
                    ),
                    0..4
                )
            )
                .prop_map(|(tag, entries)| {
                    let mut map: Map<String, Value> = entries
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), v))
                        .collect();
                    if let Some(tag) = tag {
                        map.insert("$TYPE".into(), Value::from(tag));
                    }
                    Value::Object(map)
                }),
        ]
    })
}

const SERVICES: &[&str] = &["s1", "s2", "s3", "s4", "s5"];
const FIELDS: &[&str] = &["java", "port", "version"];
const TAGS: &[&str] = &["t1", "t2", "t3"];
const FLAGS: &[&str] = &["f1", "f2", "f3"];

fn service(name: &str, fields: Map<String, Value>, tags: Vec<&str>) -> Value {
    let mut map = Map::new();
    map.insert("$TYPE".into(), json!("microservice"));
    map.insert("name".into(), json!(name));
    map.extend(fields);
    if !tags.is_empty() {
        map.insert("tags".into(), json!(tags));
    }
    Value::Object(map)
}

/// An identity-disciplined model: every array element is a typed service
/// with a name unique within its array, and plain arrays hold no duplicates.
/// Independent draws may still contradict each other.
pub fn model() -> impl Strategy<Value = Value> {
    let field_value = prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        (1i64..3).prop_map(Value::from)
    ];
    let one_service = (
        btree_map(
            prop::sample::select(FIELDS.to_vec()).prop_map(str::to_string),
            field_value,
            0..3,
        ),
        subsequence(TAGS.to_vec(), 0..=TAGS.len()),
    );
    (
        proptest::option::of(prop::sample::select(vec!["1.0", "2.0"])),
        btree_map(
            prop::sample::select(FLAGS.to_vec()).prop_map(str::to_string),
            any::<bool>(),
            0..3,
        ),
        subsequence(SERVICES.to_vec(), 0..=3).prop_flat_map(move |names| {
            let n = names.len();
            (Just(names), vec(one_service.clone(), n))
        }),
    )
        .prop_map(|(version, flags, (names, bodies))| {
            let services: Vec<Value> = names
                .iter()
                .zip(bodies)
                .map(|(name, (fields, tags))| service(name, fields.into_iter().collect(), tags))
                .collect();
            let mut model = json!({"$TYPE": "$MODEL", "flags": flags, "microservices": services});
            if let Some(v) = version {
                model["version"] = json!(v);
            }
            model
        })
}

/// `n` models that never contradict each other: every (service, field) has
/// one value across the whole family and each model shows a subset.
pub fn consistent_family(n: usize) -> impl Strategy<Value = Vec<Value>> {
    let truth = vec((1i64..4, any::<bool>()), SERVICES.len());
    let views = vec(
        (
            subsequence(SERVICES.to_vec(), 0..=SERVICES.len()),
            btree_set(prop::sample::select(FIELDS.to_vec()), 0..=FIELDS.len()),
            subsequence(TAGS.to_vec(), 0..=TAGS.len()),
            btree_set(prop::sample::select(FLAGS.to_vec()), 0..=FLAGS.len()),
        ),
        n,
    );
    (truth, views).prop_map(|(truth, views)| {
        views
            .into_iter()
            .map(|(names, fields, tags, flags)| {
                let services: Vec<Value> = names
                    .iter()
                    .map(|name| {
                        let i = SERVICES
                            .iter()
                            .position(|s| s == name)
                            .expect("known service");
                        let (port, java) = truth[i];
                        let values: Map<String, Value> = fields
                            .iter()
                            .map(|f| {
                                let v = match *f {
                                    "java" => json!(java),
                                    "port" => json!(8000 + port),
                                    _ => json!(format!("{port}.0")),
                                };
                                (f.to_string(), v)
                            })
                            .collect();
                        service(name, values, tags.clone())
                    })
                    .collect();
                let flags: Map<String, Value> =
                    flags.iter().map(|f| (f.to_string(), json!(true))).collect();
                json!({"$TYPE": "$MODEL", "flags": flags, "microservices": services})
            })
            .collect()
    })
}
