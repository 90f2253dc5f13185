//! Conformance checking against a closed subset of the JSON Schema vocabulary.
//!
//! Extractors register a schema describing the entities they accept, and links
//! describe their targets with one. Only the keywords below are understood;
//! anything else is rejected when the schema is loaded so that a typo never
//! silently widens a gate.
//!
//! | keyword | applies to | meaning |
//! |---|---|---|
//! | `type` | any | one type name or a list of them |
//! | `const` | any | value equality |
//! | `enum` | any | equality with one of the listed values |
//! | `pattern` | strings | unanchored regular-expression search |
//! | `minimum` / `maximum` | numbers | inclusive bounds |
//! | `properties` | objects | constrains keys that are present |
//! | `required` | objects | keys that must be present |
//! | `items` | arrays | every element conforms |
//! | `contains` | arrays | at least one element conforms |

use std::cmp::Ordering;
use std::fmt;

use regex::Regex;
use serde_json::Value;
use thiserror::Error;

use crate::model::{values_equal, ModelPath};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown schema keyword `{keyword}` at `{path}`")]
    UnknownKeyword { keyword: String, path: String },
    #[error("invalid `pattern` at `{path}`: {message}")]
    BadPattern { path: String, message: String },
    #[error("keyword `{keyword}` at `{path}` must be {expected}")]
    BadKeywordShape {
        keyword: String,
        path: String,
        expected: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsonType {
    Object,
    Array,
    String,
    Number,
    Integer,
    Boolean,
    Null,
}

impl JsonType {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "object" => Self::Object,
            "array" => Self::Array,
            "string" => Self::String,
            "number" => Self::Number,
            "integer" => Self::Integer,
            "boolean" => Self::Boolean,
            "null" => Self::Null,
            _ => return None,
        })
    }

    fn admits(self, value: &Value) -> bool {
        match (self, value) {
            (Self::Object, Value::Object(_))
            | (Self::Array, Value::Array(_))
            | (Self::String, Value::String(_))
            | (Self::Number, Value::Number(_))
            | (Self::Boolean, Value::Bool(_))
            | (Self::Null, Value::Null) => true,
            (Self::Integer, Value::Number(n)) => {
                n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0)
            }
            _ => false,
        }
    }
}

/// A loaded, validated schema.
#[derive(Clone)]
pub struct Schema {
    types: Option<Vec<JsonType>>,
    constant: Option<Value>,
    enumeration: Option<Vec<Value>>,
    pattern: Option<Regex>,
    minimum: Option<f64>,
    maximum: Option<f64>,
    properties: Vec<(String, Schema)>,
    required: Vec<String>,
    items: Option<Box<Schema>>,
    contains: Option<Box<Schema>>,
    document: Value,
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Schema({})", self.document)
    }
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.document == other.document
    }
}

impl Default for Schema {
    fn default() -> Self {
        Self::empty()
    }
}

impl Schema {
    /// The unconstrained schema `{}`.
    pub fn empty() -> Self {
        Self {
            types: None,
            constant: None,
            enumeration: None,
            pattern: None,
            minimum: None,
            maximum: None,
            properties: Vec::new(),
            required: Vec::new(),
            items: None,
            contains: None,
            document: Value::Object(Default::default()),
        }
    }

    /// The document this schema was loaded from.
    pub fn document(&self) -> &Value {
        &self.document
    }

    pub fn required(&self) -> &[String] {
        &self.required
    }

    pub fn property(&self, key: &str) -> Option<&Schema> {
        self.properties
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, s)| s)
    }

    pub fn conforms(&self, value: &Value) -> bool {
        conforms(value, self)
    }
}

/// Loads and validates a schema document.
pub fn load_schema(doc: &Value) -> Result<Schema, SchemaError> {
    load_at(doc, &ModelPath::root())
}

fn shape(keyword: &str, path: &ModelPath, expected: &str) -> SchemaError {
    SchemaError::BadKeywordShape {
        keyword: keyword.to_string(),
        path: path.to_string(),
        expected: expected.to_string(),
    }
}

fn load_at(doc: &Value, path: &ModelPath) -> Result<Schema, SchemaError> {
    let Value::Object(map) = doc else {
        return Err(shape("<schema>", path, "an object"));
    };
    let mut schema = Schema::empty();
    schema.document = doc.clone();

    for (keyword, value) in map {
        let here = path.child(keyword.clone());
        match keyword.as_str() {
            "type" => {
                let names: Vec<&Value> = match value {
                    Value::String(_) => vec![value],
                    Value::Array(list) if !list.is_empty() => list.iter().collect(),
                    _ => {
                        return Err(shape(
                            keyword,
                            path,
                            "a type name or a non-empty list of type names",
                        ))
                    }
                };
                let types = names
                    .into_iter()
                    .map(|n| n.as_str().and_then(JsonType::from_name))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        shape(
                            keyword,
                            path,
                            "one of object, array, string, number, integer, boolean, null",
                        )
                    })?;
                schema.types = Some(types);
            }
            "const" => schema.constant = Some(value.clone()),
            "enum" => {
                let list = value
                    .as_array()
                    .ok_or_else(|| shape(keyword, path, "an array"))?;
                schema.enumeration = Some(list.clone());
            }
            "pattern" => {
                let text = value
                    .as_str()
                    .ok_or_else(|| shape(keyword, path, "a string"))?;
                let regex = Regex::new(text).map_err(|e| SchemaError::BadPattern {
                    path: path.to_string(),
                    message: e.to_string(),
                })?;
                schema.pattern = Some(regex);
            }
            "minimum" | "maximum" => {
                let bound = value
                    .as_f64()
                    .ok_or_else(|| shape(keyword, path, "a number"))?;
                if keyword == "minimum" {
                    schema.minimum = Some(bound);
                } else {
                    schema.maximum = Some(bound);
                }
            }
            "properties" => {
                let props = value
                    .as_object()
                    .ok_or_else(|| shape(keyword, path, "an object of schemas"))?;
                for (key, sub) in props {
                    let loaded = load_at(sub, &here.child(key.clone()))?;
                    schema.properties.push((key.clone(), loaded));
                }
            }
            "required" => {
                let list = value
                    .as_array()
                    .and_then(|l| {
                        l.iter()
                            .map(|k| k.as_str().map(str::to_string))
                            .collect::<Option<Vec<_>>>()
                    })
                    .ok_or_else(|| shape(keyword, path, "an array of strings"))?;
                schema.required = list;
            }
            "items" => schema.items = Some(Box::new(load_at(value, &here)?)),
            "contains" => schema.contains = Some(Box::new(load_at(value, &here)?)),
            _ => {
                return Err(SchemaError::UnknownKeyword {
                    keyword: keyword.clone(),
                    path: path.to_string(),
                })
            }
        }
    }
    Ok(schema)
}

/// True iff `value` satisfies every keyword present in `schema`.
pub fn conforms(value: &Value, schema: &Schema) -> bool {
    if let Some(types) = &schema.types {
        if !types.iter().any(|t| t.admits(value)) {
            return false;
        }
    }
    if let Some(expected) = &schema.constant {
        if !values_equal(value, expected) {
            return false;
        }
    }
    if let Some(options) = &schema.enumeration {
        if !options.iter().any(|o| values_equal(value, o)) {
            return false;
        }
    }
    match value {
        Value::String(text) => {
            if let Some(pattern) = &schema.pattern {
                if !pattern.is_match(text) {
                    return false;
                }
            }
        }
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if schema
                .minimum
                .is_some_and(|min| x.partial_cmp(&min).is_none_or(Ordering::is_lt))
                || schema
                    .maximum
                    .is_some_and(|max| x.partial_cmp(&max).is_none_or(Ordering::is_gt))
            {
                return false;
            }
        }
        Value::Object(map) => {
            if !schema.required.iter().all(|key| map.contains_key(key)) {
                return false;
            }
            for (key, sub) in &schema.properties {
                if let Some(field) = map.get(key) {
                    if !conforms(field, sub) {
                        return false;
                    }
                }
            }
        }
        Value::Array(items) => {
            if let Some(each) = &schema.items {
                if !items.iter().all(|item| conforms(item, each)) {
                    return false;
                }
            }
            if let Some(some) = &schema.contains {
                if !items.iter().any(|item| conforms(item, some)) {
                    return false;
                }
            }
        }
        _ => {}
    }
    true
}
