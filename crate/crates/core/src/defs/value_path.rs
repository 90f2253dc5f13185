use std::fmt;

use serde_json::Value;

/// Dotted path into a parsed document, e.g. `services.*.build` or
/// `project.dependencies.dependency[*]`.
///
/// `*` fans out over array elements or object entries. `name[*]` fans out over
/// the elements of `name`, treating a single non-array value as a one-element
/// list (useful for XML, where one child is an object and several are an
/// array). At most one wildcard is allowed. Numeric segments index arrays.
#[derive(Clone, PartialEq, Eq)]
pub struct ValuePath {
    text: String,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Key(String),
    Each,
    EachItem,
}

impl fmt::Debug for ValuePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ValuePath({:?})", self.text)
    }
}

impl fmt::Display for ValuePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// One element produced by a wildcard: its key (object key or array index)
/// and the value found under it.
#[derive(Debug, Clone, PartialEq)]
pub struct FanOut<'a> {
    pub key: Value,
    pub value: &'a Value,
}

impl ValuePath {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut segments = Vec::new();
        if !text.is_empty() && text != "." {
            for part in text.split('.') {
                if part == "*" {
                    segments.push(Segment::Each);
                } else if let Some(key) = part.strip_suffix("[*]") {
                    if !key.is_empty() {
                        segments.push(Segment::Key(key.to_string()));
                    }
                    segments.push(Segment::EachItem);
                } else if part.is_empty() {
                    return Err(format!("empty segment in value path `{text}`"));
                } else if part.contains('*') || part.contains('[') {
                    return Err(format!(
                        "unsupported segment `{part}` in value path `{text}`"
                    ));
                } else {
                    segments.push(Segment::Key(part.to_string()));
                }
            }
        }
        let wildcards = segments
            .iter()
            .filter(|s| !matches!(s, Segment::Key(_)))
            .count();
        if wildcards > 1 {
            return Err(format!("value path `{text}` has more than one wildcard"));
        }
        Ok(Self {
            text: text.to_string(),
            segments,
        })
    }

    pub fn has_wildcard(&self) -> bool {
        self.segments.iter().any(|s| !matches!(s, Segment::Key(_)))
    }

    /// Resolves a wildcard-free path.
    pub fn get<'a>(&self, root: &'a Value) -> Option<&'a Value> {
        walk(&self.segments, root)
    }

    /// Resolves a path with one wildcard into its elements. A path without a
    /// wildcard yields the resolved value once, keyed by `null`.
    pub fn fan_out<'a>(&self, root: &'a Value) -> Vec<FanOut<'a>> {
        let Some(at) = self
            .segments
            .iter()
            .position(|s| !matches!(s, Segment::Key(_)))
        else {
            return self
                .get(root)
                .map(|value| FanOut {
                    key: Value::Null,
                    value,
                })
                .into_iter()
                .collect();
        };
        let Some(base) = walk(&self.segments[..at], root) else {
            return Vec::new();
        };
        let rest = &self.segments[at + 1..];
        let elements: Vec<(Value, &Value)> = match (&self.segments[at], base) {
            (_, Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| (Value::from(i), v))
                .collect(),
            (Segment::Each, Value::Object(map)) => map
                .iter()
                .map(|(k, v)| (Value::String(k.clone()), v))
                .collect(),
            (Segment::EachItem, Value::Null) | (Segment::Each, _) => Vec::new(),
            (Segment::EachItem, single) => vec![(Value::from(0), single)],
            (Segment::Key(_), _) => unreachable!("position found a wildcard"),
        };
        elements
            .into_iter()
            .filter_map(|(key, element)| walk(rest, element).map(|value| FanOut { key, value }))
            .collect()
    }
}

fn walk<'a>(segments: &[Segment], root: &'a Value) -> Option<&'a Value> {
    segments
        .iter()
        .try_fold(root, |node, segment| match (segment, node) {
            (Segment::Key(key), Value::Object(map)) => map.get(key),
            (Segment::Key(key), Value::Array(items)) => {
                key.parse::<usize>().ok().and_then(|i| items.get(i))
            }
            _ => None,
        })
}
