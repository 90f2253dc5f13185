use std::path::{Component, Path, PathBuf};

use serde_json::{Map, Value};

use crate::api::patterns;

/// A value whose string leaves may contain `${name|filter|...}` placeholders.
///
/// A leaf that is exactly one placeholder takes the bound value with its
/// type (arrays and objects included). Placeholders embedded in longer text
/// must bind scalars. A leaf with any unbound placeholder is dropped, along
/// with its key or array slot. `$${` writes a literal `${`.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    root: Node,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Literal(Value),
    Text(Vec<Piece>),
    Array(Vec<Node>),
    Object(Vec<(String, Node)>),
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Lit(String),
    Hole(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub name: String,
    pub filters: Vec<Filter>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Filter {
    /// Resolve against the directory of the current file (or the root) into
    /// a normalized absolute path.
    Path,
    Unquote,
    Lower,
    Upper,
    /// Object keys as an array.
    Keys,
    Basename,
    /// Look the value up in the named config object; unbound when absent.
    Map(String),
}

impl Filter {
    fn parse(text: &str) -> Result<Self, String> {
        Ok(match text {
            "path" => Self::Path,
            "unquote" => Self::Unquote,
            "lower" => Self::Lower,
            "upper" => Self::Upper,
            "keys" => Self::Keys,
            "basename" => Self::Basename,
            _ => match text.strip_prefix("map:") {
                Some(key) if !key.is_empty() => Self::Map(key.to_string()),
                _ => return Err(format!("unknown filter `{text}`")),
            },
        })
    }
}

/// What placeholders are evaluated against.
pub trait Scope {
    fn lookup(&self, name: &str) -> Option<Value>;
    fn config(&self) -> &Map<String, Value>;
    /// Directory that relative paths are resolved against.
    fn base_dir(&self) -> Option<PathBuf>;
}

impl Template {
    pub fn parse(value: &Value) -> Result<Self, String> {
        Ok(Self {
            root: parse_node(value)?,
        })
    }

    /// Parses a single string, e.g. a glob.
    pub fn parse_str(text: &str) -> Result<Self, String> {
        Self::parse(&Value::String(text.to_string()))
    }

    pub fn placeholders(&self) -> Vec<&Placeholder> {
        let mut out = Vec::new();
        collect(&self.root, &mut out);
        out
    }

    /// `Ok(None)` when the whole template dropped out for lack of bindings.
    pub fn render(&self, scope: &dyn Scope) -> Result<Option<Value>, String> {
        render_node(&self.root, scope)
    }
}

fn parse_node(value: &Value) -> Result<Node, String> {
    Ok(match value {
        Value::String(text) if text.contains("${") => Node::Text(parse_text(text)?),
        Value::Array(items) => Node::Array(items.iter().map(parse_node).collect::<Result<_, _>>()?),
        Value::Object(map) => Node::Object(
            map.iter()
                .map(|(k, v)| parse_node(v).map(|n| (k.clone(), n)))
                .collect::<Result<_, _>>()?,
        ),
        other => Node::Literal(other.clone()),
    })
}

fn parse_text(text: &str) -> Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        if rest[..start].ends_with('$') {
            literal.push_str(&rest[..start - 1]);
            literal.push_str("${");
            rest = &rest[start + 2..];
            continue;
        }
        literal.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| format!("unterminated placeholder in `{text}`"))?;
        let mut parts = after[..end].split('|').map(str::trim);
        let name = parts.next().unwrap_or_default();
        let valid_name = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'));
        if !valid_name {
            return Err(format!("invalid placeholder name `{name}` in `{text}`"));
        }
        let filters = parts.map(Filter::parse).collect::<Result<Vec<_>, _>>()?;
        if !literal.is_empty() {
            pieces.push(Piece::Lit(std::mem::take(&mut literal)));
        }
        pieces.push(Piece::Hole(Placeholder {
            name: name.to_string(),
            filters,
        }));
        rest = &after[end + 1..];
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        pieces.push(Piece::Lit(literal));
    }
    Ok(pieces)
}

fn collect<'a>(node: &'a Node, out: &mut Vec<&'a Placeholder>) {
    match node {
        Node::Literal(_) => {}
        Node::Text(pieces) => out.extend(pieces.iter().filter_map(|p| match p {
            Piece::Hole(h) => Some(h),
            Piece::Lit(_) => None,
        })),
        Node::Array(items) => items.iter().for_each(|n| collect(n, out)),
        Node::Object(fields) => fields.iter().for_each(|(_, n)| collect(n, out)),
    }
}

fn render_node(node: &Node, scope: &dyn Scope) -> Result<Option<Value>, String> {
    Ok(match node {
        Node::Literal(v) => Some(v.clone()),
        Node::Text(pieces) => render_text(pieces, scope)?,
        Node::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                if let Some(v) = render_node(item, scope)? {
                    out.push(v);
                }
            }
            Some(Value::Array(out))
        }
        Node::Object(fields) => {
            let mut out = Map::new();
            for (key, field) in fields {
                if let Some(v) = render_node(field, scope)? {
                    out.insert(key.clone(), v);
                }
            }
            Some(Value::Object(out))
        }
    })
}

fn render_text(pieces: &[Piece], scope: &dyn Scope) -> Result<Option<Value>, String> {
    if let [Piece::Hole(hole)] = pieces {
        return resolve(hole, scope);
    }
    let mut out = String::new();
    for piece in pieces {
        match piece {
            Piece::Lit(text) => out.push_str(text),
            Piece::Hole(hole) => match resolve(hole, scope)? {
                None => return Ok(None),
                Some(Value::String(s)) => out.push_str(&s),
                Some(v @ (Value::Number(_) | Value::Bool(_) | Value::Null)) => {
                    out.push_str(&v.to_string())
                }
                Some(_) => {
                    return Err(format!(
                        "placeholder `{}` binds a structured value inside text",
                        hole.name
                    ))
                }
            },
        }
    }
    Ok(Some(Value::String(out)))
}

fn resolve(hole: &Placeholder, scope: &dyn Scope) -> Result<Option<Value>, String> {
    let mut value = scope.lookup(&hole.name);
    for filter in &hole.filters {
        let Some(current) = value else {
            return Ok(None);
        };
        value = apply(filter, current, scope).map_err(|e| format!("`{}`: {e}", hole.name))?;
    }
    Ok(value)
}

fn apply(filter: &Filter, value: Value, scope: &dyn Scope) -> Result<Option<Value>, String> {
    let text = |v: &Value| -> Result<String, String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(_) | Value::Bool(_) => Ok(v.to_string()),
            _ => Err(format!("filter {filter:?} needs a string, got {v}")),
        }
    };
    Ok(Some(match filter {
        Filter::Path => {
            let raw = text(&value)?;
            let base = scope
                .base_dir()
                .ok_or_else(|| "`path` filter used without a root directory".to_string())?;
            Value::String(display_path(&normalize_lexically(&base.join(raw))))
        }
        Filter::Unquote => Value::String(patterns::unquote(&text(&value)?)),
        Filter::Lower => Value::String(text(&value)?.to_lowercase()),
        Filter::Upper => Value::String(text(&value)?.to_uppercase()),
        Filter::Basename => {
            let raw = text(&value)?;
            let trimmed = raw.trim_end_matches('/');
            Value::String(trimmed.rsplit('/').next().unwrap_or(trimmed).to_string())
        }
        Filter::Keys => match value {
            Value::Object(map) => Value::Array(map.keys().cloned().map(Value::String).collect()),
            Value::Array(items) => Value::Array(items),
            other => return Err(format!("`keys` filter needs an object, got {other}")),
        },
        Filter::Map(key) => {
            let table = scope
                .config()
                .get(key)
                .and_then(Value::as_object)
                .ok_or_else(|| format!("config `{key}` is not an object"))?;
            return Ok(table.get(&text(&value)?).cloned());
        }
    }))
}

/// Removes `.` and resolves `..` without touching the filesystem.
pub fn normalize_lexically(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for component in path.components() {
        match component {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

pub fn display_path(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}
