//! Services available to extractors: rooted file search and reading, regular
//! expression search, and parsers for the common configuration formats.
//!
//! Every file operation is relative to a root directory (normally the
//! entity's `$path`) and never reaches outside it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use globset::GlobBuilder;
use regex::Regex;
use serde_json::{Map, Number, Value};
use thiserror::Error;
use walkdir::WalkDir;

use crate::model::normalize_numbers;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("root directory `{}` does not exist", .0.display())]
    RootMissing(PathBuf),
    #[error("file `{0}` does not exist")]
    FileMissing(String),
    #[error("path `{0}` escapes the extractor root")]
    PathEscapesRoot(String),
    #[error("invalid glob `{glob}`: {message}")]
    BadGlob { glob: String, message: String },
    #[error("invalid regular expression: {0}")]
    BadPattern(String),
    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),
    #[error("{format} parse error{}: {message}", location(*.line, *.column))]
    Parse {
        format: Format,
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

/// A file found by [`get_paths`], relative to the search root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FileMatch {
    pub path: String,
}

impl FileMatch {
    /// Directory part of the path, `""` for files at the root.
    pub fn dir(&self) -> &str {
        self.path.rsplit_once('/').map_or("", |(dir, _)| dir)
    }

    pub fn name(&self) -> &str {
        self.path
            .rsplit_once('/')
            .map_or(self.path.as_str(), |(_, name)| name)
    }

    /// Extension without the dot, `""` when there is none. Dotfiles such as
    /// `.env` have no extension.
    pub fn extension(&self) -> &str {
        let name = self.name();
        match name.rfind('.') {
            Some(0) | None => "",
            Some(i) => &name[i + 1..],
        }
    }

    pub fn stem(&self) -> &str {
        let name = self.name();
        match name.rfind('.') {
            Some(0) | None => name,
            Some(i) => &name[..i],
        }
    }
}

impl fmt::Display for FileMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path)
    }
}

/// Regular files under `root` matching `glob`, sorted by relative path.
///
/// `*` and `?` stay within one path segment, `**` crosses directories and
/// `{a,b}` alternates. Hidden files are included; symlinks are not followed.
pub fn get_paths(root: &Path, glob: &str) -> Result<Vec<FileMatch>, ApiError> {
    let matcher = GlobBuilder::new(glob)
        .literal_separator(true)
        .backslash_escape(true)
        .build()
        .map_err(|e| ApiError::BadGlob {
            glob: glob.to_string(),
            message: e.kind().to_string(),
        })?
        .compile_matcher();
    if !root.is_dir() {
        return Err(ApiError::RootMissing(root.to_path_buf()));
    }
    let mut found = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) => {
                log::warn!("skipping unreadable entry under {}: {err}", root.display());
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(relative) = entry.path().strip_prefix(root) else {
            continue;
        };
        let path = relative
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if matcher.is_match(&path) {
            found.push(FileMatch { path });
        }
    }
    found.sort();
    Ok(found)
}

/// Lexically resolves `relative` under `root`, refusing anything that
/// would leave it.
pub fn confine(root: &Path, relative: &str) -> Result<PathBuf, ApiError> {
    let mut parts: Vec<&std::ffi::OsStr> = Vec::new();
    for component in Path::new(relative).components() {
        match component {
            Component::Normal(part) => parts.push(part),
            Component::CurDir => {}
            Component::ParentDir => {
                if parts.pop().is_none() {
                    return Err(ApiError::PathEscapesRoot(relative.to_string()));
                }
            }
            Component::RootDir | Component::Prefix(_) => {
                return Err(ApiError::PathEscapesRoot(relative.to_string()))
            }
        }
    }
    Ok(parts
        .into_iter()
        .fold(root.to_path_buf(), |acc, p| acc.join(p)))
}

/// Contents of a file under `root`, decoded as UTF-8 with invalid bytes
/// replaced by U+FFFD.
pub fn read_text(root: &Path, path: &str) -> Result<String, ApiError> {
    let full = confine(root, path)?;
    if !full.is_file() {
        return Err(ApiError::FileMissing(path.to_string()));
    }
    let bytes = std::fs::read(&full).map_err(|source| ApiError::Io {
        path: path.to_string(),
        source,
    })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// One regular-expression match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegexMatch {
    pub text: String,
    pub start: usize,
    pub end: usize,
    /// Every named group of the pattern; `None` when the group did not take part.
    pub captures: BTreeMap<String, Option<String>>,
}

impl RegexMatch {
    pub fn capture(&self, name: &str) -> Option<&str> {
        self.captures.get(name).and_then(|c| c.as_deref())
    }
}

pub fn compile_pattern(pattern: &str) -> Result<Regex, ApiError> {
    Regex::new(&patterns::expand(pattern)).map_err(|e| ApiError::BadPattern(e.to_string()))
}

/// All non-overlapping matches of `pattern` in `text`, left to right.
/// `${lib.NAME}` references to the [`patterns`] library are expanded first.
pub fn regex_search(text: &str, pattern: &str) -> Result<Vec<RegexMatch>, ApiError> {
    Ok(find_matches(text, &compile_pattern(pattern)?))
}

pub fn find_matches(text: &str, regex: &Regex) -> Vec<RegexMatch> {
    let names: Vec<&str> = regex.capture_names().flatten().collect();
    regex
        .captures_iter(text)
        .map(|caps| {
            let whole = caps.get(0).expect("group 0 always participates");
            RegexMatch {
                text: whole.as_str().to_string(),
                start: whole.start(),
                end: whole.end(),
                captures: names
                    .iter()
                    .map(|name| {
                        (
                            name.to_string(),
                            caps.name(name).map(|m| m.as_str().to_string()),
                        )
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Ready-made expressions for things extractors look for all the time.
/// Each is a non-capturing group, so it can be embedded in larger patterns.
pub mod patterns {
    /// `scheme://rest`, stopping at whitespace, quotes and brackets.
    pub const URI: &str = r#"(?:[A-Za-z][A-Za-z0-9+.\-]*://[^\s"'<>(){}\[\]]+)"#;
    /// A double- or single-quoted literal on one line, escapes allowed.
    pub const STRING_LITERAL: &str = r#"(?:"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')"#;
    /// C-family identifier.
    pub const IDENTIFIER: &str = r"(?:[A-Za-z_$][A-Za-z0-9_$]*)";

    pub fn lookup(name: &str) -> Option<&'static str> {
        match name {
            "URI" => Some(URI),
            "STRING_LITERAL" => Some(STRING_LITERAL),
            "IDENTIFIER" => Some(IDENTIFIER),
            _ => None,
        }
    }

    /// Replaces `${lib.NAME}` with the named library pattern. Unknown names
    /// are left alone and will usually fail to compile.
    pub fn expand(pattern: &str) -> String {
        let mut out = String::with_capacity(pattern.len());
        let mut rest = pattern;
        while let Some(start) = rest.find("${lib.") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 6..];
            match after.find('}') {
                Some(end) => match lookup(&after[..end]) {
                    Some(expansion) => {
                        out.push_str(expansion);
                        rest = &after[end + 1..];
                    }
                    None => {
                        out.push_str(&rest[start..start + 6]);
                        rest = after;
                    }
                },
                None => {
                    out.push_str(&rest[start..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out
    }

    /// Strips the quotes from a matched [`STRING_LITERAL`] and resolves the
    /// simple backslash escapes.
    pub fn unquote(literal: &str) -> String {
        let inner = match literal.chars().next() {
            Some(q @ ('"' | '\'')) if literal.len() >= 2 && literal.ends_with(q) => {
                &literal[1..literal.len() - 1]
            }
            _ => literal,
        };
        let mut out = String::with_capacity(inner.len());
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Yaml,
    Toml,
    Xml,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Yaml => "yaml",
            Self::Toml => "toml",
            Self::Xml => "xml",
        })
    }
}

impl FromStr for Format {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "yaml" => Ok(Self::Yaml),
            "toml" => Ok(Self::Toml),
            "xml" => Ok(Self::Xml),
            other => Err(ApiError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Parses `text` into a model value.
///
/// XML elements become objects keyed by tag name. Attributes go under
/// `"@attr"`, text under `"#text"`, and repeated sibling tags become arrays.
/// An element with neither attributes nor child elements is just its text.
pub fn parse(text: &str, format: Format) -> Result<Value, ApiError> {
    let mut value = match format {
        Format::Json => serde_json::from_str(text).map_err(|e| ApiError::Parse {
            format,
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        })?,
        Format::Yaml => {
            let doc: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| {
                let loc = e.location();
                ApiError::Parse {
                    format,
                    message: e.to_string(),
                    line: loc.as_ref().map(|l| l.line()),
                    column: loc.as_ref().map(|l| l.column()),
                }
            })?;
            yaml_to_value(doc)
        }
        Format::Toml => {
            let table: toml::Table = toml::from_str(text).map_err(|e| {
                let (line, column) = e.span().map(|span| line_column(text, span.start)).unzip();
                ApiError::Parse {
                    format,
                    message: e.message().to_string(),
                    line,
                    column,
                }
            })?;
            toml_to_value(toml::Value::Table(table))
        }
        Format::Xml => {
            let doc = roxmltree::Document::parse(text).map_err(|e| {
                let pos = e.pos();
                ApiError::Parse {
                    format,
                    message: e.to_string(),
                    line: Some(pos.row as usize),
                    column: Some(pos.col as usize),
                }
            })?;
            let root = doc.root_element();
            let mut map = Map::new();
            map.insert(root.tag_name().name().to_string(), xml_element(root));
            Value::Object(map)
        }
    };
    normalize_numbers(&mut value);
    Ok(value)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    (line, column)
}

fn yaml_to_value(doc: serde_yaml::Value) -> Value {
    use serde_yaml::Value as Y;
    match doc {
        Y::Null => Value::Null,
        Y::Bool(b) => Value::Bool(b),
        Y::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::from(i)
            } else if let Some(u) = n.as_u64() {
                Value::from(u)
            } else {
                n.as_f64()
                    .and_then(Number::from_f64)
                    .map_or(Value::Null, Value::Number)
            }
        }
        Y::String(s) => Value::String(s),
        Y::Sequence(items) => Value::Array(items.into_iter().map(yaml_to_value).collect()),
        Y::Mapping(mapping) => Value::Object(
            mapping
                .into_iter()
                .map(|(k, v)| (yaml_key(k), yaml_to_value(v)))
                .collect(),
        ),
        Y::Tagged(tagged) => yaml_to_value(tagged.value),
    }
}

fn yaml_key(key: serde_yaml::Value) -> String {
    match key {
        serde_yaml::Value::String(s) => s,
        other => match yaml_to_value(other) {
            Value::String(s) => s,
            Value::Null => "null".to_string(),
            v => v.to_string(),
        },
    }
}

fn toml_to_value(value: toml::Value) -> Value {
    match value {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => Number::from_f64(f).map_or(Value::Null, Value::Number),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(items) => Value::Array(items.into_iter().map(toml_to_value).collect()),
        toml::Value::Table(table) => Value::Object(
            table
                .into_iter()
                .map(|(k, v)| (k, toml_to_value(v)))
                .collect(),
        ),
    }
}

fn xml_element(node: roxmltree::Node) -> Value {
    let mut map = Map::new();
    let attrs: Map<String, Value> = node
        .attributes()
        .map(|a| (a.name().to_string(), Value::String(a.value().to_string())))
        .collect();
    if !attrs.is_empty() {
        map.insert("@attr".to_string(), Value::Object(attrs));
    }
    let mut text = String::new();
    let mut has_children = false;
    for child in node.children() {
        if child.is_element() {
            has_children = true;
            let tag = child.tag_name().name().to_string();
            let value = xml_element(child);
            match map.get_mut(&tag) {
                Some(Value::Array(items)) => items.push(value),
                Some(existing) => {
                    let first = existing.take();
                    *existing = Value::Array(vec![first, value]);
                }
                None => {
                    map.insert(tag, value);
                }
            }
        } else if child.is_text() {
            text.push_str(child.text().unwrap_or_default());
        }
    }
    let text = text.trim();
    if !has_children && map.is_empty() {
        return Value::String(text.to_string());
    }
    if !text.is_empty() {
        map.insert("#text".to_string(), Value::String(text.to_string()));
    }
    Value::Object(map)
}
