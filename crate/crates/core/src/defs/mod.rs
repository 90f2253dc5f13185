//! Declarative extractor definitions.
//!
//! A definition is a JSON or YAML document that describes an extractor
//! without code: which entities it accepts (`match`), its runtime options
//! (`config_defaults`, optionally checked by `config_schema`), which files it
//! reads and how (`sources`), and what it writes back (`emit`).
//!
//! ```yaml
//! id: nodejs-detect
//! match:
//!   type: object
//!   properties:
//!     $TYPE: {const: microservice}
//!     $path: {type: string}
//!   required: [$TYPE, $path]
//! sources:
//!   - name: package
//!     glob: package.json
//!     parser: json
//!     select: {deps: dependencies}
//! emit:
//!   - source: package
//!     target: buildTool
//!     template: npm
//!   - source: package
//!     each: deps
//!     target: dependencies[]
//!     template: "${item}"
//! ```
//!
//! Each source turns every matching file into one or more binding sets. Every
//! applicable emit rule is rendered once per binding set and merged into the
//! entity with the usual aggregation rules. A `target` ending in `[]` appends
//! to an array field; `.` merges an object template into the entity itself.

mod template;
mod value_path;

pub mod builtins;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::aggregate::{Aggregator, Conflict};
use crate::api::{self, ApiError, FileMatch, Format};
use crate::model::Object;
use crate::schema::{load_schema, Schema};

pub use template::{display_path, normalize_lexically, Filter, Placeholder, Scope, Template};
pub use value_path::{FanOut, ValuePath};

#[derive(Debug, Error)]
pub enum DefinitionError {
    #[error("bad extractor definition `{context}`: {message}")]
    BadDefinition { context: String, message: String },
    #[error("cannot read `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DefinitionError {
    fn bad(context: impl Into<String>, message: impl Into<String>) -> Self {
        Self::BadDefinition {
            context: context.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("`{path}`: {source}")]
    File {
        path: String,
        #[source]
        source: ApiError,
    },
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("emit rule {rule}: {message}")]
    Template { rule: usize, message: String },
    #[error(transparent)]
    Conflict(#[from] Box<Conflict>),
}

#[derive(Debug, Clone)]
pub struct DeclarativeDef {
    pub id: String,
    pub description: Option<String>,
    pub match_schema: Schema,
    pub config_defaults: Object,
    pub config_schema: Option<Schema>,
    pub sources: Vec<SourceRule>,
    pub emit: Vec<EmitRule>,
}

#[derive(Debug, Clone)]
pub struct SourceRule {
    pub name: Option<String>,
    pub globs: Vec<Template>,
    pub exclude: Vec<Template>,
    pub parser: SourceParser,
    pub each: Option<ValuePath>,
    /// Binding name to alternative paths; the first non-null one wins.
    pub select: Vec<(String, Vec<ValuePath>)>,
}

#[derive(Debug, Clone)]
pub enum SourceParser {
    Structured(Format),
    Regex(Regex),
    /// No content parsing; only the `file.*` bindings.
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmitTarget {
    Field { name: String, append: bool },
    Entity,
}

#[derive(Debug, Clone)]
pub struct EmitRule {
    pub source: Option<String>,
    pub target: EmitTarget,
    pub when: Option<Condition>,
    pub each: Option<String>,
    pub template: Template,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    ConfigContains { key: String, value: Value },
    ConfigEquals { key: String, value: Value },
    Bound(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDef {
    id: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(rename = "match")]
    match_schema: Value,
    #[serde(default)]
    config_defaults: Map<String, Value>,
    #[serde(default)]
    config_schema: Option<Value>,
    #[serde(default)]
    sources: Vec<RawSource>,
    #[serde(default)]
    emit: Vec<RawEmit>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            Self::One(s) => vec![s],
            Self::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    #[serde(default)]
    name: Option<String>,
    glob: OneOrMany,
    #[serde(default)]
    exclude: Option<OneOrMany>,
    parser: String,
    #[serde(default)]
    pattern: Option<String>,
    #[serde(default)]
    each: Option<String>,
    #[serde(default)]
    select: Map<String, Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmit {
    #[serde(default)]
    source: Option<String>,
    target: String,
    template: Value,
    #[serde(default)]
    when: Option<RawWhen>,
    #[serde(default)]
    each: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWhen {
    #[serde(default)]
    config: Option<String>,
    #[serde(default)]
    contains: Option<Value>,
    #[serde(default)]
    equals: Option<Value>,
    #[serde(default)]
    bound: Option<String>,
}

const FILE_BINDINGS: &[&str] = &[
    "root",
    "file.path",
    "file.dir",
    "file.name",
    "file.stem",
    "file.ext",
    "file.absdir",
    "file.abspath",
];

/// Validates a definition document.
pub fn load_def(doc: &Value) -> Result<DeclarativeDef, DefinitionError> {
    let context = doc
        .get("id")
        .and_then(Value::as_str)
        .unwrap_or("<no id>")
        .to_string();
    let raw: RawDef = serde_json::from_value(doc.clone())
        .map_err(|e| DefinitionError::bad(&context, e.to_string()))?;
    let bad = |message: String| DefinitionError::bad(&context, message);

    if raw.id.trim().is_empty() {
        return Err(bad("`id` must be non-empty".into()));
    }
    let match_schema = load_schema(&raw.match_schema).map_err(|e| bad(format!("match: {e}")))?;
    let config_schema = raw
        .config_schema
        .as_ref()
        .map(load_schema)
        .transpose()
        .map_err(|e| bad(format!("config_schema: {e}")))?;

    let mut config_keys: BTreeSet<String> = raw.config_defaults.keys().cloned().collect();
    if let Some(doc) = &raw.config_schema {
        if let Some(props) = doc.get("properties").and_then(Value::as_object) {
            config_keys.extend(props.keys().cloned());
        }
    }
    if let Some(schema) = &config_schema {
        if !schema.conforms(&Value::Object(raw.config_defaults.clone())) {
            return Err(bad("config_defaults do not satisfy config_schema".into()));
        }
    }

    let mut sources = Vec::with_capacity(raw.sources.len());
    let mut provided: Vec<BTreeSet<String>> = Vec::new();
    for (i, src) in raw.sources.into_iter().enumerate() {
        let where_ = format!("sources[{i}]");
        let (rule, names) =
            load_source(src, &config_keys).map_err(|m| bad(format!("{where_}: {m}")))?;
        if let Some(name) = &rule.name {
            if sources
                .iter()
                .any(|s: &SourceRule| s.name.as_ref() == Some(name))
            {
                return Err(bad(format!("{where_}: duplicate source name `{name}`")));
            }
        }
        sources.push(rule);
        provided.push(names);
    }

    let mut emit = Vec::with_capacity(raw.emit.len());
    for (i, rule) in raw.emit.into_iter().enumerate() {
        let rule = load_emit(rule, &sources, &provided, &config_keys)
            .map_err(|m| bad(format!("emit[{i}]: {m}")))?;
        emit.push(rule);
    }

    Ok(DeclarativeDef {
        id: raw.id,
        description: raw.description,
        match_schema,
        config_defaults: raw.config_defaults,
        config_schema,
        sources,
        emit,
    })
}

fn check_config_template(t: &Template, config_keys: &BTreeSet<String>) -> Result<(), String> {
    for hole in t.placeholders() {
        match hole.name.strip_prefix("config.") {
            Some(key) if config_keys.contains(key) => {}
            _ => return Err(format!("`${{{}}}` must name a config key", hole.name)),
        }
    }
    Ok(())
}

fn load_source(
    src: RawSource,
    config_keys: &BTreeSet<String>,
) -> Result<(SourceRule, BTreeSet<String>), String> {
    let mut names = BTreeSet::new();
    let parse_globs = |list: Vec<String>| -> Result<Vec<Template>, String> {
        list.iter()
            .map(|g| {
                let t = Template::parse_str(g)?;
                check_config_template(&t, config_keys)?;
                Ok(t)
            })
            .collect()
    };
    let globs = parse_globs(src.glob.into_vec())?;
    if globs.is_empty() {
        return Err("`glob` must not be empty".into());
    }
    let exclude = parse_globs(src.exclude.map(OneOrMany::into_vec).unwrap_or_default())?;

    let parser = match src.parser.as_str() {
        "regex" => {
            let pattern = src
                .pattern
                .as_deref()
                .ok_or("parser `regex` needs a `pattern`")?;
            let regex = api::compile_pattern(pattern).map_err(|e| e.to_string())?;
            names.extend(regex.capture_names().flatten().map(str::to_string));
            names.insert("match".to_string());
            SourceParser::Regex(regex)
        }
        "path" => SourceParser::Path,
        other => {
            let format = other
                .parse::<Format>()
                .map_err(|_| format!("unknown parser `{other}`"))?;
            names.insert("value".to_string());
            SourceParser::Structured(format)
        }
    };
    let structured = matches!(parser, SourceParser::Structured(_));
    if src.pattern.is_some() && !matches!(parser, SourceParser::Regex(_)) {
        return Err("`pattern` is only valid with parser `regex`".into());
    }
    if !structured && (src.each.is_some() || !src.select.is_empty()) {
        return Err("`each` and `select` need a structured parser".into());
    }

    let each = src.each.as_deref().map(ValuePath::parse).transpose()?;
    if let Some(path) = &each {
        if !path.has_wildcard() {
            return Err(format!("`each` path `{path}` needs a wildcard"));
        }
        names.insert("key".to_string());
    }

    let mut select = Vec::new();
    for (name, choice) in src.select {
        let alternatives: Vec<&str> = match &choice {
            Value::String(s) => vec![s.as_str()],
            Value::Array(items) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .ok_or_else(|| format!("select `{name}`: expected strings"))
                })
                .collect::<Result<_, _>>()?,
            _ => return Err(format!("select `{name}`: expected a path or list of paths")),
        };
        let paths = alternatives
            .into_iter()
            .map(ValuePath::parse)
            .collect::<Result<Vec<_>, _>>()?;
        if paths.is_empty() || paths.iter().any(ValuePath::has_wildcard) {
            return Err(format!(
                "select `{name}`: paths must be non-empty and wildcard-free"
            ));
        }
        names.insert(name.clone());
        select.push((name, paths));
    }

    Ok((
        SourceRule {
            name: src.name,
            globs,
            exclude,
            parser,
            each,
            select,
        },
        names,
    ))
}

fn load_emit(
    raw: RawEmit,
    sources: &[SourceRule],
    provided: &[BTreeSet<String>],
    config_keys: &BTreeSet<String>,
) -> Result<EmitRule, String> {
    let mut available: BTreeSet<String> = FILE_BINDINGS.iter().map(|s| s.to_string()).collect();
    match &raw.source {
        Some(name) => {
            let i = sources
                .iter()
                .position(|s| s.name.as_deref() == Some(name.as_str()))
                .ok_or_else(|| format!("unknown source `{name}`"))?;
            available.extend(provided[i].iter().cloned());
        }
        None => provided
            .iter()
            .for_each(|p| available.extend(p.iter().cloned())),
    }

    let target = match raw.target.as_str() {
        "." => EmitTarget::Entity,
        t => {
            let (name, append) = match t.strip_suffix("[]") {
                Some(name) => (name, true),
                None => (t, false),
            };
            if name.is_empty() || name.contains('.') || name.contains('[') {
                return Err(format!("invalid target `{t}`"));
            }
            EmitTarget::Field {
                name: name.to_string(),
                append,
            }
        }
    };

    let when = raw
        .when
        .map(|w| -> Result<Condition, String> {
            match (w.config, w.contains, w.equals, w.bound) {
                (Some(key), Some(value), None, None) => {
                    Ok(Condition::ConfigContains { key, value })
                }
                (Some(key), None, Some(value), None) => Ok(Condition::ConfigEquals { key, value }),
                (None, None, None, Some(name)) => Ok(Condition::Bound(name)),
                _ => Err("`when` takes `config` with `contains` or `equals`, or `bound`".into()),
            }
        })
        .transpose()?;

    let check_name = |name: &str, available: &BTreeSet<String>| -> Result<(), String> {
        if let Some(key) = name.strip_prefix("config.") {
            if config_keys.contains(key) {
                return Ok(());
            }
        } else if name.starts_with("entity.") || available.contains(name) {
            return Ok(());
        }
        Err(format!("unresolvable binding `{name}`"))
    };

    match &when {
        Some(Condition::ConfigContains { key, .. } | Condition::ConfigEquals { key, .. }) => {
            if !config_keys.contains(key) {
                return Err(format!("`when` names unknown config key `{key}`"));
            }
        }
        Some(Condition::Bound(name)) => check_name(name, &available)?,
        None => {}
    }
    if let Some(each) = &raw.each {
        check_name(each, &available)?;
        available.insert("item".to_string());
    }

    let template = Template::parse(&raw.template)?;
    for hole in template.placeholders() {
        check_name(&hole.name, &available)?;
        for filter in &hole.filters {
            if let Filter::Map(key) = filter {
                if !config_keys.contains(key) {
                    return Err(format!("filter `map:{key}` names unknown config key"));
                }
            }
        }
    }

    Ok(EmitRule {
        source: raw.source,
        target,
        when,
        each: raw.each,
        template,
    })
}

/// Loads a `.json`, `.yaml` or `.yml` definition file.
pub fn load_def_file(path: &Path) -> Result<DeclarativeDef, DefinitionError> {
    let text = fs::read_to_string(path).map_err(|source| DefinitionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format = if path.extension().is_some_and(|e| e == "json") {
        Format::Json
    } else {
        Format::Yaml
    };
    let doc = api::parse(&text, format)
        .map_err(|e| DefinitionError::bad(path.display().to_string(), e.to_string()))?;
    load_def(&doc).map_err(|e| match e {
        DefinitionError::BadDefinition { context, message } => DefinitionError::BadDefinition {
            context: format!("{} ({context})", path.display()),
            message,
        },
        other => other,
    })
}

pub fn is_definition_file(name: &str) -> bool {
    [".extractor.json", ".extractor.yaml", ".extractor.yml"]
        .iter()
        .any(|suffix| name.ends_with(suffix))
}

/// Every `*.extractor.{json,yaml,yml}` file in `dir`, in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<DeclarativeDef>, DefinitionError> {
    let io = |source| DefinitionError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(is_definition_file)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    files.iter().map(|p| load_def_file(p)).collect()
}

impl DeclarativeDef {
    /// Defaults overlaid key by key with `overrides`, then checked.
    pub fn configure(&self, overrides: Option<&Object>) -> Result<Object, DefinitionError> {
        let mut config = self.config_defaults.clone();
        if let Some(overrides) = overrides {
            let declared: BTreeSet<&String> = self
                .config_defaults
                .keys()
                .chain(
                    self.config_schema
                        .as_ref()
                        .and_then(|s| s.document().get("properties"))
                        .and_then(Value::as_object)
                        .into_iter()
                        .flat_map(|p| p.keys()),
                )
                .collect();
            for (key, value) in overrides {
                if !declared.contains(key) {
                    return Err(DefinitionError::bad(
                        &self.id,
                        format!("unknown config option `{key}`"),
                    ));
                }
                config.insert(key.clone(), value.clone());
            }
        }
        if let Some(schema) = &self.config_schema {
            if !schema.conforms(&Value::Object(config.clone())) {
                return Err(DefinitionError::bad(
                    &self.id,
                    format!(
                        "config {} does not satisfy the config schema",
                        Value::Object(config)
                    ),
                ));
            }
        }
        Ok(config)
    }
}

struct BindingScope<'a> {
    values: &'a BTreeMap<String, Value>,
    item: Option<&'a Value>,
    file: Option<&'a FileMatch>,
    root: Option<&'a Path>,
    config: &'a Object,
    entity: &'a Value,
}

impl BindingScope<'_> {
    fn file_dir(&self) -> Option<PathBuf> {
        let root = self.root?;
        Some(match self.file {
            Some(file) if !file.dir().is_empty() => root.join(file.dir()),
            _ => root.to_path_buf(),
        })
    }
}

impl Scope for BindingScope<'_> {
    fn lookup(&self, name: &str) -> Option<Value> {
        if name == "item" {
            return self.item.cloned();
        }
        if name == "root" {
            return self.root.map(|r| Value::String(display_path(r)));
        }
        if let Some(key) = name.strip_prefix("config.") {
            return self.config.get(key).cloned();
        }
        if let Some(key) = name.strip_prefix("entity.") {
            return self.entity.get(key).cloned();
        }
        if let Some(part) = name.strip_prefix("file.") {
            let file = self.file?;
            let text = match part {
                "path" => file.path.clone(),
                "dir" => file.dir().to_string(),
                "name" => file.name().to_string(),
                "stem" => file.stem().to_string(),
                "ext" => file.extension().to_string(),
                "absdir" => display_path(&normalize_lexically(&self.file_dir()?)),
                "abspath" => display_path(&normalize_lexically(&self.root?.join(&file.path))),
                _ => return None,
            };
            return Some(Value::String(text));
        }
        self.values.get(name).cloned()
    }

    fn config(&self) -> &Object {
        self.config
    }

    fn base_dir(&self) -> Option<PathBuf> {
        self.file_dir()
    }
}

fn expand_globs(templates: &[Template], config: &Object) -> Result<Vec<String>, String> {
    let empty = BTreeMap::new();
    let scope = BindingScope {
        values: &empty,
        item: None,
        file: None,
        root: None,
        config,
        entity: &Value::Null,
    };
    let mut out = Vec::new();
    for t in templates {
        match t.render(&scope)? {
            Some(Value::String(s)) => out.push(s),
            Some(Value::Array(items)) => {
                for item in items {
                    match item {
                        Value::String(s) => out.push(s),
                        other => return Err(format!("glob list holds a non-string {other}")),
                    }
                }
            }
            Some(other) => {
                return Err(format!(
                    "glob must be a string or list of strings, got {other}"
                ))
            }
            None => {}
        }
    }
    Ok(out)
}

impl SourceRule {
    fn files(&self, root: &Path, config: &Object) -> Result<Vec<FileMatch>, ExtractionError> {
        let template_error = |message| ExtractionError::Template {
            rule: usize::MAX,
            message,
        };
        let globs = expand_globs(&self.globs, config).map_err(template_error)?;
        let excludes = expand_globs(&self.exclude, config).map_err(template_error)?;
        let mut excluded = globset::GlobSetBuilder::new();
        for pattern in &excludes {
            let glob = globset::GlobBuilder::new(pattern)
                .literal_separator(true)
                .build()
                .map_err(|e| ApiError::BadGlob {
                    glob: pattern.clone(),
                    message: e.kind().to_string(),
                })?;
            excluded.add(glob);
        }
        let excluded = excluded.build().map_err(|e| ApiError::BadGlob {
            glob: excludes.join(", "),
            message: e.to_string(),
        })?;
        let mut found = BTreeSet::new();
        for glob in &globs {
            for file in api::get_paths(root, glob)? {
                if !excluded.is_match(&file.path) {
                    found.insert(file);
                }
            }
        }
        Ok(found.into_iter().collect())
    }

    fn binding_sets(
        &self,
        root: &Path,
        file: &FileMatch,
    ) -> Result<Vec<BTreeMap<String, Value>>, ExtractionError> {
        let file_error = |source| ExtractionError::File {
            path: file.path.clone(),
            source,
        };
        match &self.parser {
            SourceParser::Path => Ok(vec![BTreeMap::new()]),
            SourceParser::Regex(regex) => {
                let text = api::read_text(root, &file.path).map_err(file_error)?;
                Ok(api::find_matches(&text, regex)
                    .into_iter()
                    .map(|m| {
                        let mut set: BTreeMap<String, Value> = m
                            .captures
                            .into_iter()
                            .filter_map(|(k, v)| v.map(|v| (k, Value::String(v))))
                            .collect();
                        set.insert("match".to_string(), Value::String(m.text));
                        set
                    })
                    .collect())
            }
            SourceParser::Structured(format) => {
                let text = api::read_text(root, &file.path).map_err(file_error)?;
                let doc = api::parse(&text, *format).map_err(file_error)?;
                let elements: Vec<(Option<Value>, &Value)> = match &self.each {
                    Some(path) => path
                        .fan_out(&doc)
                        .into_iter()
                        .map(|f| (Some(f.key), f.value))
                        .collect(),
                    None => vec![(None, &doc)],
                };
                Ok(elements
                    .into_iter()
                    .map(|(key, element)| {
                        let mut set = BTreeMap::new();
                        if let Some(key) = key {
                            set.insert("key".to_string(), key);
                        }
                        set.insert("value".to_string(), element.clone());
                        for (name, alternatives) in &self.select {
                            if let Some(found) = alternatives
                                .iter()
                                .filter_map(|p| p.get(element))
                                .find(|v| !v.is_null())
                            {
                                set.insert(name.clone(), found.clone());
                            }
                        }
                        set
                    })
                    .collect())
            }
        }
    }
}

impl Condition {
    fn holds(&self, scope: &BindingScope) -> bool {
        match self {
            Self::ConfigContains { key, value } => match scope.config.get(key) {
                Some(Value::Array(items)) => {
                    items.iter().any(|i| crate::model::values_equal(i, value))
                }
                Some(Value::String(s)) => value.as_str().is_some_and(|v| s.contains(v)),
                _ => false,
            },
            Self::ConfigEquals { key, value } => scope
                .config
                .get(key)
                .is_some_and(|v| crate::model::values_equal(v, value)),
            Self::Bound(name) => scope.lookup(name).is_some(),
        }
    }
}

fn fan_items(value: Option<Value>) -> Vec<Value> {
    match value {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items,
        Some(Value::Object(map)) => map.keys().cloned().map(Value::String).collect(),
        Some(scalar) => vec![scalar],
    }
}

struct Emitter<'a> {
    def: &'a DeclarativeDef,
    entity: Value,
}

impl Emitter<'_> {
    fn emit(
        &mut self,
        index: usize,
        rule: &EmitRule,
        scope: &BindingScope,
    ) -> Result<(), ExtractionError> {
        if rule.when.as_ref().is_some_and(|c| !c.holds(scope)) {
            return Ok(());
        }
        let items: Vec<Option<Value>> = match &rule.each {
            Some(name) => fan_items(scope.lookup(name))
                .into_iter()
                .map(Some)
                .collect(),
            None => vec![None],
        };
        for item in &items {
            let scope = BindingScope {
                item: item.as_ref(),
                ..*scope
            };
            let rendered =
                rule.template
                    .render(&scope)
                    .map_err(|message| ExtractionError::Template {
                        rule: index,
                        message,
                    })?;
            let Some(value) = rendered else { continue };
            let patch = match &rule.target {
                EmitTarget::Field { name, append } => {
                    let value = if *append {
                        Value::Array(vec![value])
                    } else {
                        value
                    };
                    Value::Object(Map::from_iter([(name.clone(), value)]))
                }
                EmitTarget::Entity if value.is_object() => value,
                EmitTarget::Entity => {
                    return Err(ExtractionError::Template {
                        rule: index,
                        message: "target `.` needs an object template".into(),
                    })
                }
            };
            self.entity = Aggregator::new("model", self.def.id.as_str())
                .run(&self.entity, &patch)
                .map_err(|mut c| Box::new(c.remove(0)))?;
        }
        Ok(())
    }
}

/// Runs a definition against an entity copy rooted at `root`.
///
/// A root that does not exist on this machine yields no files, which is
/// normal when an entity was declared by one repository and its code lives
/// in another.
pub fn run_declarative(
    def: &DeclarativeDef,
    entity: Value,
    config: &Object,
    root: Option<&Path>,
) -> Result<Value, ExtractionError> {
    let input = entity.clone();
    let mut emitter = Emitter { def, entity };
    let no_bindings = BTreeMap::new();

    if def.sources.is_empty() {
        let scope = BindingScope {
            values: &no_bindings,
            item: None,
            file: None,
            root,
            config,
            entity: &input,
        };
        for (i, rule) in def.emit.iter().enumerate() {
            emitter.emit(i, rule, &scope)?;
        }
        return Ok(emitter.entity);
    }

    let Some(root) = root.filter(|r| r.is_dir()) else {
        log::debug!("{}: no readable root directory, nothing to scan", def.id);
        return Ok(emitter.entity);
    };
    for source in &def.sources {
        let rules: Vec<(usize, &EmitRule)> = def
            .emit
            .iter()
            .enumerate()
            .filter(|(_, r)| r.source.is_none() || r.source == source.name)
            .collect();
        if rules.is_empty() {
            continue;
        }
        for file in source.files(root, config)? {
            for bindings in source.binding_sets(root, &file)? {
                let scope = BindingScope {
                    values: &bindings,
                    item: None,
                    file: Some(&file),
                    root: Some(root),
                    config,
                    entity: &input,
                };
                for (i, rule) in &rules {
                    emitter.emit(*i, rule, &scope)?;
                }
            }
        }
    }
    Ok(emitter.entity)
}
