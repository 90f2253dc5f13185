use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use archrecon::api::{self, Format};
use archrecon::defs::{builtins, display_path, load_dir, DeclarativeDef};
use archrecon::model::{export_model, parse_model, strip_transient};
use archrecon::{
    aggregate_models, resolve_links, run, Aggregator, Conflict, ConflictMode, ExtractorDescriptor,
    Limits, OrchestrationError, Provenance, Registry,
};
use serde_json::{json, Value};

use crate::{ResolveArgs, RunArgs};

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Conflicts(Vec<Conflict>),
    Unresolved(usize),
    Config(anyhow::Error),
    Divergence(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Runtime(_) => 1,
            Self::Conflicts(_) => 2,
            Self::Unresolved(_) => 3,
            Self::Config(_) => 4,
            Self::Divergence(_) => 5,
        }
    }

    pub fn report(&self) {
        match self {
            Self::Conflicts(conflicts) => conflicts.iter().for_each(|c| eprintln!("{c}")),
            Self::Unresolved(n) => eprintln!("error: {n} link(s) did not resolve"),
            Self::Config(e) | Self::Divergence(e) | Self::Runtime(e) => eprintln!("error: {e:#}"),
        }
    }
}

impl From<OrchestrationError> for Failure {
    fn from(error: OrchestrationError) -> Self {
        match error {
            OrchestrationError::Conflict(c) => Self::Conflicts(vec![*c]),
            OrchestrationError::Divergence(_) => Self::Divergence(error.into()),
            OrchestrationError::Extractor { .. } => Self::Runtime(error.into()),
            OrchestrationError::DuplicateId(_)
            | OrchestrationError::InvalidInitial
            | OrchestrationError::InvalidLimits => Self::Config(error.into()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn is_yaml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "yaml" || e == "yml")
}

/// A JSON (or, by extension, YAML) document whose top level is an object.
fn read_object(path: &Path) -> Outcome<Value> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Runtime)?;
    let value = if is_yaml(path) {
        api::parse(&text, Format::Yaml).map_err(|e| anyhow!(e))
    } else {
        parse_model(&text).map_err(|e| anyhow!(e))
    };
    let value = value
        .with_context(|| format!("invalid document {}", path.display()))
        .map_err(Failure::Config)?;
    if !value.is_object() {
        return Err(Failure::Config(anyhow!(
            "{}: top level must be an object",
            path.display()
        )));
    }
    Ok(value)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Runtime)
}

fn load_defs(selector: &str) -> Outcome<Vec<DeclarativeDef>> {
    if selector == "builtin" {
        return Ok(builtins::builtins());
    }
    if let Some(id) = selector.strip_prefix("builtin:") {
        return builtins::builtin(id).map(|d| vec![d]).ok_or_else(|| {
            let known: Vec<&str> = builtins::builtin_ids().collect();
            Failure::Config(anyhow!(
                "no built-in extractor `{id}` (known: {})",
                known.join(", ")
            ))
        });
    }
    load_dir(Path::new(selector)).map_err(|e| Failure::Config(e.into()))
}

fn build_registry(args: &RunArgs) -> Outcome<Registry> {
    let overrides = match &args.config {
        Some(path) => read_object(path)?,
        None => json!({}),
    };
    let overrides = overrides.as_object().expect("read_object returns objects");
    let mut registry = Registry::new();
    for selector in &args.extractors {
        for def in load_defs(selector)? {
            let own = match overrides.get(&def.id) {
                Some(Value::Object(map)) => Some(map),
                Some(_) => {
                    return Err(Failure::Config(anyhow!(
                        "config for `{}` must be an object",
                        def.id
                    )))
                }
                None => None,
            };
            let descriptor = ExtractorDescriptor::declarative(def, own)
                .map_err(|e| Failure::Config(e.into()))?;
            registry.register(descriptor)?;
        }
    }
    if let Some(unknown) = overrides.keys().find(|id| registry.get(id).is_none()) {
        return Err(Failure::Config(anyhow!(
            "config names unknown extractor `{unknown}`"
        )));
    }
    Ok(registry)
}

fn limits(args: &RunArgs) -> Limits {
    Limits {
        max_rounds: args.max_rounds,
        max_entities: args.max_entities,
    }
}

/// The reconstructed model of one repository, transients included.
fn reconstruct_repo(
    repo: &Path,
    registry: &Registry,
    limits: Limits,
    init: Option<&Value>,
) -> Outcome<Value> {
    let root = fs::canonicalize(repo)
        .ok()
        .filter(|p| p.is_dir())
        .ok_or_else(|| {
            Failure::Config(anyhow!("{} is not a readable directory", repo.display()))
        })?;
    let mut initial = json!({"$TYPE": "$MODEL", "$path": display_path(&root)});
    if let Some(init) = init {
        initial = Aggregator::new("initial model", "init file")
            .run(&initial, init)
            .map_err(Failure::Conflicts)?;
    }
    log::info!(
        "reconstructing {} with {} extractor(s)",
        root.display(),
        registry.len()
    );
    let outcome = run(&initial, registry, limits, &root)?;
    log::info!(
        "{}: fixpoint after {} round(s)",
        root.display(),
        outcome.rounds
    );
    Ok(outcome.model)
}

pub fn reconstruct(
    repo: &Path,
    args: &RunArgs,
    init: Option<&Path>,
    out: &Path,
    keep_transient: bool,
) -> Outcome {
    let registry = build_registry(args)?;
    let init = init.map(read_object).transpose()?;
    let model = reconstruct_repo(repo, &registry, limits(args), init.as_ref())?;
    write_text(out, &export_model(&model, keep_transient))
}

fn read_model(path: &Path) -> Outcome<(Provenance, Value)> {
    let value = read_object(path)?;
    Ok((
        Provenance::new(path.display().to_string()),
        strip_transient(&value),
    ))
}

pub fn aggregate(models: &[impl AsRef<Path>], out: &Path, collect: bool) -> Outcome {
    let inputs = models
        .iter()
        .map(|p| read_model(p.as_ref()))
        .collect::<Outcome<Vec<_>>>()?;
    let mode = if collect {
        ConflictMode::Collect
    } else {
        ConflictMode::Fail
    };
    let merged = aggregate_models(&inputs, mode).map_err(Failure::Conflicts)?;
    write_text(out, &export_model(&merged, false))
}

fn resolve_and_write(model: &Value, out: &Path, args: &ResolveArgs) -> Outcome {
    let (resolved, report) = resolve_links(model).map_err(|e| Failure::Config(e.into()))?;
    for entry in &report.entries {
        eprintln!("{entry}");
    }
    write_text(out, &export_model(&resolved, false))?;
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&report.to_json()).expect("reports serialize");
        write_text(path, &format!("{text}\n"))?;
    }
    match report.failures().count() {
        n if n > 0 && args.strict => Err(Failure::Unresolved(n)),
        _ => Ok(()),
    }
}

pub fn resolve(model: &Path, out: &Path, args: &ResolveArgs) -> Outcome {
    let (_, model) = read_model(model)?;
    resolve_and_write(&model, out, args)
}

pub fn pipeline(
    repos: &[impl AsRef<Path>],
    run: &RunArgs,
    out: &Path,
    resolve: &ResolveArgs,
) -> Outcome {
    let registry = build_registry(run)?;
    let mut models = Vec::with_capacity(repos.len());
    for repo in repos {
        let repo = repo.as_ref();
        let model = reconstruct_repo(repo, &registry, limits(run), None)?;
        models.push((
            Provenance::new(repo.display().to_string()),
            strip_transient(&model),
        ));
    }
    let merged = aggregate_models(&models, ConflictMode::Fail).map_err(Failure::Conflicts)?;
    resolve_and_write(&merged, out, resolve)
}
