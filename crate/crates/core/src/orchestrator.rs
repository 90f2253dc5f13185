//! Schema-gated extractor dispatch over a model until nothing changes.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::aggregate::{Aggregator, Conflict};
use crate::defs::{run_declarative, DeclarativeDef, DefinitionError, ExtractionError};
use crate::model::{
    find_entities, get_path, get_path_mut, ModelPath, Object, MODEL_TYPE, PATH_KEY, TYPE_KEY,
    UID_KEY,
};
use crate::schema::Schema;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// What an extractor sees besides the entity copy.
#[derive(Debug, Clone, Copy)]
pub struct ExtractContext<'a> {
    pub id: &'a str,
    pub config: &'a Object,
    /// The entity's `$path`, resolved against the workspace.
    pub root: Option<&'a Path>,
    pub workspace: &'a Path,
}

/// Native extraction behavior: returns the enriched entity.
pub trait Extract: Send + Sync {
    fn extract(&self, entity: Value, ctx: &ExtractContext<'_>) -> Result<Value, BoxError>;
}

impl<F> Extract for F
where
    F: Fn(Value, &ExtractContext<'_>) -> Result<Value, BoxError> + Send + Sync,
{
    fn extract(&self, entity: Value, ctx: &ExtractContext<'_>) -> Result<Value, BoxError> {
        self(entity, ctx)
    }
}

#[derive(Clone)]
pub enum Behavior {
    Native(Arc<dyn Extract>),
    Declarative(Arc<DeclarativeDef>),
}

#[derive(Clone)]
pub struct ExtractorDescriptor {
    pub id: String,
    pub input_schema: Schema,
    pub config: Object,
    pub behavior: Behavior,
}

impl fmt::Debug for ExtractorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.behavior {
            Behavior::Native(_) => "native",
            Behavior::Declarative(_) => "declarative",
        };
        f.debug_struct("ExtractorDescriptor")
            .field("id", &self.id)
            .field("kind", &kind)
            .field("input_schema", &self.input_schema)
            .field("config", &self.config)
            .finish()
    }
}

impl ExtractorDescriptor {
    pub fn native(
        id: impl Into<String>,
        input_schema: Schema,
        behavior: impl Extract + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            input_schema,
            config: Object::new(),
            behavior: Behavior::Native(Arc::new(behavior)),
        }
    }

    /// Wraps a definition; `overrides` replace individual config defaults.
    pub fn declarative(
        def: DeclarativeDef,
        overrides: Option<&Object>,
    ) -> Result<Self, DefinitionError> {
        let config = def.configure(overrides)?;
        Ok(Self {
            id: def.id.clone(),
            input_schema: def.match_schema.clone(),
            config,
            behavior: Behavior::Declarative(Arc::new(def)),
        })
    }

    pub fn with_config(mut self, config: Object) -> Self {
        self.config = config;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    extractors: Vec<ExtractorDescriptor>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, descriptor: ExtractorDescriptor) -> Result<(), OrchestrationError> {
        if self.get(&descriptor.id).is_some() {
            return Err(OrchestrationError::DuplicateId(descriptor.id));
        }
        self.extractors.push(descriptor);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ExtractorDescriptor> {
        self.extractors.iter().find(|d| d.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExtractorDescriptor> {
        self.extractors.iter()
    }

    pub fn len(&self) -> usize {
        self.extractors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extractors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_rounds: usize,
    pub max_entities: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_rounds: 1000,
            max_entities: 100_000,
        }
    }
}

/// (extractor id, entity uid) pairs already executed. Only grows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunLedger {
    executed: BTreeSet<(String, u64)>,
}

impl RunLedger {
    pub fn contains(&self, id: &str, uid: u64) -> bool {
        self.executed.contains(&(id.to_string(), uid))
    }

    fn record(&mut self, id: &str, uid: u64) {
        self.executed.insert((id.to_string(), uid));
    }

    pub fn len(&self) -> usize {
        self.executed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.executed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.executed.iter().map(|(id, uid)| (id.as_str(), *uid))
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Final model, transient keys (including `$uid`) still present.
    pub model: Value,
    pub ledger: RunLedger,
    pub rounds: usize,
}

#[derive(Debug, Error)]
pub enum OrchestrationError {
    #[error("extractor id `{0}` registered twice")]
    DuplicateId(String),
    #[error(transparent)]
    Conflict(Box<Conflict>),
    #[error("reconstruction did not converge: {0}")]
    Divergence(String),
    #[error("extractor `{id}` failed on {path}: {source}")]
    Extractor {
        id: String,
        path: ModelPath,
        #[source]
        source: BoxError,
    },
    #[error("initial model must be an object with $TYPE \"$MODEL\"")]
    InvalidInitial,
    #[error("limits must be positive")]
    InvalidLimits,
}

impl From<Conflict> for OrchestrationError {
    fn from(conflict: Conflict) -> Self {
        Self::Conflict(Box::new(conflict))
    }
}

fn uid_of(entity: &Value) -> Option<u64> {
    entity.get(UID_KEY).and_then(Value::as_u64)
}

/// Gives every entity without a `$uid` a fresh one. Returns the entity count.
fn assign_uids(model: &mut Value, next: &mut u64) -> usize {
    let entities = find_entities(model);
    let count = entities.len();
    let missing: Vec<ModelPath> = entities
        .into_iter()
        .filter(|(_, e)| uid_of(e).is_none())
        .map(|(p, _)| p)
        .collect();
    for path in missing {
        if let Ok(Value::Object(map)) = get_path_mut(model, &path) {
            map.insert(UID_KEY.to_string(), Value::from(*next));
            *next += 1;
        }
    }
    count
}

/// Current path of the entity with `uid`, preferring `hint`.
fn locate(model: &Value, hint: &ModelPath, uid: u64) -> Option<ModelPath> {
    if get_path(model, hint).ok().and_then(uid_of) == Some(uid) {
        return Some(hint.clone());
    }
    find_entities(model)
        .into_iter()
        .find(|(_, e)| uid_of(e) == Some(uid))
        .map(|(p, _)| p)
}

fn entity_root(entity: &Value, workspace: &Path) -> Option<PathBuf> {
    entity
        .get(PATH_KEY)
        .and_then(Value::as_str)
        .map(|p| workspace.join(p))
}

fn invoke(
    descriptor: &ExtractorDescriptor,
    entity: Value,
    path: &ModelPath,
    workspace: &Path,
) -> Result<Value, OrchestrationError> {
    let root = entity_root(&entity, workspace);
    let ctx = ExtractContext {
        id: &descriptor.id,
        config: &descriptor.config,
        root: root.as_deref(),
        workspace,
    };
    let failed = |source: BoxError| OrchestrationError::Extractor {
        id: descriptor.id.clone(),
        path: path.clone(),
        source,
    };
    match &descriptor.behavior {
        Behavior::Native(f) => f.extract(entity, &ctx).map_err(failed),
        Behavior::Declarative(def) => match run_declarative(def, entity, ctx.config, ctx.root) {
            Ok(value) => Ok(value),
            Err(ExtractionError::Conflict(mut conflict)) => {
                conflict.path = path.join(&conflict.path);
                Err(OrchestrationError::Conflict(conflict))
            }
            Err(other) => Err(failed(Box::new(other))),
        },
    }
}

/// Dispatches extractors over `initial` until a round changes nothing.
///
/// Each (extractor, entity) pair runs at most once. Within a round entities
/// are visited in preorder and extractors in registration order; each output
/// is merged immediately at the entity's path.
pub fn run(
    initial: &Value,
    registry: &Registry,
    limits: Limits,
    workspace: &Path,
) -> Result<Reconstruction, OrchestrationError> {
    if initial.get(TYPE_KEY).and_then(Value::as_str) != Some(MODEL_TYPE) {
        return Err(OrchestrationError::InvalidInitial);
    }
    if limits.max_rounds == 0 || limits.max_entities == 0 {
        return Err(OrchestrationError::InvalidLimits);
    }

    let mut model = initial.clone();
    let mut next_uid = find_entities(&model)
        .iter()
        .filter_map(|(_, e)| uid_of(e))
        .max()
        .map_or(0, |m| m + 1);
    let check_entities = |count: usize| {
        if count > limits.max_entities {
            Err(OrchestrationError::Divergence(format!(
                "{count} entities exceed the limit of {}",
                limits.max_entities
            )))
        } else {
            Ok(())
        }
    };
    check_entities(assign_uids(&mut model, &mut next_uid))?;

    let mut ledger = RunLedger::default();
    let mut rounds = 0;
    loop {
        if rounds == limits.max_rounds {
            return Err(OrchestrationError::Divergence(format!(
                "still changing after {} rounds",
                limits.max_rounds
            )));
        }
        rounds += 1;
        let mut changed = false;
        let snapshot: Vec<(ModelPath, u64)> = find_entities(&model)
            .into_iter()
            .filter_map(|(p, e)| uid_of(e).map(|uid| (p, uid)))
            .collect();

        for (hint, uid) in snapshot {
            for descriptor in registry.iter() {
                if ledger.contains(&descriptor.id, uid) {
                    continue;
                }
                let Some(path) = locate(&model, &hint, uid) else {
                    break;
                };
                let entity = get_path(&model, &path).expect("located path resolves");
                if !descriptor.input_schema.conforms(entity) {
                    continue;
                }
                ledger.record(&descriptor.id, uid);
                log::debug!("round {rounds}: {} on {path}", descriptor.id);
                let output = invoke(descriptor, entity.clone(), &path, workspace)?;
                let merged = Aggregator::new("model", descriptor.id.as_str())
                    .at(path.clone())
                    .run(entity, &output)
                    .map_err(|mut c| OrchestrationError::from(c.remove(0)))?;
                if merged != *entity {
                    *get_path_mut(&mut model, &path).expect("located path resolves") = merged;
                    check_entities(assign_uids(&mut model, &mut next_uid))?;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(Reconstruction {
                model,
                ledger,
                rounds,
            });
        }
    }
}
