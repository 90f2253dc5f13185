//! Static architecture reconstruction for microservice codebases.
//!
//! Extractors are dispatched over a shared model by schema conformance
//! ([`orchestrator`]), their outputs merged by a conflict-detecting recursive
//! union ([`aggregate`]), and `$LINK` entities resolved once all models are
//! combined ([`linking`]).

pub mod aggregate;
pub mod api;
pub mod defs;
pub mod linking;
pub mod model;
pub mod orchestrator;
pub mod schema;

pub use aggregate::{
    aggregatable, aggregate, aggregate_models, Aggregator, Conflict, ConflictMode, Provenance,
};
pub use defs::{
    builtins, load_def, load_def_file, load_dir, run_declarative, DeclarativeDef, DefinitionError,
};
pub use linking::{collect_links, dereference_targets, resolve_links, Outcome, ResolutionReport};
pub use model::{
    export_model, find_entities, get_path, parse_model, strip_transient, FieldValue, ModelError,
    ModelPath, Object,
};
pub use orchestrator::{
    run, ExtractContext, ExtractorDescriptor, Limits, OrchestrationError, Reconstruction, Registry,
};
pub use schema::{conforms, load_schema, Schema, SchemaError};
