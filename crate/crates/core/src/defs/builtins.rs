//! The shipped extractor definitions, compiled into the binary.

use super::{load_def, DeclarativeDef};
use crate::api::{self, Format};

macro_rules! builtin {
    ($name:literal) => {
        (
            $name,
            include_str!(concat!("../../builtins/", $name, ".extractor.yaml")),
        )
    };
}

/// `(id, yaml source)` in registration order.
pub const SOURCES: &[(&str, &str)] = &[
    builtin!("docker-compose-services"),
    builtin!("language-detect"),
    builtin!("maven-detect"),
    builtin!("nodejs-detect"),
    builtin!("spring-endpoints"),
    builtin!("spring-eureka"),
];

fn load(source: &str) -> DeclarativeDef {
    let doc = api::parse(source, Format::Yaml).expect("built-in definitions are valid YAML");
    load_def(&doc).expect("built-in definitions load")
}

pub fn builtins() -> Vec<DeclarativeDef> {
    SOURCES.iter().map(|(_, source)| load(source)).collect()
}

pub fn builtin(id: &str) -> Option<DeclarativeDef> {
    SOURCES
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, source)| load(source))
}

pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(id, _)| *id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_loads_under_its_own_id() {
        for (id, source) in SOURCES {
            assert_eq!(load(source).id, *id);
        }
        assert!(builtin("nope").is_none());
    }
}
