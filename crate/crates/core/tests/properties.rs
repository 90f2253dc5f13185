use archrecon::model::{is_transient_key, strip_transient};
use archrecon::schema::load_schema;
use archrecon_testkit::{gen, props, synth, CASES};
use proptest::prelude::*;
use serde_json::{json, Value};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn aggregate_is_idempotent(x in gen::tree()) {
        props::check_idempotence(x)?;
    }

    #[test]
    fn aggregate_is_idempotent_on_models(x in gen::model()) {
        props::check_idempotence(x)?;
    }

    #[test]
    fn aggregate_commutes_up_to_array_order(pair in (gen::model(), gen::model())) {
        props::check_commutativity(pair)?;
    }

    #[test]
    fn fold_order_does_not_matter(family in gen::consistent_family(3)) {
        props::check_fold_order(family)?;
    }

    #[test]
    fn aggregate_loses_no_information(pair in (gen::object_tree(), gen::object_tree())) {
        props::check_no_information_loss(pair)?;
    }

    #[test]
    fn models_lose_no_information(pair in (gen::model(), gen::model())) {
        props::check_no_information_loss(pair)?;
    }

    #[test]
    fn conflict_paths_are_exact(pair in (gen::object_tree(), gen::object_tree())) {
        props::check_conflict_path(pair)?;
    }

    #[test]
    fn model_conflict_paths_are_exact(pair in (gen::model(), gen::model())) {
        props::check_conflict_path(pair)?;
    }

    #[test]
    fn strip_is_idempotent(x in gen::tree()) {
        props::check_strip_idempotent(x)?;
    }

    #[test]
    fn strip_matches_the_pattern_exactly(x in gen::tree()) {
        props::check_strip_exact(x)?;
    }

    #[test]
    fn strip_keeps_framework_keys(x in gen::object_tree()) {
        let stripped = strip_transient(&x);
        for key in ["$TYPE", "$ROOT", "$TARGET"] {
            prop_assert!(!is_transient_key(key));
            prop_assert_eq!(x.get(key).is_some(), stripped.get(key).is_some());
        }
    }

    #[test]
    fn found_entities_resolve(x in gen::entity_tree()) {
        props::check_entities_resolve(x)?;
    }

    #[test]
    fn export_round_trips(x in gen::object_tree()) {
        props::check_round_trip(x)?;
    }

    #[test]
    fn orchestrator_runs_each_pair_once(s in synth::synths(true)) {
        synth::check_run_once(s)?;
    }

    #[test]
    fn orchestrator_reaches_fixpoint(s in synth::synths(true)) {
        synth::check_fixpoint(s)?;
    }

    #[test]
    fn orchestrator_terminates_under_limits(s in synth::synths(false)) {
        synth::check_termination(s)?;
    }

    #[test]
    fn orchestrator_ignores_registration_order(pair in synth::synths_and_permutation()) {
        synth::check_order_independence(pair)?;
    }

    #[test]
    fn dropping_a_requirement_keeps_conformance(
        value in gen::object_tree(),
        keys in proptest::sample::subsequence(vec!["a", "b", "name", "$TYPE"], 1..=4),
        drop in any::<proptest::sample::Index>(),
    ) {
        let full = load_schema(&json!({"type": "object", "required": keys})).unwrap();
        let mut fewer = keys.clone();
        fewer.remove(drop.index(keys.len()));
        let relaxed = load_schema(&json!({"type": "object", "required": fewer})).unwrap();
        if full.conforms(&value) {
            prop_assert!(relaxed.conforms(&value));
        }
    }

    #[test]
    fn const_implies_enum_containing_it(
        value in gen::tree(),
        constant in gen::scalar(),
        others in proptest::collection::vec(gen::scalar(), 0..3),
    ) {
        let mut members: Vec<Value> = others;
        members.push(constant.clone());
        let by_const = load_schema(&json!({"const": constant})).unwrap();
        let by_enum = load_schema(&json!({"enum": members})).unwrap();
        if by_const.conforms(&value) {
            prop_assert!(by_enum.conforms(&value));
        }
        let reloaded = load_schema(&json!({"const": constant})).unwrap();
        prop_assert_eq!(by_const.conforms(&value), reloaded.conforms(&value));
    }
}
