use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

fn archrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_archrecon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write(dir: &Path, rel: &str, text: &str) -> PathBuf {
    let path = dir.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn aggregate_matches_golden_bytes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out.json");
    let run = archrecon(&[
        "aggregate",
        s(&fixture("aggregate/input1.json")),
        s(&fixture("aggregate/input2.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let expected = fs::read_to_string(fixture("aggregate/expected.json")).unwrap();
    assert_eq!(fs::read_to_string(&out).unwrap(), expected);
}

#[test]
fn aggregate_single_input_is_a_stripped_copy() {
    let tmp = TempDir::new().unwrap();
    let input = write(
        tmp.path(),
        "in.json",
        r#"{"$TYPE": "$MODEL", "$path": "/x", "b": 1, "a": [2, 1]}"#,
    );
    let out = tmp.path().join("out.json");
    let run = archrecon(&["aggregate", s(&input), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "{\n  \"$TYPE\": \"$MODEL\",\n  \"a\": [\n    2,\n    1\n  ],\n  \"b\": 1\n}\n"
    );
}

#[test]
fn aggregate_conflict_names_path_and_both_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out.json");
    let (a, b) = (
        fixture("aggregate/release-a.json"),
        fixture("aggregate/release-b.json"),
    );
    let run = archrecon(&["aggregate", s(&a), s(&b), "--out", s(&out)]);
    assert_eq!(code(&run), 2);
    let err = stderr(&run);
    let line = err
        .lines()
        .find(|l| l.contains("/system/version"))
        .expect(&err);
    assert!(line.contains(s(&a)) && line.contains(s(&b)), "{line}");
    assert!(
        line.contains("\"1.0\"") && line.contains("\"2.0\""),
        "{line}"
    );
    assert!(!out.exists());
}

#[test]
fn aggregate_collect_reports_every_conflict_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out.json");
    let inputs = ["a", "b", "c"].map(|n| fixture(&format!("aggregate/release-{n}.json")));
    let mut args = vec!["aggregate"];
    args.extend(inputs.iter().map(|p| s(p)));
    args.extend(["--out", s(&out), "--on-conflict", "collect"]);
    let run = archrecon(&args);
    assert_eq!(code(&run), 2);
    let err = stderr(&run);
    let conflicts: Vec<&str> = err
        .lines()
        .filter(|l| l.starts_with("conflict at"))
        .collect();
    assert_eq!(conflicts.len(), 2, "{err}");
    assert!(conflicts.iter().any(|l| l.contains("/system/version")));
    assert!(conflicts.iter().any(|l| l.contains("/owner")));
    assert!(!out.exists());

    let fail = archrecon(&[
        "aggregate",
        s(&inputs[0]),
        s(&inputs[1]),
        s(&inputs[2]),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&fail), 2);
    assert_eq!(
        stderr(&fail)
            .lines()
            .filter(|l| l.starts_with("conflict at"))
            .count(),
        1
    );
}

#[test]
fn resolve_sets_target_and_reports() {
    let tmp = TempDir::new().unwrap();
    let (out, report) = (tmp.path().join("out.json"), tmp.path().join("report.json"));
    let run = archrecon(&[
        "resolve",
        s(&fixture("links/model.json")),
        "--out",
        s(&out),
        "--report",
        s(&report),
        "--strict",
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let model = read_json(&out);
    assert_eq!(
        model["microservices"][0]["dependencies"][0]["target"],
        json!("/microservices/1")
    );
    assert_eq!(
        read_json(&report),
        json!([{"link": "/microservices/0/dependencies/0", "outcome": "resolved", "target": "/microservices/1"}])
    );
}

#[test]
fn resolve_without_links_gives_an_empty_report() {
    let tmp = TempDir::new().unwrap();
    let (out, report) = (tmp.path().join("out.json"), tmp.path().join("report.json"));
    let run = archrecon(&[
        "resolve",
        s(&fixture("aggregate/input1.json")),
        "--out",
        s(&out),
        "--report",
        s(&report),
        "--strict",
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(read_json(&report), json!([]));
    assert_eq!(
        read_json(&out),
        read_json(&fixture("aggregate/input1.json"))
    );
}

#[test]
fn strict_resolve_fails_on_a_missing_target() {
    let tmp = TempDir::new().unwrap();
    let mut model = read_json(&fixture("links/model.json"));
    model["microservices"].as_array_mut().unwrap().pop();
    let input = write(tmp.path(), "model.json", &model.to_string());
    let (out, report) = (tmp.path().join("out.json"), tmp.path().join("report.json"));

    let lenient = archrecon(&["resolve", s(&input), "--out", s(&out)]);
    assert_eq!(code(&lenient), 0);

    let run = archrecon(&[
        "resolve",
        s(&input),
        "--out",
        s(&out),
        "--report",
        s(&report),
        "--strict",
    ]);
    assert_eq!(code(&run), 3);
    assert!(stderr(&run).contains("link /microservices/0/dependencies/0 unresolved"));
    assert_eq!(
        read_json(&report),
        json!([{"link": "/microservices/0/dependencies/0", "outcome": "unresolved"}])
    );
}

#[test]
fn malformed_link_is_a_definition_error() {
    let tmp = TempDir::new().unwrap();
    let input = write(
        tmp.path(),
        "model.json",
        r#"{"$TYPE": "$MODEL", "links": [{"$TYPE": "$LINK", "$ROOT": "/x"}]}"#,
    );
    let run = archrecon(&[
        "resolve",
        s(&input),
        "--out",
        s(&tmp.path().join("out.json")),
    ]);
    assert_eq!(code(&run), 4, "{}", stderr(&run));
}

#[test]
fn reconstruct_without_extractors_writes_the_stripped_initial_model() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out.json");
    let run = archrecon(&["reconstruct", "--repo", s(tmp.path()), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "{\n  \"$TYPE\": \"$MODEL\"\n}\n"
    );

    let keep = archrecon(&[
        "reconstruct",
        "--repo",
        s(tmp.path()),
        "--out",
        s(&out),
        "--keep-transient",
    ]);
    assert_eq!(code(&keep), 0);
    assert!(read_json(&out)["$path"].is_string());
}

#[test]
fn reconstruct_merges_the_init_file() {
    let tmp = TempDir::new().unwrap();
    let init = write(tmp.path(), "init.yaml", "system: shop\n");
    let out = tmp.path().join("out.json");
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        s(tmp.path()),
        "--init",
        s(&init),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(
        read_json(&out),
        json!({"$TYPE": "$MODEL", "system": "shop"})
    );
}

fn two_step(order: [&str; 2]) -> String {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out.json");
    let dirs = order.map(|d| fixture(&format!("two-step/extractors/{d}")));
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        s(&fixture("two-step/repo")),
        "--extractors",
        s(&dirs[0]),
        "--extractors",
        s(&dirs[1]),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    fs::read_to_string(&out).unwrap()
}

#[test]
fn reconstruct_is_independent_of_registration_order() {
    let forward = two_step(["create", "java"]);
    assert_eq!(
        serde_json::from_str::<Value>(&forward).unwrap(),
        json!({"$TYPE": "$MODEL", "microservices": [{"$TYPE": "microservice", "name": "service1", "java": true}]})
    );
    assert_eq!(two_step(["java", "create"]), forward);
}

#[test]
fn definition_and_config_errors_exit_4() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out.json");
    let repo = s(tmp.path());

    let bad = write(
        tmp.path(),
        "defs/bad.extractor.yaml",
        "id: bad\nmatch: {}\nemit: [{target: x, template: 1, extra: 2}]\n",
    );
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        repo,
        "--extractors",
        s(bad.parent().unwrap()),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 4, "{}", stderr(&run));

    let run = archrecon(&[
        "reconstruct",
        "--repo",
        repo,
        "--extractors",
        "builtin:nope",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 4);

    let config = write(
        tmp.path(),
        "config.yaml",
        "docker-compose-services: {include: [volumes]}\n",
    );
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        repo,
        "--extractors",
        "builtin:docker-compose-services",
        "--config",
        s(&config),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 4, "{}", stderr(&run));

    let config = write(tmp.path(), "other.yaml", "language-detect: {}\n");
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        repo,
        "--extractors",
        "builtin:docker-compose-services",
        "--config",
        s(&config),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 4);

    let run = archrecon(&[
        "reconstruct",
        "--repo",
        s(&tmp.path().join("absent")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 4);
    assert!(!out.exists());
}

#[test]
fn unreadable_input_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let run = archrecon(&[
        "aggregate",
        s(&tmp.path().join("missing.json")),
        "--out",
        s(&tmp.path().join("out.json")),
    ]);
    assert_eq!(code(&run), 1);
}

#[test]
fn contradicting_extractors_exit_2() {
    let tmp = TempDir::new().unwrap();
    for (id, version) in [("one", "1.0"), ("two", "2.0")] {
        write(
            tmp.path(),
            &format!("defs/{id}.extractor.yaml"),
            &format!("id: {id}\nmatch: {{properties: {{$TYPE: {{const: $MODEL}}}}}}\nemit: [{{target: version, template: '{version}'}}]\n"),
        );
    }
    let out = tmp.path().join("out.json");
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        s(tmp.path()),
        "--extractors",
        s(&tmp.path().join("defs")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 2, "{}", stderr(&run));
    assert!(stderr(&run).contains("conflict at /version"));
}

#[test]
fn runaway_extraction_exits_5() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "defs/grow.extractor.yaml",
        "id: grow\nmatch: {properties: {$TYPE: {const: $MODEL}}, required: [$TYPE]}\n\
         emit: [{target: 'children[]', template: {$TYPE: $MODEL, name: child}}]\n",
    );
    let out = tmp.path().join("out.json");
    let run = archrecon(&[
        "reconstruct",
        "--repo",
        s(tmp.path()),
        "--extractors",
        s(&tmp.path().join("defs")),
        "--max-rounds",
        "20",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 5, "{}", stderr(&run));
    assert!(!out.exists());
}

#[test]
fn pipeline_equals_reconstruct_aggregate_resolve() {
    let tmp = TempDir::new().unwrap();
    let root = fixture("layout/multi");
    let repos = ["deploy", "orders", "web"].map(|r| root.join(r));
    let (defs, config) = (fixture("layout/extractors"), fixture("layout/config.yaml"));
    let extractor_args = [
        "--extractors",
        "builtin",
        "--extractors",
        s(&defs),
        "--config",
        s(&config),
    ];

    let mut parts = Vec::new();
    for (i, repo) in repos.iter().enumerate() {
        let out = tmp.path().join(format!("part{i}.json"));
        let mut args = vec!["reconstruct", "--repo", s(repo), "--out", s(&out)];
        args.extend(extractor_args);
        let run = archrecon(&args);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        parts.push(out);
    }
    let merged = tmp.path().join("merged.json");
    let mut args = vec!["aggregate"];
    args.extend(parts.iter().map(|p| s(p)));
    args.extend(["--out", s(&merged)]);
    assert_eq!(code(&archrecon(&args)), 0);
    let staged = tmp.path().join("staged.json");
    assert_eq!(
        code(&archrecon(&["resolve", s(&merged), "--out", s(&staged)])),
        0
    );

    let direct = tmp.path().join("direct.json");
    let mut args = vec!["pipeline"];
    for repo in &repos {
        args.extend(["--repo", s(repo)]);
    }
    args.extend(extractor_args);
    args.extend(["--out", s(&direct), "--strict"]);
    let run = archrecon(&args);
    assert_eq!(code(&run), 0, "{}", stderr(&run));

    assert_eq!(
        fs::read_to_string(&direct).unwrap(),
        fs::read_to_string(&staged).unwrap()
    );
}
