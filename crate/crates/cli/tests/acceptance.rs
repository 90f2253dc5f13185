//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any of them fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use archrecon::linking::Outcome;
use archrecon::model::{
    equal_up_to_array_order, get_path, is_transient_key, strip_transient, ModelPath,
};
use archrecon::{dereference_targets, resolve_links};
use archrecon_testkit::{gen, props, run_property, synth, CASES};
use proptest::test_runner::TestCaseError;
use serde_json::{json, Value};
use tempfile::TempDir;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Runs the binary and returns (exit code, stderr).
fn archrecon(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_archrecon"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot start archrecon: {e}"))?;
    let code = out.status.code().ok_or("archrecon was killed")?;
    Ok((code, String::from_utf8_lossy(&out.stderr).into_owned()))
}

fn archrecon_ok(args: &[&str]) -> Result<(), String> {
    match archrecon(args)? {
        (0, _) => Ok(()),
        (code, err) => Err(format!(
            "archrecon {} exited {code}: {}",
            args[0],
            err.trim()
        )),
    }
}

fn read(p: &Path) -> Result<String, String> {
    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn read_json(p: &Path) -> Result<Value, String> {
    serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))
}

fn tempdir() -> Result<TempDir, String> {
    TempDir::new().map_err(|e| e.to_string())
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(took)
}

fn golden_aggregation() -> Check {
    let tmp = tempdir()?;
    let out = tmp.path().join("out.json");
    let start = Instant::now();
    archrecon_ok(&[
        "aggregate",
        s(&fixture("aggregate/input1.json")),
        s(&fixture("aggregate/input2.json")),
        "--out",
        s(&out),
    ])?;
    let took = within(Duration::from_secs(1), start)?;
    let (got, want) = (read(&out)?, read(&fixture("aggregate/expected.json"))?);
    ensure!(got == want, "output differs from golden file:\n{got}");
    Ok(format!("byte-exact in {took:?}"))
}

fn two_step(order: [&str; 2], out: &Path) -> Result<String, String> {
    let dirs = order.map(|d| fixture(&format!("two-step/extractors/{d}")));
    archrecon_ok(&[
        "reconstruct",
        "--repo",
        s(&fixture("two-step/repo")),
        "--extractors",
        s(&dirs[0]),
        "--extractors",
        s(&dirs[1]),
        "--out",
        s(out),
    ])?;
    read(out)
}

fn two_extractor_reconstruction() -> Check {
    let tmp = tempdir()?;
    let start = Instant::now();
    let forward = two_step(["create", "java"], &tmp.path().join("a.json"))?;
    let reverse = two_step(["java", "create"], &tmp.path().join("b.json"))?;
    let took = within(Duration::from_secs(1), start)?;
    let want = json!({
        "$TYPE": "$MODEL",
        "microservices": [{"$TYPE": "microservice", "name": "service1", "java": true}]
    });
    let got: Value = serde_json::from_str(&forward).map_err(|e| e.to_string())?;
    ensure!(got == want, "unexpected model {got}");
    ensure!(
        forward == reverse,
        "reversed registration differs:\n{reverse}"
    );
    Ok(format!("both orders identical, {took:?}"))
}

fn link_outcome(model: &Value) -> Result<Outcome, String> {
    let (_, report) = resolve_links(model).map_err(|e| e.to_string())?;
    ensure!(
        report.entries.len() == 1,
        "expected one link, got {}",
        report.entries.len()
    );
    Ok(report.entries[0].outcome.clone())
}

fn link_resolution() -> Check {
    let model = read_json(&fixture("links/model.json"))?;
    let (resolved, _) = resolve_links(&model).map_err(|e| e.to_string())?;
    let target = &resolved["microservices"][0]["dependencies"][0]["target"];
    let target_path =
        ModelPath::parse(target.as_str().ok_or("no target written")?).map_err(|e| e.to_string())?;
    let bar = get_path(&resolved, &target_path).map_err(|e| e.to_string())?;
    ensure!(bar["name"] == json!("bar"), "target {target} is not bar");

    let mut without = model.clone();
    without["microservices"]
        .as_array_mut()
        .ok_or("no services")?
        .pop();
    let outcome = link_outcome(&without)?;
    ensure!(outcome == Outcome::Unresolved, "without bar: {outcome:?}");

    let mut doubled = model.clone();
    let services = doubled["microservices"]
        .as_array_mut()
        .ok_or("no services")?;
    services.push(json!({"$TYPE": "microservice", "name": "bar", "port": 1}));
    let outcome = link_outcome(&doubled)?;
    let Outcome::Ambiguous(candidates) = &outcome else {
        return Err(format!("with two bars: {outcome:?}"));
    };
    let listed: Vec<String> = candidates.iter().map(ToString::to_string).collect();
    ensure!(
        listed == ["/microservices/1", "/microservices/2"],
        "candidates {listed:?}"
    );
    Ok(format!(
        "resolved to {target}, unresolved without bar, ambiguous over {listed:?}"
    ))
}

fn eureka_links() -> Check {
    let tmp = tempdir()?;
    let out = tmp.path().join("out.json");
    archrecon_ok(&[
        "pipeline",
        "--repo",
        s(&fixture("eureka")),
        "--extractors",
        "builtin",
        "--out",
        s(&out),
        "--strict",
    ])?;
    let model = read_json(&out)?;
    let services = model["microservices"]
        .as_array()
        .ok_or("no microservices")?;
    let servers: Vec<String> = services
        .iter()
        .enumerate()
        .filter(|(_, m)| m["eurekaServer"] == json!(true))
        .map(|(i, _)| format!("/microservices/{i}"))
        .collect();
    ensure!(servers.len() == 1, "servers {servers:?}");
    let mut clients = Vec::new();
    for service in services {
        for dep in service["dependencies"].as_array().into_iter().flatten() {
            if dep["$TYPE"] == json!("$LINK") {
                ensure!(
                    dep["target"] == json!(servers[0]),
                    "{} links to {}",
                    service["name"],
                    dep["target"]
                );
                clients.push(service["name"].as_str().unwrap_or("?").to_string());
            }
        }
    }
    clients.sort();
    ensure!(clients == ["billing", "orders"], "links from {clients:?}");
    Ok(format!("links from {clients:?} resolve to {}", servers[0]))
}

fn pipeline(repos: &[PathBuf], out: &Path) -> Result<Value, String> {
    let (defs, config) = (fixture("layout/extractors"), fixture("layout/config.yaml"));
    let mut args = vec!["pipeline"];
    for repo in repos {
        args.extend(["--repo", s(repo)]);
    }
    args.extend([
        "--extractors",
        "builtin",
        "--extractors",
        s(&defs),
        "--config",
        s(&config),
    ]);
    args.extend(["--out", s(out), "--strict"]);
    archrecon_ok(&args)?;
    read_json(out)
}

fn layout_equivalence() -> Check {
    let tmp = tempdir()?;
    let mono = pipeline(&[fixture("layout/mono")], &tmp.path().join("mono.json"))?;
    let multi_root = fixture("layout/multi");
    let split = ["deploy", "orders", "web"].map(|r| multi_root.join(r));
    let multi = pipeline(&split, &tmp.path().join("multi.json"))?;

    let services = mono["microservices"].as_array().map_or(0, Vec::len);
    ensure!(services == 2, "mono model has {services} services");
    let detail = ["buildTool", "languages", "ports"];
    for service in mono["microservices"].as_array().into_iter().flatten() {
        let present = detail.iter().filter(|k| service.get(**k).is_some()).count();
        ensure!(present == detail.len(), "sparse service {service}");
    }
    let (a, b) = (dereference_targets(&mono), dereference_targets(&multi));
    ensure!(
        equal_up_to_array_order(&a, &b),
        "mono and multi differ:\n{a}\nvs\n{b}"
    );
    Ok("mono-repo and three-repo split agree up to array order".into())
}

fn property_suite() -> Check {
    let start = Instant::now();
    let results = [
        (
            "idempotence",
            run_property(CASES, gen::tree(), props::check_idempotence),
        ),
        (
            "idempotence (models)",
            run_property(CASES, gen::model(), props::check_idempotence),
        ),
        (
            "commutativity",
            run_property(
                CASES,
                (gen::model(), gen::model()),
                props::check_commutativity,
            ),
        ),
        (
            "fold order",
            run_property(CASES, gen::consistent_family(3), props::check_fold_order),
        ),
        (
            "no information loss",
            run_property(
                CASES,
                (gen::object_tree(), gen::object_tree()),
                props::check_no_information_loss,
            ),
        ),
        (
            "no information loss (models)",
            run_property(
                CASES,
                (gen::model(), gen::model()),
                props::check_no_information_loss,
            ),
        ),
        (
            "conflict path",
            run_property(
                CASES,
                (gen::object_tree(), gen::object_tree()),
                props::check_conflict_path,
            ),
        ),
        (
            "conflict path (models)",
            run_property(
                CASES,
                (gen::model(), gen::model()),
                props::check_conflict_path,
            ),
        ),
        (
            "strip idempotent",
            run_property(CASES, gen::tree(), props::check_strip_idempotent),
        ),
        (
            "strip exact",
            run_property(CASES, gen::tree(), props::check_strip_exact),
        ),
        (
            "strip keeps framework keys",
            run_property(CASES, gen::object_tree(), |x| {
                let stripped = strip_transient(&x);
                for key in ["$TYPE", "$ROOT", "$TARGET"] {
                    if is_transient_key(key) || x.get(key).is_some() != stripped.get(key).is_some()
                    {
                        return Err(TestCaseError::fail(format!("{key} mishandled in {x}")));
                    }
                }
                Ok(())
            }),
        ),
        (
            "run once",
            run_property(CASES, synth::synths(true), synth::check_run_once),
        ),
        (
            "fixpoint",
            run_property(CASES, synth::synths(true), synth::check_fixpoint),
        ),
        (
            "termination",
            run_property(CASES, synth::synths(false), synth::check_termination),
        ),
        (
            "order independence",
            run_property(
                CASES,
                synth::synths_and_permutation(),
                synth::check_order_independence,
            ),
        ),
    ];
    let took = within(Duration::from_secs(60), start)?;
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    ensure!(failed.is_empty(), "{}", failed.join("; "));
    ensure!(CASES >= 200, "only {CASES} cases per property");
    Ok(format!(
        "{} properties x {CASES} cases in {took:?}",
        results.len()
    ))
}

const COMPOSE: &str = "\
services:
  api:
    build: ./api
    ports: ['8080:80']
    environment:
      MODE: prod
";

fn compose_run(repo: &Path, include: Option<&[&str]>, tmp: &Path) -> Result<Value, String> {
    let out = tmp.join("out.json");
    let mut args = vec![
        "reconstruct",
        "--repo",
        s(repo),
        "--extractors",
        "builtin:docker-compose-services",
        "--out",
        s(&out),
    ];
    let config = tmp.join("config.json");
    if let Some(include) = include {
        let doc = json!({"docker-compose-services": {"include": include}});
        fs::write(&config, doc.to_string()).map_err(|e| e.to_string())?;
        args.extend(["--config", s(&config)]);
    }
    archrecon_ok(&args)?;
    let model = read_json(&out)?;
    Ok(model["microservices"][0].clone())
}

fn variant_definitions() -> Vec<PathBuf> {
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    walkdir::WalkDir::new(workspace)
        .into_iter()
        .filter_entry(|e| e.file_name() != "target" && e.file_name() != ".git")
        .filter_map(Result::ok)
        .filter(|e| {
            let name = e.file_name().to_string_lossy();
            name.contains(".extractor.") && name.contains("compose")
        })
        .map(|e| e.into_path())
        .collect()
}

fn configurable_extractor() -> Check {
    let tmp = tempdir()?;
    let repo = tmp.path().join("repo");
    fs::create_dir_all(&repo).map_err(|e| e.to_string())?;
    fs::write(repo.join("docker-compose.yml"), COMPOSE).map_err(|e| e.to_string())?;

    let off = compose_run(&repo, None, tmp.path())?;
    ensure!(off["name"] == json!("api"), "no service in {off}");
    ensure!(
        off.get("ports").is_none() && off.get("environment").is_none(),
        "facets leaked: {off}"
    );

    let ports = compose_run(&repo, Some(&["services", "ports"]), tmp.path())?;
    ensure!(ports["ports"] == json!(["8080:80"]), "ports facet: {ports}");
    ensure!(
        ports.get("environment").is_none(),
        "environment without its facet: {ports}"
    );

    let all = compose_run(
        &repo,
        Some(&["services", "ports", "environment"]),
        tmp.path(),
    )?;
    ensure!(all["ports"] == json!(["8080:80"]), "ports facet: {all}");
    ensure!(
        all["environment"] == json!({"MODE": "prod"}),
        "environment facet: {all}"
    );

    let files = variant_definitions();
    ensure!(
        files.len() == 1,
        "expected one compose definition, found {files:?}"
    );
    Ok("one definition, three behaviors through config".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("AC1 golden aggregation", golden_aggregation),
        (
            "AC2 two-extractor reconstruction",
            two_extractor_reconstruction,
        ),
        ("AC3 link resolution", link_resolution),
        ("AC4 service-registry links", eureka_links),
        ("AC5 mono/multi-repo equivalence", layout_equivalence),
        ("AC6 property suite", property_suite),
        ("AC7 configurable extractor", configurable_extractor),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
