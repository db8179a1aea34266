//! The `xplain` binary end to end: fixtures, degenerate inputs, exit codes,
//! determinism and output formats.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;
use xplain_core::analyzer::membership;
use xplain_core::subspace::Subspace;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn xplain(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_xplain")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Writes `cfg` into a fresh directory and returns both.
fn config(cfg: Value) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    (dir, path)
}

fn cmd(command: &str, cfg: &Path, seed: u64, out: Option<&Path>) -> Run {
    let seed = seed.to_string();
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--seed", &seed];
    let o;
    if let Some(p) = out {
        o = p.display().to_string();
        args.extend(["--out", &o]);
    }
    xplain(&args)
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(Result::unwrap)
        .filter(|e| e.path().is_file())
        .map(|e| {
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn schema(name: &str) -> jsonschema::Validator {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = schema(name);
    let errs: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errs.is_empty(), "{name}: {errs:?}");
}

/// Schema for each output file name.
fn schema_for(file: &str) -> Option<&'static str> {
    Some(match file {
        "run.json" => "run",
        "adversarial.json" => "adversarial",
        "subspaces.json" => "subspaces",
        "heatmaps.json" => "heatmaps",
        "trend.json" => "trend",
        "instances.json" => "instances",
        "encode_report.json" => "encode_report",
        "network.json" | "heuristic_network.json" | "benchmark_network.json" => "network",
        f if f.starts_with("subspace_") => "subspace",
        f if f.starts_with("heatmap_") && f.ends_with(".json") => "heatmap",
        _ => return None,
    })
}

fn validate_dir(dir: &Path) {
    for (name, body) in read_dir(dir) {
        if let Some(s) = schema_for(&name) {
            assert_valid(s, &serde_json::from_slice(&body).unwrap());
        }
    }
}

fn five_node_cfg() -> Value {
    json!({
        "scenario": fixture("five_node_dp.json"),
        "pair": "dp-opt",
        "analyzer": {"min_gap": 0.05},
        "subspace": {"max_subspaces": 2, "max_rounds": 4},
        "explainer": {"samples": 400, "seed_point": [100, 45, 0, 0, 100, 0, 0, 0]}
    })
}

fn ff4_cfg() -> Value {
    json!({
        "scenario": fixture("ff4.json"),
        "subspace": {"max_subspaces": 2, "max_rounds": 4},
        "explainer": {"samples": 300}
    })
}

/// Small balls never make First-Fit worse.
fn no_gap_cfg() -> Value {
    json!({
        "scenario": fixture("no_gap.json"),
        "analyzer": {"budget": 300},
        "subspace": {"max_rounds": 2},
        "explainer": {"samples": 100}
    })
}

fn te_line_cfg(kind: &str) -> Value {
    json!({
        "generalizer": {
            "family": {"kind": "te-line", "size": [2, 9], "capacity": [50, 100], "threshold": [20, 40], "count": 8},
            "predicate": {"kind": kind, "feature": "pinned_shortest_path_length", "alpha": 0.05},
            "budget": 600
        }
    })
}

#[test]
fn run_heuristic_reference_fixtures() {
    let cases = [
        ("five_node_dp.json", "DP total 150 / OPT total 250", 0.4),
        ("ff4.json", "FF 3 / OPT 2", 1.0),
        ("ff17.json", "FF 9 / OPT 8", 1.0),
    ];
    for (file, summary, gap) in cases {
        let (_d, c) = config(json!({ "scenario": fixture(file) }));
        let r = cmd("run-heuristic", &c, 1, None);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let doc = r.json();
        assert_eq!(doc["summary"], summary);
        assert!((doc["gap"].as_f64().unwrap() - gap).abs() < 1e-9);
        assert!(r.stderr.contains(summary));
        assert_valid("run", &doc);
    }
}

#[test]
fn run_heuristic_zero_demands() {
    let (_d, c) = config(json!({ "scenario": fixture("five_node_dp.json"), "inputs": [0, 0, 0, 0, 0, 0, 0, 0] }));
    let r = cmd("run-heuristic", &c, 1, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["summary"], "DP total 0 / OPT total 0");
    assert_eq!(r.json()["gap"], 0.0);
}

#[test]
fn run_heuristic_writes_networks_and_lp() {
    let (d, c) = config(json!({ "scenario": fixture("five_node_dp.json") }));
    let out = d.path().join("out");
    let r = cmd("run-heuristic", &c, 1, Some(&out));
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let files = read_dir(&out);
    for f in ["run.json", "heuristic_network.json", "benchmark_network.json", "heuristic.lp", "benchmark.lp"] {
        assert!(files.contains_key(f), "{f}");
    }
    let lp = String::from_utf8(files["benchmark.lp"].clone()).unwrap();
    assert!(lp.contains("Subject To") || lp.contains("subject to"), "{lp}");
    validate_dir(&out);
    let net = xplain_core::flow_dsl::from_json(std::str::from_utf8(&files["heuristic_network.json"]).unwrap()).unwrap();
    assert!(net.edges.iter().any(|e| e.fixed_rate.is_some()), "pinned rates are exported");
}

#[test]
fn analyze_finds_and_misses() {
    let (_d, c) = config(five_node_cfg());
    let r = cmd("analyze", &c, 4, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = r.json();
    assert_eq!(doc["found"], true);
    assert!(doc["point"]["gap"].as_f64().unwrap() >= 0.05);
    assert_valid("adversarial", &doc);

    let (_d, c) = config(no_gap_cfg());
    let r = cmd("analyze", &c, 4, None);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert_eq!(r.json()["found"], false);
    assert_valid("adversarial", &r.json());
}

#[test]
fn subspaces_reload_and_contain_their_seeds() {
    let (d, c) = config(ff4_cfg());
    let out = d.path().join("out");
    let r = cmd("subspaces", &c, 2, Some(&out));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let files = read_dir(&out);
    let doc: Value = serde_json::from_slice(&files["subspaces.json"]).unwrap();
    let n = doc["subspaces"].as_array().unwrap().len();
    assert!(n >= 1);
    for k in 0..n {
        let s = Subspace::from_json(std::str::from_utf8(&files[&format!("subspace_{k}.json")]).unwrap()).unwrap();
        assert!(membership(&s.seed.as_ref().unwrap().x, &s));
        assert!(s.significance.as_ref().unwrap().keep);
        let csv = String::from_utf8(files[&format!("samples_{k}.csv")].clone()).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("B0,B1,B2,B3,gap"));
        assert!(lines.all(|l| l.split(',').count() == 5 && l.split(',').all(|v| v.parse::<f64>().is_ok())));
    }
    validate_dir(&out);
}

#[test]
fn subspaces_none_exits_3() {
    let (_d, c) = config(no_gap_cfg());
    let r = cmd("subspaces", &c, 2, None);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.json()["subspaces"].as_array().unwrap().is_empty());
}

#[test]
fn explain_seed_point_and_subspace_file() {
    let (d, c) = config(five_node_cfg());
    let out = d.path().join("out");
    let r = cmd("explain", &c, 5, Some(&out));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let files = read_dir(&out);
    let hm: Value = serde_json::from_slice(&files["heatmap_0.json"]).unwrap();
    let mean = |id: &str| {
        hm["edges"].as_array().unwrap().iter().find(|e| e["id"] == id).unwrap()["mean"].as_f64().unwrap()
    };
    assert!(mean("1~>3->1-4-5-3") > 0.5);
    assert!(mean("1~>3->1-2-3") < 0.0);
    validate_dir(&out);
    let dot = String::from_utf8(files["heatmap_0.dot"].clone()).unwrap();
    graphviz_rust::parse(&dot).unwrap_or_else(|e| panic!("{e}\n{dot}"));

    // Explaining the written subspace file reproduces the scores' shape.
    let mut cfg = five_node_cfg();
    cfg["explainer"] = json!({"samples": 200, "subspace": out.join("subspace_0.json").display().to_string()});
    let (_d2, c2) = config(cfg);
    let r = cmd("explain", &c2, 5, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let maps = r.json();
    assert_eq!(maps.as_array().unwrap().len(), 1);
    assert_eq!(maps[0]["samples"], 200);
    assert_valid("heatmaps", &maps);
}

#[test]
fn explain_generated_subspaces() {
    let (d, c) = config(ff4_cfg());
    let out = d.path().join("out");
    let r = cmd("explain", &c, 2, Some(&out));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let files = read_dir(&out);
    assert!(files.contains_key("subspace_0.json") && files.contains_key("heatmap_0.dot"));
    for (name, body) in &files {
        if name.ends_with(".dot") {
            graphviz_rust::parse(std::str::from_utf8(body).unwrap()).unwrap();
        }
    }
    validate_dir(&out);
}

#[test]
fn explain_non_adversarial_seed_exits_3() {
    let mut cfg = five_node_cfg();
    cfg["explainer"]["seed_point"] = json!([0, 0, 0, 0, 0, 0, 0, 0]);
    let (_d, c) = config(cfg);
    let r = cmd("explain", &c, 1, None);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert_eq!(r.json(), json!([]));
}

#[test]
fn generalize_trend_holds_and_reverse_does_not() {
    let (d, c) = config(te_line_cfg("increasing"));
    let out = d.path().join("out");
    let r = cmd("generalize", &c, 1, Some(&out));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let trend: Value = serde_json::from_slice(&read_dir(&out)["trend.json"]).unwrap();
    assert_eq!(trend["holds"], true);
    assert_eq!(trend["observations"].as_array().unwrap().len(), 8);
    assert!(trend["note"].as_str().unwrap().contains("Kendall"));
    validate_dir(&out);

    let (_d, c) = config(te_line_cfg("decreasing"));
    let r = cmd("generalize", &c, 1, None);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert_eq!(r.json()["holds"], false);
}

#[test]
fn encode_milp_fixture_and_infeasible() {
    let (d, c) = config(json!({ "milp": fixture("knapsack.milp.json") }));
    let out = d.path().join("out");
    let r = cmd("encode-milp", &c, 1, Some(&out));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let files = read_dir(&out);
    let rep: Value = serde_json::from_slice(&files["encode_report.json"]).unwrap();
    assert_eq!(rep["agree"], true);
    assert_eq!(rep["raw"]["objective"], 12.0);
    assert_eq!(rep["encoded"]["objective"], 12.0);
    assert!(files.contains_key("milp.lp") && files.contains_key("network.lp"));
    validate_dir(&out);
    let net = xplain_core::flow_dsl::from_json(std::str::from_utf8(&files["network.json"]).unwrap()).unwrap();
    assert_eq!(net.edges.len() as u64, rep["edges"].as_u64().unwrap());

    let (d, _) = config(json!({}));
    let milp = d.path().join("bad.milp.json");
    std::fs::write(
        &milp,
        r#"{"sense": "maximize", "variables": [{"name": "x", "kind": "continuous"}], "objective": "1", "rows": ["1, <=, -1"]}"#,
    )
    .unwrap();
    let (_d2, c) = config(json!({ "milp": milp.display().to_string() }));
    let r = cmd("encode-milp", &c, 1, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["raw"]["status"], "infeasible");
    assert_eq!(r.json()["encoded"]["status"], "infeasible");
}

#[test]
fn every_command_is_deterministic() {
    let cases = [
        ("run-heuristic", five_node_cfg()),
        ("analyze", ff4_cfg()),
        ("subspaces", ff4_cfg()),
        ("explain", five_node_cfg()),
        ("generalize", te_line_cfg("increasing")),
        ("encode-milp", json!({ "milp": fixture("knapsack.milp.json") })),
    ];
    for (command, cfg) in cases {
        let (d, c) = config(cfg);
        let a = d.path().join("a");
        let b = d.path().join("b");
        assert_eq!(cmd(command, &c, 9, Some(&a)).code, 0, "{command}");
        assert_eq!(cmd(command, &c, 9, Some(&b)).code, 0, "{command}");
        assert_eq!(read_dir(&a), read_dir(&b), "{command}");
    }
}

#[test]
fn threads_flag_does_not_change_output() {
    let (_d, c) = config(ff4_cfg());
    let c = c.to_str().unwrap();
    let one = xplain(&["explain", "--config", c, "--seed", "3", "--threads", "1"]);
    let many = xplain(&["explain", "--config", c, "--seed", "3", "--threads", "3"]);
    assert_eq!(one.code, 0, "{}", one.stderr);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn config_errors_exit_1() {
    let (_d, c) = config(json!({ "scenario": fixture("five_node_dp.json"), "budget": 3 }));
    assert_eq!(cmd("analyze", &c, 1, None).code, 1);
    let (_d, c) = config(json!({ "scenario": "missing.json" }));
    assert_eq!(cmd("analyze", &c, 1, None).code, 1);
    let (_d, c) = config(json!({ "scenario": fixture("five_node_dp.json"), "pair": "ff-opt" }));
    assert_eq!(cmd("analyze", &c, 1, None).code, 1);
    let (_d, c) = config(json!({ "scenario": fixture("five_node_dp.json"), "stats": {"alpha": 2} }));
    assert_eq!(cmd("subspaces", &c, 1, None).code, 1);
    let (_d, c) = config(json!({ "scenario": fixture("five_node_dp.json") }));
    assert_eq!(cmd("generalize", &c, 1, None).code, 1);
    assert_eq!(cmd("encode-milp", &c, 1, None).code, 1);
    // No seed.
    let r = xplain(&["analyze", "--config", c.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.is_empty());
}

#[test]
fn shipped_fixtures_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (name, body) in read_dir(&root) {
        if !name.ends_with(".json") {
            continue;
        }
        let doc: Value = serde_json::from_slice(&body).unwrap();
        assert_valid(if name.ends_with(".milp.json") { "milp" } else { "scenario" }, &doc);
    }
    for (_, body) in read_dir(&root.join("configs")) {
        assert_valid("config", &serde_json::from_slice(&body).unwrap());
    }
}
