use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_worstdep"));
    c.env_remove("WORSTDEP_THREADS");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_grid(grid_size: usize) -> Value {
    serde_json::json!({
        "margins": [
            {"family": "uniform", "params": {"lower": 0, "upper": 1}},
            {"family": "normal", "params": {"mean": 0, "std": 1}},
            {"family": "uniform", "params": {"lower": -1, "upper": 1}}
        ],
        "model": {"kind": "expression", "expr": "x1 * x2 - x3^2"},
        "alpha": 0.1,
        "n": 2000,
        "seed": 7,
        "search": {"grid_size": grid_size, "families": ["gaussian", "clayton"]},
        "bootstrap": {"replicates": 100, "level": 0.9}
    })
}

fn schema() -> jsonschema::Validator {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/result.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(result: &Path) {
    let doc: Value = serde_json::from_str(&fs::read_to_string(result).unwrap()).unwrap();
    let v = schema();
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn one_point_grid_gives_one_record() {
    let tmp = TempDir::new().unwrap();
    let mut config = small_grid(1);
    config["margins"] = serde_json::json!([
        {"family": "uniform", "params": {"lower": 0, "upper": 1}},
        {"family": "uniform", "params": {"lower": 0, "upper": 1}}
    ]);
    config["model"] = serde_json::json!({"kind": "expression", "expr": "x1 + x2"});
    config["search"]["families"] = serde_json::json!(["gaussian"]);
    let path = write_config(tmp.path(), "c.json", &config);
    let out = tmp.path().join("out");
    let o = run(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 1);
    assert!(data_rows(&csv)[0].contains(",1-2,gaussian,0.0,none,"), "{csv}");
    assert_valid(&out.join("result.json"));
    for f in ["vine.json", "events.jsonl", "timing.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), "c.json", &small_grid(8));
    let mut files = Vec::new();
    let out = tmp.path().join("out");
    for threads in ["1", "8", "1"] {
        let o = run(&["run", path.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        files.push((fs::read(out.join("records.csv")).unwrap(), fs::read(out.join("result.json")).unwrap()));
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
    // Regular grid over three pairs: 2 levels per axis, two families.
    assert_eq!(data_rows(std::str::from_utf8(&files[0].0).unwrap()).len(), 16);
}

#[test]
fn seed_and_sample_size_overrides_apply() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), "c.json", &small_grid(1));
    let out = tmp.path().join("o");
    let o = run(&["run", path.to_str().unwrap(), "--seed", "99", "--n", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["config"]["seed"], 99);
    assert_eq!(result["config"]["n"], 500);
    assert_eq!(result["records"][0]["evaluations"], 500);
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), "c.json", &small_grid(1));
    let out = tmp.path().join("o");
    let o = bin()
        .args(["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("WORSTDEP_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let timing: Value = serde_json::from_str(&fs::read_to_string(out.join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["threads"], 3);
}

#[test]
fn grid_cost_matches_the_evaluations_of_a_run() {
    let tmp = TempDir::new().unwrap();
    let mut config = small_grid(8);
    config["algorithm"] = "permuted-grid".into();
    config["restarts"] = 3.into();
    let path = write_config(tmp.path(), "c.json", &config);
    let o = run(&["cost", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let predicted: u64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(predicted, 3 * 2 * 8 * 2000);
    let out = tmp.path().join("o");
    assert!(run(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let result: Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["evaluations"].as_u64().unwrap(), predicted);
    assert_eq!(result["records"].as_array().unwrap().len() as u64, predicted / 2000);
    assert_eq!(result["permutation"].as_array().unwrap().len(), 3);
    assert_valid(&out.join("result.json"));
}

#[test]
fn greedy_cost_is_the_closed_form_count() {
    let o = run(&["cost", fixture("additive_greedy.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed: u128 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    // d = 4, six pairs, K = 5, one family, n = 50000, N_k = 25(k+1)².
    let direct: u128 = (0..=5u128).map(|k| 25 * (k + 1) * (k + 1) * (12 - 2 * k)).sum::<u128>() * 50_000 / 2;
    assert_eq!(printed, direct);
}

#[test]
fn greedy_run_writes_a_decreasing_trace() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["run", fixture("additive_greedy.json").to_str().unwrap(), "--n", "4000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let rows = data_rows(&trace);
    assert!(rows[0].starts_with("0,1-4,"), "{trace}");
    let accepted: Vec<f64> = rows
        .iter()
        .filter(|r| r.split(',').nth(7) == Some("true"))
        .map(|r| r.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(accepted.windows(2).all(|w| w[1] < w[0]), "{trace}");
    assert_valid(&out.join("result.json"));
    let events = fs::read_to_string(out.join("events.jsonl")).unwrap();
    let kinds: Vec<String> = events
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["event"].as_str().unwrap().to_owned())
        .collect();
    assert!(kinds.contains(&"iteration".to_owned()));
    assert_eq!(kinds.last().unwrap(), "finished");
}

#[test]
fn failed_runs_flush_partial_records_with_a_marker() {
    let tmp = TempDir::new().unwrap();
    // Rejects batches in which the two inputs coincide, i.e. the comonotone vertex.
    let script = tmp.path().join("model.py");
    fs::write(
        &script,
        "import sys\n\
         rows = [[float(v) for v in l.split(',')] for l in sys.stdin if l.strip()]\n\
         if rows and all(abs(a - b) < 1e-9 for a, b in rows):\n    sys.exit('comonotone input')\n\
         print('\\n'.join(repr(a + b) for a, b in rows))\n",
    )
    .unwrap();
    let config = serde_json::json!({
        "margins": [
            {"family": "uniform", "params": {"lower": 0, "upper": 1}},
            {"family": "uniform", "params": {"lower": 0, "upper": 1}}
        ],
        "model": {"kind": "external", "command": ["python3", script.to_str().unwrap()]},
        "alpha": 0.5,
        "n": 200,
        "algorithm": "greedy",
        "search": {"strategy": "vertices"}
    });
    let path = write_config(tmp.path(), "c.json", &config);
    let out = tmp.path().join("o");
    let o = run(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("comonotone input"), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 1, "{csv}");
    assert!(csv.lines().last().unwrap().starts_with("# failed: "), "{csv}");
    let result: Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "failed");
    assert_valid(&out.join("result.json"));
}

#[test]
fn validate_prints_the_effective_configuration() {
    let tmp = TempDir::new().unwrap();
    let minimal = serde_json::json!({
        "margins": [
            {"family": "normal", "params": {"mean": 0, "std": 1}},
            {"family": "normal", "params": {"mean": 0, "std": 1}}
        ],
        "model": {"kind": "expression", "expr": "-(x1 + x2)"},
        "alpha": 0.05,
        "n": 1000
    });
    let path = write_config(tmp.path(), "c.json", &minimal);
    let o = run(&["validate", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["algorithm"], "grid");
    assert_eq!(echo["search"]["strategy"], "regular");
    assert_eq!(echo["search"]["grid_size"], 21);
    assert_eq!(echo["search"]["families"], serde_json::json!(["gaussian"]));
    assert_eq!(echo["seed"], 0);
    assert_eq!(echo["search"]["pairs"], serde_json::json!([{"pair": [1, 2], "bounds": [-1.0, 1.0]}]));

    let mut bad = minimal.clone();
    bad["search"] = serde_json::json!({"grid_sise": 3});
    let path = write_config(tmp.path(), "bad.json", &bad);
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("search") && stderr(&o).contains("grid_sise"), "{}", stderr(&o));

    let o = run(&["validate", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shipped_fixtures_round_trip_through_validate() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")).unwrap() {
        let path = entry.unwrap().path();
        let first = run(&["validate", path.to_str().unwrap()]);
        assert!(first.status.success(), "{}: {}", path.display(), stderr(&first));
        let tmp = TempDir::new().unwrap();
        let echoed = tmp.path().join("echo.json");
        fs::write(&echoed, &first.stdout).unwrap();
        let second = run(&["validate", echoed.to_str().unwrap()]);
        assert!(second.status.success());
        assert_eq!(first.stdout, second.stdout, "{}", path.display());
    }
}

#[test]
fn d10_portfolio_fixture_parses_serializes_and_parses_identically() {
    let text = fs::read_to_string(fixture("portfolio_d10.json")).unwrap();
    let parsed = worstdep_cli::parse_config(&text).unwrap();
    let again = worstdep_cli::parse_config(&serde_json::to_string(&parsed).unwrap()).unwrap();
    assert_eq!(parsed, again);
    let resolved = parsed.resolve().unwrap();
    assert_eq!(resolved.margins.len(), 10);
    assert_eq!(resolved.space.free.len(), 45);
    assert_eq!(resolved.config.greedy.schedule[3], 400);
    let lhs = worstdep_cli::parse_config(&fs::read_to_string(fixture("portfolio_d10_lhs.json")).unwrap())
        .unwrap()
        .resolve()
        .unwrap();
    assert_eq!(worstdep_cli::grid_point_count(&lhs).unwrap(), 6000);
}

#[test]
fn curves_need_one_free_pair_and_are_flat_for_constant_models() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["curve", path_of(&tmp, &small_grid(3)).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("exactly one free pair"));

    let config = serde_json::json!({
        "margins": [
            {"family": "uniform", "params": {"lower": 0, "upper": 1}},
            {"family": "uniform", "params": {"lower": 0, "upper": 1}}
        ],
        "model": {"kind": "expression", "expr": "2.5"},
        "alpha": 0.3,
        "n": 300,
        "search": {"families": ["gaussian", "joe"]},
        "curve": {"points": 5}
    });
    let out = tmp.path().join("curve");
    let o = run(&["curve", path_of(&tmp, &config).to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(csv.lines().next().unwrap(), "family,tau,quantile,ci_lo,ci_hi");
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("2.5")), "{csv}");
    assert_eq!(rows[0], "gaussian,-1.0,2.5,2.5,2.5");
    assert_eq!(rows[9], "joe,1.0,2.5,2.5,2.5");
}

fn path_of(tmp: &TempDir, config: &Value) -> PathBuf {
    let name = format!("c{}.json", fs::read_dir(tmp.path()).unwrap().count());
    write_config(tmp.path(), &name, config)
}
