use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cslearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cslearn")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_bench_config(dir: &Path, scenarios: Value) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "master_seed": 4,
        "dictionary": { "features": 3, "max_individual": 2, "max_collective": 4 },
        "scenarios": scenarios,
        "methods": ["stlsq", "bsr"],
        "forecast": { "initial_values": 2, "burn_in": 1.0, "span": 4.0 }
    });
    let path = dir.join("bench.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn dict_lists_the_default_dictionary() {
    let out = cslearn(&["dict", "--features", "3", "--m1", "4", "--m2", "6"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["p"], 72);
    assert_eq!(v["terms"].as_array().unwrap().len(), 72);
    assert_eq!(v["terms"][0]["exponents"], serde_json::json!([0, 0, 0]));
}

#[test]
fn dict_small_cases_and_csv() {
    let v = stdout_json(&cslearn(&["dict", "--features", "1", "--m1", "3", "--m2", "3"]));
    assert_eq!(v["p"], 4);

    let out = cslearn(&["--format", "csv", "dict", "--features", "2", "--m1", "1", "--m2", "2"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,term,e_x1,e_x2");
    assert_eq!(lines.len(), 1 + 4);
}

#[test]
fn dict_rejects_zero_features() {
    assert_eq!(code(&cslearn(&["dict", "--features", "0", "--m1", "2", "--m2", "2"])), 2);
}

#[test]
fn gen_is_deterministic_under_a_seed() {
    let args = ["--seed", "11", "gen", "lorenz", "--n", "1200", "--dt", "0.002", "--sigma", "0.01"];
    let a = cslearn(&args);
    let b = cslearn(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = cslearn(&["--seed", "12", "gen", "lorenz", "--n", "1200", "--dt", "0.002", "--sigma", "0.01"]);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2,x3\n"));
    assert_eq!(text.lines().count(), 1 + 1200);

    let p1 = cslearn(&["--seed", "3", "gen", "poly", "--n", "30", "--size", "3", "--sigma", "0.1"]);
    let p2 = cslearn(&["--seed", "3", "gen", "poly", "--n", "30", "--size", "3", "--sigma", "0.1"]);
    assert_eq!(code(&p1), 0);
    assert_eq!(p1.stdout, p2.stdout);
}

#[test]
fn gen_validates_its_inputs() {
    assert_eq!(code(&cslearn(&["gen", "rf", "--n", "600", "--dt", "0.01"])), 0);
    // Lorenz runs must last longer than two time units.
    assert_eq!(code(&cslearn(&["gen", "lorenz", "--n", "100", "--dt", "0.001"])), 2);
    assert_eq!(code(&cslearn(&["gen", "lorenz", "--n", "1000", "--dt", "0.01", "--sigma", "0.1"])), 2);
    assert_eq!(code(&cslearn(&["gen", "poly", "--n", "10"])), 2);
}

#[test]
fn fit_learns_lorenz_from_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("lorenz.csv");
    let gen = cslearn(&["--out", path_str(&data), "gen", "lorenz", "--n", "15000", "--dt", "0.0002"]);
    assert_eq!(code(&gen), 0);

    let out = cslearn(&[
        "fit", path_str(&data), "--mode", "dynsys", "--method", "stlsq", "--m1", "2", "--m2", "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["dictionary"]["p"], 10);
    let targets = v["targets"].as_array().unwrap();
    assert_eq!(targets.len(), 3);
    assert_eq!(targets[0]["target"], "dx1/dt");
    let names = |i: usize| -> Vec<String> {
        targets[i]["terms"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["name"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(names(0).len(), 2);
    assert_eq!(names(1).len(), 3);
    assert_eq!(names(2).len(), 2);
}

#[test]
fn fit_bsr_reports_a_rising_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("poly.csv");
    assert_eq!(code(&cslearn(&["--seed", "8", "--out", path_str(&data), "gen", "poly", "--n", "80", "--size", "2", "--sigma", "0.05"])), 0);
    let out = cslearn(&["fit", path_str(&data), "--method", "bsr", "--m1", "2", "--m2", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let report = &v["targets"][0];
    let trace = report["diagnostics"]["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    let mut last = report["diagnostics"]["initial_log_evidence"].as_f64().unwrap();
    for step in trace {
        let ev = step["log_evidence"].as_f64().unwrap();
        assert!(ev >= last);
        last = ev;
    }

    let csv = cslearn(&["--format", "csv", "fit", path_str(&data), "--method", "bsr", "--m1", "2", "--m2", "3"]);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("target,index,term,weight\n"));
}

#[test]
fn fit_rejects_bad_input_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cslearn(&["fit", path_str(&dir.path().join("missing.csv"))])), 3);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,y\n1,2\noops,3\n").unwrap();
    assert_eq!(code(&cslearn(&["fit", path_str(&bad)])), 3);

    let no_y = dir.path().join("no_y.csv");
    std::fs::write(&no_y, "x1,x2\n1,2\n3,4\n").unwrap();
    assert_eq!(code(&cslearn(&["fit", path_str(&no_y)])), 3);

    assert_eq!(code(&cslearn(&["fit", path_str(&bad), "--method", "nope"])), 2);
}

#[test]
fn bench_writes_results_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bench_config(
        dir.path(),
        serde_json::json!([
            { "kind": "dynamics", "id": "lz", "system": "lorenz", "n": 1200, "dt": 0.002, "sigma": 0.001 },
            { "kind": "dynamics", "id": "rf", "system": "rf", "n": 1100, "dt": 0.005, "sigma": 0.001 },
            { "kind": "polynomial", "id": "p2", "size": 2, "n": 50, "sigma": 0.01 },
            { "kind": "polynomial", "id": "p3", "size": 3, "n": 50, "sigma": 0.01 }
        ]),
    );
    let run = |name: &str, workers: &str| {
        let out_dir = dir.path().join(name);
        let out = cslearn(&["--workers", workers, "--out", path_str(&out_dir), "bench", path_str(&config)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("summary.json").exists());
        std::fs::read_to_string(out_dir.join("results.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    assert_eq!(a, b);
    let groups: std::collections::BTreeSet<(String, String)> = a
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(groups.len(), 8);
}

#[test]
fn bench_without_executable_scenarios_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_bench_config(
        dir.path(),
        serde_json::json!([{ "kind": "dynamics", "id": "short", "system": "lorenz", "n": 100, "dt": 0.001, "sigma": 0.0 }]),
    );
    let out = cslearn(&["--out", path_str(&dir.path().join("o")), "bench", path_str(&config)]);
    assert_eq!(code(&out), 5);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"master_seed\": 1, \"methods\": [], \"extra\": true}").unwrap();
    assert_eq!(code(&cslearn(&["bench", path_str(&broken)])), 3);
}
