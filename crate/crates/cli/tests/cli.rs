use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbc-alloc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, value: &Value) -> String {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn symmetric_pair(w: f64) -> Value {
    json!({
        "m": 1, "subset_of": [0, 0], "a": [1.0, 1.0], "b": [0.0, 0.0], "w": [w],
        "l": [-1.0, -1.0], "u": [1.0, 1.0], "L": [-2.0], "U": [2.0], "R": 1.0
    })
}

#[test]
fn solve_writes_solution_json() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "pair.json", &symmetric_pair(1.0));
    for alg in ["seq", "bin", "oracle"] {
        let out_path = dir.path().join(format!("{alg}.json"));
        let out = run(&["solve", &input, "--algorithm", alg, "--out", out_path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let sol = read(&out_path);
        assert!((sol["objective"].as_f64().unwrap() - 0.75).abs() < 1e-12);
        assert!((sol["lambda_star"].as_f64().unwrap() + 1.5).abs() < 1e-12);
        assert!(sol["kkt_residual"].as_f64().unwrap() <= 1e-8);
        let stdout = String::from_utf8_lossy(&out.stdout);
        for key in ["objective", "lambda*", "kkt residual", "wall time"] {
            assert!(stdout.contains(key), "missing {key} in {stdout}");
        }
    }
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = json!({
        "m": 1, "subset_of": [0, 0, 0], "a": [3.0, 3.0, 3.0], "b": [0.0, 0.0, 0.0], "w": [-1.0],
        "l": [-1.0, -1.0, -1.0], "u": [1.0, 1.0, 1.0], "L": [-3.0], "U": [3.0], "R": 0.0
    });
    let input = write(&dir, "bad.json", &bad);
    let out = run(&["solve", &input]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not_strictly_convex") && stderr.contains("\"index\": 0"), "{stderr}");

    let out = run(&["validate", &input]);
    assert_eq!(code(&out), 2);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], false);

    let pair = write(&dir, "pair.json", &symmetric_pair(1.0));
    let out = run(&["solve", &pair, "--algorithm", "separable"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("w = 0"));
}

#[test]
fn oracle_refuses_large_instances() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("big.json");
    let out = run(&["generate", "--c", "5", "--m", "4", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = run(&["solve", path.to_str().unwrap(), "--algorithm", "oracle"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle limits"));
}

#[test]
fn unreadable_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&run(&["solve", missing.to_str().unwrap()])), 1);
    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&run(&["solve", garbage.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["validate", garbage.to_str().unwrap()])), 1);
}

#[test]
fn generate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<String> = (0..2)
        .map(|k| dir.path().join(format!("g{k}.json")).to_string_lossy().into_owned())
        .collect();
    for p in &paths {
        assert_eq!(code(&run(&["generate", "--c", "3", "--m", "2", "--seed", "9", "--out", p])), 0);
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    let g = read(Path::new(&paths[0]));
    assert_eq!(g["meta"]["C"], 3);
    assert_eq!(g["meta"]["seed"], 9);
    assert!(g["meta"]["rng_id"].as_str().unwrap().contains("ChaCha20"));
    assert_eq!(code(&run(&["validate", &paths[0]])), 0);
    assert_eq!(code(&run(&["solve", &paths[0]])), 0);
}

#[test]
fn bench_writes_csv_and_fit() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let args = [
        "bench", "--grid-c", "2,3", "--grid-m", "2,4,8", "--reps", "2", "--seed", "4", "--out",
        csv_path.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read_to_string(&csv_path).unwrap();
    let mut lines = first.lines();
    assert_eq!(lines.next().unwrap(), "C,m,seed,alg,time_s,residual,objective");
    assert_eq!(lines.count(), 2 * 3 * 2 * 2);
    let fit = fs::read_to_string(dir.path().join("bench.fit.csv")).unwrap();
    assert_eq!(fit.lines().next().unwrap(), "C,alg,c1,c2");
    assert_eq!(fit.lines().count(), 1 + 4);

    // Same seed reproduces everything except timings.
    let strip = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                format!("{},{},{},{},{}", cols[0], cols[1], cols[2], cols[3], cols[6])
            })
            .collect()
    };
    let par = dir.path().join("par.csv");
    let mut par_args = args.to_vec();
    *par_args.last_mut().unwrap() = par.to_str().unwrap();
    par_args.push("--parallel");
    assert_eq!(code(&run(&par_args)), 0);
    assert_eq!(strip(&first), strip(&fs::read_to_string(&par).unwrap()));
}

#[test]
fn ev_with_negative_coupling_and_symmetric_scenario() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("ev.json");
    let out = run(&["ev", "--weights", "1,100", "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(&out_path);
    assert_eq!(report["W2"], 100.0);
    assert_eq!(report["intervals"].as_array().unwrap().len(), 56);
    let sol = &report["solution"];
    let parity = sol["objective"].as_f64().unwrap() + report["constant"].as_f64().unwrap();
    let full = report["ev_objective"].as_f64().unwrap();
    assert!((parity - full).abs() <= 1e-8 * full.abs());

    let m = 4;
    let scenario = json!({
        "m": m, "dt_hours": 0.5, "q": vec![[0.0, 0.0, 0.0]; m], "W1": 1.0, "W2": 1.0,
        "R_wh": 6000.0, "l_phase": 0.0, "u_phase": [2000.0, 2000.0, 2000.0, 2000.0],
        "L_total": 0.0, "U_total": 6000.0
    });
    let input = write(&dir, "scenario.json", &scenario);
    let out = run(&["ev", &input, "--algorithm", "seq", "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let x: Vec<f64> = read(&out_path)["solution"]["x"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for j in 0..m {
        assert!((x[3 * j] - x[3 * j + 1]).abs() < 1e-8 && (x[3 * j + 1] - x[3 * j + 2]).abs() < 1e-8);
        assert!((x[3 * j] - 1000.0).abs() < 1e-8);
    }

    let bad = write(&dir, "bad.json", &json!({"m": 1}));
    assert_eq!(code(&run(&["ev", &bad])), 1);
}
