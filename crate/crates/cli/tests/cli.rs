use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn graphvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphvar"))
        .args(args)
        .env_remove("GRAPHVAR_CACHE_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, count: &str) -> PathBuf {
    let data = dir.join("data");
    let out = graphvar(&[
        "synth", "--out-dir", s(&data), "--count", count, "--min-points", "50", "--max-points",
        "70", "--seed", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    data
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(files_under(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn first_cloud(data: &Path) -> PathBuf {
    data.join("cube").join("cube_000.ply")
}

#[test]
fn exit_codes() {
    assert_eq!(code(&graphvar(&["--help"])), 0);
    assert_eq!(code(&graphvar(&["--version"])), 0);
    assert_eq!(code(&graphvar(&[])), 1);
    assert_eq!(code(&graphvar(&["solve", "--bogus"])), 1);
    let out = graphvar(&["solve", "--input", "/nonexistent/x.ply", "--output", "/tmp/never.ply"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn usage_error_leaves_no_files() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    let out = graphvar(&[
        "solve", "--input", s(&first_cloud(&data)), "--output", s(&out_dir.join("o.ply")),
        "--q", "0.5", "--trace", s(&out_dir.join("t.csv")),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("usage error"));
    assert!(files_under(&out_dir).is_empty());

    let out = graphvar(&[
        "bench", "--input", s(&first_cloud(&data)), "--out-dir", s(&out_dir.join("b")), "--p", "3",
    ]);
    assert_eq!(code(&out), 1);
    assert!(files_under(&out_dir).is_empty());
}

#[test]
fn zero_lambda_returns_input_unchanged() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let input = first_cloud(&data);
    let output = dir.path().join("same.ply");
    let out = graphvar(&[
        "solve", "--input", s(&input), "--output", s(&output), "--solver", "gj", "--lambda", "0",
        "--iters", "5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&input).unwrap(), fs::read(&output).unwrap());
}

#[test]
fn counts_accept_scientific_notation() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let trace = dir.path().join("t.csv");
    let out = graphvar(&[
        "solve", "--input", s(&first_cloud(&data)), "--output", s(&dir.path().join("o.xyz")),
        "--iters", "1e2", "--trace-every", "1e1", "--trace", s(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().next().unwrap(), "iter,J,J_eps,time_ms");
    assert_eq!(text.lines().last().unwrap().split(',').next().unwrap(), "100");
    assert_eq!(code(&graphvar(&["solve", "--iters", "1.5e1"])), 1);
}

#[test]
fn bench_writes_one_trace_per_solver_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = graphvar(&[
            "bench", "--input", s(&first_cloud(&data)), "--out-dir", s(&out_dir), "--iters", "200",
            "--trace-every", "50", "--seed", "1",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out_dir
    };
    let a = run("a");
    for solver in ["adam", "gd", "gj", "lbfgs", "pd"] {
        assert!(a.join(format!("{solver}.csv")).exists(), "{solver}");
    }
    let merged = fs::read_to_string(a.join("bench.csv")).unwrap();
    assert_eq!(merged.lines().next().unwrap(), "iter,adam,gd,gj,lbfgs,pd");
    assert_eq!(merged.lines().count(), 1 + 5);

    let b = run("b");
    let digests = |d: &Path| {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].as_str().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(digests(&a), digests(&b));
}

#[test]
fn target_cache_behaviour() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "4");
    let cache = dir.path().join("cache");
    let precompute = |extra: &[&str]| {
        let mut args = vec!["precompute-targets", "--data", s(&data), "--cache-dir", s(&cache), "--pd-iters", "500"];
        args.extend_from_slice(extra);
        graphvar(&args)
    };
    let out = precompute(&[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("4 targets computed, 0 already cached"));
    let before: Vec<_> = files_under(&cache)
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "ply"))
        .map(|p| (p.clone(), fs::metadata(&p).unwrap().modified().unwrap()))
        .collect();
    assert_eq!(before.len(), 4);

    let out = precompute(&[]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("0 targets computed, 4 already cached"));
    for (p, t) in &before {
        assert_eq!(fs::metadata(p).unwrap().modified().unwrap(), *t);
    }

    let out = precompute(&["--lambda", "0.1"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("4 targets computed, 0 already cached"));

    let meta = files_under(&cache)
        .into_iter()
        .find(|p| p.extension().is_some_and(|e| e == "json") && !s(p).contains("manifest"))
        .unwrap();
    let text = fs::read_to_string(&meta).unwrap();
    let tampered = text.replacen("\"k\": 4", "\"k\": 5", 1);
    assert_ne!(text, tampered);
    fs::write(&meta, tampered).unwrap();
    let (a, b) = (precompute(&[]), precompute(&["--lambda", "0.1"]));
    assert!(code(&a) == 2 || code(&b) == 2);
    assert!(stderr(&a).contains("refusing") || stderr(&b).contains("refusing"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&graphvar(&["precompute-targets", "--data", s(&empty)])), 2);
}

#[test]
fn cache_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let cache = dir.path().join("env-cache");
    let out = Command::new(env!("CARGO_BIN_EXE_graphvar"))
        .args(["precompute-targets", "--data", s(&data), "--pd-iters", "200"])
        .env("GRAPHVAR_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        files_under(&cache).iter().filter(|p| p.extension().is_some_and(|e| e == "ply")).count(),
        3
    );
    assert!(!data.join(".targets").exists());
}

#[test]
fn distill_without_targets_is_actionable() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let out = graphvar(&[
        "train", "--data", s(&data), "--mode", "distill", "--epochs", "1", "--output",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("no precomputed target"), "{msg}");
    assert!(msg.contains("graphvar precompute-targets"), "{msg}");
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn seeded_training_and_eval() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "6");
    let cache = dir.path().join("cache");
    assert_eq!(
        code(&graphvar(&["precompute-targets", "--data", s(&data), "--cache-dir", s(&cache), "--pd-iters", "500"])),
        0
    );
    let train = |name: &str| {
        let model = dir.path().join(name);
        let out = graphvar(&[
            "train", "--data", s(&data), "--mode", "distill", "--epochs", "2", "--pd-iters", "500",
            "--cache-dir", s(&cache), "--seed", "7", "--output", s(&model),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(&model).unwrap()
    };
    assert_eq!(train("a.json"), train("b.json"));
    assert!(dir.path().join("a.json.curves.csv").exists());

    let table = dir.path().join("eval.csv");
    let out = graphvar(&[
        "eval", "--checkpoint", s(&dir.path().join("a.json")), "--output", s(&table),
        "--adam-iters", "100",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&table).unwrap();
    // The last class (two clouds) is held out for testing.
    assert_eq!(text.lines().count(), 1 + 2);
    assert!(text.starts_with("name,vertices,J_gnn,J_pd"));
}

#[test]
fn replay_detects_changed_input() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "3");
    let input = dir.path().join("in.ply");
    fs::copy(first_cloud(&data), &input).unwrap();
    let output = dir.path().join("o.ply");
    assert_eq!(
        code(&graphvar(&["solve", "--input", s(&input), "--output", s(&output), "--iters", "100"])),
        0
    );
    let manifest = dir.path().join("o.ply.manifest.json");
    let out = graphvar(&["replay", s(&manifest)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("replay reproduced all 1 outputs"));

    fs::copy(data.join("sphere").join("sphere_000.ply"), &input).unwrap();
    let out = graphvar(&["replay", s(&manifest)]);
    assert_eq!(code(&out), 2);
}
