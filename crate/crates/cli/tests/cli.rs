use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mwclust(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwclust"))
        .args(args)
        .current_dir(dir)
        .env_remove("MWCLUST_SEED")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_NC: &[&str] = &["generate", "nc", "--m", "12", "--n", "15", "--d", "3", "--M", "2", "--seed", "7"];

#[test]
fn generate_writes_dataset_and_sidecar_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let o = mwclust(dir.path(), &["generate", "nc", "--m", "50", "--n", "50", "--d", "10", "--M", "5", "--seed", "7", "--out", "nc.jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("nc.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 50);
    let truth = read_json(&dir.path().join("nc.jsonl.truth.json"));
    assert_eq!(truth["generator"]["seed"], 7);
    assert_eq!(truth["labels"].as_array().unwrap().len(), 50);

    let again = mwclust(dir.path(), &["generate", "nc", "--m", "50", "--n", "50", "--d", "10", "--M", "5", "--seed", "7", "--out", "again.jsonl"]);
    assert!(again.status.success());
    assert_eq!(std::fs::read(dir.path().join("again.jsonl")).unwrap(), text.as_bytes());
}

#[test]
fn lc_sidecar_holds_the_shared_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let o = mwclust(dir.path(), &["generate", "lc", "--K", "50", "--m", "10", "--n", "10", "--out", "lc.jsonl"]);
    assert!(o.status.success());
    let truth = read_json(&dir.path().join("lc.jsonl.truth.json"));
    assert_eq!(truth["shared_atoms"].as_array().unwrap().len(), 50);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_mwclust"))
            .args(["generate", "nc", "--m", "4", "--n", "5", "--d", "2", "--M", "2", "--out", name])
            .current_dir(dir.path())
            .env("MWCLUST_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("a.jsonl", "3"), run("b.jsonl", "3"));
    assert_ne!(run("c.jsonl", "3"), run("d.jsonl", "4"));
}

#[test]
fn fit_writes_a_model_with_a_non_increasing_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen = SMALL_NC.to_vec();
    gen.extend(["--out", "nc.jsonl"]);
    assert!(mwclust(dir.path(), &gen).status.success());
    let o = mwclust(
        dir.path(),
        &["fit", "mwm", "--data", "nc.jsonl", "--k", "3", "--M", "2", "--lambda", "auto", "--tau", "10", "--out", "model.json", "--timing", "t.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let model = read_json(&dir.path().join("model.json"));
    let trace: Vec<f64> = model["objective_trace"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(trace.len() >= 2);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
    assert_eq!(model["config"]["variant"], "mwm");
    let timing = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(timing.lines().next(), Some("iteration,seconds"));
    assert_eq!(timing.lines().count(), trace.len());
}

#[test]
fn fit_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen = SMALL_NC.to_vec();
    gen.extend(["--out", "nc.jsonl"]);
    assert!(mwclust(dir.path(), &gen).status.success());
    let state = |workers: &str, out: &str| {
        let o = mwclust(dir.path(), &["fit", "mwgm", "--data", "nc.jsonl", "--k", "3", "--M", "2", "--workers", workers, "--out", out]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(3));
        let mut v = read_json(&dir.path().join(out));
        v.as_object_mut().unwrap().remove("wall_clock_s");
        v
    };
    assert_eq!(state("1", "a.json"), state("4", "b.json"));
}

#[test]
fn mwms_supports_lie_in_the_shared_set() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mwclust(dir.path(), &["generate", "lc", "--m", "8", "--n", "10", "--d", "2", "--M", "2", "--K", "6", "--out", "lc.jsonl"])
        .status
        .success());
    let o = mwclust(dir.path(), &["fit", "mwms", "--data", "lc.jsonl", "--K", "6", "--M", "2", "--max-iter", "3", "--out", "model.json"]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)));
    let model = read_json(&dir.path().join("model.json"));
    let shared = model["shared_atoms"].as_array().unwrap();
    for g in model["locals"].as_array().unwrap() {
        for atom in g["atoms"].as_array().unwrap() {
            assert!(shared.contains(atom));
        }
    }
}

#[test]
fn iteration_cap_exits_with_three_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen = SMALL_NC.to_vec();
    gen.extend(["--out", "nc.jsonl"]);
    assert!(mwclust(dir.path(), &gen).status.success());
    let o = mwclust(dir.path(), &["fit", "mwm", "--data", "nc.jsonl", "--k", "3", "--M", "2", "--max-iter", "1", "--tol", "0", "--out", "model.json"]);
    assert_eq!(o.status.code(), Some(3));
    let model = read_json(&dir.path().join("model.json"));
    assert_eq!(model["converged"], false);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen = SMALL_NC.to_vec();
    gen.extend(["--out", "nc.jsonl"]);
    assert!(mwclust(dir.path(), &gen).status.success());
    // No contexts in NC data.
    let o = mwclust(dir.path(), &["fit", "mwmc", "--data", "nc.jsonl", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("context"));
    assert_eq!(mwclust(dir.path(), &["fit", "nope", "--data", "nc.jsonl", "--out", "m.json"]).status.code(), Some(2));
    assert_eq!(mwclust(dir.path(), &["fit", "mwm", "--data", "nc.jsonl", "--tau", "0", "--out", "m.json"]).status.code(), Some(2));
    assert_eq!(mwclust(dir.path(), &["generate", "nc", "--m", "0", "--out", "x.jsonl"]).status.code(), Some(2));
}

#[test]
fn eval_against_own_truth_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let mut gen = SMALL_NC.to_vec();
    gen.extend(["--out", "nc.jsonl"]);
    assert!(mwclust(dir.path(), &gen).status.success());
    let truth = read_json(&dir.path().join("nc.jsonl.truth.json"));

    // A model whose state is the truth itself.
    let fit = mwclust(dir.path(), &["fit", "mwm", "--data", "nc.jsonl", "--k", "3", "--M", "2", "--max-iter", "2", "--out", "model.json"]);
    assert!(matches!(fit.status.code(), Some(0) | Some(3)));
    let mut model = read_json(&dir.path().join("model.json"));
    model["locals"] = truth["locals"].clone();
    model["globals"] = truth["globals"].clone();
    model["assignments"] = truth["labels"].clone();
    std::fs::write(dir.path().join("truth_model.json"), model.to_string()).unwrap();

    let o = mwclust(dir.path(), &["eval", "--model", "truth_model.json", "--truth", "nc.jsonl.truth.json", "--run-id", "r1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("run_id,variant,nmi,ari,ami,w_to_truth,wall_clock_s"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "r1");
    assert_eq!(row[1], "mwm");
    for v in &row[2..5] {
        assert!((v.parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(row[5].parse::<f64>().unwrap().abs() < 1e-9);

    std::fs::write(dir.path().join("labels.json"), truth["labels"].to_string()).unwrap();
    let o = mwclust(dir.path(), &["eval", "--model", "truth_model.json", "--labels", "labels.json", "--no-header"]);
    assert!(o.status.success());
    let row: Vec<String> = stdout(&o).trim().split(',').map(String::from).collect();
    assert_eq!(row.len(), 7);
    assert_eq!(row[2], "1");
    assert!(row[5].is_empty());

    assert_eq!(mwclust(dir.path(), &["eval", "--model", "truth_model.json"]).status.code(), Some(2));
}

#[test]
fn bench_emits_one_row_per_size_and_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = mwclust(
        dir.path(),
        &["bench", "--sweep", "m=6,12", "--variants", "mwm", "--workers-list", "1,2", "--n", "8", "--d", "2", "--max-iter", "2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    // Same seed, same size: same final objective regardless of workers.
    assert_eq!(rows[0][4], rows[1][4]);
    assert_eq!(rows[2][4], rows[3][4]);
    assert_eq!(mwclust(dir.path(), &["bench", "--sweep", "n=5"]).status.code(), Some(2));
}

#[test]
fn check_equivalence_passes_on_tiny_instances() {
    let dir = tempfile::tempdir().unwrap();
    let o = mwclust(dir.path(), &["check-equivalence", "--instances", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 7);
}
