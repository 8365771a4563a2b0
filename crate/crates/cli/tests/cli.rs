use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn softrank(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softrank"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SOFTRANK_OUT")
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = softrank(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str], out: &Path) -> i32 {
    softrank(args, out).status.code().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn metrics(dir: &Path) -> Value {
    lines(&dir.join("metrics.jsonl"))[1].clone()
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, threads) in dirs.iter().zip(["1", "3"]) {
        let d = dir.path();
        ok(&["gen-data", "--seed", "1", "--count", "120", "--threads", threads], d);
        ok(&["train", "--seed", "1", "--epochs", "2", "--hidden", "8", "--threads", threads], d);
        ok(&["sample", "--seed", "2", "--trajectories", "--threads", threads], d);
        ok(&["eval", "--seed", "2", "--threads", threads], d);
    }
    for name in ["dataset.jsonl", "model.ckpt", "loss.jsonl", "samples.jsonl", "metrics.jsonl"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(a == b, "{name} differs between thread counts");
    }
}

#[test]
fn oracle_sorting_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-data", "--seed", "3", "--n", "6", "--count", "1000"], d);
    ok(&["sample", "--seed", "4", "--model", "oracle"], d);
    ok(&["eval", "--seed", "4"], d);
    let m = metrics(d);
    assert_eq!((m["accuracy"].as_f64(), m["kendall_tau"].as_f64(), m["correctness"].as_f64()), (Some(1.0), Some(1.0), Some(1.0)));
    assert_eq!(m["count"], 1000);

    let before = std::fs::read(d.join("metrics.jsonl")).unwrap();
    ok(&["eval", "--seed", "4"], d);
    assert_eq!(std::fs::read(d.join("metrics.jsonl")).unwrap(), before);
}

#[test]
fn untrained_model_matches_uniform_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let count = 3000.0;
    ok(&["train", "--seed", "5", "--n", "3", "--count", "50", "--epochs", "0"], d);
    ok(&["sample", "--seed", "6", "--n", "3", "--count", "3000", "--steps", "5"], d);
    ok(&["eval", "--seed", "6", "--n", "3", "--count", "3000"], d);
    let m = metrics(d);
    let acc = m["accuracy"].as_f64().unwrap();
    let p = 1.0 / 6.0;
    assert!((acc - p).abs() < 3.0 * (p * (1.0 - p) / count).sqrt(), "accuracy {acc}");
    // Fixed points of a uniform permutation have variance 1, so the per-instance fraction has variance 1/9.
    let corr = m["correctness"].as_f64().unwrap();
    assert!((corr - 1.0 / 3.0).abs() < 3.0 * (1.0 / 9.0 / count).sqrt(), "correctness {corr}");
}

#[test]
fn oracle_tsp_has_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-data", "--seed", "7", "--task", "tsp", "--n", "6", "--count", "40"], d);
    ok(&["sample", "--seed", "8", "--model", "oracle", "--steps", "5"], d);
    ok(&["eval", "--seed", "8"], d);
    let m = metrics(d);
    assert!(m["mean_gap"].as_f64().unwrap().abs() < 1e-12);
    assert!(m["mean_tour_length"].as_f64().unwrap() > 0.0);
}

#[test]
fn trajectories_record_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["sample", "--seed", "9", "--model", "oracle", "--count", "3", "--steps", "7", "--trajectories"], d);
    let recs = lines(&d.join("samples.jsonl"));
    assert_eq!(recs[0]["schema"], "softrank-samples");
    assert_eq!(recs[0]["config"]["trajectories"], true);
    for (i, r) in recs[1..].iter().enumerate() {
        assert_eq!(r["index"], i);
        let tr = r["trajectory"].as_array().unwrap();
        assert_eq!(tr.len(), 8);
        assert_eq!(tr.last().unwrap()["sigma"], r["permutation"]);
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.toml");
    std::fs::write(&cfg, "seed = 11\nn = 4\ncount = 30\neta = 0.5\n").unwrap();
    ok(&["gen-data", "--config", cfg.to_str().unwrap(), "--n", "6"], d);
    let header = &lines(&d.join("dataset.jsonl"))[0];
    assert_eq!((header["n"].as_u64(), header["count"].as_u64(), header["seed"].as_u64()), (Some(6), Some(30), Some(11)));
    let run = &header["run"]["config"];
    assert_eq!(run["eta"], 0.5);
    assert_eq!(run["steps"], 20);
    assert_eq!(header["run"]["config_hash"].as_str().unwrap().len(), 64);

    std::fs::write(&cfg, "seed = 1\nwidth = 3\n").unwrap();
    assert_eq!(code(&["gen-data", "--config", cfg.to_str().unwrap()], d), 1);
}

#[test]
fn output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_softrank"))
        .args(["gen-data", "--seed", "1", "--count", "5"])
        .env("SOFTRANK_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("dataset.jsonl").is_file());
}

#[test]
fn ablate_single_cell_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "ablate", "--seed", "1", "--count", "40", "--test-count", "10", "--epochs", "1", "--hidden", "8", "--embed", "4",
        "--forward", "riffle", "--param", "sigma-prev", "--model", "pointer",
    ];
    ok(&args, d);
    let recs = lines(&d.join("ablation.jsonl"));
    assert_eq!(recs.len(), 2);
    let row = &recs[1];
    assert_eq!(row["Forward Process"], "riffle-shuffle");
    assert_eq!(row["Reverse Model"], "Pointer cGPL");
    assert_eq!(row["Parametrization"], "sigma-prev");
    for key in ["kendall_tau", "accuracy", "correctness"] {
        assert!(row[key].is_number());
    }
    assert_eq!(code(&["ablate", "--seed", "1", "--model", "oracle"], d), 1);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["validate-kernels", "--seed", "1", "--draws", "20000"], d), 0);
    assert_eq!(lines(&d.join("kernels.jsonl")).len(), 11);
    assert_eq!(code(&["validate-kernels", "--seed", "1", "--draws", "20000", "--eta", "3"], d), 2);
    assert_eq!(code(&["validate-kernels", "--seed", "1", "--eta", "0"], d), 1);
    assert_eq!(code(&["validate-kernels", "--seed", "1", "--eta", "-0.5"], d), 1);
    assert_eq!(code(&["gen-data"], d), 1);
    assert_eq!(code(&["bogus"], d), 1);
    assert_eq!(code(&["train", "--seed", "1", "--model", "transformer"], d), 1);
    assert_eq!(code(&["sample", "--seed", "1"], d), 1);
    assert_eq!(code(&["sample", "--seed", "1", "--checkpoint", "nope.ckpt"], d), 1);

    ok(&["gen-data", "--seed", "1", "--n", "4", "--count", "10"], d);
    assert_eq!(code(&["train", "--seed", "1", "--n", "5", "--epochs", "1"], d), 1);
    ok(&["train", "--seed", "1", "--epochs", "1", "--hidden", "4"], d);
    assert_eq!(code(&["sample", "--seed", "1", "--model", "pointer"], d), 1);
    assert_eq!(code(&["eval", "--seed", "1"], d), 1);
}

#[test]
fn help_lists_every_subcommand() {
    let out = Command::new(env!("CARGO_BIN_EXE_softrank")).arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["gen-data", "train", "sample", "eval", "validate-kernels", "ablate"] {
        assert!(text.contains(sub), "{sub} missing from --help");
    }
}
