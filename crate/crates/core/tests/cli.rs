use std::path::Path;
use std::process::{Command, Output};

fn ibodo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibodo")).args(args).output().unwrap()
}

fn write_config(dir: &Path, config: serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_theorem2_reports_no_violations() {
    let out = ibodo(&["verify", "--claim", "theorem2", "--trials", "1000", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["violations"], 0);
    assert_eq!(report["trials"], 1000);
}

#[test]
fn unknown_config_key_is_rejected_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"world": {"frames": 10, "framez": 3}}));
    let out = ibodo(&["gen", "--config", &cfg, "--out", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("framez"));
    assert!(!dir.path().join("d").exists());
}

#[test]
fn invalid_config_value_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"world": {"frames": 1}}));
    let out = ibodo(&["gen", "--config", &cfg, "--out", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frames"));
}

#[test]
fn malformed_arguments_exit_nonzero() {
    assert_eq!(ibodo(&["verify", "--claim", "lemma9"]).status.code(), Some(1));
    assert_eq!(ibodo(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn gen_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"world": {"frames": 12}, "train_sequences": 3}));
    let read = |d: &str| {
        let mut files: Vec<_> = std::fs::read_dir(dir.path().join(d))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    for d in ["a", "b"] {
        let out = ibodo(&["gen", "--config", &cfg, "--out", dir.path().join(d).to_str().unwrap(), "--seed", "9"]);
        assert!(out.status.success());
    }
    assert_eq!(read("a"), read("b"));
}

/// A static world only ever moves by the identity. A model that has
/// memorized its training sequences replays them with near-zero error;
/// held-out sequences carry unseen nuisance codes and are not covered.
#[test]
fn eval_of_a_static_world_checkpoint_is_near_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({
            "world": {"profile": "static", "frames": 20, "seed": 3},
            "model": {"variant": "deterministic_baseline", "gamma": 0.0,
                      "latent_dim": 8, "deterministic_dim": 16, "hidden_dim": 16},
            "train": {"epochs": 200, "batch_size": 4, "lr_initial": 3e-3,
                      "lr_milestones": [[60, 3e-4], [120, 3e-5], [160, 3e-6], [185, 3e-7]],
                      "record_timing": false},
            "train_sequences": 5
        }),
    );
    for args in [
        vec!["gen", "--config", &cfg, "--out", &p("train")],
        vec!["train", "--config", &cfg, "--data", &p("train"), "--out", &p("model")],
    ] {
        let out = ibodo(&args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let ckpt = p("model/model.ckpt");
    let out = ibodo(&["eval", "--config", &cfg, "--ckpt", &ckpt, "--data", &p("train"), "--out", &p("eval")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("eval/eval.json")).unwrap()).unwrap();
    let t = report["report"]["t_rmse"].as_f64().unwrap();
    assert!(t < 1e-3, "t_rmse {t}");
}
