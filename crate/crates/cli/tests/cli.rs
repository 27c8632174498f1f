use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn henn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_henn"))
        .args(args)
        .env("HENN_OUT_DIR", out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_matrix(path: &Path, rows: &[&[f64]]) {
    let text: Vec<String> = rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    std::fs::write(path, text.join("\n")).unwrap();
}

const PATH3: &[&[f64]] = &[&[1.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 1.0]];

#[test]
fn similarity_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write_matrix(&a, PATH3);
    let a = a.to_str().unwrap();
    let out = henn(
        dir.path(),
        &["similarity", "--set", &format!("s={a}"), "--set", &format!("s_tilde={a}")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("similarity.json"));
    assert_eq!(r["epsilon"], 0.0);
    assert_eq!(r["certified"], true);
    assert!(dir.path().join("manifest-similarity.json").exists());
}

#[test]
fn kernel_mismatch_exits_with_assumption_code() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_matrix(&a, PATH3);
    write_matrix(&b, &[&[2.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 2.0]]);
    let out = henn(
        dir.path(),
        &[
            "similarity",
            "--set",
            &format!("s={}", a.display()),
            "--set",
            &format!("s_tilde={}", b.display()),
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(dir.path().join("similarity.json"))["epsilon"], "inf");
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = henn(dir.path(), &["gen-data", "--set", "dataset.sourcez=3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dataset") && err.contains("sourcez"), "{err}");

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"trials": "many"}"#).unwrap();
    let out = henn(dir.path(), &["rand-study", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn gen_data_defaults_and_idempotence() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = henn(dir.path(), &["gen-data", "--seed", "3"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read_to_string(a.path().join("dataset.txt")).unwrap();
    assert!(text.contains("\nn_train=500\n") && text.contains("\nn_test=300\n"));
    let manifest = json(a.path().join("manifest-gen-data.json"));
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["geometry_seed"], 3);
    for f in ["dataset.txt", "hypergraph.hg", "points.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
}

#[test]
fn bounds_on_identical_pair_pass_with_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write_matrix(&a, PATH3);
    let a = a.to_str().unwrap();
    let out = henn(
        dir.path(),
        &["bounds", "--set", &format!("operators.s={a}"), "--set", &format!("operators.s_tilde={a}")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("bounds.json"));
    assert_eq!(r["all_pass"], true);
    for f in r["filters"].as_array().unwrap() {
        assert_eq!(f["difference"], 0.0);
    }
    for g in r["gnn"].as_array().unwrap() {
        assert_eq!(g["max_deviation"], 0.0);
    }
}

#[test]
fn bounds_certify_additive_perturbations() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write_matrix(&a, PATH3);
    let cfg = dir.path().join("b.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"operators": {{"s": "{}"}}, "perturbation": {{"kind": "additive", "delta_a_relative": 0.05}}}}"#,
            a.display()
        ),
    )
    .unwrap();
    let out = henn(dir.path(), &["bounds", "-c", cfg.to_str().unwrap(), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("bounds.json"));
    assert_eq!(r["perturbation"]["holds"], true);
    assert!(r["similarity"]["epsilon"].as_f64().unwrap() <= 0.05 + 1e-8);
}

#[test]
fn rand_study_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "rand-study",
        "--format",
        "json,csv,svg",
        "--set",
        "sizes=[16,32]",
        "--set",
        "trials=3",
        "--set",
        "semicircle_n=64",
    ];
    for dir in [&a, &b] {
        let out = henn(dir.path(), &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["decay.csv", "decay.json", "decay.svg", "semicircle.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(std::fs::read_to_string(a.path().join("decay.csv"))
        .unwrap()
        .starts_with("n,trial,epsilon,min_nonzero_eig\n"));
}

fn small_data(dir: &Path) {
    let out = henn(
        dir,
        &[
            "gen-data",
            "--set",
            "points=150",
            "--set",
            "radius=0.6",
            "--set",
            "dataset.n_train=40",
            "--set",
            "dataset.n_test=20",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const TRAIN_ARGS: &[&str] = &[
    "train",
    "--set",
    "experiment.skip_cv=true",
    "--set",
    "experiment.shuffles=1",
    "--set",
    "experiment.train.epochs=2",
    "--set",
    "experiment.train.batch_size=8",
];

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let out = henn(dir.path(), TRAIN_ARGS);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(dir.path().join("report.json"));
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 4);
    for arch in ["henn", "clique", "line", "hgnn"] {
        assert!(dir.path().join(format!("checkpoint-{arch}.json")).exists());
        let log = std::fs::read_to_string(dir.path().join(format!("log-{arch}.csv"))).unwrap();
        assert!(log.starts_with("step,loss,ce,penalty,lr,max_C\n"));
    }
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let out = henn(dir.path(), TRAIN_ARGS);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("report.json")).unwrap());

    let out = henn(dir.path(), &["eval"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = json(dir.path().join("eval-henn.json"));
    let henn_result = results.iter().find(|r| r["architecture"] == "henn").unwrap();
    assert_eq!(eval["accuracy"], henn_result["runs"][0]["test"]);
    assert_eq!(eval["samples"], 20);
}

#[test]
fn non_finite_data_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let path = dir.path().join("dataset.txt");
    let text = std::fs::read_to_string(&path).unwrap();
    let (head, body) = text.split_once("---\n").unwrap();
    let mut rows: Vec<String> = body.lines().map(str::to_string).collect();
    let mut cells: Vec<&str> = rows[0].split(',').collect();
    cells[2] = "NaN";
    rows[0] = cells.join(",");
    std::fs::write(&path, format!("{head}---\n{}\n", rows.join("\n"))).unwrap();
    let out = henn(dir.path(), TRAIN_ARGS);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(henn(dir.path(), &["similarity"]).status.code(), Some(2));
    assert_eq!(henn(dir.path(), &["train"]).status.code(), Some(2));
}
