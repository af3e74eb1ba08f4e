//! Runs the `ttc` binary against small fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FIG1A: &str = r#"{
  "levels": [["Jewelry", "Food"], ["Jewel", "Fruit"], ["K gold", "Pearl", "Apple", "Pear"]],
  "parents": {"2/Jewel": "Jewelry", "2/Fruit": "Food",
              "3/K gold": "Jewel", "3/Pearl": "Jewel", "3/Apple": "Fruit", "3/Pear": "Fruit"}
}"#;

const TWO_PARENTS: &str = r#"{"levels": [["a", "b"], ["c"]], "parents": {"2/c": "a", "2/c": "b"}}"#;

const NOISELESS: &str =
    r#"{"feature_dim": 64, "radii": [8, 4, 2], "noise_sigma": 0, "instances_per_leaf": 8}"#;

const OVERFIT_CONFIG: &str = r#"{"max_epochs": 500, "early_stop_patience": 500}"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("fig1a.json", FIG1A);
        f.write("two_parents.json", TWO_PARENTS);
        f.write("noiseless.json", NOISELESS);
        f.write("overfit.json", OVERFIT_CONFIG);
        f.write("empty.jsonl", "");
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ttc"))
            .current_dir(self.dir.path())
            .args(args)
            .env_remove("TTC_LOG_LEVEL")
            .output()
            .unwrap()
    }

    /// Noiseless fig1a dataset, generated through the CLI.
    fn noiseless_data(&self) -> &'static str {
        let out = self.run(&[
            "generate",
            "--taxonomy",
            "fig1a.json",
            "--synthetic",
            "noiseless.json",
            "--seed",
            "3",
            "--out",
            "train.jsonl",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        "train.jsonl"
    }

    fn train(&self, mode: &str, out: &str) -> Output {
        self.run(&[
            "train",
            "--taxonomy",
            "fig1a.json",
            "--data",
            "train.jsonl",
            "--config",
            "overfit.json",
            "--mode",
            mode,
            "--out",
            out,
        ])
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_accepts_valid_taxonomy() {
    let f = Fixture::new();
    let out = f.run(&["validate", "--taxonomy", "fig1a.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "ok\n");
}

#[test]
fn validate_lists_violations() {
    let f = Fixture::new();
    let out = f.run(&["validate", "--taxonomy", "two_parents.json"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("2/c"), "{}", stdout(&out));

    f.write(
        "skip.json",
        r#"{"levels": [["a"], ["b"], ["c"]], "parents": {"2/b": "a", "3/c": "a"}}"#,
    );
    let out = f.run(&["validate", "--taxonomy", "skip.json"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("level adjacency"), "{}", stdout(&out));

    f.write("broken.json", "{\"levels\": ");
    assert_eq!(code(&f.run(&["validate", "--taxonomy", "broken.json"])), 2);
}

#[test]
fn validate_missing_file_is_io_error() {
    let f = Fixture::new();
    let out = f.run(&["validate", "--taxonomy", "nope.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("nope.json"));
}

#[test]
fn usage_errors_exit_one() {
    let f = Fixture::new();
    assert_eq!(code(&f.run(&[])), 1);
    assert_eq!(code(&f.run(&["frobnicate"])), 1);
    assert_eq!(code(&f.run(&["validate"])), 1);
    assert_eq!(code(&f.run(&["--help"])), 0);
    let out = f.run(&[
        "compare",
        "--taxonomy",
        "fig1a.json",
        "--synthetic",
        "noiseless.json",
        "--seeds",
        "0",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn generate_writes_jsonl() {
    let f = Fixture::new();
    let out = f.run(&[
        "generate",
        "--taxonomy",
        "fig1a.json",
        "--synthetic",
        "noiseless.json",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 32);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["feature"].as_array().unwrap().len(), 64);
    assert_eq!(first["labels"].as_array().unwrap().len(), 3);

    f.noiseless_data();
    assert_eq!(
        std::fs::read_to_string(f.path("train.jsonl")).unwrap(),
        text
    );
}

#[test]
fn train_writes_checkpoint_and_history() {
    let f = Fixture::new();
    f.noiseless_data();
    let out = f.train("ttc", "ttc.json");
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let line: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(stdout(&out).lines().count(), 1);
    assert_eq!(line["mode"], "ttc");
    assert!(
        line["metrics"]["exact_match"].as_f64().unwrap() >= 0.99,
        "{line}"
    );

    let ck = json(&f.path("ttc.json"));
    assert_eq!(ck["feature_dim"], 64);
    assert_eq!(ck["levels"].as_array().unwrap().len(), 3);
    assert_eq!(ck["levels"][2]["W"].as_array().unwrap().len(), 4 * 64);
    assert_eq!(ck["taxonomy_hash"].as_str().unwrap().len(), 64);

    let history = std::fs::read_to_string(f.path("ttc.history.csv")).unwrap();
    let rows = history.lines().count() - 1;
    assert!((1..=500).contains(&rows), "{rows}");
    assert_eq!(
        history.lines().next().unwrap(),
        "epoch,loss,acc_l1,acc_l2,acc_l3,exact_match,seconds"
    );
}

#[test]
fn train_is_deterministic() {
    let f = Fixture::new();
    f.noiseless_data();
    assert_eq!(code(&f.train("ttc", "a.json")), 0);
    assert_eq!(code(&f.train("ttc", "b.json")), 0);
    let a = std::fs::read(f.path("a.history.csv")).unwrap();
    let b = std::fs::read(f.path("b.history.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(f.path("a.json")).unwrap(),
        std::fs::read(f.path("b.json")).unwrap()
    );
}

#[test]
fn flat_checkpoint_has_same_shapes_different_values() {
    let f = Fixture::new();
    f.noiseless_data();
    assert_eq!(code(&f.train("ttc", "ttc.json")), 0);
    assert_eq!(code(&f.train("flat", "flat.json")), 0);
    let (t, fl) = (json(&f.path("ttc.json")), json(&f.path("flat.json")));
    assert_eq!(fl["mode"], "flat");
    let (lt, lf) = (
        t["levels"].as_array().unwrap(),
        fl["levels"].as_array().unwrap(),
    );
    assert_eq!(lt.len(), lf.len());
    for (a, b) in lt.iter().zip(lf) {
        assert_eq!(
            a["W"].as_array().unwrap().len(),
            b["W"].as_array().unwrap().len()
        );
        assert_eq!(
            a["b"].as_array().unwrap().len(),
            b["b"].as_array().unwrap().len()
        );
    }
    assert_ne!(lt, lf);
}

#[test]
fn eval_reports_overfit_checkpoint() {
    let f = Fixture::new();
    f.noiseless_data();
    assert_eq!(code(&f.train("ttc", "ttc.json")), 0);
    let out = f.run(&[
        "eval",
        "--checkpoint",
        "ttc.json",
        "--taxonomy",
        "fig1a.json",
        "--data",
        "train.jsonl",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(report["exact_match"].as_f64().unwrap() >= 0.99);
    for key in [
        "hf1",
        "h_precision",
        "h_recall",
        "consistency",
        "exact_match",
        "level_accuracy",
        "rescue",
        "instance_count",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["instance_count"], 32);
}

#[test]
fn eval_rejects_other_taxonomy() {
    let f = Fixture::new();
    f.noiseless_data();
    assert_eq!(code(&f.train("ttc", "ttc.json")), 0);
    // same shape, one renamed class
    f.write("renamed.json", &FIG1A.replace("K gold", "White gold"));
    let out = f.run(&[
        "eval",
        "--checkpoint",
        "ttc.json",
        "--taxonomy",
        "renamed.json",
        "--data",
        "train.jsonl",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("taxonomy/checkpoint mismatch"));
}

#[test]
fn eval_on_empty_file_fails() {
    let f = Fixture::new();
    f.noiseless_data();
    assert_eq!(code(&f.train("ttc", "ttc.json")), 0);
    let out = f.run(&[
        "eval",
        "--checkpoint",
        "ttc.json",
        "--taxonomy",
        "fig1a.json",
        "--data",
        "empty.jsonl",
    ]);
    assert_ne!(code(&out), 0);
    assert!(stderr(&out).contains("empty dataset"), "{}", stderr(&out));
}

#[test]
fn train_reports_bad_inputs() {
    let f = Fixture::new();
    f.noiseless_data();
    f.write("bad_config.json", r#"{"batch_size": 0}"#);
    let out = f.run(&[
        "train",
        "--taxonomy",
        "fig1a.json",
        "--data",
        "train.jsonl",
        "--config",
        "bad_config.json",
        "--out",
        "x.json",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("batch_size"), "{}", stderr(&out));

    let out = f.run(&[
        "train",
        "--taxonomy",
        "fig1a.json",
        "--data",
        "train.jsonl",
        "--pi",
        "1,1",
        "--out",
        "x.json",
    ]);
    assert_eq!(code(&out), 2);

    f.write(
        "inconsistent.jsonl",
        "{\"feature\": [1], \"labels\": [\"Food\", \"Jewel\", \"Apple\"]}\n",
    );
    let out = f.run(&[
        "train",
        "--taxonomy",
        "fig1a.json",
        "--data",
        "inconsistent.jsonl",
        "--out",
        "x.json",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("inconsistent label path at line 1"));
    assert!(!f.path("x.json").exists());
}

#[test]
fn compare_on_separable_data() {
    let f = Fixture::new();
    let out = f.run(&[
        "compare",
        "--taxonomy",
        "fig1a.json",
        "--synthetic",
        "noiseless.json",
        "--config",
        "overfit.json",
        "--seeds",
        "1",
        "--out",
        "cmp.csv",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["seeds"], serde_json::json!([0]));
    for key in ["hf1", "consistency", "exact_match"] {
        let d = report["delta"][key].as_f64().unwrap();
        assert!(d.abs() <= 0.02, "{key}: {d}");
        assert!(report["ttc"][key].as_f64().unwrap() >= 0.98);
    }
    let csv = std::fs::read_to_string(f.path("cmp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 + 3);
}

#[test]
fn compare_delta_matches_reports() {
    let f = Fixture::new();
    f.write(
        "noisy.json",
        r#"{"feature_dim": 8, "radii": [3, 1.5, 0.75], "noise_sigma": 1.5, "instances_per_leaf": 10}"#,
    );
    let out = f.run(&[
        "compare",
        "--taxonomy",
        "fig1a.json",
        "--synthetic",
        "noisy.json",
        "--seeds",
        "2",
        "--seed",
        "5",
        "--max-epochs",
        "20",
        "--tau",
        "0.8",
        "--detach-chain",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(r["seeds"], serde_json::json!([5, 6]));
    assert_eq!(r["config"]["tau"], 0.8);
    assert_eq!(r["config"]["detach_chain"], true);
    for key in [
        "hf1",
        "h_precision",
        "h_recall",
        "consistency",
        "exact_match",
    ] {
        let d = r["ttc"][key].as_f64().unwrap() - r["flat"][key].as_f64().unwrap();
        assert!((d - r["delta"][key].as_f64().unwrap()).abs() <= 1e-12);
    }
    for i in 0..3 {
        let d = r["ttc"]["level_accuracy"][i].as_f64().unwrap()
            - r["flat"]["level_accuracy"][i].as_f64().unwrap();
        assert!((d - r["delta"]["level_accuracy"][i].as_f64().unwrap()).abs() <= 1e-12);
    }
}
