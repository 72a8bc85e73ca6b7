//! Runs the `evood` binary as a user would.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn evood(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evood"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples/data")
        .join(name)
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synthetic_train_eval_map_round() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = evood(&["train", "--epochs", "5", "--seed", "9", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("epoch 5:"));
    }
    let log_a = std::fs::read(a.join("train_log.csv")).unwrap();
    assert_eq!(log_a, std::fs::read(b.join("train_log.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("model.ckpt")).unwrap(),
        std::fs::read(b.join("model.ckpt")).unwrap()
    );

    let ck = a.join("model.ckpt");
    let o = evood(&["eval-ood", "--checkpoint", s(&ck), "--out", s(&a)]);
    assert!(o.status.success());
    let rows = csv_rows(&a.join("ood_metrics.csv"));
    assert_eq!(
        rows[0].join(","),
        "in_dataset,out_dataset,model,score_name,auroc,aupr,fpr90"
    );
    assert_eq!(rows.len(), 1 + 4);
    let summary = std::fs::read_to_string(a.join("uncertainty_summary.csv")).unwrap();
    assert!(summary.starts_with("measure,group,count,min,q1,median,q3,max"));

    let o = evood(&[
        "map",
        "--checkpoint",
        s(&ck),
        "--out",
        s(&a),
        "--set",
        "grid_resolution=2",
    ]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&a.join("uncertainty_grid.csv")).len(), 1 + 4);
}

#[test]
fn text_eval_gives_one_row_per_score_and_ood_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = evood(&[
        "train",
        "--arch",
        "gru",
        "--epochs",
        "3",
        "--id-train",
        &data("reviews_train.jsonl"),
        "--oe",
        &data("outliers.jsonl"),
        "--out",
        s(out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = evood(&[
        "eval-ood",
        "--arch",
        "gru",
        "--checkpoint",
        s(&out.join("model.ckpt")),
        "--id-test",
        &data("reviews_test.jsonl"),
        "--ood",
        &data("ood_recipes.jsonl"),
        "--ood",
        &data("ood_sports.jsonl"),
        "--score",
        "vacuity",
        "--out",
        s(out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("ood_metrics.csv"));
    assert_eq!(rows.len(), 1 + 2);
    assert_eq!(rows[1][1], "ood_recipes");
    assert_eq!(rows[2][1], "ood_sports");
}

#[test]
fn exit_codes_separate_validation_runtime_and_check_failures() {
    let o = evood(&[
        "train",
        "--arch",
        "gru",
        "--id-train",
        &data("reviews_train.jsonl"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--oe"));
    assert_eq!(evood(&["train", "--lr", "-1"]).status.code(), Some(2));
    assert_eq!(evood(&["train", "--bogus"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.ckpt");
    assert_eq!(
        evood(&["eval-ood", "--checkpoint", s(&missing)])
            .status
            .code(),
        Some(3)
    );

    let o = evood(&[
        "selfcheck",
        "--perturb-loss",
        "0.05",
        "--set",
        "mc_draws=2000",
        "--set",
        "mc_cases=4",
    ]);
    assert_eq!(o.status.code(), Some(4));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("FAIL enn_loss"));
    assert!(report
        .lines()
        .all(|l| !l.starts_with("PASS") || l.contains("tolerance=")));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "epochs = 50\nseed = 4\n").unwrap();
    let out = dir.path().join("o");
    let o = evood(&[
        "train",
        "--config",
        s(&conf),
        "--epochs",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&out.join("train_log.csv")).len(), 1 + 2);
    std::fs::write(&conf, "epochs = 2\nfavourite_colour = blue\n").unwrap();
    assert_eq!(
        evood(&["train", "--config", s(&conf)]).status.code(),
        Some(2)
    );
}
