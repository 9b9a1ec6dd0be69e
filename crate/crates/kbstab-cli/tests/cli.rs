//! End-to-end checks of the kbstab binary: exit codes, manifests, and
//! output formats.

use std::path::Path;
use std::process::{Command, Output};

fn kbstab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbstab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbstab(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("analyze"));
}

#[test]
fn unknown_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbstab(dir.path(), &["analyze", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_exits_two_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbstab(
        dir.path(),
        &["analyze", "--t1", "absent.tsv", "--t2", "also_absent.tsv", "--out", "x.tsv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.tsv"));
}

#[test]
fn malformed_snapshot_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "#kbstab-snapshot\tsampled_at=2019-01-01|d\nonly_one_column\n").unwrap();
    let out = kbstab(
        dir.path(),
        &["analyze", "--t1", "bad.tsv", "--t2", "bad.tsv", "--out", "x.tsv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.tsv").exists());
}

#[test]
fn analyze_writes_report_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbstab(
        dir.path(),
        &[
            "analyze",
            "--t1",
            &fixture("twenty_t1.tsv"),
            "--t2",
            &fixture("twenty_t2.tsv"),
            "--criterion",
            "timestamp",
            "--out",
            "changes.tsv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let report = std::fs::read_to_string(dir.path().join("changes.tsv")).unwrap();
    assert!(report.starts_with("#kbstab-changes"));
    assert_eq!(report.lines().count(), 21); // header + 20 change rows

    let summary = std::fs::read_to_string(dir.path().join("changes.tsv.summary.csv")).unwrap();
    assert!(summary.starts_with("label,count"));

    let manifest = std::fs::read_to_string(dir.path().join("changes.tsv.manifest")).unwrap();
    assert!(manifest.starts_with("#kbstab-manifest"));
    assert!(manifest.contains("sha256="));
    assert!(manifest.contains("twenty_t1.tsv"));
}

#[test]
fn eval_criteria_reports_fixture_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbstab(
        dir.path(),
        &[
            "eval-criteria",
            "--t1",
            &fixture("twenty_t1.tsv"),
            "--t2",
            &fixture("twenty_t2.tsv"),
            "--gold",
            &fixture("twenty_gold.tsv"),
            "--out",
            "criteria.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("criteria.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "name,precision,recall,f1,accuracy,tp,fp,tn,fn"
    );
    let timestamp = lines.find(|l| l.starts_with("timestamp,")).unwrap();
    let fields: Vec<&str> = timestamp.split(',').collect();
    assert_eq!(&fields[5..], ["6", "1", "11", "2"]);
}

#[test]
fn gen_then_train_pipeline_produces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["gen", "--out-dir", "data", "--seed", "9", "--entities", "200", "--rates", "0.5,0,0,0.5", "--signal-rate", "0.9"],
        vec!["extract-features", "--kind", "text-delta", "--articles-old", "data/articles_t1.tsv", "--articles-new", "data/articles_t2.tsv", "--min-df", "5", "--out", "features.tsv"],
        vec!["train", "--features", "features.tsv", "--gold", "data/labels.tsv", "--property", "P54", "--test-frac", "0.4", "--seed", "3", "--out", "model.txt"],
        vec!["predict", "--model", "model.txt", "--features", "features.tsv", "--out", "predictions.csv"],
        vec!["inspect-model", "--model", "model.txt", "--top", "5", "--out", "weights.csv"],
    ] {
        let out = kbstab(dir.path(), &args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "kbstab {:?}: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let model = std::fs::read_to_string(dir.path().join("model.txt")).unwrap();
    assert!(model.starts_with("#kbstab-model"));

    let metrics = std::fs::read_to_string(dir.path().join("model.txt.metrics.csv")).unwrap();
    assert!(metrics.lines().count() >= 2);

    let predictions = std::fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert!(predictions.starts_with("entity,probability,label"));
    for line in predictions.lines().skip(1) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    let weights = std::fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    assert!(weights.starts_with("direction,rank,feature,weight"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("kbstab.conf"), "# defaults\nknn_k = 3\n").unwrap();
    // a malformed config line must fail fast
    std::fs::write(dir.path().join("broken.conf"), "no_equals_sign\n").unwrap();
    let out = kbstab(
        dir.path(),
        &["--config", "broken.conf", "kde", "--snapshot", &fixture("twenty_t2.tsv"), "--property", "P54", "--out", "kde.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kde_output_has_histogram_and_density_sections() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["gen", "--out-dir", "data", "--seed", "4", "--entities", "300"],
        vec!["kde", "--snapshot", "data/snapshot_t2.tsv", "--property", "P54", "--bins", "10", "--out", "kde.csv"],
    ] {
        let out = kbstab(dir.path(), &args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "kbstab {:?}: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let csv = std::fs::read_to_string(dir.path().join("kde.csv")).unwrap();
    assert!(csv.starts_with("section,x,value"));
    assert!(csv.lines().any(|l| l.starts_with("histogram,")));
    assert!(csv.lines().any(|l| l.starts_with("density,")));
}

#[test]
fn filter_entities_marks_terminated_subjects_stable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("snap.tsv"),
        "#kbstab-snapshot\tsampled_at=2019-01-01|d\n\
         Alive\tP54\tentity\tTeamA\t\t2015-01-01|d\n\
         Gone\tP54\tentity\tTeamB\t\t2015-01-01|d\n\
         Gone\tP570\tliteral\t2018-05-05\t2018-05-05|d\t2018-05-06|d\n",
    )
    .unwrap();
    let out = kbstab(
        dir.path(),
        &["filter-entities", "--snapshot", "snap.tsv", "--out", "stable.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let flags = std::fs::read_to_string(dir.path().join("stable.csv")).unwrap();
    assert!(flags.starts_with("entity,stable"));
    // a death date means the entity's facts have settled
    assert!(flags.lines().any(|l| l == "Gone,true"));
    assert!(flags.lines().any(|l| l == "Alive,false"));
}
