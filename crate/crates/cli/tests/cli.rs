use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Synthetic train/test corpora, embeddings and a flip list under `data/`.
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        let cfg = format!(
            r#"{{"output_dir": {:?}, "seed": 3,
                "synth": {{"corpus": {{"n": 400, "noise_rate": 0.1}}, "test_n": 80, "embedding_dim": 6}}}}"#,
            ws.path("data")
        );
        let out = ws.run("synth", &cfg);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, sub: &str, config: &str) -> Output {
        let path = self.path(&format!(
            "{sub}-{}.json",
            fs::read_dir(self.dir.path()).unwrap().count()
        ));
        fs::write(&path, config).unwrap();
        Command::new(env!("CARGO_BIN_EXE_abuse-pipeline"))
            .args([sub, "--config"])
            .arg(&path)
            .output()
            .unwrap()
    }

    /// Small, fast training config; `extra` is spliced into the top level.
    fn train_config(&self, out: &str, extra: &str) -> String {
        format!(
            r#"{{"train_path": {:?}, "test_path": {:?}, "output_dir": {:?}, "seed": 1,
                "tfidf": {{"max_features": 120}},
                "pipeline": {{"k": 3, "min_language_samples": 60, "pseudo_max_iters": 1, "gbdt": {{"num_trees": 15}}}}
                {extra}}}"#,
            self.path("data/train.csv"),
            self.path("data/test.csv"),
            self.path(out)
        )
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_writes_its_files() {
    let ws = Workspace::new();
    for f in [
        "train.csv",
        "test.csv",
        "test_truth.csv",
        "flips.txt",
        "train.emb",
        "test.emb",
    ] {
        assert!(ws.path("data").join(f).exists(), "{f}");
    }
    assert_eq!(read(&ws.path("data/flips.txt")).lines().count(), 40);
    assert!(!ws.path("data/.partial").exists());
}

#[test]
fn train_reports_every_enabled_stage() {
    let ws = Workspace::new();
    let out = ws.run("train", &ws.train_config("out", ""));
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = ws.path("out");
    let report = read(&dir.join("run_report.txt"));
    let stages: Vec<&str> = report
        .lines()
        .filter_map(|l| l.strip_prefix("stage="))
        .collect();
    let names: Vec<&str> = stages
        .iter()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["pooled", "language_wise", "pseudo", "ensemble"]);
    assert!(stages.iter().all(|l| l.contains("oof_f1=")));
    assert!(report.contains("final_stage=ensemble"));

    let preds = read(&dir.join("predictions.csv"));
    assert_eq!(preds.lines().next(), Some("id,probability"));
    assert_eq!(preds.lines().count(), 81);
    let labels = read(&dir.join("labels.csv"));
    assert_eq!(labels.lines().next(), Some("id,label"));
    assert!(labels
        .lines()
        .skip(1)
        .all(|l| l.ends_with(",0") || l.ends_with(",1")));
    assert_eq!(read(&dir.join("oof_predictions.csv")).lines().count(), 401);
    let thresholds: serde_json::Value =
        serde_json::from_str(&read(&dir.join("thresholds.json"))).unwrap();
    assert!(thresholds["global_threshold"].is_number());
    assert!(read(&dir.join("metrics.txt")).contains("false_positive_rate="));
    assert!(!dir.join(".partial").exists());
}

#[test]
fn disabled_stages_keep_the_order() {
    let ws = Workspace::new();
    let extra = r#", "stages": {"language_wise": false, "ensemble": false, "thresholds": false}"#;
    let out = ws.run("train", &ws.train_config("out", extra));
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read(&ws.path("out/run_report.txt"));
    let names: Vec<&str> = report
        .lines()
        .filter_map(|l| l.strip_prefix("stage="))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["pooled", "pseudo"]);
    assert!(!ws.path("out/labels.csv").exists());
    assert!(!ws.path("out/thresholds.json").exists());
}

#[test]
fn diagnose_writes_a_full_noise_report() {
    let ws = Workspace::new();
    let extra = format!(
        r#", "diagnose": {{"flip_set_path": {:?}}}"#,
        ws.path("data/flips.txt")
    );
    let out = ws.run("diagnose", &ws.train_config("out", &extra));
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read(&ws.path("out/noise_report.txt"));
    for key in [
        "n",
        "misclassified",
        "misclassified_fraction",
        "subset_positive",
        "subset_negative",
        "opposite_rate_subset",
        "opposite_rate_complement",
        "flip_recall",
        "flip_precision",
        "no_misclassified",
    ] {
        let line = report
            .lines()
            .find(|l| l.split('=').next() == Some(key))
            .unwrap_or_else(|| panic!("{key} missing"));
        let value = line.split_once('=').unwrap().1;
        assert!(!value.is_empty() && value != "na", "{key} not populated");
    }
}

#[test]
fn embeddings_pca_and_scatter() {
    let ws = Workspace::new();
    let extra = format!(
        r#", "train_embeddings": {:?}, "test_embeddings": {:?}, "stages": {{"pca": true, "scatter": true, "pseudo": false}},
            "pca": {{"components": 3}}"#,
        ws.path("data/train.emb"),
        ws.path("data/test.emb")
    );
    let out = ws.run("predict", &ws.train_config("out", &extra));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(&ws.path("out/run_report.txt")).contains("feature_width=125"));
    let scatter = read(&ws.path("out/scatter.tsv"));
    assert_eq!(scatter.lines().next(), Some("x\ty\tlabel\tflagged"));
    assert_eq!(scatter.lines().count(), 401);

    let plot = format!(
        r#"{{"train_path": {:?}, "train_embeddings": {:?}, "output_dir": {:?},
            "diagnose": {{"flip_set_path": {:?}}}}}"#,
        ws.path("data/train.csv"),
        ws.path("data/train.emb"),
        ws.path("plot"),
        ws.path("data/flips.txt")
    );
    let out = ws.run("plot", &plot);
    assert!(out.status.success(), "{}", stderr(&out));
    let flagged = read(&ws.path("plot/scatter.tsv"))
        .lines()
        .skip(1)
        .filter(|l| l.ends_with("\t1"))
        .count();
    assert_eq!(flagged, 40);
}

#[test]
fn ingest_with_oversampling_doubles_the_rows() {
    let ws = Workspace::new();
    let out = ws.run(
        "ingest",
        &ws.train_config("out", r#", "stages": {"oversample": true}"#),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = read(&ws.path("out/ingested.csv"));
    assert_eq!(text.lines().count(), 801);
    assert!(text.contains("#raw,") && text.contains("#clean,"));
}

#[test]
fn oversampled_training_runs() {
    let ws = Workspace::new();
    let out = ws.run(
        "train",
        &ws.train_config(
            "out",
            r#", "stages": {"oversample": true, "pseudo": false}"#,
        ),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(&ws.path("out/run_report.txt")).contains("train_rows=800"));
}

#[test]
fn failures_name_the_stage_and_leave_a_marker() {
    let ws = Workspace::new();
    let cfg = ws
        .train_config("out", "")
        .replace("data/train.csv", "data/missing.csv");
    let out = ws.run("train", &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("stage ingest failed"),
        "{}",
        stderr(&out)
    );
    assert!(ws.path("out/.partial").exists());

    // three records cannot fill ten folds
    let tiny = ws.path("tiny.csv");
    fs::write(&tiny, "id,text,language,like_count,report_count,label\na,x,hi,0,0,1\nb,y,hi,0,0,0\nc,z,hi,0,0,1\n").unwrap();
    let cfg = format!(
        r#"{{"train_path": {tiny:?}, "output_dir": {:?}}}"#,
        ws.path("out2")
    );
    let out = ws.run("train", &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("stage stack failed"),
        "{}",
        stderr(&out)
    );
    assert!(ws.path("out2/.partial").exists());
}

#[test]
fn config_errors_exit_with_a_diagnostic() {
    let ws = Workspace::new();
    let out = ws.run("train", r#"{"output_dir": "x", "fold_count": 3}"#);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("fold_count"));
    let out = ws.run(
        "predict",
        &ws.train_config("out", "")
            .replace(r#""test_path""#, r#""unused_key""#),
    );
    assert_eq!(out.status.code(), Some(1));
    let cfg = format!(
        r#"{{"train_path": {:?}, "output_dir": {:?}}}"#,
        ws.path("data/train.csv"),
        ws.path("p")
    );
    let out = ws.run("predict", &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("predict needs test_path"));
}

#[test]
fn overrides_replace_seed_and_output_dir() {
    let ws = Workspace::new();
    let cfg_path = ws.path("o.json");
    fs::write(
        &cfg_path,
        ws.train_config(
            "ignored",
            r#", "stages": {"pseudo": false, "ensemble": false}"#,
        ),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_abuse-pipeline"))
        .args(["train", "--config"])
        .arg(&cfg_path)
        .arg("--output-dir")
        .arg(ws.path("elsewhere"))
        .args(["--seed", "42"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(&ws.path("elsewhere/run_report.txt")).starts_with("seed=42\n"));
    assert!(!ws.path("ignored").exists());
}
