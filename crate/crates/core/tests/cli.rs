use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nml_core::harness::{ExperimentConfig, RunReport, CSV_FILE, LOG_FILE, REPORT_FILE};
use nml_core::optim::TrajectoryLog;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn nml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nml"))
        .args(args)
        .env("NML_THREADS", "2")
        .output()
        .expect("run nml")
}

fn text(out: &Output) -> (String, String) {
    (String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn census_prints_vgg_counts() {
    let out = nml(&["census", path(&repo().join("specs/vgg16_bn.json"))]);
    let (stdout, _) = text(&out);
    assert!(out.status.success());
    assert!(stdout.contains("scale       4227"), "{stdout}");
    assert!(stdout.contains("rescale     8323"));
    assert!(stdout.contains("translation 201"));
    assert!(stdout.contains("parameters  18075912"));
}

#[test]
fn census_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = nml(&["census", path(&dir.path().join("missing.json"))]);
    assert!(!missing.status.success());
    assert!(text(&missing).1.contains("missing.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"layers": [{"dense": {"input": 4}}]}"#).unwrap();
    let out = nml(&["census", path(&bad)]);
    assert!(!out.status.success());
    assert!(text(&out).1.starts_with("error:"));
}

#[test]
fn bundled_configs_load_and_validate() {
    for entry in std::fs::read_dir(repo().join("configs")).unwrap() {
        let p = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.validate().unwrap();
        cfg.check_files().unwrap();
    }
}

#[test]
fn check_passes_for_relu_and_fails_for_tanh_control() {
    let ok = nml(&["check", "--config", path(&repo().join("configs/sgd_relu.json"))]);
    assert!(ok.status.success(), "{}", text(&ok).1);
    assert!(text(&ok).0.contains("descriptors within tolerance"));

    let control = nml(&["check", "--config", path(&repo().join("configs/tanh_control.json"))]);
    assert!(!control.status.success());
    assert!(text(&control).0.contains("exceed tolerance"));
}

#[test]
fn check_missing_config_is_an_error() {
    let out = nml(&["check", "--config", "no/such/config.json"]);
    assert!(!out.status.success());
    assert!(text(&out).1.contains("config.json"));
}

#[test]
fn train_then_compare_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let train = nml(&["train", "--config", path(&repo().join("configs/sgd_relu.json")), "--out", path(&run)]);
    assert!(train.status.success(), "{}", text(&train).1);
    assert!(text(&train).0.contains("160 steps, 41 log rows"), "{}", text(&train).0);
    for step in [80, 160] {
        assert!(run.join(format!("checkpoint-{step}.json")).is_file());
    }

    let compare = nml(&["compare", path(&run), "--svg"]);
    assert!(compare.status.success(), "{}", text(&compare).1);
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(run.join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report.total_steps, 160);
    assert_eq!(report.methods.len(), 3);
    assert!(report.symmetry_check.max_batch_residual <= 1e-8);

    let csv = std::fs::read_to_string(run.join(CSV_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,time,descriptor_label,kind,empirical,pred_continuous,pred_discrete,pred_momentum,pred_ito,magnitude"
    );
    assert_eq!(lines.count(), 41 * report.descriptors.len());
    let svgs = std::fs::read_dir(&run).unwrap().filter(|e| e.as_ref().unwrap().path().extension() == Some("svg".as_ref())).count();
    assert_eq!(svgs, report.descriptors.len());
}

#[test]
fn resume_rejects_a_checkpoint_from_other_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = repo().join("configs/sgd_relu.json");
    assert!(nml(&["train", "--config", path(&cfg), "--out", path(&run)]).status.success());
    let ck = run.join("checkpoint-80.json");
    let out = nml(&["train", "--config", path(&cfg), "--seed", "99", "--out", path(&dir.path().join("other")), "--resume", path(&ck)]);
    assert!(!out.status.success());
    assert!(text(&out).1.contains("different hyperparameters"), "{}", text(&out).1);
}

#[test]
fn divergence_keeps_a_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(repo().join("configs/sgd_relu.json")).unwrap()).unwrap();
    // (1 - ηλ) = -999 per step overflows within ~100 steps.
    cfg["hyper"]["eta"] = 10.0.into();
    cfg["hyper"]["lambda"] = 100.0.into();
    cfg["arch"]["path"] = path(&repo().join("specs/mlp_relu.json")).into();
    cfg.as_object_mut().unwrap().remove("checkpoint_every");
    let file = dir.path().join("diverge.json");
    std::fs::write(&file, cfg.to_string()).unwrap();

    let run = dir.path().join("run");
    let out = nml(&["train", "--config", path(&file), "--out", path(&run)]);
    assert!(!out.status.success());
    assert!(text(&out).1.contains("diverged at step"), "{}", text(&out).1);
    let log: TrajectoryLog = serde_json::from_str(&std::fs::read_to_string(run.join(LOG_FILE)).unwrap()).unwrap();
    assert!(!log.is_empty() && log.total_steps() < 160);
    assert!(*log.steps.last().unwrap() <= log.total_steps());
    assert!(log.accumulators.iter().all(|a| a.steps() == log.total_steps() && a.integral.is_finite()));
    assert!(log.empirical.iter().all(|s| s.len() == log.len() && s.iter().all(|v| v.is_finite())));
}

#[test]
fn demos_write_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["quadratic", "rotation", "oscillator"] {
        let out = nml(&["demo", kind, "--out", path(dir.path()), "--svg"]);
        assert!(out.status.success(), "{}", text(&out).1);
        assert!(dir.path().join(format!("{kind}.csv")).is_file());
        assert!(dir.path().join(format!("{kind}.svg")).is_file());
    }
    assert!(!nml(&["demo", "spiral"]).status.success());
}
