use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rmselect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmselect")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gains_on_bundled_tables() {
    let o = rmselect(&["gains", "--method", "regression", "--category", "overall"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# tool: rmselect "));
    let line = text
        .lines()
        .find(|l| l.contains(",gemma-2-9b-it,overall,"))
        .unwrap();
    assert!(line.ends_with(",+5.89%"), "{line}");
}

#[test]
fn post_deltas_display() {
    let o = rmselect(&["post-deltas"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.contains(",Llama-3.1-Tulu-3-8B-SFT,overall,"))
        .unwrap();
    assert!(line.ends_with(",+15.5%"), "{line}");
}

#[test]
fn unknown_subcommand_is_validation_error() {
    let o = rmselect(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_method_is_validation_error() {
    let o = rmselect(&["gains", "--method", "dpo"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "validation");
}

#[test]
fn missing_file_is_io_error() {
    let o = rmselect(&["correlate", "--matrix", "/nonexistent/matrix.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(rmselect(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_sets_seed_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# seeds\nseed = 11\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = rmselect(&["--config", c, "method-diff"]);
    assert!(stdout(&o).contains("# seed: 11"));
    let o = rmselect(&["--config", c, "--seed", "4", "method-diff"]);
    assert!(stdout(&o).contains("# seed: 4"));
    fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(rmselect(&["--config", c, "method-diff"]).status.code(), Some(1));
}

fn report(dir: &Path, threads: &str) -> Vec<u8> {
    let o = rmselect(&[
        "--threads",
        threads,
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
        "report-all",
        "--synthetic-benchmarks",
        "4",
        "--degrees",
        "1",
        "--alphas",
        "0.1,1",
        "--l1-ratios",
        "0.5",
        "--folds",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read(dir.join("manifest.json")).unwrap()
}

#[test]
fn report_all_manifest_ignores_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(report(a.path(), "1"), report(b.path(), "3"));
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = rmselect(&["--out", d, "report-all", "--synthetic-benchmarks", "3", "--degrees", "1", "--alphas", "0.1", "--l1-ratios", "0.5", "--folds", "3"]);
    assert!(o.status.success());
    let model = dir.path().join("predictor_model.json");
    let o = rmselect(&["coefficients", "--model", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("feature,coefficient"));
}

#[test]
fn merge_search_on_small_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pairs.csv");
    let mut text = String::from(
        "pair_id,chosen_helpfulness,chosen_correctness,chosen_coherence,chosen_complexity,chosen_verbosity,\
         rejected_helpfulness,rejected_correctness,rejected_coherence,rejected_complexity,rejected_verbosity\n",
    );
    for i in 0..12 {
        text.push_str(&format!("p{i},3,1,1,1,1,1,1,1,1,1\n"));
    }
    fs::write(&p, text).unwrap();
    let o = rmselect(&["--threads", "1", "merge-search", "--pairs", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["data"]["accuracy"], 1.0);
}
