use std::fs;
use std::process::{Command, Output};

fn nahbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nahbandit"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(error_kind(&nahbandit(&["generate", "--no-such-flag"])), "usage");
}

#[test]
fn help_exits_cleanly() {
    assert!(nahbandit(&["--help"]).status.success());
}

#[test]
fn missing_data_file_reports_io() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.json");
    let out = tmp.path().join("o");
    let res = nahbandit(&["fit", "--data", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(error_kind(&res), "io");
}

#[test]
fn bad_config_line_reports_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "seeds = 0\nbogus = 3\n").unwrap();
    let res = nahbandit(&["run", "--config", conf.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(error_kind(&res), "parse");
}

#[test]
fn run_writes_well_formed_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("small.conf");
    fs::write(
        &conf,
        "beta = 10\nseeds = 0\nalgorithms = ewc, linucb\nn_train = 40\nn_test = 20\nrounds = 8\nK = 2\n",
    )
    .unwrap();
    let out = tmp.path().join("results");
    let res = nahbandit(&["run", "--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let svg = fs::read_to_string(out.join("regret_travel_beta10.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");

    let meta: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metadata.json")).unwrap()).unwrap();
    assert!(meta.is_object());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    // header plus two algorithms in two regret modes
    assert_eq!(summary.lines().count(), 5);
}
