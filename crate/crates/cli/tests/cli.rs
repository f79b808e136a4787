use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(bin: &str, args: &[&str]) -> Output {
    Command::new(bin).args(args).output().expect("binary runs")
}

fn qmem(args: &[&str]) -> Output {
    run(env!("CARGO_BIN_EXE_qmem"), args)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().next().expect("error line");
    serde_json::from_str(line).expect("error is JSON")
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_qst_config_writes_density_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("qst");
    let cfg = configs().join("qst_d4.json");
    let summary = stdout_json(&qmem(&["demo", "--config", cfg.to_str().unwrap(), "--out", dir_arg(&out)]));
    assert_eq!(summary["scenario"], "qst");
    assert_eq!(summary["seed"], 7);
    assert!(summary["fidelity"].as_f64().unwrap() > 0.95);
    let rho: serde_json::Value = serde_json::from_slice(&fs::read(out.join("rho.json")).unwrap()).unwrap();
    assert_eq!(rho["dim"], 4);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    let names: Vec<&str> =
        manifest["artifacts"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"rho.json") && names.contains(&"counts.json"));
}

#[test]
fn identical_seed_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("raqm_213.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        stdout_json(&qmem(&["demo", "--config", cfg.to_str().unwrap(), "--out", dir_arg(dir)]));
    }
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    let c = tmp.path().join("c");
    stdout_json(&qmem(&["demo", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", dir_arg(&c)]));
    assert_ne!(fs::read(a.join("counts.csv")).unwrap(), fs::read(c.join("counts.csv")).unwrap());
}

#[test]
fn raqm_plan_exports_schedule_and_timeline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("plan");
    let summary = stdout_json(&run(
        env!("CARGO_BIN_EXE_raqm"),
        &["plan", "--order", "2,1,3", "--delta", "200e3", "--rise", "1.9e-6", "--expected", "--out", dir_arg(&out)],
    ));
    assert_eq!(summary["read_order"], serde_json::json!([2, 1, 3]));
    let timeline = fs::read_to_string(out.join("timeline.csv")).unwrap();
    assert!(timeline.lines().count() > 6);
    let fidelity = fs::read_to_string(out.join("fidelity.csv")).unwrap();
    assert_eq!(fidelity.lines().count(), 4);
}

#[test]
fn certify_bound_and_capacity_from_process_output() {
    let tmp = tempfile::tempdir().unwrap();
    let certify = env!("CARGO_BIN_EXE_certify");
    let bound = stdout_json(&run(
        certify,
        &["bound", "--d", "5", "--mu", "0.38", "--eta", "0.3", "--out", dir_arg(&tmp.path().join("b"))],
    ));
    assert!(bound["fidelity"].as_f64().unwrap() > 0.2);
    let curve = fs::read_to_string(tmp.path().join("b/bound_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 101);

    let qpt_dir = tmp.path().join("qpt");
    stdout_json(&qmem(&["qpt", "--dim", "2", "--channel", "dephasing:0.1", "--expected", "--out", dir_arg(&qpt_dir)]));
    let chi = qpt_dir.join("chi.json");
    let cap = stdout_json(&run(
        certify,
        &["capacity", "--chi", chi.to_str().unwrap(), "--out", dir_arg(&tmp.path().join("c"))],
    ));
    assert!((cap["c1"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(cap["schmidt_number"], 2);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("c/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn recorded_counts_reproduce_the_reconstruction() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    stdout_json(&qmem(&["tomo", "--dim", "3", "--state", "c5-ic7", "--out", dir_arg(&first)]));
    let counts = first.join("counts.json");
    let second = tmp.path().join("second");
    let summary =
        stdout_json(&qmem(&["tomo", "--dim", "3", "--counts", counts.to_str().unwrap(), "--out", dir_arg(&second)]));
    assert!(summary["fidelity"].is_null());
    assert_eq!(fs::read(first.join("rho.json")).unwrap(), fs::read(second.join("rho.json")).unwrap());
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"scenario":"qst","qst":{"dimension":4}}"#).unwrap();
    let out = qmem(&["demo", "--config", bad.to_str().unwrap(), "--out", dir_arg(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["exit_code"], 2);

    let missing = qmem(&["capacity", "--chi", "/nonexistent/chi.json", "--out", dir_arg(&tmp.path().join("y"))]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_state = qmem(&["tomo", "--state", "c5+c42", "--out", dir_arg(&tmp.path().join("z"))]);
    assert_eq!(bad_state.status.code(), Some(2));
    assert_eq!(qmem(&["bound", "--mu", "-1", "--out", dir_arg(&tmp.path().join("w"))]).status.code(), Some(2));
    assert_eq!(qmem(&["unknown-command"]).status.code(), Some(2));
}

#[test]
fn infeasible_schedule_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qmem(&["plan", "--n-max", "2", "--out", dir_arg(&tmp.path().join("p"))]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "model");
    assert!(!tmp.path().join("p").exists());
}

#[test]
fn demo_without_scenario_runs_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"qpt":{"dim":2,"expected":true},"capacity":{"dim":2},"qst":{"dim":2,"state":"c5+c6"}}"#)
        .unwrap();
    let summary = stdout_json(&qmem(&[
        "demo",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "2000",
        "--out",
        dir_arg(tmp.path()),
    ]));
    for name in ["multiplex", "raqm", "qst", "qpt", "bounds", "capacity"] {
        assert!(summary[name].is_object(), "{name}");
        assert!(tmp.path().join(name).join("manifest.json").is_file(), "{name}");
    }
}
