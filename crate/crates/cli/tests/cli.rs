use std::fs;
use std::process::{Command, Output};

fn hyq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyq")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_then_solve_jobshop_with_gantt() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("js.json");
    let gantt = dir.path().join("gantt.txt");
    let gen = hyq(&["gen", "--kind", "jobshop", "--sizes", "3,2", "--seed", "6", "--out", inst.to_str().unwrap()]);
    assert!(gen.status.success());
    let out = hyq(&[
        "jobshop",
        "--instance",
        inst.to_str().unwrap(),
        "--backend",
        "bruteforce",
        "--gantt",
        gantt.to_str().unwrap(),
    ]);
    let doc = json(&out);
    assert_eq!(doc["status"], "scheduled");
    let chart = fs::read_to_string(&gantt).unwrap();
    assert!(chart.lines().next().unwrap().starts_with("M1"));
    assert_eq!(chart.lines().count(), 2);
}

#[test]
fn lp_solve_reports_milp_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(
        &model,
        r#"{"sense":"max","variables":[{"objective":1,"integer":true,"upper":10},{"objective":1,"integer":true,"upper":10}],
            "constraints":[{"terms":[[0,2],[1,2]],"relation":"<=","rhs":7}]}"#,
    )
    .unwrap();
    let doc = json(&hyq(&["lp-solve", "--model", model.to_str().unwrap()]));
    assert_eq!(doc["status"], "optimal");
    assert_eq!(doc["objective"], 3.0);
}

#[test]
fn qubo_solve_prints_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("q.json");
    fs::write(&model, r#"{"num_vars":2,"linear":[[0,-1],[1,-1]],"quadratic":[[0,1,3]]}"#).unwrap();
    let doc = json(&hyq(&["qubo-solve", "--model", model.to_str().unwrap(), "--backend", "bruteforce"]));
    assert_eq!(doc["samples"][0]["energy"], -1.0);
}

#[test]
fn bench_writes_one_row_per_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    let report = dir.path().join("report.csv");
    fs::write(
        &cfg,
        r#"[{"problem":"vrp","source":{"generate":{"sizes":[3,2],"seed":1}},"backend":"sa"},
            {"problem":"cellform","source":{"generate":{"sizes":[3,3,2],"seed":2}}}]"#,
    )
    .unwrap();
    let out = hyq(&["bench", "--config", cfg.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(report).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("vrp,"));
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    assert!(!hyq(&["qubo-solve", "--model", bad.to_str().unwrap()]).status.success());
    assert!(!hyq(&["vrp", "--instance", bad.to_str().unwrap()]).status.success());
    assert!(!hyq(&["gen", "--kind", "vrp", "--sizes", "3"]).status.success());
    assert!(!hyq(&["jobshop"]).status.success());
}
