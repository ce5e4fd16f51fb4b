use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fletcher(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fletcher"));
    cmd.args(args).env_remove("FLETCHER_SEED");
    if let Some(p) = out {
        cmd.arg("--output").arg(p);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.json");
    let o = fletcher(
        &["solve", "--problem", "rayleigh", "--n", "10", "--eps1", "1e-5", "--eps2", "1e-4", "--beta", "10", "--seed", "1"],
        Some(&path),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["certificate", "config", "final_x", "records", "termination"]);
    assert_eq!(v["termination"], "converged");
    assert_eq!(v["final_x"].as_array().unwrap().len(), 10);
    let rec = &v["records"][0];
    for k in ["k", "kind", "step_len", "g_before", "g_after", "grad_norm", "h_norm", "curvature", "backtracks"] {
        assert!(rec.get(k).is_some(), "record lacks {k}");
    }
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("converged") && err.contains("min_eig="));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&fletcher(&["solve", "--problem", "klein-bottle"], None)), 64);
    let o = fletcher(&["solve", "--problem", "sphere", "--eps1", "0.3"], None);
    assert_eq!(code(&o), 64);
    assert!(stderr(&o).contains("R/2"));
    assert_eq!(code(&fletcher(&["solve", "--c2", "0.5"], None)), 64);
    assert_eq!(code(&fletcher(&["solve", "--max-iters", "-3"], None)), 64);
    assert_eq!(code(&fletcher(&["sweep", "--problem", "rayleigh", "--eps"], None)), 64);
    assert_eq!(code(&fletcher(&[], None)), 64);
    assert_eq!(code(&fletcher(&["--help"], None)), 0);
}

#[test]
fn tolerance_not_reached_exits_2() {
    let o = fletcher(&["solve", "--problem", "rayleigh", "--eps1", "1e-8", "--beta", "10", "--max-iters", "3"], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).starts_with("max_iters"));
}

#[test]
fn beta_too_small_exits_3() {
    let o = fletcher(
        &["solve", "--problem", "rayleigh", "--beta", "10", "--alpha01", "1000", "--max-backtracks", "0"],
        None,
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).starts_with("beta_too_small"));
}

#[test]
fn plateau_reports_its_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plateau.json");
    let o = fletcher(&["plateau", "--problem", "stiefel", "--n", "8", "--p", "2", "--beta0", "1e-3", "--gamma", "2"], Some(&path));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("plateaus="));
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["trace"]["termination"], "converged");
    let plateaus = v["plateaus"].as_array().unwrap();
    assert_eq!(plateaus[0]["beta"], 1e-3);
    assert_eq!(plateaus.last().unwrap()["trigger"], "converged");
}

#[test]
fn check_passes_on_every_builtin() {
    for problem in ["sphere", "rayleigh", "stiefel", "product", "product:stiefel:3x2,sphere:4"] {
        let o = fletcher(&["check", "--problem", problem, "--seeds", "10"], None);
        assert_eq!(code(&o), 0, "{problem}: {}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 6);
        assert!(v.as_array().unwrap().iter().all(|r| r["pass"] == true));
    }
}

#[test]
fn restore_logs_decay() {
    let o = fletcher(&["restore", "--problem", "stiefel", "--seed", "3", "--t-end", "5"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let log = v["decay_log"].as_array().unwrap();
    assert_eq!(log[0][0], 0.0);
    let phis: Vec<f64> = log.iter().map(|e| e[1].as_f64().unwrap()).collect();
    assert!(phis.windows(2).all(|w| w[1] <= w[0]));
    assert!(v["final_h_norm"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn sweep_writes_ordered_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let o = fletcher(&["sweep", "--problem", "rayleigh", "--n", "10", "--beta", "10", "--eps", "1e-4,1e-2,1e-3"], Some(&path));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "eps,iters_total,iters_grad,iters_eigen,final_h_norm,final_grad_norm,final_min_eig,g_final,termination"
    );
    assert_eq!(lines.len(), 4);
    let eps: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(eps, [1e-2, 1e-3, 1e-4]);
    let iters: Vec<usize> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(iters.windows(2).all(|w| w[0] <= w[1]));
    for l in &lines[1..] {
        let fields: Vec<&str> = l.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert!(fields[..8].iter().all(|f| !f.contains(['e', 'E'])), "{l}");
        assert!(l.ends_with(",converged"));
    }
}

#[test]
fn single_eps_sweep_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    let csv = dir.path().join("s.csv");
    let base = ["--problem", "stiefel", "--seed", "7", "--beta", "10", "--eps2", "1e-3"];
    let mut solve = vec!["solve", "--eps1", "1e-3"];
    solve.extend(base);
    assert_eq!(code(&fletcher(&solve, Some(&trace))), 0);
    let mut sweep = vec!["sweep", "--second-order", "--eps", "1e-3"];
    sweep.extend(base);
    assert_eq!(code(&fletcher(&sweep, Some(&csv))), 0);

    let v: Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    let steps = v["records"].as_array().unwrap().len() - 1;
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(1).unwrap().parse::<usize>().unwrap(), steps);
}

#[test]
fn spec_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("run.json");
    std::fs::write(
        &spec,
        r#"{"problem_id":"rayleigh","problem_params":{"n":6,"seed":2},"solver":{"eps1":1e-6,"beta":10}}"#,
    )
    .unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let spec_s = spec.to_str().unwrap();
    assert_eq!(code(&fletcher(&["solve", "--spec", spec_s], Some(&a))), 0);
    assert_eq!(code(&fletcher(&["solve", "--spec", spec_s, "--eps1", "1e-3"], Some(&b))), 0);
    let va: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    let vb: Value = serde_json::from_slice(&std::fs::read(&b).unwrap()).unwrap();
    assert_eq!(va["final_x"].as_array().unwrap().len(), 6);
    assert_eq!(va["config"]["eps1"], 1e-6);
    assert_eq!(vb["config"]["eps1"], 1e-3);
    assert_eq!(vb["config"]["beta"], 10.0);
}

#[test]
fn matrix_input_for_rayleigh() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("a.csv");
    std::fs::write(&m, "2,1,0\n1,3,0\n0,0,-1\n").unwrap();
    let o = fletcher(&["solve", "--problem", "rayleigh", "--matrix", m.to_str().unwrap(), "--beta", "10"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let x: Vec<f64> = v["final_x"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
    assert!(x[2].abs() > 1.0 - 1e-6, "{x:?}");
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let run = |env: Option<&str>, seed: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fletcher"));
        cmd.args(["solve", "--problem", "stiefel", "--beta", "10", "--seed", seed]);
        match env {
            Some(v) => cmd.env("FLETCHER_SEED", v),
            None => cmd.env_remove("FLETCHER_SEED"),
        };
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("4"), "9"), run(None, "4"));
    assert_ne!(run(None, "9"), run(None, "4"));
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fletcher"));
    let o = cmd.args(["solve"]).env("FLETCHER_SEED", "abc").output().unwrap();
    assert_eq!(o.status.code(), Some(64));
}
