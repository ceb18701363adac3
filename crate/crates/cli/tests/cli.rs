use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn golden(mode: &str) -> Value {
    json!({
        "mode": mode,
        "params": {"d": 1, "D": 10, "alpha": 1, "beta": 2, "mu": 1, "nu": 1, "s0": 1},
        "grid": {"lx": 20, "ly": 5, "h": 0.5}
    })
}

fn roadfield(dir: &Path, cmd: &str, config: &Value, run_id: &str, envs: &[(&str, &str)]) -> Output {
    let path = dir.join(format!("{run_id}.input.json"));
    fs::write(&path, config.to_string()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_roadfield"))
        .args([cmd, "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--run-id", run_id])
        .envs(envs.iter().copied())
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Value of `quantity = value` in a summary.
fn field(summary: &str, quantity: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{quantity} = ")))
        .unwrap_or_else(|| panic!("no `{quantity}` in\n{summary}"))
        .parse()
        .unwrap()
}

/// `quantity -> results` in input order from a sweep table.
fn sweep_column(dir: &Path, run_id: &str, quantity: &str) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("out").join(format!("{run_id}_sweep.csv"))).unwrap();
    text.lines()
        .skip(1)
        .filter_map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[3] == quantity).then(|| cols[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn speed_reports_the_dichotomy() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["params"]["D"] = json!(1.5);
    let s = ok(&roadfield(dir.path(), "speed", &c, "slow", &[]));
    assert_eq!(field(&s, "c_SIR^T/c_SIR"), 1.0);
    let s = ok(&roadfield(dir.path(), "speed", &golden("roadfield_uv"), "fast", &[]));
    assert!(field(&s, "c_SIR^T/c_SIR") > 1.0);
    assert!((field(&s, "c_SIR^T") / 3.206_356_682_932 - 1.0).abs() < 1e-8);
    for q in ["c_SIR", "a_*", "v_*", "I_tot limit", "lambda", "rho", "w_SIR", "w_bar"] {
        field(&s, q);
    }
    c["params"]["beta"] = json!(0.8);
    let s = ok(&roadfield(dir.path(), "speed", &c, "sub", &[]));
    assert!(s.contains("no spreading"));
    assert!(dir.path().join("out/sub_speed.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["params"]["d"] = json!(-1.0);
    let out = roadfield(dir.path(), "speed", &c, "neg", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.d"));

    let mut c = golden("roadfield_uv");
    c["grid"]["hx"] = json!(1.0);
    let out = roadfield(dir.path(), "speed", &c, "unknown", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hx"));

    let mut c = golden("roadfield_uv");
    c["sources"] = json!({"i0": {"shape": "disk-indicator", "center": [15, 1], "radius": 1, "amplitude": 1}});
    let out = roadfield(dir.path(), "simulate", &c, "edge", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sources.i0"));

    let out = Command::new(env!("CARGO_BIN_EXE_roadfield")).args(["speed", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_ids_are_not_reused() {
    let dir = TempDir::new().unwrap();
    ok(&roadfield(dir.path(), "speed", &golden("roadfield_uv"), "once", &[]));
    let again = roadfield(dir.path(), "speed", &golden("roadfield_uv"), "once", &[]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn normalised_echo_round_trips() {
    let dir = TempDir::new().unwrap();
    ok(&roadfield(dir.path(), "speed", &golden("roadfield_uv"), "echo", &[]));
    let echo: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/echo.config.json")).unwrap()).unwrap();
    assert_eq!(echo["grid"]["cfl"], json!(0.4));
    assert_eq!(echo["steady"]["tol"], json!(1e-8));
    ok(&roadfield(dir.path(), "speed", &echo, "echo2", &[]));
    let again: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/echo2.config.json")).unwrap()).unwrap();
    assert_eq!(echo["params"], again["params"]);
    assert_eq!(echo["grid"], again["grid"]);
    assert_eq!(echo["sources"], again["sources"]);
}

#[test]
fn zero_horizon_simulation() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["time"] = json!({"t_end": 0, "snapshot_dt": 1});
    let s = ok(&roadfield(dir.path(), "simulate", &c, "zero", &[]));
    assert_eq!(field(&s, "snapshots"), 1.0);
    let out = dir.path().join("out");
    assert!(out.join("zero_t0.000000.csv").exists());
    assert!(out.join("zero_road_t0.000000.csv").exists());
    assert_eq!(fs::read_to_string(out.join("zero_front_trace.csv")).unwrap(), "t,x_front\n");
}

#[test]
fn scalar_simulation_speed() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("scalar_v");
    c["grid"] = json!({"lx": 150, "ly": 1, "h": 0.25});
    c["sources"] = json!({"i0": {"shape": "strip", "center": [0, 0], "radius": 1, "amplitude": 1}});
    c["time"] = json!({"t_end": 60, "snapshot_dt": 60});
    let s = ok(&roadfield(dir.path(), "simulate", &c, "scalar", &[]));
    let v = field(&s, "measured front speed");
    assert!((v / 2.0 - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn road_simulation_speed_and_determinism() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["grid"] = json!({"lx": 200, "ly": 5, "h": 0.5});
    c["time"] = json!({"t_end": 40, "snapshot_dt": 20});
    let s = ok(&roadfield(dir.path(), "simulate", &c, "a", &[]));
    let v = field(&s, "measured front speed");
    let target = field(&s, "predicted speed c_SIR^T");
    assert!((v / target - 1.0).abs() < 0.05, "{v} vs {target}");
    ok(&roadfield(dir.path(), "simulate", &c, "b", &[]));
    let out = dir.path().join("out");
    for name in ["t20.000000.csv", "road_t40.000000.csv", "front_trace.csv", "tau_star.csv"] {
        let a = fs::read(out.join(format!("a_{name}"))).unwrap();
        let b = fs::read(out.join(format!("b_{name}"))).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn blow_up_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("sirt_direct");
    c["params"]["beta"] = json!(1e300);
    c["time"] = json!({"t_end": 1, "snapshot_dt": 1});
    let out = roadfield(dir.path(), "simulate", &c, "boom", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn steady_non_convergence_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["steady"] = json!({"tol": 1e-8, "t_max": 0.5});
    let out = roadfield(dir.path(), "steady", &c, "short", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged = false"));
    let out = roadfield(dir.path(), "steady", &golden("sir_direct"), "direct", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn steady_reports_plateau() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["grid"] = json!({"lx": 60, "ly": 8, "h": 0.5});
    let s = ok(&roadfield(dir.path(), "steady", &c, "st", &[]));
    assert!(field(&s, "far-field relative error vs v_*") < 0.02);
    let rate = field(&s, "decay rate fit (a_* along y = 0)");
    let a = field(&s, "decay rate reference");
    assert!((rate / a - 1.0).abs() < 0.1);
    assert!(dir.path().join("out/st_decay_fit.csv").exists());
}

#[test]
fn compare_finds_both_regions() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["grid"] = json!({"lx": 60, "ly": 8, "h": 0.5});
    c["sources"] = json!({"i0": {"shape": "disk-indicator", "center": [0, 0], "radius": 1, "amplitude": 1}});
    let s = ok(&roadfield(dir.path(), "compare", &c, "cmp", &[]));
    assert!(field(&s, "E+ area (road raises I_tot)") > 0.0);
    assert!(field(&s, "E- area (road lowers I_tot)") > 0.0);
    let limit = field(&s, "I_tot limit S0(1 - exp(-beta v_*))");
    for name in ["road", "no road"] {
        let far = field(&s, &format!("I_tot far field ({name})"));
        assert!((far / limit - 1.0).abs() < 0.02);
    }
    assert!(field(&s, "integral balance, bulk residual").abs() < 1e-2);
    let regions = fs::read_to_string(dir.path().join("out/cmp_regions.csv")).unwrap();
    assert!(regions.lines().any(|l| l.ends_with(",1")) && regions.lines().any(|l| l.ends_with(",-1")));
}

#[test]
fn sweeps() {
    let dir = TempDir::new().unwrap();
    let mut c = golden("roadfield_uv");
    c["sweep"] = json!({"axis": "params.D", "values": [1, 2, 4, 8]});
    ok(&roadfield(dir.path(), "sweep", &c, "d", &[]));
    let ct = sweep_column(dir.path(), "d", "c_SIR^T");
    let cs = sweep_column(dir.path(), "d", "c_SIR");
    assert!(ct.windows(2).all(|w| w[1] >= w[0]));
    assert!((ct[0] - cs[0]).abs() < 1e-6 * cs[0] && (ct[1] - cs[1]).abs() < 1e-6 * cs[1]);
    assert!(ct[2] > cs[2]);

    c["sweep"] = json!({"axis": "lambda", "values": [0.1, 0.5, 1, 2, 5]});
    ok(&roadfield(dir.path(), "sweep", &c, "lam", &[]));
    let w = sweep_column(dir.path(), "lam", "w_bar");
    assert_eq!(w.len(), 5);
    assert!(w.windows(2).all(|p| p[1] <= p[0]), "{w:?}");

    c["params"]["D"] = json!(100);
    c["sweep"] = json!({"axis": "R0", "values": [2, 1.5, 1.1]});
    ok(&roadfield(dir.path(), "sweep", &c, "r0", &[]));
    let ratio = sweep_column(dir.path(), "r0", "c_SIR^T/c_SIR");
    let w_bar = sweep_column(dir.path(), "r0", "w_bar");
    let lambda = sweep_column(dir.path(), "r0", "lambda");
    for k in 0..3 {
        assert!((ratio[k] / (10.0 * w_bar[k]) - 1.0).abs() < 1e-6, "{ratio:?} {w_bar:?}");
    }
    // With fixed exchange rates lambda grows as R0 -> 1 and the gain shrinks,
    // but the road still carries the epidemic several times faster.
    assert!(lambda[2] > lambda[1] && lambda[1] > lambda[0]);
    assert!(ratio[2] < ratio[1] && ratio[1] < ratio[0], "{ratio:?}");
    assert!(ratio.iter().all(|&r| r > 3.5), "{ratio:?}");

    // Weak exchange keeps lambda small: the gain stays near sqrt(D/d) / 2 down to R0 = 1.1.
    c["params"]["mu"] = json!(0.1);
    c["params"]["nu"] = json!(10);
    ok(&roadfield(dir.path(), "sweep", &c, "r0weak", &[]));
    let weak = sweep_column(dir.path(), "r0weak", "c_SIR^T/c_SIR");
    assert!(weak.iter().all(|&r| (r / 5.0 - 1.0).abs() < 0.01), "{weak:?}");
    c["params"]["mu"] = json!(1);
    c["params"]["nu"] = json!(1);

    // Row order and content do not depend on the worker count.
    ok(&roadfield(dir.path(), "sweep", &c, "one", &[("ROADFIELD_THREADS", "1")]));
    ok(&roadfield(dir.path(), "sweep", &c, "four", &[("ROADFIELD_THREADS", "4")]));
    let out = dir.path().join("out");
    assert_eq!(fs::read(out.join("one_sweep.csv")).unwrap(), fs::read(out.join("four_sweep.csv")).unwrap());

    c["sweep"] = json!({"axis": "params.D", "values": [1, -2]});
    let bad = roadfield(dir.path(), "sweep", &c, "bad", &[]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sweep.values[1]"));
}

#[test]
fn omega_table() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_roadfield"))
        .args(["omega", "--run-id", "om", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    ok(&out);
    let text = fs::read_to_string(dir.path().join("om_omega.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 7);
    assert!((rows[0][1] - 0.5).abs() < 1e-6);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    assert!(rows.iter().all(|r| r[3].abs() < 0.02));
}
