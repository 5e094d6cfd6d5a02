use std::process::{Command, Output};

fn rh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rh"))
        .args(args)
        .env_remove("RH_DEFAULT_HORIZON")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn solve_separated_solution() {
    let o = rh(&["solve", "--a", "1", "--gamma", "0.25", "--k", "1", "--z0", "1.5", "--t-end", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("t,z\n"));
    let mut seen = false;
    for line in text.lines().skip(1) {
        let (t, z) = line.split_once(',').unwrap();
        let (t, z): (f64, f64) = (t.parse().unwrap(), z.parse().unwrap());
        assert!((z - (0.5 + 1.0 / (t + 1.0))).abs() < 1e-6, "{line}");
        if t == 1.0 {
            seen = true;
            assert!((z - 1.0).abs() < 1e-6);
        }
    }
    assert!(seen);
}

#[test]
fn csv_keeps_seventeen_digits() {
    let o = rh(&["solve", "--a", "1", "--z0", "0.5", "--t-end", "1", "--samples", "3"]);
    let row = stdout(&o).lines().nth(2).unwrap().to_string();
    let (t, z) = row.split_once(',').unwrap();
    assert_eq!(t.parse::<f64>().unwrap(), 1.0 / 3.0);
    assert_eq!(z.split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{row}");
}

#[test]
fn solve_blow_down() {
    let o = rh(&["solve", "--a", "1", "--gamma", "0.25", "--k", "2", "--z0", "0.5", "--t-end", "50"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    let t: f64 = err.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((t - std::f64::consts::PI).abs() < 1e-3, "{err}");
}

#[test]
fn usage_errors() {
    let o = rh(&["solve", "--a", "1 +", "--gamma", "0.25", "--k", "1", "--z0", "1", "--t-end", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse"), "{}", stderr(&o));
    assert_eq!(rh(&["solve", "--a", "1", "--z0", "1", "--t-end", "0"]).status.code(), Some(2));
    assert_eq!(rh(&["solve", "--a", "1"]).status.code(), Some(2));
    assert_eq!(rh(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rh(&["periodic", "--a", "1", "--gamma", "0.25", "--period", "-1"]).status.code(), Some(2));
}

#[test]
fn critical_k_examples() {
    for (a, g) in [("1", "0.25"), ("2", "1")] {
        let o = rh(&["critical-k", "--a", a, "--gamma", g, "--k-lo", "0.1", "--k-hi", "4"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let k = json(&o)["k_bar"].as_f64().unwrap();
        assert!((0.98..=1.02).contains(&k), "{k}");
    }
    let o = rh(&["critical-k", "--k-lo", "3", "--k-hi", "4", "--a", "1", "--gamma", "0.25"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn horizon_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_rh"))
        .args(["solve", "--a", "1", "--z0", "1", "--samples", "1"])
        .env("RH_DEFAULT_HORIZON", "7")
        .output()
        .unwrap();
    assert!(stdout(&o).lines().last().unwrap().starts_with("7.0000000000000000e0,"));
    let o = rh(&["solve", "--a", "1", "--z0", "1", "--samples", "1"]);
    assert!(stdout(&o).lines().last().unwrap().starts_with("2.0000000000000000e2,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# blow-down unless overridden\na = 1\ngamma = 0.25\nk = 2\nz0 = 0.5\nt_end = 10\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(rh(&["solve", "--config", cfg]).status.code(), Some(3));
    let out = dir.path().join("traj.csv");
    let o = rh(&["solve", "--config", cfg, "--k", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t,z\n") && text.lines().count() == 1002);
}

#[test]
fn reproduce_all_rows() {
    let o = rh(&["reproduce-paper"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| l.ends_with("pass")), "{text}");
}

#[test]
fn reproduce_single_row_and_floor() {
    let o = rh(&["reproduce-paper", "--rows", "I", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = json(&o);
    assert_eq!(rows.as_array().unwrap().len(), 1);
    let i: f64 = rows[0]["computed"].as_str().unwrap().parse().unwrap();
    assert!((i - 1.666667).abs() < 1e-6);

    let o = rh(&["reproduce-paper", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(5));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("kbar")).all(|l| l.ends_with("FAIL")), "{text}");
    assert!(stderr(&o).contains("kbar"));

    assert_eq!(rh(&["reproduce-paper", "--rows", "nope"]).status.code(), Some(2));
}

#[test]
fn periodic_outputs() {
    let o = rh(&["periodic", "--a", "1", "--gamma", "1/4", "--period", "1", "--k", "0.75"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let z: Vec<f64> = v["solutions"].as_array().unwrap().iter().map(|s| s["z0"].as_f64().unwrap()).collect();
    assert!((z[0] - 0.25).abs() < 1e-8 && (z[1] - 0.75).abs() < 1e-8);

    let o = rh(&["periodic", "--a", "1", "--gamma", "1/4", "--period", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("k,lower,upper\n"));
    assert!(text.lines().last().unwrap().ends_with(",,"));
    assert!(stderr(&o).contains("turning_point"));
}

#[test]
fn classification_commands() {
    let o = rh(&["classify", "--a", "1", "--z0", "-1"]);
    assert_eq!(o.status.code(), Some(0));
    let t = json(&o)["kind"]["t"].as_f64().unwrap();
    assert!((t - std::f64::consts::LN_2).abs() < 1e-6);

    let o = rh(&["classify", "--a", "1", "--gamma", "1/4 - 2/(t+5)^2", "--k", "1", "--p", "1/2 + 2/(t+5)"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&o)["case"], "Case2ConvergentWithP1");

    let o = rh(&["separation-test", "--a", "1", "--p", "1/2", "--gamma", "1/4", "--k", "1"]);
    assert_eq!(json(&o)["kind"], "Divergent");
    // int (t+1)^-2 = 1
    let o = rh(&["separation-test", "--a", "1", "--p", "1/2 + 1/(t+1)"]);
    let v = json(&o);
    assert_eq!(v["kind"], "Convergent");
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let o = rh(&["special-solution", "--a", "-1", "--t-end", "4", "--samples", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().skip(1).all(|l| (l.split(',').nth(1).unwrap().parse::<f64>().unwrap() + 1.0).abs() < 1e-9));
}
