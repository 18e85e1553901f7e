use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn evplan(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evplan"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn four_stations(extra: &[&str], out: &Path) -> Output {
    let conf = fixture("four_stations/four_stations.conf");
    let mut args = vec!["plan", "--config", conf.to_str().unwrap()];
    args.extend_from_slice(extra);
    evplan(&args, out)
}

#[test]
fn plan_writes_stations_and_flows() {
    let out = tempfile::tempdir().unwrap();
    let run = four_stations(&[], out.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("objective 4"));
    let stations = std::fs::read_to_string(out.path().join("stations.csv")).unwrap();
    assert!(stations.starts_with("candidate_id,cell_row,cell_col,open,inflow_per_week,dc_ratio,delay\n"));
    assert_eq!(stations.lines().filter(|l| l.split(',').nth(3) == Some("1")).count(), 4);
    let flows = std::fs::read_to_string(out.path().join("flows.csv")).unwrap();
    let from_origin: f64 = flows
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("o"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert_eq!(from_origin, 80.0);
    assert!(!out.path().join("curves.csv").exists());
}

#[test]
fn flags_override_the_config_file() {
    let out = tempfile::tempdir().unwrap();
    let run = four_stations(&["--capacity", "none"], out.path());
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stdout).contains("objective 2"));
    let run = four_stations(&["--range_km", "100", "--capacity", "none"], out.path());
    assert!(run.status.success(), "underscore alias accepted");
}

#[test]
fn infeasible_runs_exit_with_two() {
    let out = tempfile::tempdir().unwrap();
    let budget = four_stations(&["--budget", "1"], out.path());
    assert_eq!(budget.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&budget.stderr);
    assert!(
        stderr.contains("budget of 1") && stderr.contains("2 stations"),
        "{stderr}"
    );
    let capacity = four_stations(&["--capacity", "30"], out.path());
    assert_eq!(capacity.status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_three() {
    let out = tempfile::tempdir().unwrap();
    let missing = evplan(&["plan", "--config", "/definitely/not/here.conf"], out.path());
    assert_eq!(missing.status.code(), Some(3));
    let bad_value = four_stations(&["--range-km", "far"], out.path());
    assert_eq!(bad_value.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("typo.conf");
    std::fs::write(&conf, "range_kms = 100\n").unwrap();
    let typo = evplan(&["plan", "--config", conf.to_str().unwrap()], out.path());
    assert_eq!(typo.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&typo.stderr).contains(":1:"));
}

#[test]
fn evaluate_replays_a_written_plan() {
    let out = tempfile::tempdir().unwrap();
    assert!(four_stations(&[], out.path()).status.success());
    let plan = out.path().join("stations.csv");
    let again = tempfile::tempdir().unwrap();
    let conf = fixture("four_stations/four_stations.conf");
    let run = evplan(
        &[
            "evaluate",
            "--config",
            conf.to_str().unwrap(),
            "--plan-csv",
            plan.to_str().unwrap(),
        ],
        again.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("objective 4"));

    // closing every station cannot carry the flow
    let closed = std::fs::read_to_string(&plan).unwrap().replace(",1,", ",0,");
    let closed_path = again.path().join("closed.csv");
    std::fs::write(&closed_path, closed).unwrap();
    let run = evplan(
        &[
            "evaluate",
            "--config",
            conf.to_str().unwrap(),
            "--plan-csv",
            closed_path.to_str().unwrap(),
        ],
        again.path(),
    );
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn calibrate_prints_fitted_model() {
    let out = tempfile::tempdir().unwrap();
    let conf = fixture("demo/demo.conf");
    let run = evplan(&["calibrate", "--config", conf.to_str().unwrap()], out.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let q = json["bass"]["q"].as_f64().unwrap();
    assert!((q - 0.3).abs() < 0.03, "{q}");
    assert!(json["rho"].as_f64().unwrap() < 0.0);

    let none = evplan(
        &[
            "calibrate",
            "--config",
            fixture("four_stations/four_stations.conf").to_str().unwrap(),
        ],
        out.path(),
    );
    assert_eq!(none.status.code(), Some(3));
}

#[test]
fn curves_cover_the_requested_horizon() {
    let out = tempfile::tempdir().unwrap();
    let conf = fixture("demo/demo.conf");
    let run = evplan(
        &["curves", "--config", conf.to_str().unwrap(), "--sweep-rho", "-2,-4"],
        out.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let curves = std::fs::read_to_string(out.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 39);
    assert!(curves.lines().nth(1).unwrap().starts_with("2012,"));
    for name in ["sweep_p.csv", "sweep_q.csv", "sweep_rho.csv"] {
        assert!(out.path().join(name).exists(), "{name}");
    }
}
