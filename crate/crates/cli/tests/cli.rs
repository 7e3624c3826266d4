use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fenand(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fenand"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let o = fenand(&["list"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for id in [
        "fig2g", "fig2h", "fig2k", "fig2l", "fig3b", "fig3d", "fig3i", "fig4c", "figS2", "fig1f-tradeoff", "fig1i-dist",
    ] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(id)), "{id} missing");
    }
}

#[test]
fn run_writes_tables_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = fenand(&["run", "fig3i", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(line.lines().count(), 1);
    assert!(line.starts_with("fig3i ") && line.contains("max_abs_dvth_v=") && line.contains("elapsed="));
    let csv = fs::read_to_string(dir.path().join("res/fig3i.csv")).unwrap();
    assert!(csv.starts_with("state,v_pass_v,dwell_s,dvth_v\n"));
    for row in csv.lines().skip(1) {
        let d: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(d.abs() < 0.01);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/fig3i.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["experiment"], "fig3i");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "seed = 5\n[output]\ndir = \"from_file\"\nformat = \"csv\"\n").unwrap();
    let o = fenand(
        &["run", "fig2g", "--config", "c.toml", "--seed", "9", "--out", "from_flag", "--format", "json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from_flag/fig2g.json").exists());
    assert!(!dir.path().join("from_file").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("from_flag/fig2g.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["format"], "json");
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = fenand(&["run", "fig4c", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["fig4c.csv", "fig4c.meta.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn unknown_experiment_lists_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let o = fenand(&["run", "fig9z"], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("fig9z") && e.contains("fig1i-dist") && e.contains("figS2"), "{e}");
}

#[test]
fn schema_error_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[kinetics]\ntau0 = \"1 V\"\n").unwrap();
    let o = fenand(&["run", "fig2g", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kinetics.tau0"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_for_another_experiment_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "experiment = \"fig3d\"\n").unwrap();
    let o = fenand(&["run", "fig2g", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_echoes_defaults_for_an_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.toml"), "").unwrap();
    let o = fenand(&["validate", "--config", "empty.toml"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for section in ["[device]", "[channel]", "[kinetics]", "[array]", "[sweeps]", "[stacks.single_port]"] {
        assert!(text.contains(section), "{section} missing");
    }
    // the echo is itself a valid config
    fs::write(dir.path().join("echo.toml"), &text).unwrap();
    let again = fenand(&["validate", "--config", "echo.toml"], dir.path());
    assert_eq!(stdout(&again), text);
}

#[test]
fn validate_aggregates_diagnostics_as_json() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "seed = 1\n[kinetics]\ntau0 = \"-1 ns\"\n[device]\ngrains = 0\n",
    )
    .unwrap();
    let o = fenand(&["validate", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let diags: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    let paths: Vec<&str> = diags.iter().map(|d| d["path"].as_str().unwrap()).collect();
    assert!(paths.contains(&"kinetics.tau0") && paths.contains(&"device.grains"), "{paths:?}");
}

#[test]
fn calibrate_writes_a_reusable_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("off.toml"), "[kinetics]\nactivation_median = \"1.6e8 V/m\"\n").unwrap();
    let o = fenand(&["calibrate", "--config", "off.toml", "--out", "cal"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cal/calibration.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["converged"], true);
    assert!(report["report"]["moves"].as_u64().unwrap() > 0);
    let t = report["report"]["eval"]["flip_time"].as_f64().unwrap();
    assert!((33e-6..=300e-6).contains(&t), "{t}");

    // idempotent from its own output
    let o = fenand(&["calibrate", "--config", "cal/calibrated.toml", "--out", "cal2"], dir.path());
    assert!(o.status.success());
    let again: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cal2/calibration.json")).unwrap()).unwrap();
    assert_eq!(again["report"]["moves"], 0);
    assert_eq!(
        fs::read(dir.path().join("cal/calibrated.toml")).unwrap(),
        fs::read(dir.path().join("cal2/calibrated.toml")).unwrap()
    );

    // other experiments accept it
    let o = fenand(&["run", "fig3d", "--config", "cal/calibrated.toml", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("flip_ordering_ok=true"));
}

#[test]
fn unreachable_targets_report_residual() {
    let dir = tempfile::tempdir().unwrap();
    // far outside what the search can walk back from
    fs::write(dir.path().join("c.toml"), "[kinetics]\nactivation_median = \"1e12 V/m\"\n").unwrap();
    let o = fenand(&["calibrate", "--config", "c.toml", "--out", "cal"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("best residual") && e.contains("no flip at 2.3 V"), "{e}");
    // best attempt is still written for inspection
    assert!(dir.path().join("cal/calibration.json").exists());
}
