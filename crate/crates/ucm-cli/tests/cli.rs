use assert_cmd::Command;
use predicates::prelude::*;

fn ucm() -> Command {
    Command::cargo_bin("ucm").unwrap()
}

fn write_cfg(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const GENTLE: &str = "\
model.a = 1.0
model.gamma = 1.4
model.lambda = 1.0
model.mu0 = 1.0
profile.l = 0.05
profile.r_support = 8.0
profile.rho0_amplitude = 0.02
profile.delta_a = 0.0
solver.n_cells = 1024
solver.t_end = 0.2
solver.output_interval = 0.01
solver.sigma_est = 8.0
";

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "solver.bogus = 1\n");
    ucm()
        .args(["make-ic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("bogus"));
}

#[test]
fn construction_failure_exits_3() {
    // grid far too coarse to resolve the mollifier
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        &GENTLE.replace("solver.n_cells = 1024", "solver.n_cells = 16"),
    );
    ucm()
        .args(["make-ic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(3);
}

#[test]
fn auto_profile_needs_fixed_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "profile.l = auto\nprofile.r_support = auto\nsolver.sigma_est = auto\n",
    );
    ucm()
        .args(["make-ic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(3)
        .stderr(predicate::str::contains("sigma_est"));
}

#[test]
fn full_pipeline_and_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), GENTLE);
    let out = dir.path();
    let ic = out.join("ic.json");

    ucm()
        .args(["make-ic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .assert()
        .success();
    assert!(ic.exists());

    ucm()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(&ic)
        .arg("--out")
        .arg(out)
        .assert()
        .success()
        .stdout(predicate::str::contains("completed"));
    let series = std::fs::read(out.join("series.csv")).unwrap();
    let header = String::from_utf8_lossy(&series);
    assert!(header.starts_with(
        "t,m,W,E,int_trT,cum_int_trT,support_radius,sup_grad_u,energy_residual,\
         jensen_margin,trT_slack,W_ineq_residual,V_lower"
    ));

    // byte-identical on a repeat run
    let out2 = dir.path().join("again");
    ucm()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(&ic)
        .arg("--out")
        .arg(&out2)
        .assert()
        .success();
    assert_eq!(series, std::fs::read(out2.join("series.csv")).unwrap());
    assert_eq!(
        std::fs::read(out.join("outcome.json")).unwrap(),
        std::fs::read(out2.join("outcome.json")).unwrap()
    );

    ucm()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(&ic)
        .arg("--out")
        .arg(out)
        .assert()
        .success()
        .stdout(predicate::str::contains("all checks passed"));

    ucm()
        .args(["bound", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(&ic)
        .arg("--out")
        .arg(out)
        .assert()
        .success();
    let bound: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("bound.json")).unwrap()).unwrap();
    assert!(bound.get("u0").is_some());
    assert_eq!(bound["criterion_satisfied"], serde_json::Value::Bool(false));

    ucm()
        .args(["report", "--out"])
        .arg(out)
        .assert()
        .success();
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    for key in ["ic", "outcome", "verify", "bound", "series_rows"] {
        assert!(report.get(key).is_some(), "report is missing {key}");
    }
}

#[test]
fn report_with_no_artifacts_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    ucm()
        .args(["report", "--out"])
        .arg(dir.path())
        .assert()
        .code(2);
}

#[test]
fn thread_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), GENTLE);
    ucm()
        .env("UCM_THREADS", "zero")
        .args(["make-ic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("UCM_THREADS"));
    ucm()
        .env("UCM_THREADS", "2")
        .args(["make-ic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success();
}
