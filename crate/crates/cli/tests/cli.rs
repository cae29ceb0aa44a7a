use std::path::Path;
use std::process::{Command, Output};

const SPEC: &str = r#"
problem.kind = "quadratic"
problem.M = 4
problem.n = 3
problem.d = 2
problem.mu = 0.2
problem.L = 1.0
algo = "nastya"
cstep = 0.005
sstep = 0.0625
cohort = 2
T = 10
ensemble = 3
bounds = ["sc"]
output = "q"
"#;

fn nastya(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nastya")).args(args).output().unwrap()
}

fn write_spec(dir: &Path, text: &str) -> String {
    let path = dir.join("spec.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_traces_summary_and_meta() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SPEC);
    let out = tmp.path().join("out");
    let res = nastya(&["run", &spec, "--out-dir", out.to_str().unwrap(), "--seed", "40"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["q_seed40.csv", "q_seed41.csv", "q_seed42.csv", "q_summary.csv", "q_meta.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let summary = std::fs::read_to_string(out.join("q_summary.csv")).unwrap();
    assert!(summary.starts_with("round,mean_f,se_f,mean_grad_norm_sq,se_grad_norm_sq,mean_dist_sq,se_dist_sq,bound_sc\n"));
    assert_eq!(summary.lines().count(), 12);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("q_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["diverged"], 0);
    assert_eq!(meta["bounds"][0]["satisfied"], true);
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &format!("{SPEC}cohort_size = 3\n"));
    let res = nastya(&["run", &spec, "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cohort_size"));

    let spec = write_spec(tmp.path(), &SPEC.replace("cohort = 2", "cohort = 9"));
    assert_eq!(nastya(&["run", &spec]).status.code(), Some(2));
    assert_eq!(nastya(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(nastya(&["stats", "/definitely/missing.toml"]).status.code(), Some(2));
}

#[test]
fn sweep_reports_bad_points_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SPEC);
    let out = tmp.path().join("sw");
    let res = nastya(&["sweep", &spec, "--axis", "cohort", "--values", "1,7,4", "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("cohort = 7: skipped"), "{stdout}");
    let combined = std::fs::read_to_string(out.join("q_sweep.csv")).unwrap();
    assert!(combined.starts_with("cohort,round,"));
    assert_eq!(combined.lines().count(), 1 + 2 * 11);
}

#[test]
fn stats_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SPEC);
    let res = nastya(&["stats", &spec]);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(v["stats"]["sigma_star_sq"].as_f64().unwrap() > 0.0);
    assert!((v["participation_factor"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn verify_fast_suite_passes() {
    let res = nastya(&["verify", "lemma1"]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("PASS"));
}
