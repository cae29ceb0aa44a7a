use std::io::Write;

use nastya_core::harness::{load_spec, run_experiment, RunOptions};
use nastya_core::problems::{make_logreg_problem, parse_libsvm};
use nastya_core::Error;

const DATA: &str = "\
# toy binary data with labels 0/1
1 1:0.5 3:-1.25
0 2:1.0
1 1:-0.25 2:0.75 3:2
0 1:1.5

1 3:0.1
0 1:-1 2:-1 3:-1
";

#[test]
fn libsvm_file_parses_and_partitions() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(DATA.as_bytes()).unwrap();
    let data = parse_libsvm(file.path()).unwrap();
    assert_eq!(data.rows.len(), 6);
    assert_eq!(data.dim, 3);
    assert_eq!(data.rows[2].features, vec![(1, -0.25), (2, 0.75), (3, 2.0)]);
    let problem = make_logreg_problem(&data.rows, data.dim, 2, 0.1, 0).unwrap();
    assert_eq!(problem.num_clients(), 2);
    assert_eq!(problem.samples_per_client(), 3);
}

#[test]
fn libsvm_errors_carry_line_numbers() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(b"1 1:0.5\n1 2:x\n").unwrap();
    match parse_libsvm(file.path()).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 2),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn spec_with_relative_dataset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.svm"), DATA).unwrap();
    let spec_path = dir.path().join("toy.toml");
    std::fs::write(
        &spec_path,
        r#"
problem.kind = "logreg"
problem.libsvm_path = "toy.svm"
problem.M = 2
problem.lambda = 0.1
algo = "nastya"
cstep = 0.01
sstep = 0.03
T = 20
ensemble = 4
bounds = ["sc", "cvx"]
output = "toy"
"#,
    )
    .unwrap();
    let spec = load_spec(&spec_path).unwrap();
    let out_dir = dir.path().join("out");
    let out = run_experiment(&spec, &RunOptions { out_dir: Some(out_dir.clone()), threads: 2 }).unwrap();
    assert_eq!(out.files.len(), 4 + 2);
    let summary = std::fs::read_to_string(out_dir.join("toy_summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert!(header.ends_with("bound_sc,bound_cvx,mean_avg_iterate_gap,se_avg_iterate_gap"), "{header}");
    assert!(out.summary.checks.iter().all(|c| c.satisfied()));
}

#[test]
fn failed_write_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("q.toml");
    std::fs::write(
        &spec_path,
        r#"
problem.kind = "quadratic"
problem.M = 2
problem.n = 2
problem.d = 2
problem.mu = 0.5
problem.L = 1.0
algo = "nastya"
cstep = 0.01
sstep = 0.02
T = 5
ensemble = 3
output = "q"
"#,
    )
    .unwrap();
    let spec = load_spec(&spec_path).unwrap();
    let out_dir = dir.path().join("out");
    std::fs::create_dir(&out_dir).unwrap();
    // A directory squatting on the summary path makes that write fail.
    std::fs::create_dir(out_dir.join("q_summary.csv")).unwrap();
    assert!(run_experiment(&spec, &RunOptions { out_dir: Some(out_dir.clone()), threads: 1 }).is_err());
    let left: Vec<_> = std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("q_summary.csv")]);
}
