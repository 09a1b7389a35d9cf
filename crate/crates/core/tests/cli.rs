use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mvsens::report::RunReport;

fn mvsens(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvsens"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn flags_only_run_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvsens(
        &[
            "run",
            "--model",
            "identity_2",
            "--subset",
            "1",
            "--n",
            "5000",
            "--seed",
            "3",
            "--reproducible",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.subsets.len(), 1);
    let rec = &report.subsets[0];
    assert_eq!(rec.subset, vec![1]);
    assert_eq!(rec.oracle.as_ref().unwrap().s_u, 0.5);
    assert!((rec.estimate - 0.5).abs() < 0.05);
}

#[test]
fn csv_report_has_one_row_per_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvsens(
        &[
            "run", "--model", "sum_prod", "--subset", "1", "--subset", "2", "--subset", "1,2",
            "--n", "1000", "--format", "csv", "--ci", "delta",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("subset,estimate,oracle"));
    assert!(lines[3].starts_with("\"{1,2}\",1.0,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "schema = 1\nn = 500\nseed = 1\nsubsets = [[1]]\n[model]\nname = \"identity_2\"\n",
    )
    .unwrap();
    let out = mvsens(
        &["run", "--config", "c.toml", "--n", "800", "--reproducible"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.n, 800);
    assert_eq!(report.seed, 1);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str)] = &[
        ("schema = 2\nn = 10\nsubsets = [[1]]\n[model]\nname = \"identity_2\"\n", "schema"),
        ("schema = 1\nn = 1\nsubsets = [[1]]\n[model]\nname = \"identity_2\"\n", "n"),
        ("schema = 1\nn = 10\nsubsets = [[3]]\n[model]\nname = \"identity_2\"\n", "subsets[0]"),
        ("schema = 1\nn = 10\nsubsets = [[1]]\n[model]\nname = \"nope\"\n", "model.name"),
        ("schema = 1\nn = 10\nsubsets = [[1]]\nmatrix = [[1.0]]\n[model]\nname = \"identity_2\"\n", "matrix"),
        (
            "schema = 1\nn = 10\nsubsets = [[1]]\n[model]\nname = \"identity_2\"\n[space]\nmarginals = [{ kind = \"uniform\", a = 1.0, b = 0.0 }, { kind = \"normal\", mean = 0.0, sd = 1.0 }]\n",
            "space.marginals[0]",
        ),
    ];
    for (text, field) in cases {
        fs::write(dir.path().join("bad.toml"), text).unwrap();
        let out = mvsens(&["run", "--config", "bad.toml"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}: {}", stderr(&out));
        assert!(
            stderr(&out).contains(field),
            "expected `{field}` in: {}",
            stderr(&out)
        );
    }
}

#[test]
fn degenerate_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvsens(
        &[
            "run",
            "--model",
            "constant",
            "--param",
            "inputs=2",
            "--param",
            "values=1,2",
            "--subset",
            "1",
            "--n",
            "100",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("positive definite"));
}

#[test]
fn missing_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvsens(&["run", "--config", "absent.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn weighting_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), "# diag(1, 3)\n1 0\n0 3\n").unwrap();
    let out = mvsens(
        &[
            "run",
            "--model",
            "identity_2",
            "--subset",
            "1",
            "--n",
            "2000",
            "--matrix",
            "m.txt",
            "--reproducible",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let general = report.subsets[0]
        .oracle
        .as_ref()
        .unwrap()
        .s_u_general
        .unwrap();
    assert!((general - 0.25).abs() < 1e-15);
}

/// Design rows are evaluated outside the tool, tabulated, and fed back.
#[test]
fn external_model_round_trip_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--subset", "2", "--n", "300", "--seed", "21"];
    let mut args = vec!["design", "--model", "sum_prod", "--output", "design.csv"];
    args.extend(common);
    let out = mvsens(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));

    let design = fs::read_to_string(dir.path().join("design.csv")).unwrap();
    let mut lines = design.lines();
    assert_eq!(lines.next(), Some("x1,x2"));
    let mut table = String::from("x1,x2,y1,y2\n");
    let mut rows = 0;
    for line in lines {
        let x: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let y = [x[0] + x[1], x[0] * x[1]];
        table.push_str(&format!("{line},{:?},{:?}\n", y[0], y[1]));
        rows += 1;
    }
    assert_eq!(rows, 600);
    fs::write(dir.path().join("model.csv"), table).unwrap();

    fs::write(
        dir.path().join("ext.toml"),
        "schema = 1\n[space]\nmarginals = [{ kind = \"uniform\", a = 0.0, b = 1.0 }, { kind = \"uniform\", a = 0.0, b = 1.0 }]\n",
    )
    .unwrap();
    let mut args = vec![
        "run",
        "--config",
        "ext.toml",
        "--external",
        "model.csv",
        "--reproducible",
    ];
    args.extend(common);
    let out = mvsens(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let external = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(external.subsets[0].oracle.is_none());

    let mut args = vec!["run", "--model", "sum_prod", "--reproducible"];
    args.extend(common);
    let out = mvsens(&args, dir.path());
    let builtin = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(external.subsets[0].estimate, builtin.subsets[0].estimate);
}

#[test]
fn estimate_from_sample_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("y_1,yu_1\n");
    for i in 0..50 {
        let v = (i as f64 * 0.37).sin();
        text.push_str(&format!("{v},{}\n", v + 0.1 * (i as f64).cos()));
    }
    fs::write(dir.path().join("s.csv"), text).unwrap();
    let out = mvsens(
        &["estimate", "--samples", "s.csv", "--ci", "bootstrap:300"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 50);
    let est = v["estimate"].as_f64().unwrap();
    assert!(est > 0.8 && est < 1.0);
    assert!(v["interval"]["ci_low"].as_f64().unwrap() <= est);

    fs::write(dir.path().join("bad.csv"), "y_1,yu_1\n1.0,nan\n").unwrap();
    let out = mvsens(&["estimate", "--samples", "bad.csv"], dir.path());
    assert!(!out.status.success());
}
