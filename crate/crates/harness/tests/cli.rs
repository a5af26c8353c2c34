use std::process::Command;

fn fracvort() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracvort"))
}

#[test]
fn steiner_reports_lambda_and_matching() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.txt");
    std::fs::write(&pts, "0 0\n1 0\n0 3\n1 3\n").unwrap();
    let out = fracvort().args(["steiner", "--m", "2", "--points"]).arg(&pts).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lambda,2.0"), "{text}");
    assert!(text.contains("components,2"));
    assert!(text.contains("matching,2.0"));
}

#[test]
fn bad_points_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.txt");
    std::fs::write(&pts, "0 0\nnot a point\n").unwrap();
    let out = fracvort().args(["steiner", "--m", "2", "--points"]).arg(&pts).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn unknown_flag_exits_with_two() {
    let out = fracvort().args(["gamma", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[domain]\nshape = \"disk\"\nd = 1\n\n[model]\nm = 2\neps = [0.4]\n\n[grid]\nh_over_eps = 0.25\n\n\
         [run]\nkind = \"sharp\"\ninit = \"competitor\"\nmax_sweeps = 200\noutput = \"small\"\n",
    )
    .unwrap();
    let out = fracvort().env("FRACVORT_OUT", dir.path()).args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("small");
    for f in ["config.toml", "VERSION", "summary.csv", "trace_eps0_seed0.csv", "snapshot_eps0_seed0.txt"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let summary = std::fs::read_to_string(run.join("summary.csv")).unwrap();
    assert!(!summary.contains("seconds"));
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[domain]\nshape = \"disk\"\nd = 1\n\n[model]\nm = 1\neps = [0.4]\n\n[grid]\nh_over_eps = 0.25\n\n\
         [run]\nkind = \"sharp\"\ninit = \"competitor\"\noutput = \"x\"\n",
    )
    .unwrap();
    let out = fracvort().env("FRACVORT_OUT", dir.path()).args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.m"));
}

#[test]
fn verify_prints_one_line_per_criterion() {
    let out = fracvort().args(["verify", "--only", "1,7"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS  1 ")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("PASS  7 ")));
}

#[test]
fn reproduce_writes_forests() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracvort().env("FRACVORT_OUT", dir.path()).args(["reproduce", "--out", "r"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r/cases.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("r/six_point.forest").exists());
}
