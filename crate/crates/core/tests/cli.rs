use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_logconvex");

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .env("LOGCONVEX_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HEAT: &str = "[run]\nexperiment = \"heat-logconvexity\"\n[problem]\nname = \"heat\"\n";
const BACKWARD: &str =
    "[run]\nexperiment = \"parabolic-backward\"\npaths = 3\n[problem]\nname = \"heat\"\n[noise]\nsigma = 0.4\n[grid]\nn = 32\n";

#[test]
fn empty_config_exits_2_naming_first_missing_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`run.experiment`"), "{}", stderr(&o));

    let o = run(dir.path(), "", &["--experiment", "parabolic-backward"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`problem.name`"), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "[run]\nexperiment = \"heat-logconvexity\"\n\n[grid]\nn = 64\nm = 3\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
}

#[test]
fn out_of_range_value_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{HEAT}[time]\ndt = -1.0\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("line 6") && stderr(&o).contains("time.dt"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn heat_defaults_write_all_artifacts_and_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), HEAT, &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in [
        "config.resolved",
        "report.csv",
        "summary.txt",
        "path_r000_m000.csv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(
        summary.contains("PASS eigenmode quotient constancy"),
        "{summary}"
    );
    assert!(summary.ends_with("overall: PASS\n"));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(
        run(
            dir.path(),
            BACKWARD,
            &["--out", a.to_str().unwrap(), "--seed", "7"]
        )
        .status
        .code(),
        Some(0)
    );
    let resolved = fs::read_to_string(a.join("config.resolved")).unwrap();
    let b = dir.path().join("b");
    assert_eq!(
        run(dir.path(), &resolved, &["--out", b.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        fs::read(a.join("report.csv")).unwrap(),
        fs::read(b.join("report.csv")).unwrap()
    );
    assert_eq!(
        resolved,
        fs::read_to_string(b.join("config.resolved")).unwrap()
    );
}

#[test]
fn same_seed_gives_byte_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    for d in [&a, &b] {
        let o = run(
            dir.path(),
            BACKWARD,
            &["--out", d.to_str().unwrap(), "--seed", "11"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    run(
        dir.path(),
        BACKWARD,
        &["--out", c.to_str().unwrap(), "--seed", "12"],
    );
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?} differs"
        );
    }
    assert_ne!(
        fs::read(a.join("report.csv")).unwrap(),
        fs::read(c.join("report.csv")).unwrap()
    );
}

#[test]
fn csv_floats_carry_17_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    run(dir.path(), BACKWARD, &["--out", out.to_str().unwrap()]);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let row = report.lines().nth(1).unwrap();
    let nu1 = row.split(',').nth(3).unwrap();
    let mantissa = nu1.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(
        mantissa.chars().filter(|c| c.is_ascii_digit()).count(),
        17,
        "{nu1}"
    );
}

#[test]
fn sweep_over_zero_sigma_gives_one_deterministic_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cfg = format!("{BACKWARD}[sweep]\nparameter = \"noise.sigma\"\nvalues = \"0\"\n");
    run(dir.path(), &cfg, &["--out", out.to_str().unwrap()]);
    let table = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2, "{table}");
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "max_nu1").unwrap();
    let nu1: f64 = lines[1].split(',').nth(col).unwrap().parse().unwrap();
    assert_eq!(nu1, 0.0);
    assert!(out.join("sweep_000").join("report.csv").exists());
}

#[test]
fn dt_sweep_reports_a_convergence_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cfg = "[run]\nexperiment = \"heat-logconvexity\"\n[problem]\nname = \"heat\"\ninitial = [1.0, 1.0]\n\
               [noise]\nsigma = 0.5\n[grid]\nn = 64\n[sweep]\nparameter = \"time.dt\"\nvalues = [1e-3, 5e-4, 2.5e-4]\n";
    let o = run(dir.path(), cfg, &["--out", out.to_str().unwrap()]);
    let table = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("convergence order"), "{summary}");
    assert_eq!(
        o.status.code(),
        Some(if summary.contains("overall: PASS") {
            0
        } else {
            1
        })
    );
}

#[test]
fn unknown_sweep_parameter_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{HEAT}[sweep]\nparameter = \"noise.colour\"\nvalues = [1.0]\n");
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("noise.colour"), "{}", stderr(&o));
}

#[test]
fn controllability_rejects_unbounded_nonlinearity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[run]\nexperiment = \"controllability\"\n[problem]\nname = \"cubic\"\n[control]\ntarget = [1.0]\n";
    let o = run(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn failing_check_exits_1() {
    // With reg = 1 the Tikhonov controller undershoots a high mode by far
    // more than the reach tolerance.
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        "[run]\nexperiment = \"controllability\"\n[problem]\nname = \"heat\"\n[grid]\nn = 32\n\
               [control]\ntarget = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]\nreg = 1.0\n";
    let o = run(
        dir.path(),
        cfg,
        &["--out", dir.path().join("o").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("o/summary.txt")).unwrap();
    assert!(
        summary.contains("FAIL approximate reachability"),
        "{summary}"
    );
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, HEAT).unwrap();
    let o = Command::new(BIN)
        .arg("--config")
        .arg(&path)
        .env("LOGCONVEX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_sweep_values_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{HEAT}[sweep]\nparameter = \"time.dt\"\nvalues = \"1e-3, fast\"\n");
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("line 7") && stderr(&o).contains("fast"),
        "{}",
        stderr(&o)
    );
}
