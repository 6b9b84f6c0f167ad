use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csfpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csfpv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn json(path: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn default_config_relaxes_to_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "");
    let out = csfpv(&["simulate", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("t_min,pressure_mmH2O\n"));
    let last = rows(&text).last().unwrap().clone();
    assert_eq!(last[0], 30.0);
    assert!((last[1] - 116.8).abs() < 1e-3, "{last:?}");
}

#[test]
fn long_run_reaches_equilibrium_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "[output]\nt_end = 60\ndt = 0.5\n");
    let report = dir.path().join("r.json");
    let out = csfpv(&["simulate", &cfg, "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = json(report.to_str().unwrap());
    assert!((r["final_pressure"].as_f64().unwrap() - 116.8).abs() < 1e-4, "{r}");
    assert_eq!(r["equilibrium_pressure"].as_f64().unwrap(), 116.8);
    assert_eq!(r["closed_form"], "linear_no_source");
}

#[test]
fn both_solvers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "[compliance]\nlaw = \"hyperbolic\"\n[[event]]\nkind = \"finite_bolus\"\nrate = 0.04\n",
    );
    let report = dir.path().join("r.json");
    let out = csfpv(&["simulate", &cfg, "--solver", "both", "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = json(report.to_str().unwrap());
    assert_eq!(r["closed_form"], "riccati_finite_bolus");
    assert!(r["max_rel_discrepancy"].as_f64().unwrap() <= 1e-6, "{r}");
}

#[test]
fn analytic_request_without_closed_form_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "[compliance]\nlaw = \"exponential\"\n");
    let out = csfpv(&["simulate", &cfg, "--solver", "analytic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("catalog"));
    let out = csfpv(&["simulate", &cfg]);
    assert!(out.status.success());
}

#[test]
fn misspelled_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "[params]\nRa = 600\n");
    let out = csfpv(&["simulate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Ra"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_parameter_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "[params]\nR_a = -1\n");
    assert_eq!(csfpv(&["simulate", &cfg]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(csfpv(&["simulate", missing.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn closed_shunt_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "[[event]]\nkind = \"shunt\"\nopening_pressure = 300\nstart = 0\n",
    );
    let out = csfpv(&["simulate", &cfg, "--solver", "analytic"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "[params]\nP_0 = 150\n[compliance]\nlaw = \"shifted_hyperbolic\"\n[[event]]\nkind = \"infusion\"\n",
    );
    let dumped = dir.path().join("full.toml");
    let a = csfpv(&["simulate", &cfg, "--dump-config", dumped.to_str().unwrap()]);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = fs::read_to_string(&dumped).unwrap();
    assert!(text.contains("k2 = 10.0") && text.contains("R_i = 600.0"), "{text}");
    let b = csfpv(&["simulate", dumped.to_str().unwrap()]);
    assert!(b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn figures_are_written_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a/nested");
    let b = dir.path().join("b");
    assert!(csfpv(&["figures", a.to_str().unwrap()]).status.success());
    assert!(csfpv(&["figures", b.to_str().unwrap()]).status.success());
    for id in 1..=7 {
        let name = format!("fig{id}.csv");
        let x = fs::read(a.join(&name)).unwrap();
        assert_eq!(x, fs::read(b.join(&name)).unwrap(), "{name}");
    }
    let fig4 = rows(&fs::read_to_string(a.join("fig4.csv")).unwrap());
    let last = fig4.last().unwrap();
    assert!((last[1] - 246.4).abs() < 0.1, "{last:?}");
    let fig6 = rows(&fs::read_to_string(a.join("fig6.csv")).unwrap());
    let mut levels: Vec<f64> = fig6.iter().map(|r| r[1]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    assert_eq!(levels.len(), 2, "{levels:?}");
    let leftovers: Vec<_> = fs::read_dir(&a).unwrap().filter_map(|e| e.ok()).filter(|e| !e.file_name().to_string_lossy().ends_with(".csv")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = csfpv(&["figures", dir.path().to_str().unwrap(), "--only", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_recovers_simulated_bolus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "[params]\nP_0 = 116.8\n[compliance]\nlaw = \"hyperbolic\"\n[[event]]\nkind = \"instant_bolus\"\nvolume = 0.2\ntime = 0\n",
    );
    let trace = dir.path().join("trace.csv");
    assert!(csfpv(&["simulate", &cfg, "--out", trace.to_str().unwrap()]).status.success());
    let out = csfpv(&["fit", trace.to_str().unwrap(), "--model", "hyperbolic", "--delta-v", "0.2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let k = r["parameters"]["k"].as_f64().unwrap();
    assert!((k - 1.0).abs() < 0.01, "{r}");
    assert!((r["parameters"]["R_a"].as_f64().unwrap() - 600.0).abs() < 6.0);

    let out = csfpv(&["fit", trace.to_str().unwrap(), "--model", "lim"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["model"], "exponential");
    assert!(r["parameters"]["a"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_rejects_malformed_traces() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "t_min,pressure_mmH2O\n0,120\n1,119\n0.5,118\n2,117\n");
    let out = csfpv(&["fit", &bad, "--model", "hyperbolic", "--delta-v", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
    let header = write(dir.path(), "h.csv", "time,p\n0,1\n");
    assert_eq!(csfpv(&["fit", &header, "--model", "sklar"]).status.code(), Some(2));
}

#[test]
fn validate_passes_and_detects_perturbation() {
    let a = csfpv(&["validate"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let b = csfpv(&["validate"]);
    assert_eq!(a.stdout, b.stdout);

    let p = csfpv(&["validate", "--perturb", "riccati_no_source"]);
    assert_eq!(p.status.code(), Some(1));
    assert!(stderr(&p).contains("oracle_riccati_no_source"), "{}", stderr(&p));
    assert_eq!(csfpv(&["validate", "--perturb", "nothing"]).status.code(), Some(2));
}

#[test]
fn show_defaults_lists_the_table() {
    let out = csfpv(&["--show-defaults"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 19);
    assert!(text.contains("R_a") && text.contains("600"));
}
