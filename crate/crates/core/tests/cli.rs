use std::path::Path;
use std::process::{Command, Output};

fn adiaband(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiaband"))
        .args(args)
        .current_dir(dir)
        .env_remove("ADIABAND_WORKERS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const HEADER: &str = "run_id,problem,n,dim,schedule,p,tau,s,gap,m,transition_prob,proj_distance,A_tight,A_coarse,A_theorem4,intertwining_residual,volterra_residual,walltime_ms";

#[test]
fn run_emits_schema_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"problem": {"grover": {"n": 2}}, "schedule": "linear", "tau": 100}"#);
    let a = adiaband(&["run", "--config", &cfg], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = adiaband(&["run", "--config", &cfg], dir.path());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    assert_eq!(lines.count(), 1024);
}

#[test]
fn random_run_reports_small_intertwining_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem": {"random": {"dim": 6, "seed": 7}}, "tau": 20, "grid": 256, "checks": ["intertwining"], "bounds": [], "output": "out.csv"}"#,
    );
    let out = adiaband(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("out.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "intertwining_residual").unwrap();
    let worst = rdr
        .records()
        .map(|r| r.unwrap()[col].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn sweep_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"problem": {"grover": {"n": [2,3,4,5,6,7,8,9,10], "representation": "reduced"}}, "schedule": "adaptive:p=1.5", "tau": [50], "grid": 128, "bounds": []}"#,
    );
    let out = adiaband(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let h = rdr.headers().unwrap().clone();
    let (ni, gi) = (h.iter().position(|c| c == "n").unwrap(), h.iter().position(|c| c == "g_min").unwrap());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 9);
    for r in rows {
        let n: i32 = r[ni].parse().unwrap();
        let g: f64 = r[gi].parse().unwrap();
        assert!((g - 2f64.powf(-n as f64 / 2.0)).abs() < 1e-12, "n={n} g={g}");
    }

    let cfg = write(dir.path(), "t.json", r#"{"problem": {"grover": {"n": 3}}, "tau": [100, 200, 400, 800], "grid": 128}"#);
    let out = adiaband(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
}

#[test]
fn failing_sweep_point_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // The diagonal crossing closes the ground gap at s = 1/2.
    write(dir.path(), "m.json", r#"{"h0": [[0, 0], [0, 1]], "h1": [[1, 0], [0, 0]]}"#);
    let cfg = write(dir.path(), "c.json", r#"{"problem": {"matrix_file": {"path": "m.json"}}, "tau": [10], "grid": 65}"#);
    let out = adiaband(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("error"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"problem": {"grover": {"n": 3}}, "tau": []}"#);
    let out = adiaband(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
    let cfg = write(dir.path(), "d.json", r#"{"problem": {"grover": {"n": 3}}, "tau": 1, "colour": "red"}"#);
    let out = adiaband(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn verify_filter_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = adiaband(&["verify", "--filter", "lemma7", "--instances", "20"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["name"], "lemma7.twiddle_norm");
}

#[test]
fn fit_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("tau,proj_distance\n");
    for t in [100.0f64, 200.0, 400.0, 800.0, 1600.0] {
        text.push_str(&format!("{t},{}\n", 3.0 / t));
    }
    let input = write(dir.path(), "d.csv", &text);
    let out = adiaband(&["fit", "--input", &input, "--x", "tau", "--y", "proj_distance"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["slope"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    let short = write(dir.path(), "s.csv", "tau,proj_distance\n1,1\n2,0.5\n");
    let out = adiaband(&["fit", "--input", &short, "--x", "tau", "--y", "proj_distance"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
