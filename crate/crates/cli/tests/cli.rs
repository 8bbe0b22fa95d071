use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlp"))
        .args(args)
        .env_remove("DLP_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn dispersion_pbc_three_sites() {
    let o = dlp(&["dispersion", "--n", "3", "--bc", "pbc", "--xi", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let freqs: Vec<f64> = data_rows(&text)
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    let want = [0.6, 1.2, 1.2];
    for (f, w) in freqs.iter().zip(want) {
        assert!((f - w).abs() < 1e-12, "{freqs:?}");
    }
    let window = text
        .lines()
        .find(|l| l.starts_with("# xi_window="))
        .unwrap();
    let inner = window
        .trim_start_matches("# xi_window=(")
        .trim_end_matches(')');
    let bounds: Vec<f64> = inner.split(", ").map(|v| v.parse().unwrap()).collect();
    assert!(
        (bounds[0] + 1.0).abs() < 1e-12 && (bounds[1] - 0.5).abs() < 1e-12,
        "{bounds:?}"
    );
    assert!(stderr(&o).is_empty());
}

#[test]
fn dispersion_outside_window_warns() {
    let o = dlp(&["dispersion", "--xi", "0.6"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("WARNING"));
    assert_eq!(data_rows(&stdout(&o)).len(), 3);
}

#[test]
fn invalid_parameters_exit_2() {
    for args in [
        &["dispersion", "--n", "1"][..],
        &["steady", "--kappa", "-0.1"],
        &["trajectory", "--omega-a", "0"],
        &["trajectory", "--init", "file"],
        &["critical", "--sizes", "1"],
    ] {
        let o = dlp(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"xi": 0.2, "gee": 0.5}"#).unwrap();
    let o = dlp(&["dispersion", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_4() {
    let o = dlp(&["dispersion", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_values_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n_sites": 4, "xi": 0.1, "bc": "obc"}"#).unwrap();
    let o = dlp(&[
        "dispersion",
        "--config",
        cfg.to_str().unwrap(),
        "--xi",
        "0.3",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.contains("n_sites=4") && text.contains("bc=obc") && text.contains("xi=0.3"),
        "{text}"
    );
    assert_eq!(data_rows(&text).len(), 4);
}

#[test]
fn normal_state_trajectory_is_constant() {
    let o = dlp(&[
        "trajectory",
        "--init",
        "np",
        "--t-end",
        "20",
        "--record-every",
        "1",
    ]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 21);
    for r in &rows {
        for (c, v) in r.iter().enumerate().skip(1) {
            let v: f64 = v.parse().unwrap();
            let want = if c % 5 == 0 { -0.5 } else { 0.0 };
            assert_eq!(v, want);
        }
    }
}

#[test]
fn trajectory_from_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("state.json");
    let st = dicke_state_json(0.05);
    fs::write(&init, st).unwrap();
    let out = dir.path().join("traj.csv");
    let o = dlp(&[
        "trajectory",
        "--init",
        "file",
        "--init-file",
        init.to_str().unwrap(),
        "--t-end",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = data_rows(&fs::read_to_string(&out).unwrap());
    assert_eq!(rows[0][1], "0.05");
    assert!(out.with_extension("config.json").exists());
}

fn dicke_state_json(re_a: f64) -> String {
    format!(
        r#"{{"a": [[{re_a}, 0.0], [0.0, 0.0], [0.0, 0.0]], "s": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], "z": [-0.5, -0.5, -0.5]}}"#
    )
}

#[test]
fn steady_reports_roots_and_region() {
    let o = dlp(&["steady", "--g", "0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["region"], "A");
    assert!(!v["roots"].as_array().unwrap().is_empty());
    let o = dlp(&["steady", "--g", "0.7"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["region"], "B");
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    let o = dlp(&all);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    fs::read(&out).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["trajectory", "--t-end", "30", "--rng-seed", "5"],
        &["steady", "--g", "0.8", "--bc", "obc"],
        &["sweep", "--mode", "cut", "--bc", "obc", "--g-steps", "5"],
        &["critical", "--sizes", "3,6", "--xi-steps", "4"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let a = run_to(dir.path(), &format!("a{i}.out"), args);
        let b = run_to(dir.path(), &format!("b{i}.out"), args);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn phase_sweep_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["sweep", "--xi-steps", "5", "--g-steps", "5", "--bc", "obc"];
    let one = run_to(
        dir.path(),
        "w1.csv",
        &[&base[..], &["--workers", "1"]].concat(),
    );
    let two = run_to(
        dir.path(),
        "w2.csv",
        &[&base[..], &["--workers", "2"]].concat(),
    );
    assert_eq!(one, two);
    let text = String::from_utf8(one).unwrap();
    assert_eq!(data_rows(&text).len(), 25);
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w1.config.json")).unwrap())
            .unwrap();
    assert_eq!(cfg["workers"], 1);
    assert_eq!(cfg["xi_steps"], 5);
}

#[test]
fn help_mentions_units() {
    let o = dlp(&["sweep", "--help"]);
    let text = stdout(&o);
    assert!(text.contains("units of the resonator frequency"));
    assert!(text.contains("--workers"));
}
