use std::fs;
use std::process::{Command, Output};

fn sta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sta"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_and_version() {
    let o = sta(&["--help"]);
    assert!(o.status.success());
    for cmd in ["sensitivity", "optimize", "simulate", "tables", "pulse"] {
        assert!(stdout(&o).contains(cmd), "help lacks {cmd}");
    }
    let o = sta(&["--version"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains(sta_core::VERSION));
}

#[test]
fn sensitivity_csv_matches_closed_form() {
    let o = sta(&[
        "sensitivity",
        "--scheme",
        r#"{"kind":"flat_pi","T":1}"#,
        "--grid",
        "0:4:5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "DeltaT,value,lower_bound,asymptotic,quad_error");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r[1] - sta_core::sensitivity::q_flat_pi_closed_form(r[0])).abs() < 1e-8);
    }
}

#[test]
fn exit_codes_distinguish_config_and_numeric_errors() {
    assert_eq!(sta(&["sensitivity", "--scheme", "{oops"]).status.code(), Some(2));
    assert_eq!(sta(&["optimize", "--family", "flat_pi"]).status.code(), Some(2));
    assert_eq!(sta(&["bogus"]).status.code(), Some(2));
    let o = sta(&[
        "sensitivity",
        "--scheme",
        r#"{"kind":"flat_pi","T":1}"#,
        "--grid",
        "3",
        "--tol",
        "1e-30",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn config_file_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"family":"num2_4l","DeltaT":3.0,"starts":2,"max_evals":300,"seed":5}"#,
    )
    .unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    for out in [&out_a, &out_b] {
        let o = sta(&[
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_a).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_b).unwrap()).unwrap();
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["problem"]["seed"], 5);
    let stamp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.json.run.json")).unwrap()).unwrap();
    assert_eq!(stamp["version"], sta_core::VERSION);
}

#[test]
fn tables_and_pulse_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = sta(&["tables", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t1 = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let t2 = fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    assert_eq!(t1.lines().count(), 8);
    assert_eq!(t2.lines().count(), 8);

    let csv = dir.path().join("pulse.csv");
    let o = sta(&[
        "pulse",
        "--scheme",
        r#"{"kind":"flat_pi","T":1}"#,
        "--samples",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,Omega_R,Omega_I,delta2\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn simulate_betas_from_flags() {
    let o = sta(&[
        "simulate",
        "--scheme",
        r#"{"kind":"flat_pi","T":1}"#,
        "--delta-t",
        "1",
        "--betas",
        "-0.1:0.1:3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "beta,P_target");
    let p = |i: usize| -> f64 { rows[i].split(',').nth(1).unwrap().parse().unwrap() };
    assert!((p(3) - 0.9906).abs() < 1e-4, "{}", p(3));
    assert!((p(1) - p(3)).abs() < 1e-12);
    assert!(p(2) > 1.0 - 1e-9);
}
