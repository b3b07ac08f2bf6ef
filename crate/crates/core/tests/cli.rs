//! End-to-end runs of the command-line tool.

use std::fs;
use std::process::Command;

use serde_json::Value;

fn fracbec(args: &[&str], cwd: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fracbec"))
        .args(args)
        .current_dir(cwd)
        .env("FRACBEC_CACHE", cwd.join("cache"))
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 4] = ["--n", "256", "--L", "16"];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL).collect()
}

#[test]
fn ground_state_writes_field_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracbec(&with_small(&["ground-state", "--out", "q.frfld", "--method", "fixedpoint"]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(dir.path().join("q.frfld")).unwrap();
    assert_eq!(&bytes[..8], b"FRACFLD1");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("q.report.json")).unwrap()).unwrap();
    for key in ["a_star", "residual", "pohozaev_residuals", "decay_ratio"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert!((report["a_star"].as_f64().unwrap() - 2.4693).abs() < 2e-3);
}

#[test]
fn minimize_and_classify() {
    let dir = tempfile::tempdir().unwrap();
    let args = with_small(&[
        "minimize", "--a1", "0.5", "--a2", "0.4", "--beta", "0.2", "--relative", "--potential1", "harmonic",
        "--potential2", "harmonic", "--edge-min", "50", "--tol", "1e-7", "--out", "result.json", "--dump-fields",
        "pair",
    ]);
    let out = fracbec(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    for key in ["energy", "mu1", "mu2", "iterations", "converged", "el_residual", "masses", "diverged_evidence"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert_eq!(r["converged"], Value::Bool(true));
    assert!(dir.path().join("pair_u1.frfld").exists() && dir.path().join("pair_u2.frfld").exists());

    let out = fracbec(
        &with_small(&["classify", "--a1", "1.1", "--a2", "0.4", "--beta", "0.2", "--relative", "--edge-min", "50"]),
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(c["verdict"], "NotExists");
    assert_eq!(c["rule"], "Thm 1.1(ii): a_i > a*");
}

#[test]
fn probes_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracbec(
        &with_small(&[
            "probe", "--kind", "scaling", "--a1", "0.5", "--a2", "0.5", "--beta", "0.7", "--relative", "--edge-min",
            "50", "--points", "5", "--out", "trace.csv",
        ]),
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda_or_R,energy_or_term"));
    assert_eq!(lines.count(), 5);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["diverges"], Value::Bool(true));

    let out = fracbec(
        &with_small(&["probe", "--kind", "psi-r", "--a1", "0.3", "--a2", "0.3", "--beta", "0.1", "--relative", "--edge-min", "50", "--points", "4"]),
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
}

#[test]
fn gamma_crossing_and_appendix() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracbec(&with_small(&["gamma", "--a1", "0.5", "--a2", "0.5", "--beta", "0.2", "--relative"]), dir.path());
    assert!(out.status.success());
    let g: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((g["gamma"]["value"].as_f64().unwrap() - 1.0 / 0.7).abs() < 1e-2);

    let out = fracbec(&with_small(&["crossing", "--a1", "0.3", "--a2", "0.6", "--relative"]), dir.path());
    assert!(out.status.success());
    let c: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (b, lo, hi) = (c["beta"].as_f64().unwrap(), c["beta_lower"].as_f64().unwrap(), c["beta_upper"].as_f64().unwrap());
    assert!(lo <= b && b <= hi);

    let out = fracbec(&with_small(&["appendix-verify", "--a", "0.5", "--beta", "0.5", "--theta", "1.0", "--relative"]), dir.path());
    assert!(out.status.success());
    let a: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(a["p_lower_bound"]["holds"], Value::Bool(true));
    assert!((a["p_value"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn sweep_plot_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nn = 256\nL = 16\n[potential1]\nkind = \"harmonic\"\n[potential2]\nkind = \"harmonic\"\n\
               [sweep]\na1 = { min = 0.2, max = 0.2, steps = 1 }\na2 = { min = 0.3, max = 0.3, steps = 1 }\n\
               beta = { min = 0.1, max = 0.5, steps = 2 }\nedge_min = 50.0\n";
    fs::write(dir.path().join("s.toml"), cfg).unwrap();
    let out = fracbec(&["sweep", "--config", "s.toml", "--out", "run", "--workers", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = fracbec(&["plot", "--table", "run/sweep.csv", "--out", "plots"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("plots/crossing.gp").exists());

    fs::write(dir.path().join("bad.toml"), cfg.replace("n = 256", "n = 256\npoints = 3")).unwrap();
    let out = fracbec(&["sweep", "--config", "bad.toml", "--out", "run2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("points"));

    fs::write(dir.path().join("empty.csv"), "cell,a1\n").unwrap();
    let out = fracbec(&["plot", "--table", "empty.csv", "--out", "p2"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn verify_fault_injection_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracbec(&["verify", "--level", "fast", "--fault", "squared", "--out", "v.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    let poh = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "pohozaev").unwrap();
    assert_eq!(poh["passed"], Value::Bool(false));
}
