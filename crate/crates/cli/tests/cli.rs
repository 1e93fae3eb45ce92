use std::fs;
use std::path::Path;
use std::process::Command;

fn sdlab(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sdlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg("2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn verify_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"checks": ["gronwall", "fs_bounds"],
            "gronwall": {"cases": 5, "steps": 400},
            "sweep": {"grid": {"half_width": 12.0, "min_spacing": 0.01, "ratio": 1.1, "max_spacing": 0.1},
                      "dt": 1e-3, "horizon": 0.5, "s": 0.0, "audit_fraction": 0.0}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = sdlab(&["verify", "--config", &cfg, "--seed", "11"], out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["reports.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "verify");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn montecarlo_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mc.json",
        r#"{"cross_check": false, "queries": [-1.0, 0.0, 1.0],
            "mc": {"n_paths": 200, "dt_sde": 0.01, "start_grid": [-6, -4, -3, -2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2, 3, 4, 6]}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = sdlab(&["montecarlo", "--config", &cfg, "--seed", "5"], out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("bbar.csv")).unwrap(), fs::read(b.join("bbar.csv")).unwrap());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\n  \"eps\": 0.02,\n  \"kk\": 1\n}");
    let o = sdlab(&["minprinciple", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kk") && err.contains("line 3"), "{err}");
}

#[test]
fn inadmissible_exponent_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ce.json", r#"{"p": 1.5}"#);
    let o = sdlab(&["counterexample", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ingest_and_bounds_write_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    fs::write(&csv, "t,g\n0,1\n0.5,2\n1,1\n").unwrap();
    let out = dir.path().join("ing");
    let o = sdlab(&["ingest", csv.to_str().unwrap()], &out);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("series.csv")).unwrap().lines().count(), 4);
    assert!(out.join("manifest.json").exists());

    let bad = dir.path().join("neg.csv");
    fs::write(&bad, "t,g\n0,1\n1,-1\n").unwrap();
    assert_eq!(sdlab(&["ingest", bad.to_str().unwrap()], &dir.path().join("x")).status.code(), Some(2));

    let cfg = write_config(dir.path(), "b.json", r#"{"points": 5}"#);
    let bout = dir.path().join("bounds");
    assert!(sdlab(&["bounds", "--config", &cfg], &bout).status.success());
    let table = fs::read_to_string(bout.join("bounds.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn gjseries_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gj.json", r#"{"terms": 2, "quadrature": {"time_steps": 16, "space_nodes": 201}, "pde_check": false}"#);
    let out = dir.path().join("gj");
    let o = sdlab(&["gjseries", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("gj.csv")).unwrap().lines().count(), 4);
}
