use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tubalkit::io::{load_tensor, save_tensor};
use tubalkit::{project_tnn, tnn, DenseTensor};

fn tubalkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubalkit"))
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

/// First frontal slice diag(3, 1), second slice zero.
fn write_fixture(dir: &Path) -> String {
    let path = dir.join("x.txt");
    fs::write(&path, "dims: 2 2 2\n3 0 0 1\n0 0 0 0\n").unwrap();
    path.to_str().unwrap().to_string()
}

fn line_value<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no `{key}` line in {out}"))
}

#[test]
fn certify_reports_value_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_fixture(dir.path());
    let o = tubalkit(&["certify", &x, "--tau", "1.5", "--rank", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(line_value(&out, "value").parse::<f64>().unwrap(), 2.0);
    assert_eq!(line_value(&out, "sigma_next_max").parse::<f64>().unwrap(), 1.0);
    assert_eq!(line_value(&out, "verdict"), "true");
    let o = tubalkit(&["certify", &x, "--tau", "3", "--rank", "1"]);
    assert_eq!(line_value(&stdout(&o), "verdict"), "false");
}

#[test]
fn project_writes_the_projection() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_fixture(dir.path());
    let out = dir.path().join("p.tten");
    for rank in [None, Some("1")] {
        let mut args = vec!["project", x.as_str(), "--tau", "1.5", "--out", out.to_str().unwrap()];
        if let Some(r) = rank {
            args.extend(["--rank", r]);
        }
        let o = tubalkit(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(line_value(&stdout(&o), "sigma").parse::<f64>().unwrap(), 1.5);
        let p = load_tensor(&out).unwrap();
        let want = project_tnn(&load_tensor(&x).unwrap(), 1.5).unwrap().projected;
        assert!(p.distance(&want).unwrap() < 1e-12);
        assert!((tnn(&p) - 1.5).abs() < 1e-12);
    }
}

#[test]
fn tsvd_writes_factors() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<f64> = (0..24).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
    let x = DenseTensor::new(vec![3, 2, 4], data).unwrap();
    let xp = dir.path().join("x.tten");
    save_tensor(&x, &xp).unwrap();
    let prefix = dir.path().join("f");
    let o = tubalkit(&["tsvd", xp.to_str().unwrap(), "--out", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(line_value(&out, "dims"), "[3, 2, 4]");
    assert!(line_value(&out, "reconstruction error").parse::<f64>().unwrap() < 1e-12);
    let u = load_tensor(dir.path().join("f.u.tten")).unwrap();
    let s = load_tensor(dir.path().join("f.s.tten")).unwrap();
    let v = load_tensor(dir.path().join("f.v.tten")).unwrap();
    let rec = tubalkit::t_product(&tubalkit::t_product(&u, &s).unwrap(), &v.t_transpose()).unwrap();
    assert!(rec.distance(&x).unwrap() < 1e-12 * x.fro_norm());
}

#[test]
fn run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "dims = 5x5x3\nr = 1\niterations = 30\n").unwrap();
    let out = dir.path().join("res");
    let o = tubalkit(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "1,2",
        &format!("--output={}", out.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("results written to"));
    for f in ["config.txt", "summary.csv", "trace_seed1.csv", "trace_seed2.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_fixture(dir.path());

    let o = tubalkit(&["run", "--colour", "red"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "dims = 4x4x4\n\nr = x\n").unwrap();
    let o = tubalkit(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("`r`"), "{}", stderr(&o));

    let o = tubalkit(&["certify", &x, "--tau", "-1", "--rank", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = tubalkit(&["certify", "/nonexistent/x.tten", "--tau", "1", "--rank", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = tubalkit(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}
