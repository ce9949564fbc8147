use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lodedamage::drivers::{run_path, PathSpec};
use lodedamage::MaterialParams;
use lodedamage_cli::{read_records_csv, records_table};
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lodedamage"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV output file as string fields.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn invariants_prints_one_row() {
    let o = cli(&["invariants", "100", "0", "0", "0", "0", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "sigma_m,sigma_eq,eta,chi,theta,theta0");
    let v: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert!((v[2] - 0.333333).abs() < 1e-6 && (v[5] - 1.0).abs() < 1e-12);

    let shear = stdout(&cli(&["invariants", "0", "0", "0", "100", "0", "0"]));
    let v: Vec<f64> = shear.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!((v[2], v[5]), (0.0, 0.0));

    let o = cli(&["invariants", "-100", "50", "0", "0", "0", "0"]);
    assert!(o.status.success());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(cli(&["invariants", "1", "2"]).status.code(), Some(1));
    assert_eq!(cli(&["invariants", "1", "2", "x", "0", "0", "0"]).status.code(), Some(1));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["simulate", "--preset", "steel"]).status.code(), Some(1));
    assert_eq!(cli(&["simulate", "--format", "xml"]).status.code(), Some(1));
}

#[test]
fn corrupted_config_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("records.csv");
    for (name, text) in [("syntax.toml", "[material\na = 1"), ("unknown.toml", "[material]\nyoung = 7e4"), ("bad.toml", "[path]\nsteps = 0")] {
        let cfg = write(&dir, name, text);
        let o = cli(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(!out.exists(), "{name}");
    }
}

#[test]
fn simulate_writes_records_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tension.csv");
    let o = cli(&["simulate", "--steps", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("peak sigma_eq"));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# lodedamage simulate; stress in MPa"));
    assert_eq!(
        lines.next().unwrap(),
        "step,eps11,eps22,eps33,eps12,eps23,eps13,sig11,sig22,sig33,sig12,sig23,sig13,ebar_p,D,h,eta,theta0,f_res,plastic,fractured"
    );
    assert_eq!(rows(&out).len(), 201);
}

#[test]
fn records_csv_round_trips() {
    let p = MaterialParams::al2024();
    let records = run_path(&p, &PathSpec::uniaxial_tension(150)).unwrap();
    let text = records_table(&p, &records).to_csv().unwrap();
    let back = read_records_csv(&text).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.step, b.step);
        assert_eq!((a.plastic, a.fractured), (b.plastic, b.fractured));
        let (sa, sb) = ([a.ebar_p, a.d, a.h, a.eta, a.theta0, a.f_residual], [b.ebar_p, b.d, b.h, b.eta, b.theta0, b.f_residual]);
        let fa = a.eps.0.iter().chain(&a.sigma.0).chain(&sa);
        let fb = b.eps.0.iter().chain(&b.sigma.0).chain(&sb);
        for (x, y) in fa.zip(fb) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = cli(&["simulate", "--steps", "100", "--format", "json", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let doc: serde_json::Value = serde_json::from_slice(&text).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 101);
    assert_eq!(doc["params"]["gamma"], 12.8);
}

#[test]
fn elastic_path_has_no_plastic_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "elastic.toml",
        r#"
[path]
steps = 20
controls = [
  { mode = "strain", value = 0.003 },
  { mode = "stress", value = 0.0 },
  { mode = "stress", value = 0.0 },
  { mode = "strain", value = 0.0 },
  { mode = "strain", value = 0.0 },
  { mode = "strain", value = 0.0 },
]
"#,
    );
    let out = dir.path().join("elastic.csv");
    assert!(cli(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[19] == "0"));
}

#[test]
fn non_convergence_keeps_partial_records() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "starved.toml", "[material]\nmax_iter = 1\n[path]\nsteps = 40");
    let out = dir.path().join("partial.csv");
    let o = cli(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().last().unwrap().starts_with("# TRUNCATED: after step"));
    assert!(read_records_csv(&text).is_ok());
}

#[test]
fn yield_surface_classical_is_a_circle() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("surface.csv");
    let o = cli(&["yield-surface", "--preset", "classical", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 181);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 1.0));
}

#[test]
fn locus_power_law_matches_pinned_cells() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "locus.toml",
        "[locus]\npairs = [[0.0124, 0.0355], [0.1173, 0.3381], [0.9274, 0.9984]]\nmode = { mode = \"power_law\" }",
    );
    let out = dir.path().join("locus.csv");
    let o = cli(&["locus", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&out);
    let expected = [(1.54867, 0.210227), (1.44491, 0.236951), (1.666339, 0.185272)];
    for (row, (h, ef)) in rows.iter().zip(expected) {
        let got_h: f64 = row[2].parse().unwrap();
        let got_ef: f64 = row[3].parse().unwrap();
        assert!((got_h / h - 1.0).abs() < 2e-3, "h {got_h} vs {h}");
        assert!((got_ef / ef - 1.0).abs() < 5e-3, "ebar_f {got_ef} vs {ef}");
    }
}

#[test]
fn locus_default_grid_marks_undefined_cells() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("grid.csv");
    assert!(cli(&["locus", "--out", out.to_str().unwrap()]).status.success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 33 * 5);
    assert!(rows.iter().any(|r| r[3].is_empty() && r[4].contains("must be positive")));
}

#[test]
fn calibrate_recovers_hardening_law() {
    let dir = TempDir::new().unwrap();
    let mut data = String::from("ebar_p,sigma\n");
    for i in 0..40 {
        let e = 0.015 * i as f64;
        data += &format!("{e:.17e},{:.17e}\n", 370.0 + 620.0 * e.powf(0.396));
    }
    write(&dir, "curve.csv", &data);
    let cfg = write(&dir, "fit.toml", "[fit]\nkind = \"hardening\"\ndata = \"curve.csv\"");
    let out = dir.path().join("fit.csv");
    let o = cli(&["calibrate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = &rows(&out)[0];
    for (i, target) in [370.0, 620.0, 0.396].into_iter().enumerate() {
        let v: f64 = row[i].parse().unwrap();
        assert!((v / target - 1.0).abs() < 1e-6, "column {i}: {v}");
    }
}

#[test]
fn calibrate_power_law_inline_points() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "fit.toml",
        "[fit]\nkind = \"power_law\"\npoints = [[1.0, 0.44717], [2.0, 0.1352167056], [1.5, 0.2221357137]]",
    );
    let out = dir.path().join("fit.json");
    let o = cli(&["calibrate", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let row = doc["rows"][0].as_array().unwrap();
    assert!((row[0].as_f64().unwrap() - 0.44717).abs() < 1e-6);
    assert!((row[1].as_f64().unwrap() + 1.72555).abs() < 1e-4);

    let too_few = write(&dir, "few.toml", "[fit]\npoints = [[0.1, 400.0]]");
    assert_eq!(cli(&["calibrate", "--config", &too_few]).status.code(), Some(1));
}
