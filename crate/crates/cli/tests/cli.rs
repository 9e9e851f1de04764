use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kgfw(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgfw"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("KGFW_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn report(out: &Path, stem: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{stem}_report.json"))).expect("report written");
    serde_json::from_str(&text).expect("report is JSON")
}

fn assert_exit(o: &Output, code: i32) {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn free_spectrum_pairs_and_branch_labels() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(dir.path(), &["spectrum", "--set", "grid.points=16"]);
    assert_exit(&o, 0);
    let r = report(dir.path(), "spectrum");
    assert_eq!(r["pass"], true);
    assert_eq!(r["results"]["positive"], 16);
    assert_eq!(r["results"]["negative"], 16);
    let mut rd = csv::Reader::from_path(dir.path().join("spectrum.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 32);
    let values: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]), "eigenvalues sorted");
    assert_eq!(&rows[0][2], "negative");
    assert_eq!(&rows[31][2], "positive");
    // The lowest positive level is the rest energy.
    assert!((values[16] - 1.0).abs() < 1e-12);
}

#[test]
fn massless_free_spectrum_excludes_the_zero_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(dir.path(), &["spectrum", "--set", "particle.mass=0", "--set", "grid.points=16"]);
    assert_exit(&o, 0);
    let r = report(dir.path(), "spectrum");
    assert_eq!(r["results"]["positive"], 15);
    assert_eq!(r["results"]["negative"], 15);
}

#[test]
fn landau_table_for_uniform_b() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(
        dir.path(),
        &[
            "spectrum",
            "--set", "grid.dim=2",
            "--set", "grid.points=24",
            "--set", "grid.length=12",
            "--set", "field.kind=uniform_B",
            "--set", "field.hz=1",
            "--set", "spectrum.hamiltonian=fw-exact",
            "--set", "spectrum.levels=3",
        ],
    );
    assert_exit(&o, 0);
    let mut rd = csv::Reader::from_path(dir.path().join("landau.csv")).unwrap();
    assert_eq!(rd.records().count(), 3);
}

#[test]
fn nindep_passes_on_uniform_e() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(dir.path(), &["verify", "nindep", "--set", "field.kind=uniform_E", "--set", "field.ex=0.02"]);
    assert_exit(&o, 0);
    let r = report(dir.path(), "verify_nindep");
    assert!(r["results"]["staged"].as_f64().unwrap() <= 1e-9);
    assert!(r["results"]["cffv"].as_f64().unwrap() >= 1e-2);
}

#[test]
fn pseudo_suite_passes_on_builtin_fields() {
    for (kind, extra) in [("free", None), ("uniform_E", Some("field.ex=0.02")), ("harmonic_scalar", Some("field.k=0.002"))] {
        let dir = tempfile::tempdir().unwrap();
        let kind_arg = format!("field.kind={kind}");
        let mut args = vec!["verify", "pseudo", "--set", kind_arg.as_str()];
        if let Some(e) = extra {
            args.extend(["--set", e]);
        }
        assert_exit(&kgfw(dir.path(), &args), 0);
    }
}

#[test]
fn dkp_refuses_massless_particles_with_a_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(dir.path(), &["verify", "dkp", "--set", "particle.mass=0"]);
    assert_exit(&o, 1);
    let r = report(dir.path(), "verify_dkp");
    assert_eq!(r["pass"], false);
    assert!(r["error"].as_str().unwrap().contains("massless"));
}

#[test]
fn failing_check_gives_nonzero_exit() {
    // Resolution far too coarse for the double commutator at 1e-8.
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(
        dir.path(),
        &[
            "verify", "commutators",
            "--set", "grid.dim=2",
            "--set", "grid.points=16",
            "--set", "grid.length=24",
            "--set", "field.kind=crossed_EH",
            "--set", "field.ex=0.05",
            "--set", "field.hz=0.1",
            "--set", "field.window_width=0",
        ],
    );
    assert_exit(&o, 1);
    let r = report(dir.path(), "verify_commutators");
    assert_eq!(r["error"], Value::Null);
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
}

#[test]
fn config_errors_exit_with_code_two_and_cite_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[grid]\ndim = 1\n\n[field]\nkind = \"uniform_E\"\nhz = 1.0\n").unwrap();
    let o = kgfw(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_exit(&o, 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6") && err.contains("hz"), "{err}");
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[grid]\npoints = 8\n[particle]\nmass = 3.0\n").unwrap();
    let o = kgfw(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap(), "--set", "particle.mass=2"]);
    assert_exit(&o, 0);
    let r = report(dir.path(), "spectrum");
    assert_eq!(r["config"]["particle"]["mass"], 2.0);
    assert_eq!(r["config"]["grid"]["points"], 8);
    assert!((r["results"]["lowest_positive"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn reports_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["dipoles", "--seed", "7", "--set", "field.kind=crossed_EH", "--set", "field.ex=0.05", "--set", "field.hz=0.3"];
    assert_exit(&kgfw(a.path(), &args), 0);
    assert_exit(&kgfw(b.path(), &args), 0);
    for name in ["dipoles.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let strip = |dir: &Path| {
        let mut v = report(dir, "dipoles");
        v["outputs"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    // A different seed draws different test points.
    let c = tempfile::tempdir().unwrap();
    let mut args7 = args.to_vec();
    args7[2] = "8";
    assert_exit(&kgfw(c.path(), &args7), 0);
    assert_ne!(std::fs::read(a.path().join("dipoles.csv")).unwrap(), std::fs::read(c.path().join("dipoles.csv")).unwrap());
}

#[test]
fn same_out_dir_gives_identical_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "hbar", "--set", "field.kind=uniform_E", "--set", "field.ex=0.02"];
    assert_exit(&kgfw(dir.path(), &args), 0);
    let first = std::fs::read(dir.path().join("verify_hbar_report.json")).unwrap();
    assert_exit(&kgfw(dir.path(), &args), 0);
    assert_eq!(first, std::fs::read(dir.path().join("verify_hbar_report.json")).unwrap());
    assert!(dir.path().join("verify_hbar_timing.txt").exists());
}

#[test]
fn free_plane_wave_phase_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(
        dir.path(),
        &[
            "evolve",
            "--format", "json",
            "--set", "packet.width=0",
            "--set", "packet.momentum=[0.3, 0, 0]",
            "--set", "grid.points=32",
        ],
    );
    assert_exit(&o, 0);
    let obs: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("evolve_observables.json")).unwrap()).unwrap();
    let rows = obs.as_array().unwrap();
    assert_eq!(rows.len(), 11);
    let last = &rows[10];
    let (re, im) = (last["overlap_re"].as_f64().unwrap(), last["overlap_im"].as_f64().unwrap());
    assert!(((re * re + im * im).sqrt() - 1.0).abs() < 1e-10);
    let r = report(dir.path(), "evolve");
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["name"].as_str().unwrap().contains("phase")));
}

#[test]
fn cyclotron_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(
        dir.path(),
        &[
            "trajectory",
            "--set", "grid.dim=2",
            "--set", "field.kind=uniform_B",
            "--set", "field.hz=0.5",
            "--set", "particle.hbar_scale=0",
            "--set", "trajectory.t_end=20",
            "--set", "trajectory.dt=0.01",
        ],
    );
    assert_exit(&o, 0);
    let r = report(dir.path(), "trajectory");
    let period = r["results"]["cyclotron_period"].as_f64().unwrap();
    // Classical relativistic cyclotron period 2 pi eps / (e H), eps = sqrt(2).
    assert!((period - 2.0 * std::f64::consts::PI * 2f64.sqrt() / 0.5).abs() < 1e-9);
    let mut rd = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    assert!(rd.records().count() > 100);
}

#[test]
fn ehrenfest_uniform_e_within_one_percent_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgfw(
        dir.path(),
        &[
            "ehrenfest",
            "--set", "field.kind=uniform_E",
            "--set", "field.ex=0.1",
            "--set", "grid.length=60",
            "--set", "grid.points=128",
            "--set", "packet.center=[-5, 0, 0]",
            "--set", "packet.width=4",
        ],
    );
    assert_exit(&o, 0);
    let r = report(dir.path(), "ehrenfest");
    let checks = r["checks"].as_array().unwrap();
    let slope = checks.iter().find(|c| c["name"] == "centroid momentum slope vs eE").unwrap();
    assert!(slope["value"].as_f64().unwrap() < 0.01);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kgfw"))
        .args(["spectrum", "--set", "grid.points=8"])
        .env("KGFW_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_exit(&o, 0);
    assert!(dir.path().join("spectrum_report.json").exists());
}
