use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pendulum_cli::find_orbit::OrbitReport;
use pendulum_cli::output::{read_json, read_trajectory, ErrorReport};
use pendulum_cli::simulate::SimulationSummary;
use pendulum_cli::sweep::SweepRecord;
use pendulum_core::{energy_threshold, CertificateReport, PendulumParams, PivotMotion};
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn pendulum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pendulum"))
        .args(args)
        .env_remove("PENDULUM_WORKERS")
        .output()
        .unwrap()
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    pendulum(&args)
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn round_trips<T>(path: &Path)
where
    T: serde::de::DeserializeOwned + serde::Serialize + PartialEq + std::fmt::Debug,
{
    let value: T = read_json(path).unwrap();
    let again: T = serde_json::from_str(&serde_json::to_string(&value).unwrap()).unwrap();
    assert_eq!(value, again);
}

#[test]
fn simulate_apex_with_still_pivot_stays_upright() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        "simulate",
        &scenarios().join("stationary.toml"),
        tmp.path(),
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_trajectory(&tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 5 * 2048 + 1);
    assert!(rows.iter().all(|r| r.z == 1.0 && r.f == 0.0));
    let summary: SimulationSummary = read_json(&tmp.path().join("summary.json")).unwrap();
    assert_eq!(summary.min_z, 1.0);
    assert_eq!(summary.t1, 5.0 * TAU);
    round_trips::<SimulationSummary>(&tmp.path().join("summary.json"));
}

#[test]
fn simulate_reference_from_apex_leaves_upper_hemisphere() {
    // the periodic orbit is a saddle of the period map, so the apex start
    // does not relax onto it and the pendulum falls
    let tmp = TempDir::new().unwrap();
    let o = run(
        "simulate",
        &scenarios().join("reference.toml"),
        tmp.path(),
        &["--periods", "100"],
    );
    assert_eq!(code(&o), 0);
    let summary: SimulationSummary = read_json(&tmp.path().join("summary.json")).unwrap();
    assert!(summary.min_z < 0.0);
    assert!(summary.max_constraint_drift <= 1e-9);
    assert_eq!(summary.samples, 100 * 2048 + 1);
}

#[test]
fn simulate_divergence_keeps_partial_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "[params]\nmass = 1.0\ngravity = 1.0\nfriction = 0.2\n\n[simulate]\nposition = [0.0, 0.0, 1.0]\nvelocity = [1e200, 0.0, 0.0]\n",
    );
    let out = tmp.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(code(&o), 1);
    let err: ErrorReport = read_json(&out.join("error.json")).unwrap();
    assert_eq!(err.kind, "divergence");
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("t,x,y,z,vx,vy,vz,F\n"));
    assert_eq!(
        read_trajectory(&out.join("trajectory.csv")).unwrap().len(),
        err.partial_samples.unwrap()
    );
}

#[test]
fn malformed_config_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("[params]\nmass = 1.0\ngravity = 1.0\n", "friction"),
        ("[params]\nmass = 1.0\ngravity = 1.0\nfriction = 0.2\n[pivot]\nxi_cos = [0.1]\nphase = 2\n", "phase"),
        ("[params]\nmass = -1.0\ngravity = 1.0\nfriction = 0.2\n", "mass"),
        ("[params\nmass = 1.0\n", "line"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(&tmp, text);
        for sub in ["simulate", "certify", "find-orbit"] {
            let o = run(sub, &cfg, &tmp.path().join("out"), &[]);
            assert_eq!(code(&o), 2, "{sub} on {text:?}");
            let err = String::from_utf8_lossy(&o.stderr);
            assert!(err.contains(needle), "{err}");
        }
    }
    let o = run(
        "simulate",
        &tmp.path().join("missing.toml"),
        tmp.path(),
        &[],
    );
    assert_eq!(code(&o), 2);
    let o = pendulum(&["certify", "--out", "x"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn certify_reference_passes_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        "certify",
        &scenarios().join("certify.toml"),
        tmp.path(),
        &["--samples", "16x128x8"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let path = tmp.path().join("certificate.json");
    let report: CertificateReport = read_json(&path).unwrap();
    assert!(report.verdict);
    assert_eq!(report.index, 1);
    assert_eq!(report.shell_samples, 16 * 128 * 8);
    round_trips::<CertificateReport>(&path);
}

#[test]
fn certify_below_threshold_exits_one() {
    let tmp = TempDir::new().unwrap();
    let params = PendulumParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
    let pivot = PivotMotion::circular(0.1, TAU).unwrap();
    let c = 0.5 * energy_threshold(&params, &pivot);
    let o = run(
        "certify",
        &scenarios().join("certify.toml"),
        tmp.path(),
        &["--c", &c.to_string()],
    );
    assert_eq!(code(&o), 1);
    let report: CertificateReport = read_json(&tmp.path().join("certificate.json")).unwrap();
    assert!(!report.verdict);
    assert_eq!(report.c_used, c);
}

#[test]
fn find_orbit_with_still_pivot_returns_apex() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        "find-orbit",
        &scenarios().join("stationary.toml"),
        tmp.path(),
        &[],
    );
    assert_eq!(code(&o), 0);
    let path = tmp.path().join("orbit.json");
    let report: OrbitReport = read_json(&path).unwrap();
    assert!(report.passed() && report.block_certified);
    assert_eq!(report.fixed_point.0.norm(), 0.0);
    assert_eq!(report.min_z, 1.0);
    assert_eq!(report.return_map_spectrum.len(), 4);
    round_trips::<OrbitReport>(&path);
    let rows = read_trajectory(&tmp.path().join("orbit_trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 2049);
}

#[test]
fn find_orbit_pathological_case_terminates() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        "find-orbit",
        &scenarios().join("pathological.toml"),
        tmp.path(),
        &[],
    );
    assert!(matches!(code(&o), 0 | 1));
    if code(&o) == 1 {
        let orbit = tmp.path().join("orbit.json");
        if orbit.exists() {
            assert!(!read_json::<OrbitReport>(&orbit).unwrap().passed());
        } else {
            round_trips::<ErrorReport>(&tmp.path().join("error.json"));
        }
    }
}

#[test]
fn friction_sweep_scales_threshold_and_resumes() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("reference.toml");
    let o = run(
        "sweep",
        &cfg,
        tmp.path(),
        &["--axis", "friction=0.2,0.4,0.8"],
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("value,c_star,converged,falling_free,residual,min_z\n"));
    let records: Vec<SweepRecord> = (0..3)
        .map(|i| read_json(&tmp.path().join(format!("points/point_{i:04}.json"))).unwrap())
        .collect();
    let k = records[0].c_star * records[0].value.powi(2);
    for r in &records {
        assert!((r.c_star * r.value.powi(2) / k - 1.0).abs() <= 1e-9);
        assert!(r.converged && r.falling_free);
    }

    // a rerun reuses stored records...
    let first = tmp.path().join("points/point_0000.json");
    let mut marked = records[0].clone();
    marked.note = Some("kept".into());
    fs::write(&first, serde_json::to_string(&marked).unwrap()).unwrap();
    assert_eq!(
        code(&run(
            "sweep",
            &cfg,
            tmp.path(),
            &["--axis", "friction=0.2,0.4,0.8"]
        )),
        0
    );
    assert_eq!(
        read_json::<SweepRecord>(&first).unwrap().note.as_deref(),
        Some("kept")
    );
    // ...unless the point changed
    assert_eq!(
        code(&run(
            "sweep",
            &cfg,
            tmp.path(),
            &["--axis", "friction=0.3,0.4,0.8"]
        )),
        0
    );
    let redone: SweepRecord = read_json(&first).unwrap();
    assert_eq!(redone.value, 0.3);
    assert_eq!(redone.note, None);
}

#[test]
fn amplitude_zero_sweep_point_is_apex() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        "sweep",
        &scenarios().join("reference.toml"),
        tmp.path(),
        &["--axis", "amplitude=0,0.05"],
    );
    assert_eq!(code(&o), 0);
    let apex: SweepRecord = read_json(&tmp.path().join("points/point_0000.json")).unwrap();
    assert!(apex.pivot.is_stationary());
    assert_eq!(apex.fixed_point.unwrap().0.norm(), 0.0);
    assert_eq!(apex.min_z, Some(1.0));
    let small: SweepRecord = read_json(&tmp.path().join("points/point_0001.json")).unwrap();
    assert_eq!(small.pivot.max_abs_coefficient(), 0.05);
}

#[test]
fn bad_sweep_axes_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("reference.toml");
    for axis in [
        "friction=",
        "friction=0.1:1.0:0",
        "speed=1,2",
        "friction=-0.1,0.2",
    ] {
        let o = run("sweep", &cfg, &tmp.path().join("out"), &["--axis", axis]);
        assert_eq!(code(&o), 2, "{axis}");
    }
}

#[test]
fn worker_count_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("certify.toml");
    let args = [
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--samples",
        "8x64x4",
    ];
    let bin = env!("CARGO_BIN_EXE_pendulum");
    let one = Command::new(bin)
        .args(args)
        .env("PENDULUM_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&one), 0);
    let serial = fs::read(tmp.path().join("certificate.json")).unwrap();
    let many = Command::new(bin)
        .args(args)
        .env("PENDULUM_WORKERS", "4")
        .output()
        .unwrap();
    assert_eq!(code(&many), 0);
    assert_eq!(
        serial,
        fs::read(tmp.path().join("certificate.json")).unwrap()
    );
    let bad = Command::new(bin)
        .args(args)
        .env("PENDULUM_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}
