use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cdm-eit"));
    cmd.args(args).arg("--out").arg(out).env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("CDM_EIT_THREADS", t),
        None => cmd.env_remove("CDM_EIT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// A cloud of a dozen atoms and a coarse grid, so a spectrum takes well under a second.
const SMALL: &[&str] = &[
    "--set", "cloud.radius_kr=3",
    "--set", "cloud.thickness_kl=3",
    "--set", "cloud.density=0.1",
    "--set", "grid.points=11",
    "--set", "ensemble.realizations=2",
    "--set", "detector.radial_nodes=16",
    "--set", "detector.angular_nodes=16",
];

fn with(extra: &[&'static str]) -> Vec<&'static str> {
    SMALL.iter().copied().chain(extra.iter().copied()).collect()
}

#[test]
fn oracle_reference_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "oracle",
            "--set", "cloud.radius_kr=50",
            "--set", "cloud.thickness_kl=40",
            "--set", "grid.delta1_min=0.125",
            "--set", "grid.delta1_max=0.125",
            "--set", "grid.points=1",
        ],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("oracle.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta1_over_gamma,sigma33,sigma_sc_k2,b"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 0.125);
    assert!((row[3] - 0.36).abs() < 0.02, "b = {}", row[3]);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["runs"][0]["diagnostics"]["atom_count"], 3142);
}

#[test]
fn empty_cloud_gives_flat_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--set", "cloud.density=0", "--set", "grid.points=5"], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for mode in ["scalar", "none"] {
        let csv = read(dir.path().join(mode).join("spectrum.csv"));
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("1")), "{csv}");
        let metrics: serde_json::Value = serde_json::from_str(&read(dir.path().join(mode).join("metrics.json"))).unwrap();
        assert!(metrics["fwhm"].is_null());
        assert!(metrics["window_error"].is_string());
    }
}

#[test]
fn config_errors_exit_2_and_list_every_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep"], dir.path(), None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.values"));

    let o = run(
        &["spectrum", "--set", "cloud.radius_kr=-1", "--set", "detector.s_max_fraction=2"],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cloud.radius_kr") && err.contains("detector.s_max_fraction"), "{err}");

    let o = run(&["spectrum", "--set", "cloud.radius=3"], dir.path(), None);
    assert_eq!(code(&o), 2);
    let o = run(&["spectrum"], dir.path(), Some("zero"));
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[cloud]\ndensity = 0.0\n\n[grid]\npoints = 3\n\n[physics]\nmodes = [\"vectorial\"]\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--set", "grid.points=4"], &out, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("scalar").exists());
    assert_eq!(read(out.join("vectorial/spectrum.csv")).lines().count(), 5);
    let manifest: serde_json::Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["config"]["grid"]["points"], 4);
    assert_eq!(manifest["config"]["physics"]["modes"][0], "vectorial");
    assert!(manifest["rng_algorithm"].as_str().unwrap().contains("chacha20"));
    assert!(manifest["config"]["detector"]["z0_offset_k"].is_number());
}

#[test]
fn outputs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let mut args = vec!["spectrum"];
    args.extend(SMALL);
    assert_eq!(code(&run(&args, &a, Some("1"))), 0);
    assert_eq!(code(&run(&args, &b, Some("3"))), 0);
    let manifest = a.join("manifest.json");
    assert_eq!(
        code(&run(&["spectrum", "--from-manifest", manifest.to_str().unwrap()], &c, None)),
        0
    );
    for file in ["scalar/spectrum.csv", "scalar/metrics.json", "none/spectrum.csv", "none/metrics.json"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file} differs across thread counts");
        assert_eq!(x, std::fs::read(c.join(file)).unwrap(), "{file} differs on re-run from manifest");
    }
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["runs"][0]["seeds"].as_array().unwrap().len(), 2);
    assert_eq!(m["threads"], 1);
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep"];
    args.extend(with(&["--set", "sweep.values=[0.05, 0.1]", "--set", "physics.modes=[\"none\"]"]));
    let o = run(&args, dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(dir.path().join("summary.csv"));
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "axis_value,fwhm_mean,fwhm_stderr,tmin_mean,tmin_stderr,mode");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.05,") && lines[1].ends_with(",none"));
    assert!(dir.path().join("none/density=0.1/metrics.json").exists());
    assert!(dir.path().join("none/density=0.05/spectrum.csv").exists());
}

#[test]
fn partial_sweep_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep"];
    // The empty cloud is stationary at once; the other point cannot converge in time.
    args.extend(with(&[
        "--set", "sweep.values=[0.0, 0.1]",
        "--set", "physics.modes=[\"scalar\"]",
        "--set", "solver.t_max=0.5",
    ]));
    let o = run(&args, dir.path(), None);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("scalar/density=0.1/FAILED").exists());
    assert!(dir.path().join("scalar/density=0/spectrum.csv").exists());
    let summary = read(dir.path().join("summary.csv"));
    assert!(summary.lines().any(|l| l == "0.1,,,,,scalar"), "{summary}");
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(m["runs"][1]["status"], "failed");
}

#[test]
fn convergence_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["spectrum"];
    args.extend(with(&["--set", "solver.t_max=0.5"]));
    let o = run(&args, dir.path(), None);
    assert_eq!(code(&o), 3);
    assert!(read(dir.path().join("scalar/FAILED")).contains("not reached"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn stirap_without_drive_stays_in_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["stirap"];
    args.extend(with(&["--set", "stirap.omega_max=0", "--set", "stirap.t_end=20"]));
    let o = run(&args, dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for mode in ["none", "scalar", "vectorial"] {
        let csv = read(dir.path().join(mode).join("stirap.csv"));
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_gamma,mean_s11,mean_s22,mean_s33,omega1,omega2"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 21);
        assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("1")));
    }
}

#[test]
fn stirap_transfers_independent_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["stirap"];
    args.extend(with(&["--set", "physics.modes=[\"none\"]"]));
    let o = run(&args, dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("none/stirap.csv"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 200.0);
    assert!(last[1] < 1e-3, "final s11 {}", last[1]);
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert!(m["runs"][0]["diagnostics"]["final_s11"]["mean"].as_f64().unwrap() < 1e-3);
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate"], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("validation.json"))).unwrap();
    assert!(report.as_array().unwrap().iter().all(|c| c["passed"] == true));
}
