//! End-to-end tests of the `holoflow` binary: exit codes, file contracts and
//! output determinism.

use std::path::Path;
use std::process::{Command, Output};

fn holoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|_| panic!("missing {}", path.display()))
}

#[test]
fn empty_window_exits_2() {
    let out = holoflow(&[
        "portrait",
        "--kind",
        "cosh",
        "--im-min",
        "2.0",
        "--im-max",
        "-2.0",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn degenerate_surface_anchor_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = holoflow(&[
        "surface",
        "--m",
        "1",
        "--z0",
        "0.5,14.134725141734693790",
        "--t-re-steps",
        "3",
        "--t-re-max",
        "0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn corrupt_zero_table_exits_2_before_suites() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("bad_zeros.txt");
    std::fs::write(&table, "21.0\n14.1\n").unwrap();
    let out = holoflow(&[
        "verify",
        "--suite",
        "all",
        "--kind",
        "xi-approx",
        "--m",
        "1",
        "--zero-table",
        table.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(
        !dir.path().join("verify_report.json").exists(),
        "no suite may run on a corrupt table"
    );
}

#[test]
fn verify_geometry_on_cosh_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = holoflow(&[
        "verify",
        "--suite",
        "geometry",
        "--kind",
        "cosh",
        "--re-min=-2",
        "--re-max",
        "3",
        "--im-min",
        "0.2",
        "--im-max",
        "2.9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = read(&dir.path().join("verify_report.json"));
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(parsed["passed"], true);
    assert!(parsed["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn orbit_study_without_return_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // A separatrix seed of the cosh flow never returns to its section.
    let out = holoflow(&[
        "orbit-study",
        "--kind",
        "cosh",
        "--z0",
        "1.5,0",
        "--horizon",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn coarse_surface_lattice_retains_partial_grid_and_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = holoflow(&[
        "surface",
        "--m",
        "3",
        "--z0",
        "2,16",
        "--t-re-max",
        "2",
        "--t-re-steps",
        "21",
        "--t-im-max",
        "6.2832",
        "--t-im-steps",
        "33",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let surface = read(&dir.path().join("surface.json"));
    let parsed: serde_json::Value = serde_json::from_str(&surface).unwrap();
    // Partial grid: traced nodes are pairs, untraced nodes are null.
    let sheet0 = parsed["sheets"][0].as_array().unwrap();
    assert!(sheet0.iter().any(|v| v.is_array()));
    assert!(sheet0.iter().any(|v| v.is_null()));
    let meta = read(&dir.path().join("metadata.json"));
    let parsed: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert!(parsed["aborted_at_node"].is_u64());
    // The traced part still satisfies the constant-phase contract.
    assert!(parsed["constant_phase_residual_max"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn portrait_outputs_are_deterministic() {
    let run = |dir: &Path| {
        let out = holoflow(&[
            "portrait",
            "--kind",
            "cosh",
            "--re-min=-1",
            "--re-max",
            "2",
            "--im-min",
            "0.3",
            "--im-max",
            "2.8",
            "--density",
            "3",
            "--span",
            "6",
            "--horizon",
            "60",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run(dir_a.path());
    run(dir_b.path());
    for name in [
        "traj_0000_fwd.csv",
        "traj_0004_bwd.csv",
        "traj_0008_fwd.csv",
        "separatrices.csv",
        "metadata.json",
        "portrait.svg",
    ] {
        let a = read(&dir_a.path().join(name));
        let b = read(&dir_b.path().join(name));
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn portrait_csv_columns_are_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = holoflow(&[
        "portrait",
        "--kind",
        "cosh",
        "--re-min",
        "0",
        "--re-max",
        "1",
        "--im-min",
        "1",
        "--im-max",
        "2",
        "--density",
        "2",
        "--span",
        "2",
        "--no-classify",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = read(&dir.path().join("traj_0000_fwd.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "s,t_re,t_im,z_re,z_im,h_re,h_im,status");
    let row = lines.next().unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols.len(), 8);
    // 17 significant digits: mantissa with 16 fractional digits.
    assert!(
        cols[0].contains('.') && cols[0].split('.').nth(1).unwrap().split('e').next().unwrap().len() == 16,
        "row {row}"
    );
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    std::fs::write(
        &config_path,
        serde_json::json!({
            "function": {"kind": "xi-approx", "m": 2},
            "window": {"re_min": -1.0, "re_max": 2.0, "im_min": 10.0, "im_max": 20.0, "density": 2},
            "output_dir": dir.path().join("ignored"),
        })
        .to_string(),
    )
    .unwrap();
    let out_dir = dir.path().join("actual");
    let out = holoflow(&[
        "verify",
        "--suite",
        "hamiltonian",
        "--config",
        config_path.to_str().unwrap(),
        "--m",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = read(&out_dir.join("verify_report.json"));
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    // The --m flag overrides the config file value.
    assert_eq!(parsed["function"]["m"], 1);
}

#[test]
fn unknown_kind_exits_2() {
    let out = holoflow(&["verify", "--suite", "flows", "--kind", "zeta"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}
