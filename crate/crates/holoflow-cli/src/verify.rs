//! `holoflow verify`: machine-checks the library's invariants on the
//! configured function and emits a JSON report; exit 0 iff every check holds.

use std::f64::consts::PI;
use std::fs;

use anyhow::Context;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use holoflow_core::flow::{self, TimeRay};
use holoflow_core::hamiltonian::SensitivityBundle;
use holoflow_core::{
    covariant_derivative, curvature_flatness_check, delta_p_closed_form, delta_p_trace_form,
    detect_closed_orbit, flow_map_matrix, integrate_hamiltonian, integrate_newton, integrate_ray,
    metric_frame, momentum_closed_form, orbit_period_analytic, sensitivity_closed_form,
    trivialize_in_time_chart, Direction, HoloFunction, VectorFieldSpec, ZeroTable,
};

use crate::config::RunConfig;
use crate::{Failure, SuiteKind, VerifyArgs};

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    point: Option<[f64; 2]>,
    quantity: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn check(name: &str, point: Option<Complex64>, quantity: &str, value: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        point: point.map(|z| [z.re, z.im]),
        quantity: quantity.to_string(),
        value,
        tolerance,
        pass: value.is_finite() && value <= tolerance,
    }
}

/// In-band check: |value − center| ≤ half_width.
fn check_band(name: &str, quantity: &str, value: f64, center: f64, half_width: f64) -> Check {
    Check {
        name: name.to_string(),
        point: None,
        quantity: quantity.to_string(),
        value,
        tolerance: half_width,
        pass: value.is_finite() && (value - center).abs() <= half_width,
    }
}

/// Points in the window where |h| is not small, drawn with the run seed.
fn sample_points(
    h: &HoloFunction,
    config: &RunConfig,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Vec<Complex64> {
    let w = &config.window;
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < 100 * count {
        guard += 1;
        let z = Complex64::new(
            rng.gen_range(w.re_min..w.re_max),
            rng.gen_range(w.im_min..w.im_max),
        );
        match h.value(z) {
            Ok(v) if v.norm() > 1e-3 => out.push(z),
            _ => {}
        }
    }
    out
}

/// A point with a closed real-time orbit, when the function has centers.
fn orbit_seed(h: &HoloFunction) -> Option<Complex64> {
    match h {
        HoloFunction::CoshShift => Some(Complex64::new(0.5, PI / 2.0) + Complex64::new(0.25, 0.0)),
        HoloFunction::XiApprox { gammas, .. } => {
            Some(Complex64::new(0.5, gammas[0]) + Complex64::new(0.3, 0.0))
        }
        _ => None,
    }
}

fn geometry_suite(h: &HoloFunction, config: &RunConfig, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut checks = Vec::new();
    let pts = sample_points(h, config, rng, 20);

    // Christoffels against the Koszul finite-difference oracle.
    let mut worst = 0.0f64;
    let mut worst_pt = None;
    for &z in &pts {
        let frame = match metric_frame(h, z) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let delta = 1e-6 * (1.0 + z.norm());
        let g_at = |z: Complex64| metric_frame(h, z).map(|f| [f.g11, f.g22]);
        let offs = [Complex64::new(delta, 0.0), Complex64::new(0.0, delta)];
        let mut dg = [[0.0f64; 2]; 2];
        let mut singular = false;
        for l in 0..2 {
            match (g_at(z + offs[l]), g_at(z - offs[l])) {
                (Ok(gp), Ok(gm)) => {
                    for k in 0..2 {
                        dg[l][k] = (gp[k] - gm[k]) / (2.0 * delta);
                    }
                }
                _ => singular = true,
            }
        }
        if singular {
            continue;
        }
        let ginv = [frame.ginv11, frame.ginv22];
        let analytic = [frame.gamma1, frame.gamma2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let t1 = if i == k { dg[j][i] } else { 0.0 };
                    let t2 = if j == k { dg[i][j] } else { 0.0 };
                    let t3 = if i == j { dg[k][i] } else { 0.0 };
                    let fd = ginv[k] * 0.5 * (t1 + t2 - t3);
                    let err = (analytic[k][i][j] - fd).abs() / (1.0 + fd.abs());
                    if err > worst {
                        worst = err;
                        worst_pt = Some(z);
                    }
                }
            }
        }
    }
    checks.push(check(
        "christoffel_vs_koszul",
        worst_pt,
        "max |analytic - FD| / (1 + |FD|)",
        worst,
        1e-6,
    ));

    // Geodesic and parallel-field residuals.
    let mut worst_geo = 0.0f64;
    let mut worst_par = 0.0f64;
    for &z in &pts {
        let (hv, dh) = match h.eval_all(z) {
            Ok((v, d, _)) => (v, d),
            Err(_) => continue,
        };
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let scale = 1.0 + dh.norm() * hv.norm() * (1.0 + a.hypot(b));
        if let Ok(geo) =
            covariant_derivative(h, &VectorFieldSpec::HoloSplit(h.clone()), Direction::AlongH, z)
        {
            worst_geo = worst_geo.max(geo.norm() / scale);
        }
        let field = VectorFieldSpec::LinearComb { a, b };
        for dir in [Direction::AlongH, Direction::AlongIH] {
            if let Ok(r) = covariant_derivative(h, &field, dir, z) {
                worst_par = worst_par.max(r.norm() / scale);
            }
        }
    }
    checks.push(check(
        "geodesic_residual",
        None,
        "max |∇_h h| / scale",
        worst_geo,
        1e-12,
    ));
    checks.push(check(
        "parallel_field_residual",
        None,
        "max |∇ (A·h)| / scale",
        worst_par,
        1e-12,
    ));

    // Flatness: O(step²) decay of the FD Riemann tensor.
    if let Some(&z) = pts.first() {
        match (
            curvature_flatness_check(h, z, 1e-2),
            curvature_flatness_check(h, z, 5e-3),
        ) {
            (Ok(r1), Ok(r2)) if r2 > 0.0 => {
                checks.push(check_band(
                    "curvature_halving_ratio",
                    "R(step)/R(step/2)",
                    r1 / r2,
                    4.0,
                    0.5,
                ));
            }
            (Ok(r1), Ok(_)) => {
                // Exactly zero curvature (constant |h|): flat by inspection.
                checks.push(check("curvature_exact_zero", Some(z), "max |R|", r1, 1e-15));
            }
            _ => {}
        }
        if let Ok(r) = curvature_flatness_check(h, z, 1e-4) {
            checks.push(check(
                "curvature_small_at_1e-4",
                Some(z),
                "max |R| at fd_step 1e-4",
                r,
                1e-5,
            ));
        }
    }

    // Time-chart pullback along a short trajectory.
    if let Some(&z) = pts.first() {
        if let Ok(traj) = integrate_ray(h, z, TimeRay::real(1.0), config.tolerances(), 1e9) {
            if let Ok(samples) = trivialize_in_time_chart(h, &traj) {
                let worst = samples
                    .iter()
                    .map(|s| {
                        (s.g_tangent - 0.5)
                            .abs()
                            .max(s.g_cross.abs())
                            .max((s.g_normal - 0.5).abs())
                    })
                    .fold(0.0, f64::max);
                checks.push(check(
                    "time_chart_pullback",
                    Some(z),
                    "max |g - (1/2, 0, 1/2)|",
                    worst,
                    1e-12,
                ));
            }
        }
    }
    checks
}

fn hamiltonian_suite(h: &HoloFunction, config: &RunConfig, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut checks = Vec::new();
    let tol = config.tolerances();
    let pts = sample_points(h, config, rng, 40);

    // Closed-form vs joint integration on random configurations.
    let mut worst_cf = 0.0f64;
    let mut tried = 0;
    for &z0 in &pts {
        if tried >= 15 {
            break;
        }
        let draw =
            |rng: &mut ChaCha8Rng| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (p0, dz0, dp0) = (draw(rng), draw(rng), draw(rng));
        let span = rng.gen_range(0.05..0.5);
        let theta = rng.gen_range(0.0..2.0 * PI);
        let bundle = SensitivityBundle::new(z0, p0, dz0, dp0);
        let traj = match integrate_hamiltonian(h, &bundle, TimeRay::new(theta, span), tol) {
            Ok(t) if t.status == flow::TrajectoryStatus::Completed => t,
            _ => continue,
        };
        let end = traj.last();
        if h.value(end.z).map(|v| v.norm() < 1e-3).unwrap_or(true) {
            continue;
        }
        tried += 1;
        let p_cf = momentum_closed_form(h, end.z, z0, p0).unwrap();
        let dz_cf = sensitivity_closed_form(h, end.z, z0, dz0).unwrap();
        let dp_cf = delta_p_closed_form(h, end.z, z0, p0, dz0, dp0).unwrap();
        worst_cf = worst_cf
            .max((end.p - p_cf).norm() / (1.0 + p_cf.norm()))
            .max((end.dz - dz_cf).norm() / (1.0 + dz_cf.norm()))
            .max((end.dp - dp_cf).norm() / (1.0 + dp_cf.norm()));
    }
    checks.push(check(
        "closed_form_vs_ode",
        None,
        "max rel residual over random configs",
        worst_cf,
        1e-7,
    ));

    // Conservation around a closed orbit, when the function has centers.
    if let Some(z0) = orbit_seed(h) {
        if let Ok(period) = detect_closed_orbit(h, z0, tol, config.horizon) {
            let bundle = SensitivityBundle::new(
                z0,
                Complex64::new(0.7, 0.2),
                Complex64::new(0.1, -0.4),
                Complex64::new(0.3, 0.9),
            );
            if let Ok(traj) = integrate_hamiltonian(h, &bundle, TimeRay::real(period), tol) {
                let ham0 = traj.samples[0].ham;
                let pdz0 = bundle.p0 * bundle.dz0;
                let mut worst_h = 0.0f64;
                let mut worst_pdz = 0.0f64;
                for smp in &traj.samples {
                    worst_h = worst_h.max((smp.ham - ham0).norm() / ham0.norm());
                    worst_pdz = worst_pdz.max((smp.p * smp.dz - pdz0).norm() / pdz0.norm());
                }
                checks.push(check(
                    "hamiltonian_conservation",
                    Some(z0),
                    "max rel H drift over one orbit",
                    worst_h,
                    1e-8,
                ));
                checks.push(check(
                    "p_dz_conservation",
                    Some(z0),
                    "max rel p·Δz drift over one orbit",
                    worst_pdz,
                    1e-8,
                ));
            }
        }
    }

    // Flow-map matrix: anchor identity, det, closed-form reproduction.
    if pts.len() >= 2 {
        let (z0, z) = (pts[0], pts[1]);
        let p0 = Complex64::new(0.8, -0.2);
        if let Ok(m0) = flow_map_matrix(h, z0, z0, p0) {
            let dev = (m0.m11 - 1.0).norm().max((m0.m22 - 1.0).norm()).max(m0.k_zp().norm());
            checks.push(check(
                "flow_map_identity_at_anchor",
                Some(z0),
                "max |M(z0→z0) - I|",
                dev,
                1e-10,
            ));
        }
        if let Ok(m) = flow_map_matrix(h, z, z0, p0) {
            checks.push(check(
                "flow_map_det_one",
                Some(z),
                "|det M - 1|",
                (m.det() - 1.0).norm(),
                1e-12,
            ));
            let (dz0, dp0) = (Complex64::new(0.3, 1.0), Complex64::new(-0.5, 0.2));
            let (dz, dp) = m.apply(dz0, dp0);
            let dz_cf = sensitivity_closed_form(h, z, z0, dz0).unwrap();
            let dp_cf = delta_p_closed_form(h, z, z0, p0, dz0, dp0).unwrap();
            let dev = ((dz - dz_cf).norm() / (1.0 + dz_cf.norm()))
                .max((dp - dp_cf).norm() / (1.0 + dp_cf.norm()));
            checks.push(check(
                "flow_map_reproduces_closed_forms",
                Some(z),
                "max rel deviation",
                dev,
                1e-10,
            ));
        }
    }

    // Zero-sum form of Δp against the closed form (ξ-approximant only).
    if let HoloFunction::XiApprox { gammas, .. } = h {
        let table = ZeroTable::from_gammas(gammas.clone(), "verify").unwrap();
        let m = gammas.len();
        let mut worst = 0.0f64;
        for pair in pts.chunks(2).take(8) {
            if pair.len() < 2 {
                break;
            }
            let (z0, z) = (pair[0], pair[1]);
            let (p0, dz0, dp0) = (
                Complex64::new(0.4, -0.3),
                Complex64::new(1.0, 2.0),
                Complex64::new(-0.7, 0.1),
            );
            if let (Ok(a), Ok(b)) = (
                delta_p_closed_form(h, z, z0, p0, dz0, dp0),
                delta_p_trace_form(&table, m, z, z0, p0, dz0, dp0),
            ) {
                worst = worst.max((a - b).norm() / (1.0 + a.norm()));
            }
        }
        checks.push(check(
            "delta_p_trace_vs_closed",
            None,
            "max rel gap between the two routes",
            worst,
            1e-10,
        ));
    }
    checks
}

fn flows_suite(
    h: &HoloFunction,
    config: &RunConfig,
    rng: &mut ChaCha8Rng,
    out_dir: &std::path::Path,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let tol = config.tolerances();
    let pts = sample_points(h, config, rng, 6);

    // Newton-flow conservation laws along both ray directions.
    let mut worst_phase = 0.0f64;
    let mut worst_mod = 0.0f64;
    let mut worst_imag = 0.0f64;
    for &z0 in pts.iter().take(3) {
        if h.deriv(z0).map(|d| d.norm() < 1e-6).unwrap_or(true) {
            continue;
        }
        if let Ok(traj) = integrate_newton(h, z0, TimeRay::real(1.5), tol, 1e-8) {
            let h0 = traj.samples[0].h_of_z;
            for smp in &traj.samples {
                worst_phase = worst_phase.max((smp.h_of_z / h0).arg().abs());
                worst_mod = worst_mod
                    .max((smp.h_of_z.norm() - h0.norm() * (-smp.s).exp()).abs() / h0.norm());
            }
        }
        if let Ok(traj) = integrate_newton(h, z0, TimeRay::imaginary(1.5), tol, 1e-8) {
            let m0 = traj.samples[0].h_of_z.norm();
            for smp in &traj.samples {
                worst_imag = worst_imag.max((smp.h_of_z.norm() - m0).abs() / m0);
            }
        }
    }
    checks.push(check(
        "newton_phase_conservation",
        None,
        "max |arg h - arg h0| along θ=0",
        worst_phase,
        1e-8,
    ));
    checks.push(check(
        "newton_modulus_decay",
        None,
        "max | |h| - |h0| e^{-s} | / |h0|",
        worst_mod,
        1e-8,
    ));
    checks.push(check(
        "newton_imaginary_modulus",
        None,
        "max rel |h| drift along θ=π/2",
        worst_imag,
        1e-8,
    ));

    // Orthogonality of the two complex-time field directions (exact).
    let mut worst_orth = 0.0f64;
    for &z in &pts {
        if let Ok(v) = h.value(z) {
            let w = Complex64::new(0.0, 1.0) * v;
            worst_orth = worst_orth.max((v.re * w.re + v.im * w.im).abs());
        }
    }
    checks.push(check(
        "complex_time_orthogonality",
        None,
        "max |⟨h, ih⟩|",
        worst_orth,
        1e-15,
    ));

    // Analytic vs detected period at a small orbit, for center-bearing kinds.
    if let Some(z0) = orbit_seed(h) {
        let center = match h {
            HoloFunction::CoshShift => Complex64::new(0.5, PI / 2.0),
            HoloFunction::XiApprox { gammas, .. } => Complex64::new(0.5, gammas[0]),
            _ => unreachable!("orbit_seed covers only center-bearing kinds"),
        };
        if let (Ok(analytic), Ok(detected)) = (
            orbit_period_analytic(h, center),
            detect_closed_orbit(h, center + Complex64::new(1e-3, 0.0), tol, config.horizon),
        ) {
            checks.push(check(
                "small_orbit_period_law",
                Some(z0),
                "|detected - analytic| at radius 1e-3",
                (detected - analytic.re).abs(),
                1e-4,
            ));
        }
    }

    // Emitted-file contract: write one trajectory CSV, read it back, verify
    // the h column against fresh evaluation and the s column's monotonicity.
    if let Some(&z0) = pts.first() {
        if let Ok(traj) = integrate_ray(h, z0, TimeRay::real(1.0), tol, 1e9) {
            let path = out_dir.join("verify_trajectory.csv");
            let written = traj.to_csv();
            if fs::write(&path, &written).is_ok() {
                let text = fs::read_to_string(&path).unwrap_or_default();
                let mut worst = 0.0f64;
                let mut prev_s = f64::NEG_INFINITY;
                let mut rows = 0usize;
                for line in text.lines().skip(1) {
                    let cols: Vec<&str> = line.split(',').collect();
                    if cols.len() != 8 {
                        worst = f64::INFINITY;
                        break;
                    }
                    let s: f64 = cols[0].parse().unwrap_or(f64::NAN);
                    let z = Complex64::new(
                        cols[3].parse().unwrap_or(f64::NAN),
                        cols[4].parse().unwrap_or(f64::NAN),
                    );
                    let h_col = Complex64::new(
                        cols[5].parse().unwrap_or(f64::NAN),
                        cols[6].parse().unwrap_or(f64::NAN),
                    );
                    if s <= prev_s {
                        worst = f64::INFINITY;
                        break;
                    }
                    prev_s = s;
                    rows += 1;
                    if let Ok(v) = h.value(z) {
                        worst = worst.max((v - h_col).norm() / (1.0 + v.norm()));
                    }
                }
                if rows == 0 {
                    worst = f64::INFINITY;
                }
                checks.push(check(
                    "trajectory_csv_readback",
                    Some(z0),
                    "max rel |h(z_row) - h_row| over emitted rows",
                    worst,
                    1e-12,
                ));
            }
        }
    }
    checks
}

pub fn run(args: VerifyArgs) -> Result<i32, Failure> {
    let config = args.common.merged_config().map_err(Failure::Config)?;
    // Configuration problems (including a corrupt zero table) must surface
    // before any suite runs.
    let (h, meta) = config.build_function().map_err(Failure::Config)?;
    let out_dir = config.output_dir.clone();
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::Config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();
    let suites: Vec<&str> = match args.suite {
        SuiteKind::Geometry => vec!["geometry"],
        SuiteKind::Hamiltonian => vec!["hamiltonian"],
        SuiteKind::Flows => vec!["flows"],
        SuiteKind::All => vec!["geometry", "hamiltonian", "flows"],
    };
    for suite in &suites {
        let mut batch = match *suite {
            "geometry" => geometry_suite(&h, &config, &mut rng),
            "hamiltonian" => hamiltonian_suite(&h, &config, &mut rng),
            "flows" => flows_suite(&h, &config, &mut rng, &out_dir),
            _ => unreachable!(),
        };
        for c in &mut batch {
            c.name = format!("{suite}.{}", c.name);
        }
        checks.extend(batch);
    }

    let passed = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "[verify] {} {:<44} value {:.3e} tolerance {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    let report = json!({
        "command": "verify",
        "suite": suites,
        "function": meta,
        "seed": config.seed,
        "checks": checks,
        "passed": passed,
    });
    fs::write(
        out_dir.join("verify_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .context("writing verify_report.json")
    .map_err(Failure::Numeric)?;
    if !passed {
        eprintln!(
            "holoflow: verify: {} check(s) failed",
            checks.iter().filter(|c| !c.pass).count()
        );
    }
    Ok(if passed { 0 } else { 1 })
}
