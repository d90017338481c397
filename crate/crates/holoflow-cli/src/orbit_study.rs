//! `holoflow orbit-study`: one full closed orbit, with normalized direction
//! fields and unwrapped phases for Δz, p and Δp per initial value, plus the
//! angle-preservation / counter-rotation / winding summary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, Context, Result};
use num_complex::Complex64;
use serde_json::json;

use holoflow_core::flow::closed_orbit;
use holoflow_core::hamiltonian::{
    delta_p_closed_form, momentum_closed_form, sensitivity_closed_form, unwrapped_phase_series,
    HamiltonianError,
};
use holoflow_core::Trajectory;

use crate::config::fmt_f64;
use crate::{Failure, OrbitStudyArgs};

/// Phase series plus normalized directions for one quantity along the orbit.
struct DirectionSeries {
    label: String,
    rows: Vec<(f64, Complex64, f64)>, // (s, unit direction, unwrapped arg)
}

fn series_for<F>(
    orbit: &Trajectory,
    label: String,
    f: F,
) -> Result<DirectionSeries, HamiltonianError>
where
    F: FnMut(Complex64) -> Result<Complex64, HamiltonianError> + Copy,
{
    let phases = unwrapped_phase_series(orbit, f)?;
    let mut g = f;
    let mut rows = Vec::with_capacity(phases.len());
    for (smp, (s, arg)) in orbit.samples.iter().zip(&phases) {
        let v = g(smp.z)?;
        let dir = if v.norm() > 0.0 {
            v / v.norm()
        } else {
            Complex64::new(0.0, 0.0)
        };
        rows.push((*s, dir, *arg));
    }
    Ok(DirectionSeries {
        label,
        rows,
    })
}

fn write_series(out_dir: &std::path::Path, series: &DirectionSeries) -> Result<()> {
    let mut csv = String::from("s,dir_re,dir_im,arg_unwrapped\n");
    for (s, dir, arg) in &series.rows {
        writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(*s),
            fmt_f64(dir.re),
            fmt_f64(dir.im),
            fmt_f64(*arg),
        )
        .expect("string write");
    }
    let path = out_dir.join(format!("{}.csv", series.label));
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn advance(series: &DirectionSeries) -> f64 {
    series.rows.last().unwrap().2 - series.rows[0].2
}

/// Largest deviation of the pairwise unwrapped-phase gap from its start.
fn gap_drift(a: &DirectionSeries, b: &DirectionSeries) -> f64 {
    let gap0 = a.rows[0].2 - b.rows[0].2;
    a.rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| ((x.2 - y.2) - gap0).abs())
        .fold(0.0, f64::max)
}

fn gap_range(a: &DirectionSeries, b: &DirectionSeries) -> f64 {
    let gaps: Vec<f64> = a.rows.iter().zip(&b.rows).map(|(x, y)| x.2 - y.2).collect();
    let max = gaps.iter().cloned().fold(f64::MIN, f64::max);
    let min = gaps.iter().cloned().fold(f64::MAX, f64::min);
    max - min
}

pub fn run(args: OrbitStudyArgs) -> Result<i32, Failure> {
    let config = args.common.merged_config().map_err(Failure::Config)?;
    let (h, meta) = config.build_function().map_err(Failure::Config)?;
    let out_dir = config.output_dir.clone();
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::Config)?;

    let z0 = args.z0;
    let p0 = args.p0;
    let h0 = h.value(z0).map_err(|e| Failure::Config(anyhow!("{e}")))?;
    if h0.norm() < 1e-12 {
        return Err(Failure::Config(anyhow!(
            "z0 = {z0} is an equilibrium of h; no orbit to follow"
        )));
    }

    let orbit = closed_orbit(&h, z0, config.tolerances(), config.horizon)
        .map_err(|e| Failure::Numeric(anyhow!("no closed orbit through {z0}: {e}")))?;
    let period = orbit.period().expect("closed orbit has a period");
    fs::write(out_dir.join("orbit.csv"), orbit.to_csv())
        .context("writing orbit.csv")
        .map_err(Failure::Numeric)?;

    // Default sensitivity pair: tangential and normal to the orbit.
    let dz0_list = if args.dz0.is_empty() {
        vec![h0, Complex64::new(0.0, 1.0) * h0]
    } else {
        args.dz0.clone()
    };
    let dp0_list = if args.dp0.is_empty() {
        vec![Complex64::new(0.6, 0.1), Complex64::new(-0.3, -0.8)]
    } else {
        args.dp0.clone()
    };

    let numeric = |e: HamiltonianError| Failure::Numeric(anyhow!("{e}"));

    let hr = &h;
    let mut dz_series = Vec::new();
    let mut tangent_flags = Vec::new();
    let mut normal_flags = Vec::new();
    for (i, &dz0) in dz0_list.iter().enumerate() {
        let s = series_for(&orbit, format!("dz_{i}"), move |z| {
            sensitivity_closed_form(hr, z, z0, dz0)
        })
        .map_err(numeric)?;
        write_series(&out_dir, &s).map_err(Failure::Numeric)?;
        // Tangency is C-linear: alpha = dz0/h(z0) real ⇒ tangent bundle,
        // imaginary ⇒ normal bundle; verified against the sampled field.
        let alpha = dz0 / h0;
        let mut max_im = 0.0f64;
        let mut max_re = 0.0f64;
        for smp in &orbit.samples {
            let hv = h.value(smp.z).map_err(|e| Failure::Numeric(anyhow!("{e}")))?;
            if hv.norm() < 1e-14 {
                continue;
            }
            let ratio = sensitivity_closed_form(hr, smp.z, z0, dz0).map_err(numeric)? / hv;
            max_im = max_im.max(ratio.im.abs());
            max_re = max_re.max(ratio.re.abs());
        }
        let scale = alpha.norm().max(1e-300);
        tangent_flags.push(max_im <= 1e-8 * scale);
        normal_flags.push(max_re <= 1e-8 * scale);
        dz_series.push(s);
    }

    // Momentum: the given p0 and its perpendicular companion i·p0.
    let p0_list = [p0, Complex64::new(0.0, 1.0) * p0];
    let mut p_series = Vec::new();
    for (i, &p0i) in p0_list.iter().enumerate() {
        let s = series_for(&orbit, format!("p_{i}"), move |z| {
            momentum_closed_form(hr, z, z0, p0i)
        })
        .map_err(numeric)?;
        write_series(&out_dir, &s).map_err(Failure::Numeric)?;
        p_series.push(s);
    }

    // Δp for each requested Δp₀, with p₀·Δz₀ ≠ 0 from the first dz0.
    let dz0_for_dp = dz0_list[0];
    let mut dp_series = Vec::new();
    for (i, &dp0) in dp0_list.iter().enumerate() {
        let s = series_for(&orbit, format!("dp_{i}"), move |z| {
            delta_p_closed_form(hr, z, z0, p0, dz0_for_dp, dp0)
        })
        .map_err(numeric)?;
        write_series(&out_dir, &s).map_err(Failure::Numeric)?;
        dp_series.push(s);
    }

    let counter_rotation_drift = {
        let sum0 = dz_series[0].rows[0].2 + p_series[0].rows[0].2;
        dz_series[0]
            .rows
            .iter()
            .zip(&p_series[0].rows)
            .map(|(a, b)| ((a.2 + b.2) - sum0).abs())
            .fold(0.0, f64::max)
    };

    let summary = json!({
        "command": "orbit-study",
        "function": meta,
        "z0": [z0.re, z0.im],
        "p0": [p0.re, p0.im],
        "period": period,
        "winding_dz": dz_series.iter().map(|s| advance(s) / (2.0 * PI)).collect::<Vec<_>>(),
        "winding_p": p_series.iter().map(|s| advance(s) / (2.0 * PI)).collect::<Vec<_>>(),
        "winding_dp": dp_series.iter().map(|s| advance(s) / (2.0 * PI)).collect::<Vec<_>>(),
        "tangent_invariant": tangent_flags,
        "normal_invariant": normal_flags,
        "dz_angle_gap_drift": (dz_series.len() >= 2).then(|| gap_drift(&dz_series[0], &dz_series[1])),
        "p_angle_gap_drift": gap_drift(&p_series[0], &p_series[1]),
        "counter_rotation_drift": counter_rotation_drift,
        "dp_angle_gap_range": (dp_series.len() >= 2).then(|| gap_range(&dp_series[0], &dp_series[1])),
        // Δp is not C-linear in Δp₀ once p₀·Δz₀ ≠ 0, so its pairwise angle
        // gap genuinely varies; anything above the numerical floor counts.
        "dp_angle_gap_varies": (dp_series.len() >= 2)
            .then(|| gap_range(&dp_series[0], &dp_series[1]) > 1e-6),
    });
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .context("writing summary.json")
    .map_err(Failure::Numeric)?;
    println!(
        "orbit-study: period {:.6}, {} dz / {} p / {} dp series -> {}",
        period,
        dz_series.len(),
        p_series.len(),
        dp_series.len(),
        out_dir.display()
    );
    Ok(0)
}
