//! `holoflow portrait`: per-seed trajectory CSVs for the selected flow over a
//! window lattice, a separatrix overlay CSV, and an SVG quick-look.

use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use holoflow_core::flow::{self, TimeRay, Trajectory};
use holoflow_core::ode::{self, End};
use holoflow_core::{classify_separatrix, integrate_newton, integrate_ray, FlowError, HoloFunction};

use crate::config::{fmt_f64, RunConfig};
use crate::svg::SvgCanvas;
use crate::{Failure, FlowKind, PortraitArgs};

struct Row {
    s: f64,
    t: Complex64,
    z: Complex64,
    h: Complex64,
}

struct Curve {
    rows: Vec<Row>,
    status: String,
}

fn curve_from_trajectory(traj: &Trajectory) -> Curve {
    Curve {
        rows: traj
            .samples
            .iter()
            .map(|smp| Row {
                s: smp.s,
                t: smp.t,
                z: smp.z,
                h: smp.h_of_z,
            })
            .collect(),
        status: traj.status.to_string(),
    }
}

/// Integrates one seed of the selected flow along a ray direction.
fn flow_curve(
    h: &HoloFunction,
    kind: FlowKind,
    z0: Complex64,
    theta: f64,
    span: f64,
    config: &RunConfig,
    escape_radius: f64,
) -> Result<Curve> {
    let tol = config.tolerances();
    match kind {
        FlowKind::Holomorphic => {
            let traj = integrate_ray(h, z0, TimeRay::new(theta, span), tol, escape_radius)?;
            Ok(curve_from_trajectory(&traj))
        }
        FlowKind::Newton => {
            match integrate_newton(h, z0, TimeRay::new(theta, span), tol, flow::DEFAULT_GUARD_EPS)
            {
                Ok(traj) => Ok(curve_from_trajectory(&traj)),
                Err(FlowError::CriticalPointAbort { partial, .. }) => {
                    let mut curve = curve_from_trajectory(&partial);
                    curve.status = "critical-point-abort".to_string();
                    Ok(curve)
                }
                Err(e) => Err(e.into()),
            }
        }
        FlowKind::Desingularized => {
            // dz/ds = e^{iθ}·(−h·conj(h′)); not holomorphic, but still a
            // smooth planar field the stepper handles directly.
            let dir = Complex64::from_polar(1.0, theta);
            let rhs = |_s: f64, y: &[Complex64; 1]| match h.eval_all(y[0]) {
                Ok((v, d1, _)) => Ok([dir * (-v * d1.conj())]),
                Err(_) => Err(()),
            };
            let run = ode::integrate(rhs, [z0], span, tol, 0.0, |_, b| {
                b.y[0].norm() > escape_radius
            });
            let status = match run.end {
                End::SpanDone => "completed",
                End::Halted => "escaped",
                _ => "stiffness-abort",
            };
            let mut rows = Vec::with_capacity(run.steps.len());
            for step in &run.steps {
                let z = step.y[0];
                rows.push(Row {
                    s: step.s,
                    t: step.s * dir,
                    z,
                    h: h.value(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
                });
            }
            Ok(Curve {
                rows,
                status: status.to_string(),
            })
        }
    }
}

fn write_curve_csv(path: &std::path::Path, curve: &Curve) -> Result<()> {
    let mut out = String::from("s,t_re,t_im,z_re,z_im,h_re,h_im,status\n");
    for row in &curve.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(row.s),
            fmt_f64(row.t.re),
            fmt_f64(row.t.im),
            fmt_f64(row.z.re),
            fmt_f64(row.z.im),
            fmt_f64(row.h.re),
            fmt_f64(row.h.im),
            curve.status
        )
        .expect("string write");
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run(args: PortraitArgs) -> Result<i32, Failure> {
    let config = args.common.merged_config().map_err(Failure::Config)?;
    let (h, meta) = config.build_function().map_err(Failure::Config)?;
    let out_dir = config.output_dir.clone();
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::Config)?;

    let seeds = config.seed_lattice();
    let span = args.span.unwrap_or(config.portrait_span);
    if !(span > 0.0) {
        return Err(Failure::Config(anyhow::anyhow!("span must be positive")));
    }
    let w = &config.window;
    let corner = [
        Complex64::new(w.re_min, w.im_min),
        Complex64::new(w.re_min, w.im_max),
        Complex64::new(w.re_max, w.im_min),
        Complex64::new(w.re_max, w.im_max),
    ]
    .iter()
    .map(|z| z.norm())
    .fold(0.0f64, f64::max);
    let escape_radius = 2.0 * corner + 1.0;

    // Forward and backward curves per seed, computed in parallel but
    // collected in lattice order.
    let curves: Vec<Result<(Curve, Curve)>> = seeds
        .par_iter()
        .map(|&z0| {
            let fwd = flow_curve(&h, args.flow, z0, 0.0, span, &config, escape_radius)?;
            let bwd = flow_curve(
                &h,
                args.flow,
                z0,
                std::f64::consts::PI,
                span,
                &config,
                escape_radius,
            )?;
            Ok((fwd, bwd))
        })
        .collect();

    let mut canvas = SvgCanvas::new(w.re_min, w.re_max, w.im_min, w.im_max);
    let trajectory_color = match args.flow {
        FlowKind::Holomorphic => "steelblue",
        FlowKind::Newton => "seagreen",
        FlowKind::Desingularized => "slateblue",
    };
    let mut n_files = 0usize;
    for (idx, entry) in curves.iter().enumerate() {
        let (fwd, bwd) = match entry {
            Ok(pair) => pair,
            Err(e) => {
                return Err(Failure::Numeric(anyhow::anyhow!(
                    "seed {idx} failed: {e:#}"
                )))
            }
        };
        let fwd_path = out_dir.join(format!("traj_{idx:04}_fwd.csv"));
        write_curve_csv(&fwd_path, fwd).map_err(Failure::Numeric)?;
        let bwd_path = out_dir.join(format!("traj_{idx:04}_bwd.csv"));
        write_curve_csv(&bwd_path, bwd).map_err(Failure::Numeric)?;
        n_files += 2;
        for curve in [fwd, bwd] {
            let pts: Vec<Complex64> = curve.rows.iter().map(|r| r.z).collect();
            canvas.polyline(&pts, trajectory_color, 0.7);
        }
    }

    // Separatrix overlay: classification of the holomorphic flow of h.
    let mut n_separatrices = 0usize;
    if !args.no_classify {
        let reports: Vec<(Complex64, Result<flow::SeparatrixReport, FlowError>)> = seeds
            .par_iter()
            .map(|&z0| {
                (
                    z0,
                    classify_separatrix(&h, z0, flow::default_escape_radius(z0), config.horizon),
                )
            })
            .collect();
        let mut csv = String::from(
            "z_re,z_im,positive,negative,t_escape_pos,t_escape_neg,status\n",
        );
        for (z0, outcome) in &reports {
            match outcome {
                Ok(report) => {
                    let fmt_opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
                    writeln!(
                        csv,
                        "{},{},{},{},{},{},ok",
                        fmt_f64(z0.re),
                        fmt_f64(z0.im),
                        report.positive,
                        report.negative,
                        fmt_opt(report.t_escape_pos),
                        fmt_opt(report.t_escape_neg),
                    )
                    .expect("string write");
                    if report.positive || report.negative {
                        n_separatrices += 1;
                        canvas.dot(*z0, "orangered", 3.0);
                    }
                }
                Err(_) => {
                    writeln!(
                        csv,
                        "{},{},,,,,inconclusive",
                        fmt_f64(z0.re),
                        fmt_f64(z0.im),
                    )
                    .expect("string write");
                }
            }
        }
        fs::write(out_dir.join("separatrices.csv"), csv)
            .context("writing separatrices.csv")
            .map_err(Failure::Numeric)?;
    }

    fs::write(out_dir.join("portrait.svg"), canvas.finish())
        .context("writing portrait.svg")
        .map_err(Failure::Numeric)?;

    let metadata = json!({
        "command": "portrait",
        "flow": format!("{:?}", args.flow).to_lowercase(),
        "function": meta,
        "window": config.window,
        "tol": config.tol,
        "seed": config.seed,
        "span": span,
        "horizon": config.horizon,
        "seeds": seeds.len(),
        "trajectory_files": n_files,
        "separatrix_seeds": n_separatrices,
    });
    fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("metadata serializes"),
    )
    .context("writing metadata.json")
    .map_err(Failure::Numeric)?;
    println!(
        "portrait: {} seeds, {} trajectory files, {} separatrix seeds -> {}",
        seeds.len(),
        n_files,
        n_separatrices,
        out_dir.display()
    );
    Ok(0)
}
