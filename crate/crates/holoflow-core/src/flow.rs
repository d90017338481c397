//! Complex-time integration of holomorphic and Newton flows.
//!
//! Both flows are integrated along rays t = s·e^{iθ} in the complex time
//! plane with the embedded 5(4) stepper from [`crate::ode`]. Separatrices are
//! classified by finite escape time: escape times across nested radii R, 2R,
//! 4R are Richardson-extrapolated, and only a convergent (finite) blow-up
//! time marks a separatrix — exponential escape, as in the linear flow, does
//! not.

use num_complex::Complex64;
use std::cell::Cell;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use thiserror::Error;

use crate::catalog::{CatalogError, HoloFunction};
use crate::ode::{self, End, Run, Step, Tolerances};
use crate::pole_epsilon;

/// Newton-field guard: |h′| below this makes −h/h′ numerically meaningless.
pub const DEFAULT_GUARD_EPS: f64 = 1e-8;
/// Default integration horizon for classification and orbit detection.
pub const DEFAULT_HORIZON: f64 = 1e3;

/// Default escape radius for a flow started at `z0`.
pub fn default_escape_radius(z0: Complex64) -> f64 {
    1e3 * (1.0 + z0.norm())
}

/// A ray in the complex time plane: t = s·e^{iθ}, s ∈ [0, span].
///
/// θ = 0 is real time, θ = π/2 imaginary time; integrating the field e^{iθ}h
/// along s realizes both directions of the complex-time pair of equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRay {
    pub theta: f64,
    pub span: f64,
}

impl TimeRay {
    pub fn new(theta: f64, span: f64) -> Self {
        TimeRay { theta, span }
    }

    /// Real time: θ = 0.
    pub fn real(span: f64) -> Self {
        TimeRay { theta: 0.0, span }
    }

    /// Imaginary time: θ = π/2.
    pub fn imaginary(span: f64) -> Self {
        TimeRay {
            theta: FRAC_PI_2,
            span,
        }
    }

    /// The unit direction e^{iθ}.
    pub fn direction(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }
}

/// Termination state of an integrated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    /// |z| crossed the escape radius at ray arc length s (refined).
    EscapedAt(f64),
    /// Step size underflowed (or the evaluator overflowed) before escape.
    StiffnessAbort,
    /// Poincaré return detected; the payload is the period.
    ClosedOrbit(f64),
}

impl fmt::Display for TrajectoryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryStatus::Completed => write!(f, "completed"),
            TrajectoryStatus::EscapedAt(s) => write!(f, "escaped-at={s:.16e}"),
            TrajectoryStatus::StiffnessAbort => write!(f, "stiffness-abort"),
            TrajectoryStatus::ClosedOrbit(p) => write!(f, "closed-orbit={p:.16e}"),
        }
    }
}

/// One sample of a complex-time trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    /// Arc length along the ray.
    pub s: f64,
    /// Complex time t = s·e^{iθ}.
    pub t: Complex64,
    pub z: Complex64,
    pub h_of_z: Complex64,
}

/// A sampled complex-time path. Consecutive samples are accepted integrator
/// steps, so they satisfy the local error tolerance.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub status: TrajectoryStatus,
    theta: f64,
    /// dz/ds at each sample, kept for Hermite interpolation.
    derivs: Vec<Complex64>,
}

impl Trajectory {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has samples")
    }

    /// Period when the status is `ClosedOrbit`.
    pub fn period(&self) -> Option<f64> {
        match self.status {
            TrajectoryStatus::ClosedOrbit(p) => Some(p),
            _ => None,
        }
    }

    /// Interpolates z(s) between recorded samples (cubic Hermite); `None`
    /// outside the sampled range.
    pub fn sample_z(&self, s: f64) -> Option<Complex64> {
        let samples = &self.samples;
        if samples.is_empty() || s < samples[0].s || s > samples[samples.len() - 1].s {
            return None;
        }
        let idx = samples.partition_point(|smp| smp.s < s);
        if idx == 0 {
            return Some(samples[0].z);
        }
        let (a, b) = (&samples[idx - 1], &samples[idx.min(samples.len() - 1)]);
        if a.s == b.s {
            return Some(a.z);
        }
        let sa = Step {
            s: a.s,
            y: [a.z],
            f: [self.derivs[idx - 1]],
        };
        let sb = Step {
            s: b.s,
            y: [b.z],
            f: [self.derivs[idx.min(samples.len() - 1)]],
        };
        Some(ode::hermite(&sa, &sb, s)[0])
    }

    /// CSV export: `s,t_re,t_im,z_re,z_im,h_re,h_im,status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t_re,t_im,z_re,z_im,h_re,h_im,status\n");
        for smp in &self.samples {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                smp.s,
                smp.t.re,
                smp.t.im,
                smp.z.re,
                smp.z.im,
                smp.h_of_z.re,
                smp.h_of_z.im,
                self.status
            ));
        }
        out
    }
}

/// Positive/negative separatrix classification of a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixReport {
    pub positive: bool,
    pub negative: bool,
    /// Extrapolated finite blow-up time in forward time, when positive.
    pub t_escape_pos: Option<f64>,
    /// Extrapolated finite blow-up time in backward time, when negative.
    pub t_escape_neg: Option<f64>,
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("tolerances must lie in (0, 1e-2]: rel = {rel:e}, abs = {abs:e}")]
    InvalidTolerance { rel: f64, abs: f64 },
    #[error("escape radius {radius} must exceed |z0| = {z0_abs}")]
    EscapeRadiusTooSmall { radius: f64, z0_abs: f64 },
    #[error("ray span must be nonnegative, got {0}")]
    NegativeSpan(f64),
    #[error("Newton field near a critical point: |h'| = {dh_abs:.3e} at z = {z}")]
    CriticalPointAbort {
        z: Complex64,
        dh_abs: f64,
        partial: Box<Trajectory>,
    },
    #[error("no closed-orbit return within horizon {horizon}")]
    NoReturn { horizon: f64 },
    #[error("not a simple root: |h| = {h_abs:.3e}, |h'| = {dh_abs:.3e}")]
    NotASimpleRoot { h_abs: f64, dh_abs: f64 },
    #[error("separatrix classification inconclusive within horizon {horizon}")]
    Inconclusive { horizon: f64 },
    #[error(transparent)]
    Eval(#[from] CatalogError),
}

fn validate_tol(tol: Tolerances) -> Result<(), FlowError> {
    if !tol.is_valid() {
        return Err(FlowError::InvalidTolerance {
            rel: tol.rel,
            abs: tol.abs,
        });
    }
    Ok(())
}

/// Builds trajectory samples from an ODE run, re-evaluating h at each point.
fn samples_from_run(
    h: &HoloFunction,
    run: &Run<1>,
    theta: f64,
    status: TrajectoryStatus,
) -> Result<Trajectory, FlowError> {
    let dir = Complex64::from_polar(1.0, theta);
    let mut samples = Vec::with_capacity(run.steps.len());
    let mut derivs = Vec::with_capacity(run.steps.len());
    for step in &run.steps {
        let z = step.y[0];
        let h_of_z = h.value(z)?;
        samples.push(TrajectorySample {
            s: step.s,
            t: step.s * dir,
            z,
            h_of_z,
        });
        derivs.push(step.f[0]);
    }
    Ok(Trajectory {
        samples,
        status,
        theta,
        derivs,
    })
}

fn single_sample_trajectory(
    h: &HoloFunction,
    z0: Complex64,
    theta: f64,
) -> Result<Trajectory, FlowError> {
    let h0 = h.value(z0)?;
    Ok(Trajectory {
        samples: vec![TrajectorySample {
            s: 0.0,
            t: Complex64::new(0.0, 0.0),
            z: z0,
            h_of_z: h0,
        }],
        status: TrajectoryStatus::Completed,
        theta,
        derivs: vec![Complex64::from_polar(1.0, theta) * h0],
    })
}

/// Refines the arc length at which |z(s)| first crosses `radius` between two
/// accepted steps, by bisection on the Hermite interpolant.
fn refine_radius_crossing(a: &Step<1>, b: &Step<1>, radius: f64) -> f64 {
    let mut lo = a.s;
    let mut hi = b.s;
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if ode::hermite(a, b, mid)[0].norm() >= radius {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Integrates the holomorphic flow dz/ds = e^{iθ}·h(z) for s ∈ [0, span].
///
/// Terminates early with `EscapedAt` when |z| exceeds `escape_radius`; the
/// crossing arc length is refined by interpolation. Step underflow below
/// 1e−14·span (and evaluator overflow) surface as `StiffnessAbort` with the
/// partial trajectory retained.
pub fn integrate_ray(
    h: &HoloFunction,
    z0: Complex64,
    ray: TimeRay,
    tol: Tolerances,
    escape_radius: f64,
) -> Result<Trajectory, FlowError> {
    validate_tol(tol)?;
    if ray.span < 0.0 {
        return Err(FlowError::NegativeSpan(ray.span));
    }
    if escape_radius <= z0.norm() {
        return Err(FlowError::EscapeRadiusTooSmall {
            radius: escape_radius,
            z0_abs: z0.norm(),
        });
    }
    if ray.span == 0.0 {
        return single_sample_trajectory(h, z0, ray.theta);
    }
    let dir = ray.direction();
    let rhs = |_s: f64, y: &[Complex64; 1]| match h.eval_all(y[0]) {
        Ok((v, _, _)) => Ok([dir * v]),
        Err(_) => Err(()),
    };
    let run = ode::integrate(rhs, [z0], ray.span, tol, 0.0, |_a, b| {
        b.y[0].norm() > escape_radius
    });
    let status = match run.end {
        End::SpanDone => TrajectoryStatus::Completed,
        End::Halted => {
            let n = run.steps.len();
            let s_cross = refine_radius_crossing(&run.steps[n - 2], &run.steps[n - 1], escape_radius);
            TrajectoryStatus::EscapedAt(s_cross)
        }
        End::StepUnderflow | End::RhsFault | End::MaxSteps => TrajectoryStatus::StiffnessAbort,
    };
    samples_from_run(h, &run, ray.theta, status)
}

/// Integrates the Newton flow dz/ds = −e^{iθ}·h(z)/h′(z).
///
/// Requires |h′(z0)| > `guard_eps`; aborts with `CriticalPointAbort` (partial
/// trajectory attached) as soon as the guard is violated along the path.
pub fn integrate_newton(
    h: &HoloFunction,
    z0: Complex64,
    ray: TimeRay,
    tol: Tolerances,
    guard_eps: f64,
) -> Result<Trajectory, FlowError> {
    validate_tol(tol)?;
    if ray.span < 0.0 {
        return Err(FlowError::NegativeSpan(ray.span));
    }
    let (_, d1, _) = h.eval_all(z0)?;
    if d1.norm() <= guard_eps {
        return Err(FlowError::CriticalPointAbort {
            z: z0,
            dh_abs: d1.norm(),
            partial: Box::new(single_sample_trajectory(h, z0, ray.theta)?),
        });
    }
    if ray.span == 0.0 {
        return single_sample_trajectory(h, z0, ray.theta);
    }
    let dir = ray.direction();
    let guard_hit: Cell<Option<(Complex64, f64)>> = Cell::new(None);
    let rhs = |_s: f64, y: &[Complex64; 1]| match h.eval_all(y[0]) {
        Ok((v, d1, _)) => {
            if d1.norm() < guard_eps {
                guard_hit.set(Some((y[0], d1.norm())));
                Err(())
            } else {
                Ok([-dir * v / d1])
            }
        }
        Err(_) => Err(()),
    };
    let run = ode::integrate(rhs, [z0], ray.span, tol, 0.0, |_, _| false);
    let status = match run.end {
        End::SpanDone => TrajectoryStatus::Completed,
        End::Halted => unreachable!("no halt predicate"),
        End::StepUnderflow | End::MaxSteps => TrajectoryStatus::StiffnessAbort,
        End::RhsFault => {
            if let Some((z, dh_abs)) = guard_hit.get() {
                let partial = samples_from_run(h, &run, ray.theta, TrajectoryStatus::StiffnessAbort)?;
                return Err(FlowError::CriticalPointAbort {
                    z,
                    dh_abs,
                    partial: Box::new(partial),
                });
            }
            TrajectoryStatus::StiffnessAbort
        }
    };
    samples_from_run(h, &run, ray.theta, status)
}

/// The desingularized Newton field −h(z)·conj(h′(z)).
///
/// Rescaling the Newton field by the positive factor |h′|² keeps its oriented
/// flow lines wherever h′ ≠ 0 and extends smoothly across zeros of h′.
pub fn desingularized_newton_field(
    h: &HoloFunction,
    z: Complex64,
) -> Result<Complex64, CatalogError> {
    let (v, d1, _) = h.eval_all(z)?;
    Ok(-v * d1.conj())
}

/// Analytic period 2πi/h′(ρ) of small orbits around a simple root ρ of h.
///
/// Purely real exactly when h′(ρ) is purely imaginary (center case).
pub fn orbit_period_analytic(h: &HoloFunction, rho: Complex64) -> Result<Complex64, FlowError> {
    let (v, d1, _) = h.eval_all(rho)?;
    if v.norm() > 1e-8 || d1.norm() < 1e-8 {
        return Err(FlowError::NotASimpleRoot {
            h_abs: v.norm(),
            dh_abs: d1.norm(),
        });
    }
    Ok(Complex64::new(0.0, 2.0 * std::f64::consts::PI) / d1)
}

/// Integrates the real-time flow until the orbit first returns to its
/// Poincaré section through z0 (the line orthogonal to h(z0)), refining the
/// crossing by interpolation and bisection. The trajectory status carries the
/// detected period.
///
/// Crossings are counted only in the direction of the initial flow so a
/// half-period transit of the section does not count as a return.
pub fn closed_orbit(
    h: &HoloFunction,
    z0: Complex64,
    tol: Tolerances,
    horizon: f64,
) -> Result<Trajectory, FlowError> {
    validate_tol(tol)?;
    let h0 = h.value(z0)?;
    if h0.norm() <= pole_epsilon(z0) {
        // Equilibrium: the period is undefined.
        return Err(FlowError::NoReturn { horizon });
    }
    let ret_tol = 1e-8 * (1.0 + z0.norm());
    let bail_radius = 1e6 * (1.0 + z0.norm());
    let section = h0.conj();
    let g = |z: Complex64| ((z - z0) * section).re;

    let rhs = |_s: f64, y: &[Complex64; 1]| match h.eval_all(y[0]) {
        Ok((v, _, _)) => Ok([v]),
        Err(_) => Err(()),
    };
    let found: Cell<Option<(f64, Complex64)>> = Cell::new(None);
    let halt = |a: &Step<1>, b: &Step<1>| {
        if b.y[0].norm() > bail_radius {
            return true;
        }
        let (ga, gb) = (g(a.y[0]), g(b.y[0]));
        // Oriented crossing of the section: g goes negative → nonnegative
        // while moving with the initial flow direction.
        if !(ga < 0.0 && gb >= 0.0) {
            return false;
        }
        let (mut lo, mut hi) = (a.s, b.s);
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if g(ode::hermite(a, b, mid)[0]) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * hi.max(1.0) {
                break;
            }
        }
        let s_star = 0.5 * (lo + hi);
        let z_star = ode::hermite(a, b, s_star)[0];
        let moving_forward = (b.f[0] * section).re > 0.0;
        if moving_forward && (z_star - z0).norm() <= ret_tol {
            found.set(Some((s_star, z_star)));
            true
        } else {
            false
        }
    };
    let run = ode::integrate(rhs, [z0], horizon, tol, 0.0, halt);
    let Some((period, z_star)) = found.get() else {
        return Err(FlowError::NoReturn { horizon });
    };
    let mut traj = samples_from_run(h, &run, 0.0, TrajectoryStatus::ClosedOrbit(period))?;
    // Replace the overshooting last step by the refined return point.
    if let Some(last) = traj.samples.last_mut() {
        last.s = period;
        last.t = Complex64::new(period, 0.0);
        last.z = z_star;
        last.h_of_z = h.value(z_star)?;
        let n = traj.derivs.len();
        traj.derivs[n - 1] = last.h_of_z;
    }
    Ok(traj)
}

/// First return time of the real-time orbit through z0, if any.
pub fn detect_closed_orbit(
    h: &HoloFunction,
    z0: Complex64,
    tol: Tolerances,
    horizon: f64,
) -> Result<f64, FlowError> {
    closed_orbit(h, z0, tol, horizon).map(|t| t.period().expect("closed orbit has period"))
}

enum ScanOutcome {
    /// Escape times converged to a finite blow-up time.
    Separatrix { t_esc: f64 },
    /// Escaped, but the blow-up time extrapolates to infinity (e.g. the
    /// exponential escape of a linear flow).
    SlowEscape,
    /// The trajectory settled onto an equilibrium.
    Equilibrium,
    /// Still bounded at the horizon without settling.
    Bounded,
    /// Not enough radius crossings to extrapolate.
    Undetermined,
}

/// Ratio d₂/d₁ above which escape-time increments are considered
/// non-convergent. Finite-time blow-up through geometric radii gives a
/// strictly decreasing tail (q ≤ 1/2 already for quadratic growth);
/// exponential escape gives q = 1.
const RICHARDSON_Q_MAX: f64 = 0.9;

fn escape_scan(
    h: &HoloFunction,
    z0: Complex64,
    time_sign: f64,
    escape_radius: f64,
    horizon: f64,
    tol: Tolerances,
) -> Result<ScanOutcome, FlowError> {
    // Nested radii r, 2r, 4r, … capped by the escape radius. Near a blow-up
    // the integrator stalls at moderate |z| (steps underflow in double
    // precision), so the extrapolation uses the last three radii actually
    // crossed rather than insisting on the outermost ones.
    let base = 1.0 + z0.norm();
    let mut rungs: Vec<f64> = Vec::new();
    let mut r = base;
    while r <= escape_radius {
        rungs.push(r);
        r *= 2.0;
    }
    if rungs.is_empty() {
        rungs.push(escape_radius);
    }
    let r_last = *rungs.last().unwrap();

    let h0_abs = h.value(z0)?.norm();
    let rhs = |_s: f64, y: &[Complex64; 1]| match h.eval_all(y[0]) {
        Ok((v, _, _)) => Ok([time_sign * v]),
        Err(_) => Err(()),
    };
    let run = ode::integrate(rhs, [z0], horizon, tol, 0.0, |_a, b| b.y[0].norm() > r_last);

    if run.end == End::SpanDone {
        let z_end = run.last().y[0];
        let h_end = h.value(z_end)?.norm();
        return Ok(if h_end <= 1e-8 * (1.0 + h0_abs) {
            ScanOutcome::Equilibrium
        } else {
            ScanOutcome::Bounded
        });
    }

    // First crossing time of each rung, refined on the recorded steps.
    let mut crossings: Vec<f64> = Vec::new();
    for &rung in &rungs {
        let mut found = None;
        for w in run.steps.windows(2) {
            if w[0].y[0].norm() < rung && w[1].y[0].norm() >= rung {
                found = Some(refine_radius_crossing(&w[0], &w[1], rung));
                break;
            }
        }
        match found {
            Some(s) => crossings.push(s),
            None => break,
        }
    }

    if crossings.len() < 3 {
        return Ok(ScanOutcome::Undetermined);
    }
    let n = crossings.len();
    let (s1, s2, s3) = (crossings[n - 3], crossings[n - 2], crossings[n - 1]);
    let d1 = s2 - s1;
    let d2 = s3 - s2;
    if d1 <= 0.0 && d2 <= 0.0 {
        return Ok(ScanOutcome::Separatrix { t_esc: s3 });
    }
    let q = d2 / d1.max(1e-300);
    Ok(if q <= RICHARDSON_Q_MAX {
        ScanOutcome::Separatrix {
            t_esc: s3 + d2 * q / (1.0 - q),
        }
    } else {
        ScanOutcome::SlowEscape
    })
}

/// Classifies the real-time trajectory through z0 as a positive and/or
/// negative separatrix of the holomorphic flow of h.
///
/// Forward and backward real time are scanned up to `horizon` at the default
/// tolerances. A direction is marked only when escape occurs *and* the
/// extrapolated blow-up time across nested radii converges to a finite limit.
/// Bounded non-settling trajectories must close an orbit for a conclusive
/// non-separatrix verdict; otherwise `Inconclusive` is returned.
pub fn classify_separatrix(
    h: &HoloFunction,
    z0: Complex64,
    escape_radius: f64,
    horizon: f64,
) -> Result<SeparatrixReport, FlowError> {
    let tol = Tolerances::default();
    if escape_radius <= z0.norm() {
        return Err(FlowError::EscapeRadiusTooSmall {
            radius: escape_radius,
            z0_abs: z0.norm(),
        });
    }
    let mut report = SeparatrixReport {
        positive: false,
        negative: false,
        t_escape_pos: None,
        t_escape_neg: None,
    };
    let mut orbit_closed: Option<bool> = None;
    for &sign in &[1.0f64, -1.0] {
        let outcome = escape_scan(h, z0, sign, escape_radius, horizon, tol)?;
        let is_sep = match outcome {
            ScanOutcome::Separatrix { t_esc } => {
                if sign > 0.0 {
                    report.t_escape_pos = Some(t_esc);
                } else {
                    report.t_escape_neg = Some(t_esc);
                }
                true
            }
            ScanOutcome::SlowEscape | ScanOutcome::Equilibrium => false,
            ScanOutcome::Bounded => {
                let closed = match orbit_closed {
                    Some(c) => c,
                    None => {
                        let c = detect_closed_orbit(h, z0, tol, horizon).is_ok();
                        orbit_closed = Some(c);
                        c
                    }
                };
                if !closed {
                    return Err(FlowError::Inconclusive { horizon });
                }
                false
            }
            ScanOutcome::Undetermined => {
                return Err(FlowError::Inconclusive { horizon });
            }
        };
        if sign > 0.0 {
            report.positive = is_sep;
        } else {
            report.negative = is_sep;
        }
    }
    Ok(report)
}
