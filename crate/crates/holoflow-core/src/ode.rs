//! Embedded Dormand–Prince 5(4) stepper over small complex state vectors.
//!
//! This is the one integration engine behind every flow in the crate. It is
//! deliberately minimal: fixed method, PI step-size control, first-same-as-last
//! stage reuse, and a caller-supplied halt predicate that sees each accepted
//! step together with its predecessor. Event localisation (escape radii,
//! Poincaré sections) is done by the callers on the recorded steps via cubic
//! Hermite interpolation.

use num_complex::Complex64;

/// Relative/absolute error tolerances for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    pub const fn new(rel: f64, abs: f64) -> Self {
        Tolerances { rel, abs }
    }

    /// True when both components lie in the integrator-accepted range (0, 1e−2].
    pub fn is_valid(&self) -> bool {
        self.rel > 0.0 && self.rel <= 1e-2 && self.abs > 0.0 && self.abs <= 1e-2
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::new(1e-10, 1e-12)
    }
}

/// One accepted integration point: arc length `s`, state `y`, derivative `f`.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub s: f64,
    pub y: [Complex64; N],
    pub f: [Complex64; N],
}

/// Why the run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    /// Reached s = span.
    SpanDone,
    /// The halt predicate fired.
    Halted,
    /// Step size fell below s_min = 1e−14·span.
    StepUnderflow,
    /// The right-hand side reported a fault (guard hit, overflow, non-finite)
    /// and halving the step did not clear it.
    RhsFault,
    /// Step budget exhausted (pathological stiffness backstop).
    MaxSteps,
}

/// Accepted steps plus the stop cause. `steps[0]` is the initial state except
/// when the very first derivative evaluation faults, in which case `steps` is
/// empty.
#[derive(Debug, Clone)]
pub struct Run<const N: usize> {
    pub steps: Vec<Step<N>>,
    pub end: End,
}

impl<const N: usize> Run<N> {
    pub fn last(&self) -> &Step<N> {
        self.steps.last().expect("run has at least the initial step")
    }
}

/// Cubic Hermite interpolation of the state between two accepted steps.
pub fn hermite<const N: usize>(a: &Step<N>, b: &Step<N>, s: f64) -> [Complex64; N] {
    let h = b.s - a.s;
    if h == 0.0 {
        return a.y;
    }
    let t = (s - a.s) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let mut out = [Complex64::new(0.0, 0.0); N];
    for i in 0..N {
        out[i] = h00 * a.y[i] + h10 * h * a.f[i] + h01 * b.y[i] + h11 * h * b.f[i];
    }
    out
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// b(5th) − b̂(4th): error estimator weights, including the FSAL stage.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const C: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const MAX_STEPS: usize = 4_000_000;

/// Integrates dy/ds = f(s, y) for s ∈ [0, span].
///
/// The right-hand side returns `Err(())` to signal a fault (the caller keeps
/// the details in captured state); the stepper reacts by halving the step and
/// gives up once the step underflows. `halt` inspects each accepted step pair
/// and returns `true` to stop the run after recording the step.
pub fn integrate<const N: usize>(
    mut rhs: impl FnMut(f64, &[Complex64; N]) -> Result<[Complex64; N], ()>,
    y0: [Complex64; N],
    span: f64,
    tol: Tolerances,
    max_step: f64,
    mut halt: impl FnMut(&Step<N>, &Step<N>) -> bool,
) -> Run<N> {
    let mut steps = Vec::new();
    let f0 = match rhs(0.0, &y0) {
        Ok(f) => f,
        Err(()) => return Run { steps, end: End::RhsFault },
    };
    if !all_finite(&f0) {
        return Run { steps, end: End::RhsFault };
    }
    steps.push(Step { s: 0.0, y: y0, f: f0 });
    if span == 0.0 {
        return Run { steps, end: End::SpanDone };
    }

    let s_min = 1e-14 * span;
    let max_step = if max_step > 0.0 { max_step.min(span) } else { span };

    // Cautious initial step; the PI controller recovers quickly either way.
    let y_scale = 1.0 + norm_inf(&y0);
    let f_scale = 1.0 + norm_inf(&f0);
    let mut h = (0.01 * y_scale / f_scale).min(1e-3 * span).min(max_step);
    let mut s = 0.0;
    let mut y = y0;
    let mut f_first = f0;
    let mut facold: f64 = 1e-4;
    let mut n_steps = 0usize;

    loop {
        if n_steps > MAX_STEPS {
            return Run { steps, end: End::MaxSteps };
        }
        n_steps += 1;
        if s + h > span {
            h = span - s;
        }

        let mut k = [[Complex64::new(0.0, 0.0); N]; 7];
        k[0] = f_first;
        let mut fault = false;
        let stage_coeffs: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (stage, coeffs) in stage_coeffs.iter().enumerate() {
            let mut ys = y;
            for i in 0..N {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &a) in coeffs.iter().enumerate() {
                    acc += a * k[j][i];
                }
                ys[i] += h * acc;
            }
            match rhs(s + C[stage] * h, &ys) {
                Ok(fs) if all_finite(&fs) => k[stage + 1] = fs,
                _ => {
                    fault = true;
                    break;
                }
            }
        }

        let mut y_new = [Complex64::new(0.0, 0.0); N];
        let mut f_new = [Complex64::new(0.0, 0.0); N];
        if !fault {
            for i in 0..N {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..6 {
                    acc += B[j] * k[j][i];
                }
                y_new[i] = y[i] + h * acc;
            }
            match rhs(s + h, &y_new) {
                Ok(fs) if all_finite(&fs) && all_finite(&y_new) => {
                    f_new = fs;
                    k[6] = fs;
                }
                _ => fault = true,
            }
        }

        if fault {
            h *= 0.5;
            if h < s_min {
                return Run { steps, end: End::RhsFault };
            }
            continue;
        }

        // Weighted RMS error over the embedded difference.
        let mut err_sq = 0.0;
        for i in 0..N {
            let mut e = Complex64::new(0.0, 0.0);
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let e = (h * e).norm();
            let sc = tol.abs + tol.rel * y[i].norm().max(y_new[i].norm());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / N as f64).sqrt();

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            // PI control: the previous accepted error damps the growth.
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(0.1, 5.0);
            facold = err.max(1e-4);
            let prev = steps.last().copied().expect("has initial step");
            let step = Step { s: s + h, y: y_new, f: f_new };
            steps.push(step);
            if halt(&prev, steps.last().unwrap()) {
                return Run { steps, end: End::Halted };
            }
            s += h;
            if s >= span {
                return Run { steps, end: End::SpanDone };
            }
            y = y_new;
            f_first = f_new;
            h = (h / fac).min(max_step);
        } else {
            // Rejected: shrink, never grow.
            let fac = (fac11 / SAFE).clamp(1.0, 5.0);
            h /= fac;
        }
        if h < s_min {
            return Run { steps, end: End::StepUnderflow };
        }
    }
}

fn all_finite<const N: usize>(v: &[Complex64; N]) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

fn norm_inf<const N: usize>(v: &[Complex64; N]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
