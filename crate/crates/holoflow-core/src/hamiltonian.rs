//! The Hamiltonian system H(z, p) = h(z)·p and its sensitivity propagation.
//!
//! Over ℂ the momentum and first-order sensitivity equations are
//! one-dimensional and solve in closed form:
//!
//! * p  = h(z₀)/h(z) · p₀
//! * Δz = h(z)/h(z₀) · Δz₀
//! * Δp = p₀Δz₀·(h′(z₀) − h′(z))/h(z) + Δp₀·h(z₀)/h(z)
//!
//! so p·Δz and H itself are conserved. For the ξ-approximating polynomial the
//! Δp solution has an equivalent zero-sum form with Σ 1/(z−ρₙ) in place of
//! h′(z)/h(z); these module functions expose both routes, and
//! [`integrate_hamiltonian`] propagates the full (z, p, Δz, Δp) bundle
//! numerically for residual comparison against the closed forms.

use num_complex::Complex64;
use thiserror::Error;

use crate::catalog::{log_derivative_sum, CatalogError, HoloFunction, ZeroTable};
use crate::flow::{TimeRay, Trajectory, TrajectoryStatus};
use crate::ode::{self, End, Step, Tolerances};
use crate::pole_epsilon;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("momentum pole: |h(z)| = {h_abs:.3e} at z = {z}")]
    MomentumPole { z: Complex64, h_abs: f64 },
    #[error("anchor pole: |h(z0)| = {h_abs:.3e} at z0 = {z0}")]
    AnchorPole { z0: Complex64, h_abs: f64 },
    #[error("tolerances must lie in (0, 1e-2]: rel = {rel:e}, abs = {abs:e}")]
    InvalidTolerance { rel: f64, abs: f64 },
    #[error("ray span must be nonnegative, got {0}")]
    NegativeSpan(f64),
    #[error(transparent)]
    Eval(#[from] CatalogError),
}

/// Joint state (z, p, Δz, Δp) with its frozen initial values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBundle {
    pub z: Complex64,
    pub p: Complex64,
    pub dz: Complex64,
    pub dp: Complex64,
    pub z0: Complex64,
    pub p0: Complex64,
    pub dz0: Complex64,
    pub dp0: Complex64,
}

impl SensitivityBundle {
    /// A fresh bundle at its initial point.
    pub fn new(z0: Complex64, p0: Complex64, dz0: Complex64, dp0: Complex64) -> Self {
        SensitivityBundle {
            z: z0,
            p: p0,
            dz: dz0,
            dp: dp0,
            z0,
            p0,
            dz0,
            dp0,
        }
    }

    /// H = h(z)·p at the current state.
    pub fn hamiltonian(&self, h: &HoloFunction) -> Result<Complex64, CatalogError> {
        Ok(h.value(self.z)? * self.p)
    }
}

/// The Hamiltonian vector field (ż, ṗ) = (h(z), −h′(z)·p).
pub fn hamiltonian_field(
    h: &HoloFunction,
    z: Complex64,
    p: Complex64,
) -> Result<(Complex64, Complex64), HamiltonianError> {
    let (v, d1, _) = h.eval_all(z)?;
    Ok((v, -d1 * p))
}

/// Closed-form momentum p = h(z₀)/h(z)·p₀.
pub fn momentum_closed_form(
    h: &HoloFunction,
    z: Complex64,
    z0: Complex64,
    p0: Complex64,
) -> Result<Complex64, HamiltonianError> {
    let hz = h.value(z)?;
    if hz.norm() <= pole_epsilon(z) {
        return Err(HamiltonianError::MomentumPole { z, h_abs: hz.norm() });
    }
    Ok(h.value(z0)? / hz * p0)
}

/// Closed-form sensitivity Δz = h(z)/h(z₀)·Δz₀ = α·h(z) with α = Δz₀/h(z₀).
pub fn sensitivity_closed_form(
    h: &HoloFunction,
    z: Complex64,
    z0: Complex64,
    dz0: Complex64,
) -> Result<Complex64, HamiltonianError> {
    let h0 = h.value(z0)?;
    if h0.norm() <= pole_epsilon(z0) {
        return Err(HamiltonianError::AnchorPole { z0, h_abs: h0.norm() });
    }
    Ok(h.value(z)? / h0 * dz0)
}

/// Closed-form second-order sensitivity
/// Δp = p₀Δz₀·(h′(z₀) − h′(z))/h(z) + Δp₀·h(z₀)/h(z).
pub fn delta_p_closed_form(
    h: &HoloFunction,
    z: Complex64,
    z0: Complex64,
    p0: Complex64,
    dz0: Complex64,
    dp0: Complex64,
) -> Result<Complex64, HamiltonianError> {
    let (hz, dh, _) = h.eval_all(z)?;
    if hz.norm() <= pole_epsilon(z) {
        return Err(HamiltonianError::MomentumPole { z, h_abs: hz.norm() });
    }
    let (h0, dh0, _) = h.eval_all(z0)?;
    Ok(p0 * dz0 * (dh0 - dh) / hz + dp0 * h0 / hz)
}

/// Zero-sum form of Δp for the ξ-approximating polynomial:
/// p₀Δz₀·(h′(z₀)/h(z) − Σₙ 1/(z−ρₙ)) + Δp₀·h(z₀)/h(z).
///
/// Scale-invariant in α, so it takes the zero table directly. Equivalent to
/// [`delta_p_closed_form`] through the logarithmic-derivative identity
/// h′(z)/h(z) = Σₙ 1/(z−ρₙ).
pub fn delta_p_trace_form(
    zeros: &ZeroTable,
    m: usize,
    z: Complex64,
    z0: Complex64,
    p0: Complex64,
    dz0: Complex64,
    dp0: Complex64,
) -> Result<Complex64, HamiltonianError> {
    let h = HoloFunction::xi_approx(zeros, m, 1.0)?;
    let hz = h.value(z)?;
    if hz.norm() <= pole_epsilon(z) {
        return Err(HamiltonianError::MomentumPole { z, h_abs: hz.norm() });
    }
    let sum = log_derivative_sum(zeros, m, z)?;
    let (h0, dh0, _) = h.eval_all(z0)?;
    Ok(p0 * dz0 * (dh0 / hz - sum) + dp0 * h0 / hz)
}

/// Flow-map matrix M with (Δz, Δp)ᵀ = M·(Δz₀, Δp₀)ᵀ along the orbit from z₀
/// to z. Lower triangular with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMapMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl FlowMapMatrix {
    /// The z–p coupling constant k_{z,p} (the lower-left entry).
    pub fn k_zp(&self) -> Complex64 {
        self.m21
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Applies M to an initial perturbation.
    pub fn apply(&self, dz0: Complex64, dp0: Complex64) -> (Complex64, Complex64) {
        (
            self.m11 * dz0 + self.m12 * dp0,
            self.m21 * dz0 + self.m22 * dp0,
        )
    }
}

/// Builds the flow-map matrix: m11 = h(z)/h(z₀), m22 = h(z₀)/h(z), m12 = 0,
/// m21 = k_{z,p}. For the ξ-approximant the coupling uses the zero-sum form
/// p₀(h′(z₀)/h(z) − Σ 1/(z−ρₙ)); other kinds use the equivalent closed form.
pub fn flow_map_matrix(
    h: &HoloFunction,
    z: Complex64,
    z0: Complex64,
    p0: Complex64,
) -> Result<FlowMapMatrix, HamiltonianError> {
    let (hz, dh, _) = h.eval_all(z)?;
    if hz.norm() <= pole_epsilon(z) {
        return Err(HamiltonianError::MomentumPole { z, h_abs: hz.norm() });
    }
    let (h0, dh0, _) = h.eval_all(z0)?;
    if h0.norm() <= pole_epsilon(z0) {
        return Err(HamiltonianError::AnchorPole { z0, h_abs: h0.norm() });
    }
    let k_zp = match h {
        HoloFunction::XiApprox { gammas, .. } => {
            let table = ZeroTable::from_gammas(gammas.clone(), "xi-approx zeros")
                .expect("constructed tables are valid");
            let sum = log_derivative_sum(&table, gammas.len(), z)?;
            p0 * (dh0 / hz - sum)
        }
        _ => p0 * (dh0 - dh) / hz,
    };
    Ok(FlowMapMatrix {
        m11: hz / h0,
        m12: Complex64::new(0.0, 0.0),
        m21: k_zp,
        m22: h0 / hz,
    })
}

/// Action along a closed orbit: S = H(z₀, p₀)·t*.
pub fn action_along_orbit(h0: Complex64, period: Complex64) -> Complex64 {
    h0 * period
}

/// One sample of a jointly integrated bundle trajectory.
#[derive(Debug, Clone, Copy)]
pub struct BundleSample {
    pub s: f64,
    pub z: Complex64,
    pub p: Complex64,
    pub dz: Complex64,
    pub dp: Complex64,
    /// H = h(z)·p at the sample.
    pub ham: Complex64,
}

/// Jointly integrated (z, p, Δz, Δp) path along a complex-time ray.
#[derive(Debug, Clone)]
pub struct BundleTrajectory {
    pub samples: Vec<BundleSample>,
    pub status: TrajectoryStatus,
    theta: f64,
    derivs: Vec<[Complex64; 4]>,
}

impl BundleTrajectory {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn last(&self) -> &BundleSample {
        self.samples.last().expect("bundle trajectory has samples")
    }

    /// Interpolated (z, p, Δz, Δp) between samples; `None` out of range.
    pub fn sample_state(&self, s: f64) -> Option<[Complex64; 4]> {
        if self.samples.is_empty()
            || s < self.samples[0].s
            || s > self.samples[self.samples.len() - 1].s
        {
            return None;
        }
        let idx = self.samples.partition_point(|smp| smp.s < s);
        if idx == 0 {
            let a = &self.samples[0];
            return Some([a.z, a.p, a.dz, a.dp]);
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx.min(self.samples.len() - 1)]);
        let sa = Step {
            s: a.s,
            y: [a.z, a.p, a.dz, a.dp],
            f: self.derivs[idx - 1],
        };
        let sb = Step {
            s: b.s,
            y: [b.z, b.p, b.dz, b.dp],
            f: self.derivs[idx.min(self.samples.len() - 1)],
        };
        Some(ode::hermite(&sa, &sb, s))
    }

    /// CSV export:
    /// `s,z_re,z_im,p_re,p_im,dz_re,dz_im,dp_re,dp_im,H_re,H_im`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("s,z_re,z_im,p_re,p_im,dz_re,dz_im,dp_re,dp_im,H_re,H_im\n");
        for smp in &self.samples {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                smp.s,
                smp.z.re,
                smp.z.im,
                smp.p.re,
                smp.p.im,
                smp.dz.re,
                smp.dz.im,
                smp.dp.re,
                smp.dp.im,
                smp.ham.re,
                smp.ham.im,
            ));
        }
        out
    }
}

/// Jointly integrates ż = h, ṗ = −h′p, Δż = h′Δz, Δṗ = −h″(z)Δz₀p₀ − h′Δp
/// along the ray. The Δp equation uses the conserved product p₀Δz₀ frozen
/// from the initial bundle; h″ comes from the catalog's analytic second
/// derivative.
pub fn integrate_hamiltonian(
    h: &HoloFunction,
    bundle0: &SensitivityBundle,
    ray: TimeRay,
    tol: Tolerances,
) -> Result<BundleTrajectory, HamiltonianError> {
    if !tol.is_valid() {
        return Err(HamiltonianError::InvalidTolerance {
            rel: tol.rel,
            abs: tol.abs,
        });
    }
    if ray.span < 0.0 {
        return Err(HamiltonianError::NegativeSpan(ray.span));
    }
    let dir = ray.direction();
    let frozen = bundle0.p0 * bundle0.dz0;
    let rhs = |_s: f64, y: &[Complex64; 4]| match h.eval_all(y[0]) {
        Ok((v, d1, d2)) => Ok([
            dir * v,
            dir * (-d1 * y[1]),
            dir * (d1 * y[2]),
            dir * (-d2 * frozen - d1 * y[3]),
        ]),
        Err(_) => Err(()),
    };
    let y0 = [bundle0.z, bundle0.p, bundle0.dz, bundle0.dp];
    let run = ode::integrate(rhs, y0, ray.span, tol, 0.0, |_, _| false);
    let status = match run.end {
        End::SpanDone => TrajectoryStatus::Completed,
        End::Halted => unreachable!("no halt predicate"),
        _ => TrajectoryStatus::StiffnessAbort,
    };
    let mut samples = Vec::with_capacity(run.steps.len());
    let mut derivs = Vec::with_capacity(run.steps.len());
    for step in &run.steps {
        let [z, p, dz, dp] = step.y;
        samples.push(BundleSample {
            s: step.s,
            z,
            p,
            dz,
            dp,
            ham: h.value(z)? * p,
        });
        derivs.push(step.f);
    }
    Ok(BundleTrajectory {
        samples,
        status,
        theta: ray.theta,
        derivs,
    })
}

/// Continuous (unwrapped) phase series of f(z) along a trajectory.
///
/// Per-step deltas are taken on the principal branch; a step whose raw delta
/// exceeds π/2 is recursively bisected on the interpolated path, so the
/// returned series is a genuine unwrapping of arg f∘z as long as f∘z stays
/// away from 0. Returns (s, unwrapped phase) per trajectory sample.
pub fn unwrapped_phase_series<F>(
    traj: &Trajectory,
    mut f: F,
) -> Result<Vec<(f64, f64)>, HamiltonianError>
where
    F: FnMut(Complex64) -> Result<Complex64, HamiltonianError>,
{
    let samples = &traj.samples;
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let first = f(samples[0].z)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut phase = first.arg();
    out.push((samples[0].s, phase));
    let mut prev_val = first;
    for k in 1..samples.len() {
        let (s_prev, s_next) = (samples[k - 1].s, samples[k].s);
        let next_val = f(samples[k].z)?;
        phase += unwrap_delta(traj, &mut f, s_prev, prev_val, s_next, next_val, 0)?;
        out.push((s_next, phase));
        prev_val = next_val;
    }
    Ok(out)
}

fn unwrap_delta<F>(
    traj: &Trajectory,
    f: &mut F,
    s_a: f64,
    v_a: Complex64,
    s_b: f64,
    v_b: Complex64,
    depth: usize,
) -> Result<f64, HamiltonianError>
where
    F: FnMut(Complex64) -> Result<Complex64, HamiltonianError>,
{
    let delta = (v_b / v_a).arg();
    if delta.abs() <= std::f64::consts::FRAC_PI_2 || depth >= 48 {
        return Ok(delta);
    }
    let s_mid = 0.5 * (s_a + s_b);
    let z_mid = traj
        .sample_z(s_mid)
        .expect("midpoint lies inside the sampled range");
    let v_mid = f(z_mid)?;
    Ok(unwrap_delta(traj, f, s_a, v_a, s_mid, v_mid, depth + 1)?
        + unwrap_delta(traj, f, s_mid, v_mid, s_b, v_b, depth + 1)?)
}
