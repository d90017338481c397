//! Numerical engine for complex-time flows of entire functions.
//!
//! The library is organized around a small catalog of holomorphic functions
//! (a shifted cosh, polynomial approximants of Riemann's ξ built from a table
//! of critical-line zeros, generic polynomials) and four subsystems that
//! consume them:
//!
//! * [`flow`] — adaptive integration of the holomorphic flow ż = h(z) and the
//!   Newton flow z′ = −h/h′ along arbitrary rays in the complex time plane,
//!   separatrix classification by finite escape time, and closed-orbit
//!   detection with analytic period cross-checks.
//! * [`surface`] — the polynomial P_m(z; T, z₀) whose roots continue the
//!   Newton-flow image z(T) over complex-time lattices, with sheet tracking
//!   and branch-point bookkeeping.
//! * [`hamiltonian`] — the Hamiltonian system H = h(z)p, closed-form momentum
//!   and sensitivity propagation, the flow-map matrix, and action/period
//!   relations.
//! * [`geometry`] — the metric g = ⟨·,·⟩/(2|h|²), its Christoffel symbols and
//!   covariant derivative in closed form, parallel-field and flatness checks.
//!
//! All state lives in `num_complex::Complex64`; every public type is immutable
//! after construction and safe to share across worker threads.

pub mod catalog;
pub mod flow;
pub mod geometry;
pub mod hamiltonian;
pub mod ode;
pub mod surface;

pub use catalog::{log_derivative_sum, CatalogError, DerivOrder, HoloFunction, ZeroTable};
pub use flow::{
    classify_separatrix, closed_orbit, desingularized_newton_field, detect_closed_orbit,
    integrate_newton, integrate_ray, orbit_period_analytic, FlowError, SeparatrixReport, TimeRay,
    Trajectory, TrajectorySample, TrajectoryStatus,
};
pub use geometry::{
    check_parallel_sensitivity, covariant_derivative, curvature_flatness_check, lagrangian,
    metric_frame, trivialize_in_time_chart, Direction, GeometryError, MetricFrame, TangentVector,
    TimeChartSample, VectorFieldSpec,
};
pub use hamiltonian::{
    action_along_orbit, delta_p_closed_form, delta_p_trace_form, flow_map_matrix,
    hamiltonian_field, integrate_hamiltonian, momentum_closed_form, sensitivity_closed_form,
    unwrapped_phase_series, BundleSample, BundleTrajectory, FlowMapMatrix, HamiltonianError,
    SensitivityBundle,
};
pub use ode::Tolerances;
pub use surface::{
    eval_pm_zp, trace_surface, verify_constant_phase, BranchEvent, ContinuationOpts, PmPolynomial,
    SurfaceError, SurfaceGrid, TimeLattice,
};

use num_complex::Complex64;

/// Guard radius below which a complex denominator counts as a pole hit.
///
/// Scales with the evaluation point so that desk-scale magnitudes and points
/// far from the origin are treated uniformly.
pub fn pole_epsilon(z: Complex64) -> f64 {
    1e-12 * (1.0 + z.norm())
}
