//! Shared fixtures for the criterion benches.

use num_complex::Complex64;

use holoflow_core::{HoloFunction, ZeroTable};

pub fn xi(m: usize) -> HoloFunction {
    HoloFunction::xi_approx(ZeroTable::bundled(), m, 1.0).expect("bundled table has 100 zeros")
}

/// A point near the first zero with a closed real-time orbit.
pub fn orbit_seed() -> Complex64 {
    Complex64::new(0.5 + 0.3, ZeroTable::bundled().gammas()[0])
}

/// A generic off-axis evaluation point.
pub fn probe_point() -> Complex64 {
    Complex64::new(2.0, 16.0)
}
