//! The h-manifold: ℝ² \ {h = 0} with metric g(v, w) = ⟨v, w⟩ / (2|h|²).
//!
//! Closed forms throughout: Christoffel symbols from the first derivatives of
//! the holomorphic splitting (h₁, h₂) via the Cauchy–Riemann relations, the
//! covariant derivative along h and ih as J_X·h − J_h·X (rotated by E for the
//! imaginary direction). Finite differences appear only in verification
//! oracles — the Koszul-formula check and the curvature assembly — never on
//! the evaluation path.

use num_complex::Complex64;
use thiserror::Error;

use crate::catalog::{CatalogError, HoloFunction};
use crate::flow::Trajectory;
use crate::pole_epsilon;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("metric singular: |h| = {h_abs:.3e} at z = {z}")]
    MetricSingular { z: Complex64, h_abs: f64 },
    #[error("anchor pole: |h(z0)| = {h_abs:.3e} at z0 = {z0}")]
    AnchorPole { z0: Complex64, h_abs: f64 },
    #[error("raw field violates the Cauchy-Riemann relations at z = {z} (defect {defect:.3e})")]
    NonHolomorphicField { z: Complex64, defect: f64 },
    #[error(transparent)]
    Eval(#[from] CatalogError),
}

/// A tangent vector in the fixed (z₁, z₂) coordinate basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub v1: f64,
    pub v2: f64,
}

impl TangentVector {
    pub fn new(v1: f64, v2: f64) -> Self {
        TangentVector { v1, v2 }
    }

    pub fn norm(&self) -> f64 {
        self.v1.hypot(self.v2)
    }
}

/// Direction of covariant differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Along the holomorphic splitting of h.
    AlongH,
    /// Along the splitting of ih (the image under E = [[0,−1],[1,0]]).
    AlongIH,
}

/// A planar vector field on the h-manifold.
pub enum VectorFieldSpec {
    /// The holomorphic splitting (Re g, Im g) of a catalog function g.
    HoloSplit(HoloFunction),
    /// X = A·h with A = [[a, −b], [b, a]] — the splitting of (a + ib)·h.
    LinearComb { a: f64, b: f64 },
    /// Arbitrary component functions; the Jacobian is taken by central
    /// differences and must satisfy the Cauchy–Riemann relations.
    Raw(Box<dyn Fn(Complex64) -> (f64, f64) + Send + Sync>),
}

impl std::fmt::Debug for VectorFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VectorFieldSpec::HoloSplit(h) => write!(f, "HoloSplit({h})"),
            VectorFieldSpec::LinearComb { a, b } => write!(f, "LinearComb(a={a}, b={b})"),
            VectorFieldSpec::Raw(_) => write!(f, "Raw(..)"),
        }
    }
}

/// Metric components, inverse and Christoffel arrays at a point.
///
/// gamma1\[i\]\[j\] = Γ¹_{ij}, gamma2\[i\]\[j\] = Γ²_{ij}; both symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricFrame {
    pub g11: f64,
    pub g22: f64,
    pub ginv11: f64,
    pub ginv22: f64,
    pub gamma1: [[f64; 2]; 2],
    pub gamma2: [[f64; 2]; 2],
}

fn split(v: Complex64) -> (f64, f64) {
    (v.re, v.im)
}

/// 2×2 matrix·vector in the (∂₁, ∂₂) basis.
fn matvec(m: [[f64; 2]; 2], v: (f64, f64)) -> (f64, f64) {
    (
        m[0][0] * v.0 + m[0][1] * v.1,
        m[1][0] * v.0 + m[1][1] * v.1,
    )
}

fn nonsingular(h: &HoloFunction, z: Complex64) -> Result<Complex64, GeometryError> {
    let v = h.value(z)?;
    if v.norm() <= pole_epsilon(z) {
        return Err(GeometryError::MetricSingular { z, h_abs: v.norm() });
    }
    Ok(v)
}

/// Lagrangian L(z, v) = (v₁² + v₂²) / (2|h(z)|²); √L is the induced norm.
pub fn lagrangian(h: &HoloFunction, z: Complex64, v: TangentVector) -> Result<f64, GeometryError> {
    let hv = nonsingular(h, z)?;
    Ok((v.v1 * v.v1 + v.v2 * v.v2) / (2.0 * hv.norm_sqr()))
}

/// Metric, inverse metric and Christoffel symbols at z.
///
/// All first partials of (h₁, h₂) come from h′ through the Cauchy–Riemann
/// relations: ∂₁h₁ = Re h′, ∂₂h₁ = −Im h′, ∂₁h₂ = Im h′, ∂₂h₂ = Re h′.
pub fn metric_frame(h: &HoloFunction, z: Complex64) -> Result<MetricFrame, GeometryError> {
    let (hv, dh, _) = h.eval_all(z)?;
    let norm_sq = hv.norm_sqr();
    if norm_sq.sqrt() <= pole_epsilon(z) {
        return Err(GeometryError::MetricSingular {
            z,
            h_abs: norm_sq.sqrt(),
        });
    }
    let (h1, h2) = split(hv);
    let (a, b) = split(dh); // ∂₁h₁ = a, ∂₂h₁ = −b, ∂₁h₂ = b, ∂₂h₂ = a
    let m1 = h1 * a + h2 * b;
    let m2 = h1 * (-b) + h2 * a;
    let gamma1 = [[-m1 / norm_sq, -m2 / norm_sq], [-m2 / norm_sq, m1 / norm_sq]];
    let gamma2 = [[m2 / norm_sq, -m1 / norm_sq], [-m1 / norm_sq, -m2 / norm_sq]];
    Ok(MetricFrame {
        g11: 1.0 / norm_sq,
        g22: 1.0 / norm_sq,
        ginv11: norm_sq,
        ginv22: norm_sq,
        gamma1,
        gamma2,
    })
}

/// Components and Jacobian of a field at z.
fn field_data(
    h: &HoloFunction,
    x: &VectorFieldSpec,
    z: Complex64,
) -> Result<((f64, f64), [[f64; 2]; 2]), GeometryError> {
    match x {
        VectorFieldSpec::HoloSplit(g) => {
            let (gv, dg, _) = g.eval_all(z)?;
            let (p, q) = split(dg);
            Ok((split(gv), [[p, -q], [q, p]]))
        }
        VectorFieldSpec::LinearComb { a, b } => {
            let (hv, dh, _) = h.eval_all(z)?;
            let a_mat = [[*a, -*b], [*b, *a]];
            let comps = matvec(a_mat, split(hv));
            let (p, q) = split(dh);
            let j_h = [[p, -q], [q, p]];
            // J_{A·h} = A·J_h exactly.
            let j = [
                [
                    a_mat[0][0] * j_h[0][0] + a_mat[0][1] * j_h[1][0],
                    a_mat[0][0] * j_h[0][1] + a_mat[0][1] * j_h[1][1],
                ],
                [
                    a_mat[1][0] * j_h[0][0] + a_mat[1][1] * j_h[1][0],
                    a_mat[1][0] * j_h[0][1] + a_mat[1][1] * j_h[1][1],
                ],
            ];
            Ok((comps, j))
        }
        VectorFieldSpec::Raw(f) => {
            let comps = f(z);
            let d = 1e-5 * (1.0 + z.norm());
            let xp = f(z + Complex64::new(d, 0.0));
            let xm = f(z - Complex64::new(d, 0.0));
            let yp = f(z + Complex64::new(0.0, d));
            let ym = f(z - Complex64::new(0.0, d));
            let j = [
                [(xp.0 - xm.0) / (2.0 * d), (yp.0 - ym.0) / (2.0 * d)],
                [(xp.1 - xm.1) / (2.0 * d), (yp.1 - ym.1) / (2.0 * d)],
            ];
            let scale = 1.0 + j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let defect = (j[0][0] - j[1][1]).abs().max((j[0][1] + j[1][0]).abs());
            if defect > 1e-8 * scale {
                return Err(GeometryError::NonHolomorphicField { z, defect });
            }
            Ok((comps, j))
        }
    }
}

/// Covariant derivative of X in the direction of h (or ih):
/// ∇_h X = J_X·h − J_h·X, and ∇_{ih} X = E·(J_X·h − J_h·X).
pub fn covariant_derivative(
    h: &HoloFunction,
    x: &VectorFieldSpec,
    direction: Direction,
    z: Complex64,
) -> Result<TangentVector, GeometryError> {
    nonsingular(h, z)?;
    let (x_comps, j_x) = field_data(h, x, z)?;
    let (hv, dh, _) = h.eval_all(z)?;
    let (p, q) = split(dh);
    let j_h = [[p, -q], [q, p]];
    let u = (
        matvec(j_x, split(hv)).0 - matvec(j_h, x_comps).0,
        matvec(j_x, split(hv)).1 - matvec(j_h, x_comps).1,
    );
    Ok(match direction {
        Direction::AlongH => TangentVector::new(u.0, u.1),
        // E = [[0, −1], [1, 0]].
        Direction::AlongIH => TangentVector::new(-u.1, u.0),
    })
}

/// Verifies that the holomorphic splitting of the sensitivity solution with
/// initial value Δz₀ is parallel: builds X = A·h with A from Δz₀/h(z₀) and
/// returns the largest normalized covariant-derivative residual
/// |∇X| / (1 + |h′(z)|·|h(z)|) over the samples and both directions.
pub fn check_parallel_sensitivity(
    h: &HoloFunction,
    z0: Complex64,
    dz0: Complex64,
    sample_points: &[Complex64],
) -> Result<f64, GeometryError> {
    let h0 = h.value(z0)?;
    if h0.norm() <= pole_epsilon(z0) {
        return Err(GeometryError::AnchorPole { z0, h_abs: h0.norm() });
    }
    let alpha = dz0 / h0;
    let field = VectorFieldSpec::LinearComb {
        a: alpha.re,
        b: alpha.im,
    };
    let mut worst = 0.0f64;
    for &z in sample_points {
        let (hv, dh, _) = h.eval_all(z)?;
        let scale = 1.0 + dh.norm() * hv.norm();
        for dir in [Direction::AlongH, Direction::AlongIH] {
            let residual = covariant_derivative(h, &field, dir, z)?.norm();
            worst = worst.max(residual / scale);
        }
    }
    Ok(worst)
}

/// Assembles the Riemann tensor R^l_{ijk} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik}
/// + Σ_m(Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}) from central finite differences
/// of the analytic Christoffels and returns the largest |component|.
///
/// Flat metrics decay as O(fd_step²) under step halving.
pub fn curvature_flatness_check(
    h: &HoloFunction,
    z: Complex64,
    fd_step: f64,
) -> Result<f64, GeometryError> {
    // The stencil must stay clear of roots of h.
    for root in h.known_roots_near(z, 4) {
        if (z - root).norm() < 10.0 * fd_step {
            return Err(GeometryError::MetricSingular {
                z,
                h_abs: h.value(z).map(|v| v.norm()).unwrap_or(0.0),
            });
        }
    }
    let gamma = |l: usize, frame: &MetricFrame| -> [[f64; 2]; 2] {
        if l == 0 {
            frame.gamma1
        } else {
            frame.gamma2
        }
    };
    let center = metric_frame(h, z)?;
    let offsets = [
        Complex64::new(fd_step, 0.0),
        Complex64::new(0.0, fd_step),
    ];
    let mut frames_p = Vec::with_capacity(2);
    let mut frames_m = Vec::with_capacity(2);
    for &e in &offsets {
        frames_p.push(metric_frame(h, z + e)?);
        frames_m.push(metric_frame(h, z - e)?);
    }
    // dgamma[i][l][j][k] = ∂_i Γ^l_{jk}
    let mut dgamma = [[[[0.0f64; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for l in 0..2 {
            let gp = gamma(l, &frames_p[i]);
            let gm = gamma(l, &frames_m[i]);
            for j in 0..2 {
                for k in 0..2 {
                    dgamma[i][l][j][k] = (gp[j][k] - gm[j][k]) / (2.0 * fd_step);
                }
            }
        }
    }
    let g0 = [gamma(0, &center), gamma(1, &center)];
    let mut max_abs = 0.0f64;
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut r = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                    for m in 0..2 {
                        r += g0[l][i][m] * g0[m][j][k] - g0[l][j][m] * g0[m][i][k];
                    }
                    max_abs = max_abs.max(r.abs());
                }
            }
        }
    }
    Ok(max_abs)
}

/// Metric pulled back to the complex-time solution chart at one trajectory
/// sample: g evaluated on the splittings of h and ih.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeChartSample {
    pub s: f64,
    /// g(h-split, h-split); 1/2 in the time chart.
    pub g_tangent: f64,
    /// g(h-split, ih-split); 0 by orthogonality.
    pub g_cross: f64,
    /// g(ih-split, ih-split); 1/2 in the time chart.
    pub g_normal: f64,
}

/// Pulls the metric back along a trajectory: in complex-time coordinates the
/// metric is Euclidean, so every sample must return (1/2, 0, 1/2).
pub fn trivialize_in_time_chart(
    h: &HoloFunction,
    traj: &Trajectory,
) -> Result<Vec<TimeChartSample>, GeometryError> {
    let mut out = Vec::with_capacity(traj.samples.len());
    for smp in &traj.samples {
        let hv = nonsingular(h, smp.z)?;
        let (h1, h2) = split(hv);
        let norm_sq = h1 * h1 + h2 * h2;
        let denom = 2.0 * norm_sq;
        // ih splits as (−h₂, h₁).
        out.push(TimeChartSample {
            s: smp.s,
            g_tangent: (h1 * h1 + h2 * h2) / denom,
            g_cross: (h1 * (-h2) + h2 * h1) / denom,
            g_normal: (h2 * h2 + h1 * h1) / denom,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ZeroTable;
    use crate::flow::{integrate_ray, TimeRay};
    use crate::ode::Tolerances;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ident() -> HoloFunction {
        // h(z) = z
        HoloFunction::linear(c(1.0, 0.0))
    }

    #[test]
    fn lagrangian_values() {
        let h = ident();
        let z = c(1.0, 0.0); // |h| = 1
        assert_eq!(
            lagrangian(&h, z, TangentVector::new(0.0, 0.0)).unwrap(),
            0.0
        );
        assert_eq!(
            lagrangian(&h, z, TangentVector::new(1.0, 0.0)).unwrap(),
            0.5
        );
        // Quadratic in v.
        let l1 = lagrangian(&h, c(2.0, 1.0), TangentVector::new(0.3, -0.4)).unwrap();
        let l2 = lagrangian(&h, c(2.0, 1.0), TangentVector::new(0.9, -1.2)).unwrap();
        assert!((l2 - 9.0 * l1).abs() < 1e-15);
        assert!(matches!(
            lagrangian(&h, c(0.0, 0.0), TangentVector::new(1.0, 0.0)),
            Err(GeometryError::MetricSingular { .. })
        ));
    }

    #[test]
    fn christoffels_hand_value_for_identity_map() {
        // h(z) = z at z = 1: m₁ = 1, m₂ = 0, |h|² = 1.
        let frame = metric_frame(&ident(), c(1.0, 0.0)).unwrap();
        assert_eq!(frame.g11, 1.0);
        assert_eq!(frame.gamma1, [[-1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(frame.gamma2, [[0.0, -1.0], [-1.0, 0.0]]);
    }

    #[test]
    fn constant_function_is_flat_with_zero_christoffels() {
        let h = HoloFunction::generic_poly(vec![c(2.0, -1.0)]);
        let frame = metric_frame(&h, c(0.7, 0.4)).unwrap();
        assert_eq!(frame.gamma1, [[0.0; 2]; 2]);
        assert_eq!(frame.gamma2, [[0.0; 2]; 2]);
        let r = curvature_flatness_check(&h, c(0.7, 0.4), 1e-4).unwrap();
        assert_eq!(r, 0.0);
    }

    /// Koszul-formula oracle: finite differences of the metric reproduce the
    /// analytic Christoffels.
    fn koszul_fd_gamma(h: &HoloFunction, z: Complex64, delta: f64) -> [[[f64; 2]; 2]; 2] {
        let g_at = |z: Complex64| -> [f64; 2] {
            let f = metric_frame(h, z).unwrap();
            [f.g11, f.g22]
        };
        let offsets = [Complex64::new(delta, 0.0), Complex64::new(0.0, delta)];
        // dg[l][k]: ∂_l g_kk (the metric is diagonal).
        let mut dg = [[0.0f64; 2]; 2];
        for l in 0..2 {
            let gp = g_at(z + offsets[l]);
            let gm = g_at(z - offsets[l]);
            for k in 0..2 {
                dg[l][k] = (gp[k] - gm[k]) / (2.0 * delta);
            }
        }
        let frame = metric_frame(h, z).unwrap();
        let ginv = [frame.ginv11, frame.ginv22];
        let mut gamma = [[[0.0f64; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    // Γ_{k,ij} = ½(∂_j g_ik + ∂_i g_jk − ∂_k g_ij), diagonal g.
                    let t1 = if i == k { dg[j][i] } else { 0.0 };
                    let t2 = if j == k { dg[i][j] } else { 0.0 };
                    let t3 = if i == j { dg[k][i] } else { 0.0 };
                    gamma[k][i][j] = ginv[k] * 0.5 * (t1 + t2 - t3);
                }
            }
        }
        gamma
    }

    #[test]
    fn christoffels_match_koszul_oracle() {
        let zeros = ZeroTable::bundled();
        let functions = vec![
            HoloFunction::CoshShift,
            HoloFunction::xi_approx(zeros, 2, 1.0).unwrap(),
            HoloFunction::generic_poly(vec![c(1.0, 0.5), c(0.0, 2.0), c(-1.0, 0.0)]),
            HoloFunction::linear(c(1.0, -2.0)),
        ];
        let points = [c(1.3, 0.7), c(-0.4, 1.9), c(2.0, 15.0)];
        for h in &functions {
            for &z in &points {
                if h.value(z).unwrap().norm() < 1e-3 {
                    continue;
                }
                let analytic = metric_frame(h, z).unwrap();
                let fd = koszul_fd_gamma(h, z, 1e-6 * (1.0 + z.norm()));
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            (analytic.gamma1[i][j] - fd[0][i][j]).abs()
                                <= 1e-6 * (1.0 + fd[0][i][j].abs()),
                            "Γ¹[{i}][{j}] for {h} at {z}"
                        );
                        assert!(
                            (analytic.gamma2[i][j] - fd[1][i][j]).abs()
                                <= 1e-6 * (1.0 + fd[1][i][j].abs()),
                            "Γ²[{i}][{j}] for {h} at {z}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn covariant_derivative_matches_gamma_expansion() {
        // Independent route: ∇_Y X = Σ_k [Σ_ij Y^j X^i Γ^k_ij + (J_X·Y)^k] ∂_k.
        let h = HoloFunction::CoshShift;
        let x = VectorFieldSpec::HoloSplit(HoloFunction::generic_poly(vec![
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
        ])); // splitting of z²
        for &z in &[c(1.2, 0.8), c(-0.3, 2.1), c(0.1, 0.9)] {
            let frame = metric_frame(&h, z).unwrap();
            let (hv, dh, _) = h.eval_all(z).unwrap();
            let x_comps = {
                let g = match &x {
                    VectorFieldSpec::HoloSplit(g) => g,
                    _ => unreachable!(),
                };
                let v = g.value(z).unwrap();
                (v.re, v.im)
            };
            let j_x = {
                let g = match &x {
                    VectorFieldSpec::HoloSplit(g) => g,
                    _ => unreachable!(),
                };
                let d = g.deriv(z).unwrap();
                [[d.re, -d.im], [d.im, d.re]]
            };
            for dir in [Direction::AlongH, Direction::AlongIH] {
                let y = match dir {
                    Direction::AlongH => (hv.re, hv.im),
                    Direction::AlongIH => (-hv.im, hv.re),
                };
                let gammas = [frame.gamma1, frame.gamma2];
                let mut expansion = [0.0f64; 2];
                for k in 0..2 {
                    let mut contraction = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            let yj = if j == 0 { y.0 } else { y.1 };
                            let xi = if i == 0 { x_comps.0 } else { x_comps.1 };
                            contraction += yj * xi * gammas[k][i][j];
                        }
                    }
                    let transport = j_x[k][0] * y.0 + j_x[k][1] * y.1;
                    expansion[k] = contraction + transport;
                }
                let closed = covariant_derivative(&h, &x, dir, z).unwrap();
                let scale = 1.0 + dh.norm() * hv.norm();
                assert!(
                    (closed.v1 - expansion[0]).abs() <= 1e-8 * scale
                        && (closed.v2 - expansion[1]).abs() <= 1e-8 * scale,
                    "closed ({}, {}) vs expansion {expansion:?} at {z} {dir:?}",
                    closed.v1,
                    closed.v2
                );
            }
        }
    }

    #[test]
    fn flow_lines_are_geodesics() {
        let zeros = ZeroTable::bundled();
        let h = HoloFunction::xi_approx(zeros, 3, 1.0).unwrap();
        for &z in &[c(1.0, 12.0), c(2.5, 18.0), c(-1.0, 24.0)] {
            let along = covariant_derivative(
                &h,
                &VectorFieldSpec::HoloSplit(h.clone()),
                Direction::AlongH,
                z,
            )
            .unwrap();
            assert_eq!(along.v1, 0.0);
            assert_eq!(along.v2, 0.0);
            // ih is its own geodesic field in the imaginary direction. The
            // splitting of ih is LinearComb(a = 0, b = 1).
            let ih = VectorFieldSpec::LinearComb { a: 0.0, b: 1.0 };
            let res = covariant_derivative(&h, &ih, Direction::AlongIH, z).unwrap();
            assert!(res.v1.abs() < 1e-12 && res.v2.abs() < 1e-12);
        }
    }

    #[test]
    fn linear_combinations_are_parallel() {
        let h = HoloFunction::CoshShift;
        let mut worst = 0.0f64;
        // Deterministic pseudo-random sweep over (a, b, z).
        let mut state = 0x12345678u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..1000 {
            let (a, b) = (next(), next());
            let z = c(next(), next());
            let hv = h.value(z).unwrap();
            if hv.norm() < 1e-6 {
                continue;
            }
            let dh = h.deriv(z).unwrap();
            let scale = 1.0 + dh.norm() * hv.norm() * (a.hypot(b) + 1.0);
            let field = VectorFieldSpec::LinearComb { a, b };
            for dir in [Direction::AlongH, Direction::AlongIH] {
                let r = covariant_derivative(&h, &field, dir, z).unwrap().norm();
                worst = worst.max(r / scale);
            }
        }
        assert!(worst <= 1e-12, "worst normalized residual {worst}");
    }

    #[test]
    fn parallel_sensitivity_over_orbit_samples() {
        let zeros = ZeroTable::bundled();
        let h = HoloFunction::xi_approx(zeros, 4, 1.0).unwrap();
        let z0 = c(0.5, zeros.gammas()[0]) + c(0.3, 0.0);
        let traj = integrate_ray(&h, z0, TimeRay::real(3.0), Tolerances::default(), 1e6).unwrap();
        let points: Vec<Complex64> = traj.samples.iter().map(|s| s.z).collect();
        // Tangential initial sensitivity: X = h itself (a = 1, b = 0).
        let r = check_parallel_sensitivity(&h, z0, h.value(z0).unwrap(), &points).unwrap();
        assert!(r <= 1e-12, "tangential residual {r}");
        // Generic initial sensitivity.
        let r = check_parallel_sensitivity(&h, z0, c(0.3, -1.1), &points).unwrap();
        assert!(r <= 1e-10, "generic residual {r}");
    }

    #[test]
    fn raw_non_holomorphic_field_is_rejected() {
        let h = ident();
        let field = VectorFieldSpec::Raw(Box::new(|z: Complex64| (z.re, 0.0)));
        let err = covariant_derivative(&h, &field, Direction::AlongH, c(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, GeometryError::NonHolomorphicField { .. }));
    }

    #[test]
    fn raw_holomorphic_field_passes_cr_check() {
        let h = ident();
        // Splitting of z² given as raw components.
        let field = VectorFieldSpec::Raw(Box::new(|z: Complex64| {
            let w = z * z;
            (w.re, w.im)
        }));
        let r = covariant_derivative(&h, &field, Direction::AlongH, c(1.0, 1.0)).unwrap();
        // vs the analytic HoloSplit route.
        let exact = covariant_derivative(
            &h,
            &VectorFieldSpec::HoloSplit(HoloFunction::generic_poly(vec![
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
            ])),
            Direction::AlongH,
            c(1.0, 1.0),
        )
        .unwrap();
        assert!((r.v1 - exact.v1).abs() < 1e-7 && (r.v2 - exact.v2).abs() < 1e-7);
    }

    #[test]
    fn curvature_vanishes_at_second_order() {
        let h = ident();
        let z = c(1.0, 1.0);
        let r1 = curvature_flatness_check(&h, z, 1e-2).unwrap();
        let r2 = curvature_flatness_check(&h, z, 5e-3).unwrap();
        let ratio = r1 / r2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "halving ratio {ratio} (r1 = {r1}, r2 = {r2})"
        );
    }

    #[test]
    fn curvature_small_for_xi_approx() {
        let zeros = ZeroTable::bundled();
        let h = HoloFunction::xi_approx(zeros, 4, 1.0).unwrap();
        let r = curvature_flatness_check(&h, c(2.0, 16.0), 1e-4).unwrap();
        assert!(r <= 1e-5, "curvature residual {r}");
    }

    #[test]
    fn metric_invariant_under_unit_rotations_of_h() {
        let base = vec![c(1.0, 0.5), c(0.0, 2.0), c(-1.0, 0.0)];
        let h = HoloFunction::generic_poly(base.clone());
        let variants = [
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let z = c(1.4, -0.8);
        let frame = metric_frame(&h, z).unwrap();
        for &u in &variants {
            let rotated =
                HoloFunction::generic_poly(base.iter().map(|&cf| cf * u).collect());
            let other = metric_frame(&rotated, z).unwrap();
            assert_eq!(frame, other, "rotation {u}");
        }
    }

    #[test]
    fn time_chart_pullback_is_euclidean() {
        let h = HoloFunction::CoshShift;
        let traj = integrate_ray(
            &h,
            c(0.5, std::f64::consts::PI / 4.0),
            TimeRay::real(2.0),
            Tolerances::default(),
            1e6,
        )
        .unwrap();
        let samples = trivialize_in_time_chart(&h, &traj).unwrap();
        assert_eq!(samples.len(), traj.samples.len());
        for s in samples {
            assert_eq!(s.g_tangent, 0.5);
            assert_eq!(s.g_cross, 0.0);
            assert_eq!(s.g_normal, 0.5);
        }
    }

    #[test]
    fn time_chart_rejects_singular_samples() {
        let h = HoloFunction::CoshShift;
        // A trajectory sample sitting exactly on a root of h.
        let mut traj = integrate_ray(
            &h,
            c(0.5, 1.0),
            TimeRay::real(0.0),
            Tolerances::default(),
            1e3,
        )
        .unwrap();
        traj.samples[0].z = c(0.5, std::f64::consts::FRAC_PI_2);
        assert!(matches!(
            trivialize_in_time_chart(&h, &traj),
            Err(GeometryError::MetricSingular { .. })
        ));
    }
}
