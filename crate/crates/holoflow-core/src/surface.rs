//! The approximating polynomial P_m(z; T, z₀) and its solution surface.
//!
//! P_m(z; T, z₀) = ∏ₙ (z−ρₙ)/(z₀−ρₙ) − e^{−T} over the 2m zeros symmetric to
//! the real axis. Its root set, continued over a lattice in the complex time
//! plane, reconstructs the Riemann-surface solution of the Newton flow in
//! complex time; passing near a zero of P′_m is where sheets bifurcate, and
//! those passages are recorded as branch events.
//!
//! Products and the exponential are paired factor by factor and carried in
//! log space wherever a direct evaluation would over- or underflow: |Re T|
//! beyond roughly 700 kills direct exponentials at double precision.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

use crate::catalog::{CatalogError, ZeroTable};
use crate::pole_epsilon;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("anchor z0 = {z0} lies on a zero of the product (|Pi0| = 0)")]
    DegenerateAnchor { z0: Complex64 },
    #[error("polynomial has degree zero (m = 0)")]
    DegreeZero,
    #[error("root iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("time lattice axes must be strictly increasing and contain 0")]
    BadLattice,
    #[error("continuation jump exceeded max_jump at node {node} after one refinement")]
    ContinuationBreak {
        node: usize,
        partial: Box<SurfaceGrid>,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// The polynomial P_m(z; T, z₀) anchored at z₀ with complex time T.
#[derive(Debug, Clone)]
pub struct PmPolynomial {
    zeros: Vec<Complex64>,
    z0: Complex64,
    t: Complex64,
    /// Σ ln(z₀ − ρₙ), the log-space representation of Π₀ = ∏ (z₀ − ρₙ).
    log_pi0: Complex64,
}

impl PmPolynomial {
    pub fn new(
        zeros: &ZeroTable,
        m: usize,
        z0: Complex64,
        t: Complex64,
    ) -> Result<Self, SurfaceError> {
        if m == 0 {
            return Err(SurfaceError::DegreeZero);
        }
        let rhos = zeros.symmetric_zeros(m).map_err(SurfaceError::Catalog)?;
        let eps = pole_epsilon(z0);
        let mut log_pi0 = Complex64::new(0.0, 0.0);
        for &rho in &rhos {
            let d = z0 - rho;
            if d.norm() <= eps {
                return Err(SurfaceError::DegenerateAnchor { z0 });
            }
            log_pi0 += d.ln();
        }
        Ok(PmPolynomial {
            zeros: rhos,
            z0,
            t,
            log_pi0,
        })
    }

    /// Same anchor and zeros, different complex time.
    pub fn with_time(&self, t: Complex64) -> Self {
        let mut p = self.clone();
        p.t = t;
        p
    }

    pub fn pair_count(&self) -> usize {
        self.zeros.len() / 2
    }

    /// Degree in z.
    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn anchor(&self) -> Complex64 {
        self.z0
    }

    pub fn time(&self) -> Complex64 {
        self.t
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    /// Direct evaluation: fold of the per-zero ratios minus e^{−T}.
    pub fn eval_direct(&self, z: Complex64) -> Complex64 {
        let mut prod = Complex64::new(1.0, 0.0);
        for &rho in &self.zeros {
            prod *= (z - rho) / (self.z0 - rho);
        }
        prod - (-self.t).exp()
    }

    /// Σ ln((z−ρₙ)/(z₀−ρₙ)), the log of the normalized product. Pairing each
    /// factor with its anchor counterpart keeps the sum small near the
    /// solution surface.
    fn log_ratio(&self, z: Complex64) -> Complex64 {
        let mut q = Complex64::new(0.0, 0.0);
        for &rho in &self.zeros {
            q += ((z - rho) / (self.z0 - rho)).ln();
        }
        q
    }

    /// Log-space evaluation of P_m, factoring out the dominant exponent so
    /// that intermediate quantities stay representable. A final value whose
    /// magnitude exceeds the double range saturates at f64::MAX.
    pub fn eval_log(&self, z: Complex64) -> Complex64 {
        let q = self.log_ratio(z);
        let target = -self.t;
        let peak = q.re.max(target.re);
        if peak > 700.0 {
            let scale = Complex64::new(peak, 0.0);
            let reduced = (q - scale).exp() - (target - scale).exp();
            let log_mag = peak + reduced.norm().ln();
            let mag = if log_mag > 709.0 {
                f64::MAX
            } else {
                log_mag.exp()
            };
            Complex64::from_polar(mag, reduced.arg())
        } else {
            q.exp() - target.exp()
        }
    }

    /// P_m(z; T, z₀). Uses the direct product while it is representable and
    /// switches to log space otherwise.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let direct = self.eval_direct(z);
        if direct.re.is_finite() && direct.im.is_finite() {
            direct
        } else {
            self.eval_log(z)
        }
    }

    /// Relative constant-phase residual |∏ − e^{−T}| / |e^{−T}| = |e^{q+T} − 1|,
    /// computed without forming either exponential.
    pub fn relative_residual(&self, z: Complex64) -> f64 {
        let mut w = self.log_ratio(z) + self.t;
        // e^w is 2πi-periodic; wrap for an accurate small-residual value.
        w.im = w.im.rem_euclid(2.0 * std::f64::consts::PI);
        if w.im > std::f64::consts::PI {
            w.im -= 2.0 * std::f64::consts::PI;
        }
        if w.norm() < 1e-4 {
            (w + w * w * 0.5).norm()
        } else if w.re > 700.0 {
            f64::INFINITY
        } else {
            (w.exp() - Complex64::new(1.0, 0.0)).norm()
        }
    }

    /// P′_m(z) = Q′(z)/Π₀ as a leave-one-out sum, exact at the zeros ρₙ too.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for skip in 0..self.zeros.len() {
            let mut log_term = -self.log_pi0;
            for (j, &rho) in self.zeros.iter().enumerate() {
                if j != skip {
                    log_term += (z - rho).ln();
                }
            }
            sum += log_term.exp();
        }
        sum
    }

    /// Natural magnitude of the two terms of P_m.
    fn residual_scale(&self) -> f64 {
        1.0 + (-self.t).exp().norm()
    }

    /// All 2m roots, Aberth–Ehrlich with a companion-matrix fallback, each
    /// polished by Newton steps to |P_m| ≤ 1e−12·(1 + |e^{−T}|); returned
    /// sorted by (re, im).
    pub fn roots(&self) -> Result<Vec<Complex64>, SurfaceError> {
        let mut roots = self.solve_roots(None)?;
        roots.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(roots)
    }

    /// log w for the root equation Q(z) = w with w = e^{−T}·Π₀.
    fn log_target(&self) -> Complex64 {
        -self.t + self.log_pi0
    }

    /// Newton correction P/P′ = (1 − w/Q)/L with L = Σ 1/(z−ρₙ); the w/Q
    /// ratio is formed in log space so nothing overflows.
    fn newton_correction(&self, z: Complex64) -> Option<Complex64> {
        let mut inv_sum = Complex64::new(0.0, 0.0);
        let mut log_q = Complex64::new(0.0, 0.0);
        for &rho in &self.zeros {
            let d = z - rho;
            if d.norm() == 0.0 {
                return None;
            }
            inv_sum += d.inv();
            log_q += d.ln();
        }
        if inv_sum.norm() == 0.0 {
            return None;
        }
        let w_over_q = (self.log_target() - log_q).exp();
        Some((Complex64::new(1.0, 0.0) - w_over_q) / inv_sum)
    }

    fn solve_roots(&self, warm: Option<&[Complex64]>) -> Result<Vec<Complex64>, SurfaceError> {
        let n = self.degree();
        let mut zs: Vec<Complex64> = match warm {
            Some(w) if w.len() == n => w.to_vec(),
            _ => {
                // Aberth starting circle: centered on the zero barycenter
                // (1/2 by symmetry), radius covering both the zero cluster
                // and the far-field scale |w|^{1/2m}.
                let center = Complex64::new(0.5, 0.0);
                let spread = self
                    .zeros
                    .iter()
                    .map(|r| (r - center).norm())
                    .fold(0.0, f64::max);
                let far = (self.log_target().re / n as f64).exp();
                let r0 = 1.15 * spread + far + 1.0;
                (0..n)
                    .map(|k| {
                        let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / n as f64;
                        center + Complex64::from_polar(r0, phi)
                    })
                    .collect()
            }
        };
        // Nudge coincident starting points apart.
        for i in 0..n {
            for j in 0..i {
                if (zs[i] - zs[j]).norm() < 1e-14 * (1.0 + zs[i].norm()) {
                    zs[i] += Complex64::new(1e-6, 1e-6);
                }
            }
        }

        const MAX_ITERS: usize = 500;
        let mut converged = false;
        for _ in 0..MAX_ITERS {
            let mut max_move = 0.0f64;
            for i in 0..n {
                let Some(newton) = self.newton_correction(zs[i]) else {
                    zs[i] += Complex64::new(1e-9, 1e-9);
                    max_move = f64::MAX;
                    continue;
                };
                let mut repulsion = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        let d = zs[i] - zs[j];
                        if d.norm() > 0.0 {
                            repulsion += d.inv();
                        }
                    }
                }
                let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
                let delta = if denom.norm() > 1e-300 {
                    newton / denom
                } else {
                    newton
                };
                zs[i] -= delta;
                let rel = delta.norm() / (1.0 + zs[i].norm());
                max_move = max_move.max(rel);
            }
            if max_move <= 1e-14 {
                converged = true;
                break;
            }
        }

        if !converged || !self.polish(&mut zs) {
            // Companion-matrix eigenvalues as the fallback start.
            zs = self.companion_roots()?;
            if !self.polish(&mut zs) {
                return Err(SurfaceError::NonConvergence(MAX_ITERS));
            }
        }
        Ok(zs)
    }

    /// Newton-polishes every root; true when all residuals meet the target.
    fn polish(&self, zs: &mut [Complex64]) -> bool {
        let target = 1e-12 * self.residual_scale();
        for z in zs.iter_mut() {
            for _ in 0..8 {
                if self.eval_log(*z).norm() <= target {
                    break;
                }
                match self.newton_correction(*z) {
                    Some(delta) if delta.norm().is_finite() => *z -= delta,
                    _ => break,
                }
            }
        }
        zs.iter().all(|&z| {
            let r = self.eval_log(z).norm();
            r.is_finite() && r <= self.residual_scale() * 1e-10
        })
    }

    /// Expands the monic coefficients of Q(z) − w and takes the eigenvalues
    /// of the companion matrix (complex Schur form).
    fn companion_roots(&self) -> Result<Vec<Complex64>, SurfaceError> {
        let n = self.degree();
        // Monic expansion of ∏ (z − ρₙ), ascending coefficients.
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &rho in &self.zeros {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * rho;
            }
            c = next;
        }
        // c[0..n] ascending, c[n] = 1. Subtract w from the constant term.
        let w = self.log_target().exp();
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(SurfaceError::NonConvergence(0));
        }
        c[0] -= w;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i];
        }
        let (_, t) = m.schur().unpack();
        Ok((0..n).map(|i| t[(i, i)]).collect())
    }
}

/// Two-variable anchor polynomial p·∏(z−ρₙ) − p₀·∏(z₀−ρₙ).
///
/// Vanishes exactly when (z, p) sits on the momentum solution surface of the
/// Hamiltonian flow restricted to the 2m-zero approximant.
pub fn eval_pm_zp(
    zeros: &ZeroTable,
    m: usize,
    z: Complex64,
    p: Complex64,
    z0: Complex64,
    p0: Complex64,
) -> Result<Complex64, CatalogError> {
    let rhos = zeros.symmetric_zeros(m)?;
    let mut prod_z = Complex64::new(1.0, 0.0);
    let mut prod_z0 = Complex64::new(1.0, 0.0);
    for &rho in &rhos {
        prod_z *= z - rho;
        prod_z0 *= z0 - rho;
    }
    Ok(p * prod_z - p0 * prod_z0)
}

/// Rectangular lattice {τ₁ⱼ + i·τ₂ₖ} in the complex time plane. Both axes are
/// strictly increasing and contain 0: continuation starts at T = 0, where the
/// anchor root z₀ is known.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLattice {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TimeLattice {
    pub fn from_axes(re: Vec<f64>, im: Vec<f64>) -> Result<Self, SurfaceError> {
        let ok = |axis: &[f64]| {
            !axis.is_empty()
                && axis.windows(2).all(|w| w[0] < w[1])
                && axis.iter().any(|&v| v == 0.0)
        };
        if !ok(&re) || !ok(&im) {
            return Err(SurfaceError::BadLattice);
        }
        Ok(TimeLattice { re, im })
    }

    /// Real-time ray 0 … t_max with `n` nodes (t_max may be negative).
    pub fn ray_real(t_max: f64, n: usize) -> Result<Self, SurfaceError> {
        Self::from_axes(Self::ray_axis(t_max, n)?, vec![0.0])
    }

    /// Imaginary-time ray 0 … i·t_max with `n` nodes.
    pub fn ray_imag(t_max: f64, n: usize) -> Result<Self, SurfaceError> {
        Self::from_axes(vec![0.0], Self::ray_axis(t_max, n)?)
    }

    fn ray_axis(t_max: f64, n: usize) -> Result<Vec<f64>, SurfaceError> {
        if n < 1 || (n == 1 && t_max != 0.0) {
            return Err(SurfaceError::BadLattice);
        }
        if n == 1 {
            return Ok(vec![0.0]);
        }
        let mut axis: Vec<f64> = (0..n)
            .map(|k| t_max * k as f64 / (n - 1) as f64)
            .collect();
        axis[0] = 0.0;
        if t_max < 0.0 {
            axis.reverse();
        }
        Ok(axis)
    }

    pub fn re_axis(&self) -> &[f64] {
        &self.re
    }

    pub fn im_axis(&self) -> &[f64] {
        &self.im
    }

    pub fn node_count(&self) -> usize {
        self.re.len() * self.im.len()
    }

    /// Row-major node index: im index outer, re index inner.
    pub fn node_index(&self, j_re: usize, k_im: usize) -> usize {
        k_im * self.re.len() + j_re
    }

    pub fn node(&self, j_re: usize, k_im: usize) -> Complex64 {
        Complex64::new(self.re[j_re], self.im[k_im])
    }

    fn anchor(&self) -> (usize, usize) {
        let j = self.re.iter().position(|&v| v == 0.0).expect("validated");
        let k = self.im.iter().position(|&v| v == 0.0).expect("validated");
        (j, k)
    }
}

/// A sheet passage close to a zero of P′_m: where the solution surface
/// bifurcates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEvent {
    pub t: Complex64,
    pub z: Complex64,
    pub min_dpm: f64,
}

/// Continuation options for [`trace_surface`].
#[derive(Debug, Clone, Copy)]
pub struct ContinuationOpts {
    /// Largest accepted per-edge sheet motion before the edge is bisected.
    pub max_jump: f64,
}

impl Default for ContinuationOpts {
    fn default() -> Self {
        ContinuationOpts { max_jump: 0.5 }
    }
}

/// Tracked root sheets of P_m over a complex-time lattice.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    z0: Complex64,
    m: usize,
    lattice: TimeLattice,
    /// sheets[sheet][node], node index per [`TimeLattice::node_index`].
    sheets: Vec<Vec<Complex64>>,
    /// Nodes actually traced; false only in partial grids after a break.
    filled: Vec<bool>,
    branch_events: Vec<BranchEvent>,
    zeros: Vec<Complex64>,
}

impl SurfaceGrid {
    pub fn anchor(&self) -> Complex64 {
        self.z0
    }

    pub fn pair_count(&self) -> usize {
        self.m
    }

    pub fn lattice(&self) -> &TimeLattice {
        &self.lattice
    }

    pub fn sheets(&self) -> &[Vec<Complex64>] {
        &self.sheets
    }

    pub fn branch_events(&self) -> &[BranchEvent] {
        &self.branch_events
    }

    /// True when the node was traced (false only in partial grids).
    pub fn is_filled(&self, node: usize) -> bool {
        self.filled[node]
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }

    /// Sheet value at a (re, im) lattice position.
    pub fn sheet_at(&self, sheet: usize, j_re: usize, k_im: usize) -> Complex64 {
        self.sheets[sheet][self.lattice.node_index(j_re, k_im)]
    }

    /// JSON export; complex numbers as [re, im] pairs. Untraced nodes of a
    /// partial grid export as null.
    pub fn to_json(&self) -> String {
        let pair = |c: Complex64| json!([c.re, c.im]);
        let sheets: Vec<_> = self
            .sheets
            .iter()
            .map(|sheet| {
                sheet
                    .iter()
                    .enumerate()
                    .map(|(i, &z)| {
                        if self.filled[i] {
                            pair(z)
                        } else {
                            serde_json::Value::Null
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let events: Vec<_> = self
            .branch_events
            .iter()
            .map(|e| {
                json!({
                    "t": pair(e.t),
                    "z": pair(e.z),
                    "min_dpm": e.min_dpm,
                })
            })
            .collect();
        serde_json::to_string_pretty(&json!({
            "z0": pair(self.z0),
            "m": self.m,
            "lattice": { "re": self.lattice.re, "im": self.lattice.im },
            "sheets": sheets,
            "branch_events": events,
        }))
        .expect("grid serializes")
    }
}

/// Max over all stored (T, z) of the relative constant-phase residual
/// |∏(z−ρₙ)/(z₀−ρₙ) − e^{−T}| / |e^{−T}|. Zero for an empty grid.
pub fn verify_constant_phase(grid: &SurfaceGrid) -> f64 {
    let template = PmPolynomial {
        zeros: grid.zeros.clone(),
        z0: grid.z0,
        t: Complex64::new(0.0, 0.0),
        log_pi0: grid.zeros.iter().map(|&r| (grid.z0 - r).ln()).sum(),
    };
    let mut max_res = 0.0f64;
    for k in 0..grid.lattice.im.len() {
        for j in 0..grid.lattice.re.len() {
            let idx = grid.lattice.node_index(j, k);
            if !grid.filled[idx] {
                continue;
            }
            let p = template.with_time(grid.lattice.node(j, k));
            for sheet in &grid.sheets {
                max_res = max_res.max(p.relative_residual(sheet[idx]));
            }
        }
    }
    max_res
}

/// Zeros of Q′ for the symmetric product: all on the critical line, one at
/// γ = 0 and one strictly between each pair of consecutive ordinates (plus
/// mirror images). Returns (critical point, local zero spacing).
fn critical_points(gammas: &[f64]) -> Vec<(Complex64, f64)> {
    let m = gammas.len();
    let mut out = Vec::with_capacity(2 * m - 1);
    out.push((Complex64::new(0.5, 0.0), 2.0 * gammas[0]));
    let g_sum = |y: f64| -> f64 {
        gammas
            .iter()
            .map(|&g| 2.0 * y / (y * y - g * g))
            .sum::<f64>()
    };
    for w in gammas.windows(2) {
        let (lo0, hi0) = (w[0], w[1]);
        let spacing = hi0 - lo0;
        let (mut lo, mut hi) = (lo0 + 1e-12 * (1.0 + lo0), hi0 - 1e-12 * (1.0 + hi0));
        // G → +∞ at the left zero and −∞ at the right one.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g_sum(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y = 0.5 * (lo + hi);
        out.push((Complex64::new(0.5, y), spacing));
        out.push((Complex64::new(0.5, -y), spacing));
    }
    out
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> (f64, Complex64) {
    let ab = b - a;
    let len_sq = ab.norm_sqr();
    if len_sq == 0.0 {
        return ((p - a).norm(), a);
    }
    let t = (((p - a) * ab.conj()).re / len_sq).clamp(0.0, 1.0);
    let closest = a + t * ab;
    ((p - closest).norm(), closest)
}

/// Tracks all 2m root sheets of P_m over the lattice by nearest-neighbor
/// continuation from T = 0, where sheet 0 starts at z₀.
///
/// Sheets are matched to the nearest root of the neighboring node (smallest
/// Euclidean distance, ties broken by smallest root index); an edge whose
/// matched step exceeds `opts.max_jump` is bisected once before
/// `ContinuationBreak` is declared. A branch event is recorded whenever a
/// matched step passes within 1e−4·(local zero spacing) of a zero of P′_m.
pub fn trace_surface(
    zeros: &ZeroTable,
    m: usize,
    z0: Complex64,
    lattice: TimeLattice,
    opts: ContinuationOpts,
) -> Result<SurfaceGrid, SurfaceError> {
    let template = PmPolynomial::new(zeros, m, z0, Complex64::new(0.0, 0.0))?;
    let degree = template.degree();
    let crits = critical_points(&zeros.gammas()[..m]);

    // Anchor solve at T = 0: z0 is an exact root there.
    let mut anchor_roots = template.roots()?;
    let nearest = anchor_roots
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - z0)
                .norm()
                .partial_cmp(&(b.1 - z0).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .expect("degree >= 1");
    anchor_roots.swap(0, nearest);
    anchor_roots[0] = z0;

    let n_nodes = lattice.node_count();
    let mut sheets = vec![vec![Complex64::new(0.0, 0.0); n_nodes]; degree];
    let mut filled = vec![false; n_nodes];
    let mut branch_events: Vec<BranchEvent> = Vec::new();

    let (j0, k0) = lattice.anchor();
    let anchor_idx = lattice.node_index(j0, k0);
    for (s, sheet) in sheets.iter_mut().enumerate() {
        sheet[anchor_idx] = anchor_roots[s];
    }
    filled[anchor_idx] = true;

    // One continuation hop: solve at t_to (warm start) and match sheets.
    let hop = |from: &[Complex64],
               t_to: Complex64|
     -> Result<(Vec<Complex64>, f64), SurfaceError> {
        let p = template.with_time(t_to);
        let roots = p.solve_roots(Some(from))?;
        let mut matched = vec![Complex64::new(0.0, 0.0); degree];
        let mut claimed = vec![false; degree];
        let mut worst = 0.0f64;
        for s in 0..degree {
            let mut best: Option<(usize, f64)> = None;
            for (i, &r) in roots.iter().enumerate() {
                if claimed[i] {
                    continue;
                }
                let d = (r - from[s]).norm();
                let better = match best {
                    None => true,
                    Some((_, bd)) => d < bd,
                };
                if better {
                    best = Some((i, d));
                }
            }
            let (i, d) = best.expect("as many roots as sheets");
            claimed[i] = true;
            matched[s] = roots[i];
            worst = worst.max(d);
        }
        Ok((matched, worst))
    };

    // One edge with a single automatic bisection on a too-large jump.
    let advance = |from: &[Complex64],
                   t_from: Complex64,
                   t_to: Complex64|
     -> Result<Option<Vec<Complex64>>, SurfaceError> {
        let (matched, jump) = hop(from, t_to)?;
        if jump <= opts.max_jump {
            return Ok(Some(matched));
        }
        let t_mid = 0.5 * (t_from + t_to);
        let (mid, jump1) = hop(from, t_mid)?;
        let (fin, jump2) = hop(&mid, t_to)?;
        if jump1 <= opts.max_jump && jump2 <= opts.max_jump {
            Ok(Some(fin))
        } else {
            Ok(None)
        }
    };

    // Deterministic walk: along the anchor row, then each column outward.
    let mut edges: Vec<(usize, usize, usize, usize)> = Vec::new(); // (j_from,k_from,j_to,k_to)
    for j in (j0 + 1)..lattice.re.len() {
        edges.push((j - 1, k0, j, k0));
    }
    for j in (0..j0).rev() {
        edges.push((j + 1, k0, j, k0));
    }
    for j in 0..lattice.re.len() {
        for k in (k0 + 1)..lattice.im.len() {
            edges.push((j, k - 1, j, k));
        }
        for k in (0..k0).rev() {
            edges.push((j, k + 1, j, k));
        }
    }

    for (jf, kf, jt, kt) in edges {
        let from_idx = lattice.node_index(jf, kf);
        let to_idx = lattice.node_index(jt, kt);
        debug_assert!(filled[from_idx]);
        let from: Vec<Complex64> = sheets.iter().map(|sheet| sheet[from_idx]).collect();
        let t_from = lattice.node(jf, kf);
        let t_to = lattice.node(jt, kt);
        let advanced = advance(&from, t_from, t_to)?;
        let Some(matched) = advanced else {
            let partial = SurfaceGrid {
                z0,
                m,
                lattice: lattice.clone(),
                sheets,
                filled,
                branch_events,
                zeros: template.zeros.clone(),
            };
            return Err(SurfaceError::ContinuationBreak {
                node: to_idx,
                partial: Box::new(partial),
            });
        };
        let p_to = template.with_time(t_to);
        for s in 0..degree {
            for &(crit, spacing) in &crits {
                let eps = 1e-4 * spacing;
                let (dist, closest) = point_segment_distance(crit, from[s], matched[s]);
                if dist < eps {
                    branch_events.push(BranchEvent {
                        t: t_to,
                        z: closest,
                        min_dpm: p_to.derivative(closest).norm(),
                    });
                }
            }
            sheets[s][to_idx] = matched[s];
        }
        filled[to_idx] = true;
    }

    Ok(SurfaceGrid {
        z0,
        m,
        lattice,
        sheets,
        filled,
        branch_events,
        zeros: template.zeros.clone(),
    })
}
