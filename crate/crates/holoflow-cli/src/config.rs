//! Run configuration: one JSON document per run, with command-line flags
//! overriding individual fields. Identical config + seed means byte-identical
//! outputs.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use holoflow_core::{HoloFunction, Tolerances, ZeroTable};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionSpec {
    /// cosh | xi-approx | poly | linear
    pub kind: String,
    /// Zero-pair count for xi-approx.
    pub m: usize,
    /// Scale α for xi-approx; autocalibrated when absent so that
    /// max |h| over the window is O(1).
    pub alpha: Option<f64>,
    /// Zero-table path; the bundled first-100 table when absent.
    pub zero_table: Option<PathBuf>,
    /// Ascending [re, im] coefficients for kind = poly.
    pub coeffs: Option<Vec<[f64; 2]>>,
    /// Coefficient for kind = linear (h = a·z).
    pub a: Option<[f64; 2]>,
}

impl Default for FunctionSpec {
    fn default() -> Self {
        FunctionSpec {
            kind: "xi-approx".to_string(),
            m: 4,
            alpha: None,
            zero_table: None,
            coeffs: None,
            a: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Seeds per axis.
    pub density: usize,
}

impl Default for Window {
    fn default() -> Self {
        // The default portrait window for the ξ-approximant studies.
        Window {
            re_min: -7.0,
            re_max: 8.0,
            im_min: -1.0,
            im_max: 30.0,
            density: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolSpec {
    pub rel: f64,
    pub abs: f64,
}

impl Default for TolSpec {
    fn default() -> Self {
        TolSpec {
            rel: 1e-10,
            abs: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub function: FunctionSpec,
    pub window: Window,
    pub tol: TolSpec,
    /// Integration horizon for classification and orbit detection.
    pub horizon: f64,
    /// Ray span for portrait trajectories.
    pub portrait_span: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            function: FunctionSpec::default(),
            window: Window::default(),
            tol: TolSpec::default(),
            horizon: 1e3,
            portrait_span: 30.0,
            output_dir: PathBuf::from("out"),
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.window;
        if !(w.re_min < w.re_max) || !(w.im_min < w.im_max) {
            bail!(
                "window is empty: re [{}, {}], im [{}, {}]",
                w.re_min,
                w.re_max,
                w.im_min,
                w.im_max
            );
        }
        if w.density < 2 {
            bail!("window density must be at least 2 per axis, got {}", w.density);
        }
        let tol = Tolerances::new(self.tol.rel, self.tol.abs);
        if !tol.is_valid() {
            bail!(
                "tolerances must lie in (0, 1e-2]: rel = {:e}, abs = {:e}",
                self.tol.rel,
                self.tol.abs
            );
        }
        if !(self.horizon > 0.0) || !(self.portrait_span > 0.0) {
            bail!("horizon and portrait_span must be positive");
        }
        match self.function.kind.as_str() {
            "cosh" | "xi-approx" | "poly" | "linear" => {}
            other => bail!("unknown function kind {other:?} (use cosh | xi-approx | poly | linear)"),
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances::new(self.tol.rel, self.tol.abs)
    }

    /// Seed lattice over the window, row-major (im outer).
    pub fn seed_lattice(&self) -> Vec<Complex64> {
        let w = &self.window;
        let n = w.density;
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            let im = w.im_min + (w.im_max - w.im_min) * k as f64 / (n - 1) as f64;
            for j in 0..n {
                let re = w.re_min + (w.re_max - w.re_min) * j as f64 / (n - 1) as f64;
                out.push(Complex64::new(re, im));
            }
        }
        out
    }

    /// Builds the configured function; returns the effective α for the
    /// metadata record.
    pub fn build_function(&self) -> Result<(HoloFunction, FunctionMeta)> {
        let spec = &self.function;
        match spec.kind.as_str() {
            "cosh" => Ok((
                HoloFunction::CoshShift,
                FunctionMeta {
                    kind: "cosh".into(),
                    m: None,
                    alpha: None,
                    zero_table: None,
                },
            )),
            "linear" => {
                let a = spec.a.unwrap_or([1.0, 0.0]);
                Ok((
                    HoloFunction::linear(Complex64::new(a[0], a[1])),
                    FunctionMeta {
                        kind: "linear".into(),
                        m: None,
                        alpha: None,
                        zero_table: None,
                    },
                ))
            }
            "poly" => {
                let coeffs = spec
                    .coeffs
                    .as_ref()
                    .ok_or_else(|| anyhow!("kind = poly requires function.coeffs"))?;
                if coeffs.is_empty() {
                    bail!("function.coeffs must not be empty");
                }
                let coeffs = coeffs
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect();
                Ok((
                    HoloFunction::generic_poly(coeffs),
                    FunctionMeta {
                        kind: "poly".into(),
                        m: None,
                        alpha: None,
                        zero_table: None,
                    },
                ))
            }
            "xi-approx" => {
                let (table, table_name) = self.zero_table()?;
                if spec.m == 0 {
                    bail!("xi-approx needs m >= 1");
                }
                let alpha = match spec.alpha {
                    Some(a) if a > 0.0 => a,
                    Some(a) => bail!("alpha must be positive, got {a}"),
                    None => calibrate_alpha(&table, spec.m, &self.window)?,
                };
                let h = HoloFunction::xi_approx(&table, spec.m, alpha)
                    .map_err(|e| anyhow!("{e}"))?;
                Ok((
                    h,
                    FunctionMeta {
                        kind: "xi-approx".into(),
                        m: Some(spec.m),
                        alpha: Some(alpha),
                        zero_table: Some(table_name),
                    },
                ))
            }
            other => bail!("unknown function kind {other:?}"),
        }
    }

    /// The zero table named by the config, or the bundled one.
    pub fn zero_table(&self) -> Result<(ZeroTable, String)> {
        match &self.function.zero_table {
            Some(path) => {
                let table = ZeroTable::load(path)
                    .map_err(|e| anyhow!("zero table {}: {e}", path.display()))?;
                Ok((table, path.display().to_string()))
            }
            None => Ok((ZeroTable::bundled().clone(), "bundled".to_string())),
        }
    }
}

/// Resolved function description recorded in output metadata.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionMeta {
    pub kind: String,
    pub m: Option<usize>,
    pub alpha: Option<f64>,
    pub zero_table: Option<String>,
}

/// α such that max |h_unscaled| over a fixed 48×48 window grid maps to 1.
fn calibrate_alpha(table: &ZeroTable, m: usize, window: &Window) -> Result<f64> {
    let raw = HoloFunction::xi_approx(table, m, 1.0).map_err(|e| anyhow!("{e}"))?;
    let n = 48;
    let mut max_abs = 0.0f64;
    for k in 0..n {
        let im = window.im_min + (window.im_max - window.im_min) * k as f64 / (n - 1) as f64;
        for j in 0..n {
            let re = window.re_min + (window.re_max - window.re_min) * j as f64 / (n - 1) as f64;
            if let Ok(v) = raw.value(Complex64::new(re, im)) {
                max_abs = max_abs.max(v.norm());
            }
        }
    }
    if max_abs == 0.0 {
        bail!("cannot calibrate alpha: |h| vanishes on the whole window grid");
    }
    Ok(1.0 / max_abs)
}

/// Full-precision decimal for CSV output (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let (h, meta) = config.build_function().unwrap();
        assert_eq!(meta.kind, "xi-approx");
        let alpha = meta.alpha.unwrap();
        assert!(alpha > 0.0);
        // Calibration puts max |h| over the window at 1.
        match h {
            HoloFunction::XiApprox { scale, .. } => assert_eq!(scale, alpha),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_window_is_rejected() {
        let mut config = RunConfig::default();
        config.window.im_min = 5.0;
        config.window.im_max = -5.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let mut config = RunConfig::default();
        config.function.kind = "zeta".into();
        assert!(config.validate().is_err());
    }

    #[test]
    fn full_precision_format_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 1e-300, -2.5e17] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
