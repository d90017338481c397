//! `holoflow` — phase portraits, complex-time solution surfaces, orbit
//! sensitivity studies and invariant verification for holomorphic and Newton
//! flows, driven by one JSON config per run.
//!
//! Exit codes: 0 success, 1 failed verification, 2 configuration error,
//! 3 numerical abort (partial outputs retained).

mod config;
mod orbit_study;
mod portrait;
mod surface_cmd;
mod svg;
mod verify;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "holoflow", version, about = "Complex-time flows of entire functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a flow over a seed lattice and classify separatrices.
    Portrait(PortraitArgs),
    /// Trace the root sheets of the approximating polynomial over a time lattice.
    Surface(SurfaceArgs),
    /// Propagate sensitivities and momenta around one closed orbit.
    OrbitStudy(OrbitStudyArgs),
    /// Run invariant suites and emit a JSON report.
    Verify(VerifyArgs),
}

/// Flags shared by every subcommand; set fields override the config file.
#[derive(Debug, Args, Clone)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Function kind: cosh | xi-approx | poly | linear.
    #[arg(long)]
    kind: Option<String>,
    /// Zero-pair count for xi-approx.
    #[arg(long)]
    m: Option<usize>,
    /// Scale for xi-approx (autocalibrated when omitted).
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Zero-table file (bundled table when omitted).
    #[arg(long)]
    zero_table: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    re_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    re_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    im_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    im_max: Option<f64>,
    /// Seeds per window axis.
    #[arg(long)]
    density: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    rel_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    abs_tol: Option<f64>,
    /// Classification / orbit-detection horizon.
    #[arg(long, allow_negative_numbers = true)]
    horizon: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized suites.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonArgs {
    fn merged_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(kind) = &self.kind {
            config.function.kind = kind.clone();
        }
        if let Some(m) = self.m {
            config.function.m = m;
        }
        if let Some(alpha) = self.alpha {
            config.function.alpha = Some(alpha);
        }
        if let Some(path) = &self.zero_table {
            config.function.zero_table = Some(path.clone());
        }
        if let Some(v) = self.re_min {
            config.window.re_min = v;
        }
        if let Some(v) = self.re_max {
            config.window.re_max = v;
        }
        if let Some(v) = self.im_min {
            config.window.im_min = v;
        }
        if let Some(v) = self.im_max {
            config.window.im_max = v;
        }
        if let Some(v) = self.density {
            config.window.density = v;
        }
        if let Some(v) = self.rel_tol {
            config.tol.rel = v;
        }
        if let Some(v) = self.abs_tol {
            config.tol.abs = v;
        }
        if let Some(v) = self.horizon {
            config.horizon = v;
        }
        if let Some(dir) = &self.out {
            config.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FlowKind {
    Holomorphic,
    Newton,
    Desingularized,
}

#[derive(Debug, Args)]
struct PortraitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which vector field to integrate.
    #[arg(long, value_enum, default_value_t = FlowKind::Holomorphic)]
    flow: FlowKind,
    /// Ray span for each trajectory.
    #[arg(long, allow_negative_numbers = true)]
    span: Option<f64>,
    /// Skip the separatrix classification overlay.
    #[arg(long, default_value_t = false)]
    no_classify: bool,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Anchor z0 as "re,im".
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z0: Complex64,
    /// Real-time extent of the lattice (from 0).
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    t_re_max: f64,
    /// Nodes along the real-time axis.
    #[arg(long, default_value_t = 41)]
    t_re_steps: usize,
    /// Imaginary-time extent of the lattice (from 0).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t_im_max: f64,
    /// Nodes along the imaginary-time axis.
    #[arg(long, default_value_t = 1)]
    t_im_steps: usize,
    /// Largest accepted sheet motion per lattice edge.
    #[arg(long, default_value_t = 0.5)]
    max_jump: f64,
}

#[derive(Debug, Args)]
struct OrbitStudyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Orbit seed z0 as "re,im".
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z0: Complex64,
    /// Initial momentum p0 as "re,im".
    #[arg(long, value_parser = parse_complex, default_value = "1,0", allow_hyphen_values = true)]
    p0: Complex64,
    /// Initial sensitivities (repeatable).
    #[arg(long = "dz0", value_parser = parse_complex, allow_hyphen_values = true)]
    dz0: Vec<Complex64>,
    /// Initial momentum sensitivities (repeatable).
    #[arg(long = "dp0", value_parser = parse_complex, allow_hyphen_values = true)]
    dp0: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteKind {
    Geometry,
    Hamiltonian,
    Flows,
    All,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which invariant suite to run.
    #[arg(long, value_enum, default_value_t = SuiteKind::All)]
    suite: SuiteKind,
}

fn parse_complex(text: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"re,im\", got {text:?}"));
    }
    let re: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad real part {:?}", parts[0]))?;
    let im: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad imaginary part {:?}", parts[1]))?;
    Ok(Complex64::new(re, im))
}

/// Failure classes mapped to process exit codes.
enum Failure {
    /// Invalid configuration or inputs: exit 2.
    Config(anyhow::Error),
    /// Numerical abort; partial outputs are retained: exit 3.
    Numeric(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Numeric(e) => e,
        }
    }
}

fn init_thread_pool() {
    if let Ok(text) = std::env::var("HOLOFLOW_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n >= 1 {
                // A failure here means a pool already exists; that is fine.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_thread_pool();
    let outcome: Result<i32, Failure> = match cli.command {
        Command::Portrait(args) => portrait::run(args),
        Command::Surface(args) => surface_cmd::run(args),
        Command::OrbitStudy(args) => orbit_study::run(args),
        Command::Verify(args) => verify::run(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(failure) => {
            eprintln!("holoflow: error: {:#}", failure.message());
            std::process::exit(failure.exit_code());
        }
    }
}
