//! `holoflow surface`: trace the root sheets of P_m over a complex-time
//! lattice and emit the grid JSON, the branch-event list and a constant-phase
//! residual summary.

use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, Context, Result};
use serde_json::json;

use holoflow_core::surface::{
    trace_surface, verify_constant_phase, ContinuationOpts, SurfaceError, SurfaceGrid, TimeLattice,
};

use crate::config::fmt_f64;
use crate::{Failure, SurfaceArgs};

fn axis(extent: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(anyhow!("lattice axis needs at least one node"));
    }
    if steps == 1 {
        if extent != 0.0 {
            return Err(anyhow!(
                "a single-node axis must have extent 0, got {extent}"
            ));
        }
        return Ok(vec![0.0]);
    }
    if extent == 0.0 {
        return Err(anyhow!("a multi-node axis needs a nonzero extent"));
    }
    let mut out: Vec<f64> = (0..steps)
        .map(|k| extent * k as f64 / (steps - 1) as f64)
        .collect();
    out[0] = 0.0;
    if extent < 0.0 {
        out.reverse();
    }
    Ok(out)
}

fn write_outputs(
    out_dir: &std::path::Path,
    grid: &SurfaceGrid,
    aborted_at: Option<usize>,
) -> Result<f64> {
    fs::write(out_dir.join("surface.json"), grid.to_json()).context("writing surface.json")?;
    let mut events = String::from("t_re,t_im,z_re,z_im,min_dpm\n");
    for e in grid.branch_events() {
        writeln!(
            events,
            "{},{},{},{},{}",
            fmt_f64(e.t.re),
            fmt_f64(e.t.im),
            fmt_f64(e.z.re),
            fmt_f64(e.z.im),
            fmt_f64(e.min_dpm),
        )
        .expect("string write");
    }
    fs::write(out_dir.join("branch_events.csv"), events).context("writing branch_events.csv")?;
    let residual = verify_constant_phase(grid);
    let metadata = json!({
        "command": "surface",
        "z0": [grid.anchor().re, grid.anchor().im],
        "m": grid.pair_count(),
        "sheets": grid.sheets().len(),
        "nodes": grid.lattice().node_count(),
        "branch_events": grid.branch_events().len(),
        "constant_phase_residual_max": residual,
        "aborted_at_node": aborted_at,
    });
    fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("metadata serializes"),
    )
    .context("writing metadata.json")?;
    Ok(residual)
}

pub fn run(args: SurfaceArgs) -> Result<i32, Failure> {
    let config = args.common.merged_config().map_err(Failure::Config)?;
    let (table, _) = config.zero_table().map_err(Failure::Config)?;
    let m = config.function.m;
    let out_dir = config.output_dir.clone();
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::Config)?;

    let lattice = (|| -> Result<TimeLattice> {
        let re = axis(args.t_re_max, args.t_re_steps)?;
        let im = axis(args.t_im_max, args.t_im_steps)?;
        TimeLattice::from_axes(re, im).map_err(|e| anyhow!("{e}"))
    })()
    .map_err(Failure::Config)?;

    if !(args.max_jump > 0.0) {
        return Err(Failure::Config(anyhow!("max_jump must be positive")));
    }
    let opts = ContinuationOpts {
        max_jump: args.max_jump,
    };

    match trace_surface(&table, m, args.z0, lattice, opts) {
        Ok(grid) => {
            let residual = write_outputs(&out_dir, &grid, None).map_err(Failure::Numeric)?;
            println!(
                "surface: {} sheets x {} nodes, {} branch events, residual {:.3e} -> {}",
                grid.sheets().len(),
                grid.lattice().node_count(),
                grid.branch_events().len(),
                residual,
                out_dir.display()
            );
            Ok(0)
        }
        Err(SurfaceError::ContinuationBreak { node, partial }) => {
            // Keep whatever was traced before the break.
            write_outputs(&out_dir, &partial, Some(node)).map_err(Failure::Numeric)?;
            Err(Failure::Numeric(anyhow!(
                "continuation broke at node {node}; partial grid retained in {}",
                out_dir.display()
            )))
        }
        Err(e @ (SurfaceError::DegenerateAnchor { .. }
        | SurfaceError::DegreeZero
        | SurfaceError::BadLattice
        | SurfaceError::Catalog(_))) => Err(Failure::Config(anyhow!("{e}"))),
        Err(e) => Err(Failure::Numeric(anyhow!("{e}"))),
    }
}
