use std::path::Path;

use anyhow::{bail, Context, Result};
use gcf_core::{
    build_support, make_grid, polar, run_flow_from_config, support_to_spec, Termination,
};

use crate::config::parse_config;
use crate::outputs;

/// Execute a configured run and write snapshots, diagnostics and manifest.
/// Returns the process exit code: 0 when the run ended by the stop rule or
/// time limit, 3 when convexity was lost mid-run (partial outputs are still
/// written).
pub fn cmd_run(config_path: &Path, out_dir: &Path) -> Result<i32> {
    let config = parse_config(config_path)?;
    let traj = run_flow_from_config(&config)?;
    outputs::write_run_outputs(out_dir, &config, &traj)?;
    match &traj.termination {
        Termination::StopRule | Termination::TimeLimit => {
            if let Some(ext) = traj.extinction {
                println!(
                    "run finished: {} snapshots, T_hat = {:.6} +/- {:.2e}",
                    traj.snapshots.len(),
                    ext.t_hat,
                    ext.uncertainty
                );
            } else {
                println!("run finished: {} snapshots", traj.snapshots.len());
            }
            Ok(0)
        }
        Termination::ConvexityLost { step, t, message } => {
            eprintln!("convexity lost at step {step}, t = {t:.6}: {message}");
            eprintln!("partial outputs kept in {}", out_dir.display());
            Ok(3)
        }
    }
}

/// Compute the polar body of a body file. Analytic seeds need a grid; it is
/// taken from the file when embedded (support_grid) and from the `n` and
/// `resolution` arguments otherwise.
pub fn cmd_polar(
    input: &Path,
    output: &Path,
    dim: usize,
    resolution: &[usize],
) -> Result<i32> {
    let spec = outputs::read_body_spec(input)?;
    let grid = match spec.embedded_grid() {
        Some((n, res)) => make_grid(n, res)?,
        None => make_grid(dim, resolution)?,
    };
    let body = build_support(&grid, &spec)
        .with_context(|| format!("building body from {}", input.display()))?;
    let star = polar(&body)?;
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(output, support_to_spec(&star).to_json())
        .with_context(|| format!("writing {}", output.display()))?;
    println!(
        "polar written: min s* = {:.6}, max s* = {:.6}",
        star.min(),
        star.max()
    );
    Ok(0)
}

/// Parse "N" or "N,M" resolution strings.
pub fn parse_resolution(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing resolution '{text}'"))?;
    if parts.is_empty() || parts.len() > 2 {
        bail!("resolution must be N or N,M, got '{text}'");
    }
    Ok(parts)
}
