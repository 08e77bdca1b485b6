//! Run artifacts: body JSON files, the diagnostics CSV, SVG curve
//! snapshots, and the atomically-rewritten manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gcf_core::{
    boundary_points, support_to_spec, BodySpec, DiagnosticsRecord, FlowConfig, SupportField,
    Termination, Trajectory,
};
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "t,volume,min_s,max_s,min_K,max_K,gamma,lambda,chi_max,roundness,\
band_s_star_min,band_s_star_max,band_Kstar_max,band_K_min";

/// 17 significant digits: round-trips f64 exactly in text form.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt(v),
        None => "nan".to_string(),
    }
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    [
        fmt(r.t),
        fmt(r.volume),
        fmt(r.min_s),
        fmt(r.max_s),
        fmt(r.min_kappa),
        fmt(r.max_kappa),
        fmt(r.gamma),
        fmt(r.lambda),
        fmt(r.chi_max),
        fmt(r.roundness),
        fmt_opt(r.band_s_star_min),
        fmt_opt(r.band_s_star_max),
        fmt_opt(r.band_kstar_max),
        fmt_opt(r.band_k_min),
    ]
    .join(",")
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = String::with_capacity(records.len() * 256);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_body_file(path: &Path, body: &SupportField) -> Result<()> {
    let spec = support_to_spec(body);
    std::fs::write(path, spec.to_json()).with_context(|| format!("writing {}", path.display()))
}

pub fn read_body_spec(path: &Path) -> Result<BodySpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BodySpec::from_json(&text)?)
}

/// Closed boundary polyline of a planar body.
pub fn write_svg(path: &Path, body: &SupportField, half_extent: f64) -> Result<()> {
    let pts = boundary_points(body)?;
    let size = 640.0;
    let scale = size / (2.0 * half_extent);
    let mut d = String::new();
    for (k, p) in pts.iter().enumerate() {
        let x = size / 2.0 + p[0] * scale;
        let y = size / 2.0 - p[1] * scale;
        d.push_str(if k == 0 { "M" } else { "L" });
        d.push_str(&format!("{x:.2} {y:.2} "));
    }
    d.push('Z');
    let svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}">
<rect width="{size}" height="{size}" fill="white"/>
<circle cx="{half}" cy="{half}" r="2" fill="#888"/>
<path d="{d}" fill="none" stroke="#0a4d8c" stroke-width="1.5"/>
</svg>
"#,
        half = size / 2.0,
    );
    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub step: u64,
    pub t: f64,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: FlowConfig,
    pub version: String,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hat_uncertainty: Option<f64>,
    pub diagnostics_csv: String,
    pub snapshots: Vec<SnapshotEntry>,
}

/// Write the manifest through a temp file and rename, so a crash never
/// leaves a truncated manifest next to valid snapshots.
pub fn write_manifest_atomic(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let tmp = dir.join("manifest.json.tmp");
    {
        let mut f = std::fs::File::create(&tmp)
            .with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, &path)
        .with_context(|| format!("renaming manifest into {}", path.display()))?;
    Ok(path)
}

/// Write all artifacts of a finished trajectory into `dir`.
pub fn write_run_outputs(dir: &Path, config: &FlowConfig, traj: &Trajectory) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    let half_extent = traj
        .snapshots
        .first()
        .map(|s| 1.1 * s.support.max())
        .unwrap_or(1.0);
    for (index, snap) in traj.snapshots.iter().enumerate() {
        let body = if config.normalize {
            let state = gcf_core::FlowState {
                t: snap.t,
                step: snap.step,
                body: gcf_core::BodyRep::Support(snap.support.clone()),
            };
            match gcf_core::normalize(&state)?.body {
                gcf_core::BodyRep::Support(b) => b,
                gcf_core::BodyRep::Radial(_) => unreachable!(),
            }
        } else {
            snap.support.clone()
        };
        let body_name = format!("snap_{index:06}.json");
        write_body_file(&dir.join(&body_name), &body)?;
        let svg = if config.dim == 2 {
            let svg_name = format!("snap_{index:06}.svg");
            write_svg(&dir.join(&svg_name), &body, half_extent)?;
            Some(svg_name)
        } else {
            None
        };
        entries.push(SnapshotEntry {
            index,
            step: snap.step,
            t: snap.t,
            body: body_name,
            svg,
        });
    }
    write_diagnostics_csv(&dir.join("diagnostics.csv"), &traj.records)?;
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        termination: traj.termination.clone(),
        t_hat: traj.extinction.map(|e| e.t_hat),
        t_hat_uncertainty: traj.extinction.map(|e| e.uncertainty),
        diagnostics_csv: "diagnostics.csv".to_string(),
        snapshots: entries,
    };
    write_manifest_atomic(dir, &manifest)
}
