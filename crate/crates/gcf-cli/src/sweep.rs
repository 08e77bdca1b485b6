//! Parameter sweeps: independent runs in parallel worker threads with
//! disjoint output directories and an aggregated comparison table.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use gcf_core::{run_flow_from_config, FlowConfig, Termination};

use crate::config::parse_config;
use crate::outputs;
use crate::runcmd::parse_resolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Resolution,
    CflFactor,
    StopThreshold,
    SnapshotEvery,
}

impl std::str::FromStr for SweepParam {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resolution" => Ok(SweepParam::Resolution),
            "cfl_factor" => Ok(SweepParam::CflFactor),
            "stop_threshold" => Ok(SweepParam::StopThreshold),
            "snapshot_every" => Ok(SweepParam::SnapshotEvery),
            other => bail!(
                "unrecognized sweep parameter '{other}' \
                 (expected resolution, cfl_factor, stop_threshold, or snapshot_every)"
            ),
        }
    }
}

fn apply(config: &FlowConfig, param: SweepParam, value: &str) -> Result<FlowConfig> {
    let mut c = config.clone();
    match param {
        SweepParam::Resolution => {
            c.resolution = parse_resolution(&value.replace('x', ","))?;
        }
        SweepParam::CflFactor => c.cfl_factor = value.parse()?,
        SweepParam::StopThreshold => c.stop_threshold = value.parse()?,
        SweepParam::SnapshotEvery => c.snapshot_every = value.parse()?,
    }
    c.validate()?;
    Ok(c)
}

struct SweepRow {
    value: String,
    t_hat: Option<f64>,
    uncertainty: Option<f64>,
    termination: String,
    snapshots: usize,
    final_roundness: Option<f64>,
    error: Option<String>,
}

/// Number of worker threads: GCF_THREADS when set, otherwise the machine
/// parallelism.
fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var("GCF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    cap.min(jobs.max(1))
}

pub fn cmd_sweep(
    param_text: &str,
    values: &[String],
    config_path: &Path,
    out_dir: &Path,
) -> Result<i32> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let param: SweepParam = param_text.parse()?;
    let base = parse_config(config_path)?;
    std::fs::create_dir_all(out_dir)?;

    // Validate all child configs up front so a typo fails fast.
    let jobs: Vec<(String, FlowConfig, PathBuf)> = values
        .iter()
        .map(|v| {
            let config = apply(&base, param, v)?;
            let sub = out_dir.join(format!("{param_text}_{}", v.replace(',', "x")));
            Ok((v.clone(), config, sub))
        })
        .collect::<Result<_>>()?;

    let results: Mutex<Vec<(usize, SweepRow)>> = Mutex::new(Vec::new());
    let next: Mutex<usize> = Mutex::new(0);
    let workers = worker_count(jobs.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = {
                    let mut n = next.lock().unwrap();
                    if *n >= jobs.len() {
                        break;
                    }
                    let i = *n;
                    *n += 1;
                    i
                };
                let (value, config, sub) = &jobs[index];
                let row = match run_child(config, sub) {
                    Ok(row) => row,
                    Err(e) => SweepRow {
                        value: value.clone(),
                        t_hat: None,
                        uncertainty: None,
                        termination: "error".into(),
                        snapshots: 0,
                        final_roundness: None,
                        error: Some(format!("{e:#}")),
                    },
                };
                let row = SweepRow {
                    value: value.clone(),
                    ..row
                };
                results.lock().unwrap().push((index, row));
            });
        }
    });

    let mut rows = results.into_inner().unwrap();
    rows.sort_by_key(|(i, _)| *i);

    let mut csv = String::from(
        "param,value,t_hat,t_hat_uncertainty,termination,snapshots,final_roundness,error\n",
    );
    let mut failures = 0;
    for (_, row) in &rows {
        if row.error.is_some() {
            failures += 1;
        }
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            param_text,
            row.value,
            row.t_hat.map(|v| format!("{v:.16e}")).unwrap_or_default(),
            row.uncertainty
                .map(|v| format!("{v:.16e}"))
                .unwrap_or_default(),
            row.termination,
            row.snapshots,
            row.final_roundness
                .map(|v| format!("{v:.16e}"))
                .unwrap_or_default(),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    let csv_path = out_dir.join("sweep.csv");
    std::fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    println!(
        "sweep over {param_text}: {} runs, {} failed, table in {}",
        rows.len(),
        failures,
        csv_path.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn run_child(config: &FlowConfig, out_dir: &Path) -> Result<SweepRow> {
    let traj = run_flow_from_config(config)?;
    outputs::write_run_outputs(out_dir, config, &traj)?;
    Ok(SweepRow {
        value: String::new(),
        t_hat: traj.extinction.map(|e| e.t_hat),
        uncertainty: traj.extinction.map(|e| e.uncertainty),
        termination: match &traj.termination {
            Termination::StopRule => "stop_rule".into(),
            Termination::TimeLimit => "time_limit".into(),
            Termination::ConvexityLost { .. } => "convexity_lost".into(),
        },
        snapshots: traj.snapshots.len(),
        final_roundness: traj.records.last().map(|r| r.roundness),
        error: None,
    })
}
