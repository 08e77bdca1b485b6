//! Time stepping for the three flows: the support-form contraction
//! ds/dt = -1/sigma, its radial-chart form dr/dt = -(w/r) K, and the induced
//! expansion of the polar bodies ds*/dt = s*^{n+2} sigma* / w*^n.
//!
//! Steps are classical RK4 over the pointwise right-hand sides. The adaptive
//! step combines the dimensional speed bound c * min(sigma) * min(s) / n with
//! a von Neumann bound for the parabolic principal part; the speed bound
//! alone admits steps far beyond the explicit stability limit of the
//! stencils.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::{
    build_support, polar, radial_from_support, recentre, support_from_radial, BodySpec,
    RadialField, SupportField,
};
use crate::error::{GcfError, Result};
use crate::grid::{make_grid, Chart, SphereGrid};
use crate::monitors::{self, DiagnosticsRecord, MonitorState};

/// Real-axis stability reach of classical RK4.
const RK4_STABILITY: f64 = 2.78;
/// Hard floor for the adaptive step, relative to elapsed time.
const DT_FLOOR_REL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Primal,
    Radial,
    Dual,
}

impl std::fmt::Display for FlowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowKind::Primal => write!(f, "primal"),
            FlowKind::Radial => write!(f, "radial"),
            FlowKind::Dual => write!(f, "dual"),
        }
    }
}

fn default_cfl() -> f64 {
    0.25
}
fn default_stop() -> f64 {
    0.05
}
fn default_snapshot_every() -> usize {
    50
}
fn default_recentre() -> bool {
    true
}

/// Run configuration. `initial` always describes the primal body; dual runs
/// flow the polar of it, radial runs its radial parametrization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(rename = "n")]
    pub dim: usize,
    pub flow: FlowKind,
    pub initial: BodySpec,
    pub resolution: Vec<usize>,
    #[serde(default = "default_cfl")]
    pub cfl_factor: f64,
    #[serde(default = "default_stop")]
    pub stop_threshold: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_recentre")]
    pub recentre: bool,
    /// When set, exported snapshots are rescaled to unit-ball volume.
    #[serde(default)]
    pub normalize: bool,
    /// Stop at this time instead of the support-threshold rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl FlowConfig {
    pub fn new(dim: usize, flow: FlowKind, initial: BodySpec, resolution: Vec<usize>) -> Self {
        FlowConfig {
            dim,
            flow,
            initial,
            resolution,
            cfl_factor: default_cfl(),
            stop_threshold: default_stop(),
            snapshot_every: default_snapshot_every(),
            recentre: default_recentre(),
            normalize: false,
            t_end: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(GcfError::UnsupportedDimension(self.dim));
        }
        let expected = self.dim - 1;
        if self.resolution.len() != expected {
            return Err(GcfError::BadResolutionShape {
                dim: self.dim,
                expected,
                got: self.resolution.clone(),
            });
        }
        if self.resolution.iter().any(|&r| r < 16) {
            return Err(GcfError::ResolutionTooLow {
                got: self.resolution.clone(),
                min: 16,
            });
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(GcfError::invalid(format!(
                "cfl_factor must lie in (0, 1], got {}",
                self.cfl_factor
            )));
        }
        if !(self.stop_threshold > 0.0 && self.stop_threshold < 0.5) {
            return Err(GcfError::invalid(format!(
                "stop_threshold must lie in (0, 0.5), got {}",
                self.stop_threshold
            )));
        }
        if self.snapshot_every == 0 {
            return Err(GcfError::invalid("snapshot_every must be at least 1"));
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                return Err(GcfError::invalid("t_end must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Body representation carried by a flow state.
#[derive(Debug, Clone)]
pub enum BodyRep {
    Support(SupportField),
    Radial(RadialField),
}

impl BodyRep {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        match self {
            BodyRep::Support(b) => b.grid(),
            BodyRep::Radial(r) => r.grid(),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            BodyRep::Support(b) => b.min(),
            BodyRep::Radial(r) => r.min(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub step: u64,
    pub body: BodyRep,
}

impl FlowState {
    pub fn support(body: SupportField) -> FlowState {
        FlowState {
            t: 0.0,
            step: 0,
            body: BodyRep::Support(body),
        }
    }

    pub fn radial(body: RadialField) -> FlowState {
        FlowState {
            t: 0.0,
            step: 0,
            body: BodyRep::Radial(body),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    /// Support representation of the flowing body at this time.
    pub support: SupportField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    StopRule,
    TimeLimit,
    ConvexityLost { step: u64, t: f64, message: String },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Extinction {
    pub t_hat: f64,
    pub uncertainty: f64,
}

#[derive(Debug)]
pub struct Trajectory {
    pub flow: FlowKind,
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub extinction: Option<Extinction>,
}

/// One RK4 step of the support-form flow.
pub fn step_primal(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_support_kind(state, dt, FlowKind::Primal)
}

/// One RK4 step of the polar expansion; the state holds the polar body.
pub fn step_dual(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_support_kind(state, dt, FlowKind::Dual)
}

fn step_support_kind(state: &FlowState, dt: f64, kind: FlowKind) -> Result<FlowState> {
    let body = match &state.body {
        BodyRep::Support(b) => b,
        BodyRep::Radial(_) => {
            return Err(GcfError::invalid(
                "this flow advances a support field, got a radial state",
            ))
        }
    };
    if !(dt >= 0.0) {
        return Err(GcfError::invalid("dt must be nonnegative"));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let mut engine = Engine::new(body.grid().clone(), kind);
    let mut values = body.values().to_vec();
    engine.rk4(&mut values, dt)?;
    let next = SupportField::new(body.grid().clone(), values)?;
    Ok(FlowState {
        t: state.t + dt,
        step: state.step + 1,
        body: BodyRep::Support(next),
    })
}

/// One RK4 step of the radial-chart flow.
pub fn step_radial(state: &FlowState, dt: f64) -> Result<FlowState> {
    let body = match &state.body {
        BodyRep::Radial(r) => r,
        BodyRep::Support(_) => {
            return Err(GcfError::invalid(
                "the radial flow advances a radial field, got a support state",
            ))
        }
    };
    if !(dt >= 0.0) {
        return Err(GcfError::invalid("dt must be nonnegative"));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let mut engine = Engine::new(body.grid().clone(), FlowKind::Radial);
    let mut values = body.values().to_vec();
    engine.rk4(&mut values, dt)?;
    let next = RadialField::new(body.grid().clone(), values)?;
    Ok(FlowState {
        t: state.t + dt,
        step: state.step + 1,
        body: BodyRep::Radial(next),
    })
}

/// Rescale a state to unit-ball volume.
pub fn normalize(state: &FlowState) -> Result<FlowState> {
    let (grid, factor) = match &state.body {
        BodyRep::Support(b) => {
            let v = crate::body::volume(b)?;
            (b.grid().clone(), (b.grid().unit_ball_volume() / v).powf(1.0 / b.grid().dim() as f64))
        }
        BodyRep::Radial(r) => {
            let sup = support_from_radial(r)?;
            let v = crate::body::volume(&sup)?;
            (r.grid().clone(), (r.grid().unit_ball_volume() / v).powf(1.0 / r.grid().dim() as f64))
        }
    };
    let body = match &state.body {
        BodyRep::Support(b) => BodyRep::Support(SupportField::new(
            grid.clone(),
            b.values().iter().map(|x| x * factor).collect(),
        )?),
        BodyRep::Radial(r) => BodyRep::Radial(RadialField::new(
            grid,
            r.values().iter().map(|x| x * factor).collect(),
        )?),
    };
    Ok(FlowState {
        t: state.t,
        step: state.step,
        body,
    })
}

/// Extinction-time estimate: the exact linear volume decay pins the slope to
/// -|S^{n-1}|, so each snapshot extrapolates independently; the cross-check
/// fits (min s)^n, which decays linearly on near-round bodies. The
/// uncertainty is the disagreement of the two routes.
pub fn estimate_extinction(traj: &Trajectory) -> Result<Extinction> {
    let records = &traj.records;
    if records.len() < 3 {
        return Err(GcfError::InsufficientSnapshots {
            got: records.len(),
            min: 3,
        });
    }
    let grid_dim = if traj.snapshots.is_empty() {
        return Err(GcfError::InsufficientSnapshots { got: 0, min: 3 });
    } else {
        traj.snapshots[0].support.grid().dim()
    };
    let area = traj.snapshots[0].support.grid().sphere_area();
    let mut acc = 0.0;
    for r in records {
        acc += r.t + r.primal_volume / area;
    }
    let t_v = acc / records.len() as f64;

    // Tail regression of (min s)^n against t.
    let tail = records.len().max(3) * 3 / 10;
    let tail = tail.max(3).min(records.len());
    let start = records.len() - tail;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for r in &records[start..] {
        let y = r.primal_min_s.powi(grid_dim as i32);
        sx += r.t;
        sy += y;
        sxx += r.t * r.t;
        sxy += r.t * y;
    }
    let nf = tail as f64;
    let denom = nf * sxx - sx * sx;
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let t_s = if slope < 0.0 { -intercept / slope } else { t_v };

    Ok(Extinction {
        t_hat: t_v,
        uncertainty: (t_v - t_s).abs(),
    })
}

/// Build the grid and initial body from a config, then run the flow.
pub fn run_flow_from_config(config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = make_grid(config.dim, &config.resolution)?;
    let initial = build_support(&grid, &config.initial)?;
    run_flow(config, &initial)
}

/// Integrate the configured flow from the given primal body. Dual runs flow
/// the polar of `initial`; radial runs its radial parametrization. Snapshots
/// are taken every `snapshot_every` steps and at both ends, the primal body
/// is recentred at its Steiner point before each snapshot's diagnostics when
/// `recentre` is set, and the run stops by the support-threshold rule, the
/// optional `t_end`, or loss of convexity (returned as a flagged
/// trajectory).
pub fn run_flow(config: &FlowConfig, initial: &SupportField) -> Result<Trajectory> {
    config.validate()?;
    let grid = initial.grid().clone();
    if grid.dim() != config.dim || grid.resolution() != config.resolution {
        return Err(GcfError::invalid(format!(
            "initial body grid {}d {:?} does not match config {}d {:?}",
            grid.dim(),
            grid.resolution(),
            config.dim,
            config.resolution
        )));
    }

    // Pin the shrink point before deriving the flowed representation.
    let primal0 = if config.recentre {
        recentre(initial)?.0
    } else {
        initial.clone()
    };

    let mut values: Vec<f64> = match config.flow {
        FlowKind::Primal => primal0.values().to_vec(),
        FlowKind::Radial => radial_from_support(&primal0)?.values().to_vec(),
        FlowKind::Dual => polar(&primal0)?.values().to_vec(),
    };

    let initial_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let initial_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut engine = Engine::new(grid.clone(), config.flow);
    let mut monitor_state = MonitorState::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();

    let mut t = 0.0;
    let mut step: u64 = 0;
    let termination;

    macro_rules! take_snapshot {
        () => {{
            let support = snapshot_support(&grid, config.flow, &mut values, config.recentre)?;
            let record =
                monitors::snapshot_record(config.flow, t, step, &support, &mut monitor_state)?;
            records.push(record);
            snapshots.push(Snapshot { t, step, support });
        }};
    }

    take_snapshot!();

    loop {
        // Stop rules.
        let cur_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let cur_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let stopped = match config.flow {
            FlowKind::Primal | FlowKind::Radial => cur_min < config.stop_threshold * initial_min,
            FlowKind::Dual => cur_max > initial_max / config.stop_threshold,
        };
        if stopped {
            termination = Termination::StopRule;
            break;
        }
        if let Some(t_end) = config.t_end {
            if t >= t_end - 1e-15 {
                termination = Termination::TimeLimit;
                break;
            }
        }

        let stats = match engine.begin_step(&values) {
            Ok(stats) => stats,
            Err(e) => {
                termination = Termination::ConvexityLost {
                    step,
                    t,
                    message: e.to_string(),
                };
                break;
            }
        };
        let mut dt = engine.dt_from_stats(&stats, config.cfl_factor);
        if let Some(t_end) = config.t_end {
            dt = dt.min(t_end - t);
        }
        if !(dt > DT_FLOOR_REL * t.max(1.0)) {
            return Err(GcfError::DtUnderflow { t, dt });
        }

        match engine.finish_rk4(&mut values, dt) {
            Ok(()) => {}
            Err(e) => {
                termination = Termination::ConvexityLost {
                    step,
                    t,
                    message: e.to_string(),
                };
                break;
            }
        }
        t += dt;
        step += 1;

        if step % config.snapshot_every as u64 == 0 {
            take_snapshot!();
        }
    }

    // Final snapshot unless the last loop iteration just took one.
    if snapshots.last().map(|s| s.step) != Some(step) {
        if matches!(termination, Termination::ConvexityLost { .. }) {
            // The field may no longer validate; keep the last good snapshot.
        } else {
            take_snapshot!();
        }
    }

    let mut traj = Trajectory {
        flow: config.flow,
        snapshots,
        records,
        termination,
        extinction: None,
    };

    if traj.records.len() >= 3 {
        if let Ok(ext) = estimate_extinction(&traj) {
            monitors::fill_bands_with_dim(&mut traj.records, grid.dim(), ext.t_hat);
            traj.extinction = Some(ext);
        }
    }
    Ok(traj)
}

/// Support-field view of the raw flowing buffer, recentred when requested.
/// For the radial flow the recentring round-trips through the support form,
/// writing the recentred parametrization back into the buffer.
fn snapshot_support(
    grid: &Arc<SphereGrid>,
    kind: FlowKind,
    values: &mut Vec<f64>,
    recentre_flag: bool,
) -> Result<SupportField> {
    match kind {
        FlowKind::Primal => {
            let mut body = SupportField::new(grid.clone(), values.clone())?;
            if recentre_flag {
                let (shifted, shift) = recentre(&body)?;
                if crate::grid::norm3(shift) > 1e-12 * body.max() {
                    *values = shifted.values().to_vec();
                    body = shifted;
                }
            }
            Ok(body)
        }
        FlowKind::Radial => {
            let rad = RadialField::new(grid.clone(), values.clone())?;
            let mut body = support_from_radial(&rad)?;
            if recentre_flag {
                let (shifted, shift) = recentre(&body)?;
                if crate::grid::norm3(shift) > 1e-12 * body.max() {
                    body = shifted;
                    *values = radial_from_support(&body)?.values().to_vec();
                }
            }
            Ok(body)
        }
        // The dual flow is pinned to the primal shrink point; never recentre.
        FlowKind::Dual => SupportField::new(grid.clone(), values.clone()),
    }
}

/// RK4 integrator with scratch buffers for the pointwise right-hand sides.
struct Engine {
    grid: Arc<SphereGrid>,
    kind: FlowKind,
    hess: Vec<f64>,
    grad: Vec<f64>,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    /// Per-node factor multiplying the diffusion coefficient in the
    /// von Neumann bound (stencil norm with metric weights).
    stencil_factor: Vec<f64>,
}

struct RhsStats {
    min_field: f64,
    max_speed: f64,
    min_sigma: f64,
    /// max over nodes of diffusion coefficient times stencil factor
    max_rate: f64,
}

impl Engine {
    fn new(grid: Arc<SphereGrid>, kind: FlowKind) -> Engine {
        let n = grid.node_count();
        let stencil_factor = match &grid.chart {
            Chart::Circle { step } => {
                vec![16.0 / (3.0 * step * step); n]
            }
            Chart::LatLon {
                n_colat: _,
                n_lon,
                d_colat,
                d_lon,
                sin_colat,
                ..
            } => {
                let mut v = Vec::with_capacity(n);
                for i in 0..n {
                    let s = sin_colat[i / n_lon];
                    v.push(4.0 / (d_colat * d_colat) + 4.0 / (s * s * d_lon * d_lon));
                }
                v
            }
        };
        Engine {
            grid,
            kind,
            hess: vec![0.0; 3 * n],
            grad: vec![0.0; 2 * n],
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            stage: vec![0.0; n],
            stencil_factor,
        }
    }

    /// Evaluate the right-hand side at the current field into the first
    /// stage buffer and return the step-size statistics, so the adaptive
    /// step reuses the evaluation as the first RK4 stage.
    fn begin_step(&mut self, values: &[f64]) -> Result<RhsStats> {
        let mut k0 = std::mem::take(&mut self.k[0]);
        let result = self.rhs(values, &mut k0);
        self.k[0] = k0;
        result
    }

    fn dt_from_stats(&self, stats: &RhsStats, cfl: f64) -> f64 {
        let n = self.grid.dim() as f64;
        let speed_bound = match self.kind {
            FlowKind::Primal => stats.min_sigma * stats.min_field / n,
            _ => stats.min_field / (n * stats.max_speed.max(1e-300)),
        };
        let parabolic = RK4_STABILITY / stats.max_rate.max(1e-300);
        cfl * speed_bound.min(parabolic)
    }

    /// Complete an RK4 step whose first stage is already in k[0].
    fn finish_rk4(&mut self, values: &mut [f64], dt: f64) -> Result<()> {
        let n = values.len();
        let k0 = std::mem::take(&mut self.k[0]);
        let mut k1 = std::mem::take(&mut self.k[1]);
        let mut k2 = std::mem::take(&mut self.k[2]);
        let mut k3 = std::mem::take(&mut self.k[3]);
        let mut stage = std::mem::take(&mut self.stage);
        let result = (|| -> Result<()> {
            for i in 0..n {
                stage[i] = values[i] + 0.5 * dt * k0[i];
            }
            self.rhs(&stage, &mut k1)?;
            for i in 0..n {
                stage[i] = values[i] + 0.5 * dt * k1[i];
            }
            self.rhs(&stage, &mut k2)?;
            for i in 0..n {
                stage[i] = values[i] + dt * k2[i];
            }
            self.rhs(&stage, &mut k3)?;
            for i in 0..n {
                values[i] += dt * (k0[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i]) / 6.0;
            }
            Ok(())
        })();
        self.k[0] = k0;
        self.k[1] = k1;
        self.k[2] = k2;
        self.k[3] = k3;
        self.stage = stage;
        result
    }

    fn rk4(&mut self, values: &mut [f64], dt: f64) -> Result<()> {
        self.begin_step(values)?;
        self.finish_rk4(values, dt)
    }

    /// Pointwise right-hand side with validity checks and step-size
    /// statistics.
    fn rhs(&mut self, f: &[f64], out: &mut [f64]) -> Result<RhsStats> {
        let max_f = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_f = f.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_f > 0.0) {
            return Err(GcfError::OriginNotInterior {
                min_s: min_f,
                threshold: 0.0,
            });
        }
        let eps = crate::body::EPS_CONVEX_REL * max_f;
        match self.kind {
            FlowKind::Primal | FlowKind::Dual => self.rhs_support(f, out, eps, min_f),
            FlowKind::Radial => self.rhs_radial(f, out, eps, min_f),
        }
    }

    fn rhs_support(&mut self, f: &[f64], out: &mut [f64], eps: f64, min_f: f64) -> Result<RhsStats> {
        let grid = self.grid.clone();
        grid.hessian_raw(f, &mut self.hess);
        let dual = matches!(self.kind, FlowKind::Dual);
        if dual {
            grid.gradient_raw(f, &mut self.grad);
        }
        let dim = grid.dim();
        let mut stats = RhsStats {
            min_field: min_f,
            max_speed: 0.0,
            min_sigma: f64::INFINITY,
            max_rate: 0.0,
        };
        match &grid.chart {
            Chart::Circle { .. } => {
                for i in 0..f.len() {
                    let sigma = self.hess[3 * i] + f[i];
                    if !(sigma > eps) {
                        return Err(self.convexity_lost(i, sigma, eps));
                    }
                    stats.min_sigma = stats.min_sigma.min(sigma);
                    let (speed, diffusion);
                    if dual {
                        let d = self.grad[i];
                        let w2 = f[i] * f[i] + d * d;
                        let s4 = f[i].powi(4);
                        speed = s4 * sigma / w2;
                        diffusion = s4 / w2;
                    } else {
                        speed = 1.0 / sigma;
                        diffusion = 1.0 / (sigma * sigma);
                    }
                    out[i] = if dual { speed } else { -speed };
                    stats.max_speed = stats.max_speed.max(speed.abs());
                    stats.max_rate = stats.max_rate.max(diffusion * self.stencil_factor[i]);
                }
            }
            Chart::LatLon {
                n_lon, sin_colat, ..
            } => {
                let np = dim as i32 + 2;
                for i in 0..f.len() {
                    let s = sin_colat[i / n_lon];
                    let s2 = s * s;
                    let r11 = self.hess[3 * i] + f[i];
                    let r12 = self.hess[3 * i + 1] / s;
                    let r22 = self.hess[3 * i + 2] / s2 + f[i];
                    let det = r11 * r22 - r12 * r12;
                    let tr = r11 + r22;
                    let disc = ((r11 - r22) * (r11 - r22) + 4.0 * r12 * r12).sqrt();
                    let eig_min = 0.5 * (tr - disc);
                    if !(eig_min > eps) {
                        return Err(self.convexity_lost(i, eig_min, eps));
                    }
                    let sigma = det;
                    stats.min_sigma = stats.min_sigma.min(sigma);
                    let (speed, diffusion);
                    if dual {
                        let gp = self.grad[2 * i];
                        let gl = self.grad[2 * i + 1];
                        let grad2 = gp * gp + gl * gl / s2;
                        let w2 = f[i] * f[i] + grad2;
                        let amp = f[i].powi(np) / w2.powf(dim as f64 / 2.0);
                        speed = amp * sigma;
                        // d(speed)/d(hess): amp * sigma * (r^{-1}); largest
                        // eigenvalue of r^{-1} is 1/eig_min.
                        diffusion = amp * sigma / eig_min;
                    } else {
                        speed = 1.0 / sigma;
                        diffusion = 1.0 / (sigma * eig_min);
                    }
                    out[i] = if dual { speed } else { -speed };
                    stats.max_speed = stats.max_speed.max(speed.abs());
                    stats.max_rate = stats.max_rate.max(diffusion * self.stencil_factor[i]);
                }
            }
        }
        Ok(stats)
    }

    fn rhs_radial(&mut self, f: &[f64], out: &mut [f64], eps: f64, min_f: f64) -> Result<RhsStats> {
        let grid = self.grid.clone();
        grid.hessian_raw(f, &mut self.hess);
        grid.gradient_raw(f, &mut self.grad);
        let mut stats = RhsStats {
            min_field: min_f,
            max_speed: 0.0,
            min_sigma: f64::INFINITY,
            max_rate: 0.0,
        };
        match &grid.chart {
            Chart::Circle { .. } => {
                for i in 0..f.len() {
                    let r = f[i];
                    let rp = self.grad[i];
                    let rpp = self.hess[3 * i];
                    let w2 = r * r + rp * rp;
                    let h11 = -r * rpp + 2.0 * rp * rp + r * r; // times w
                    if !(h11 > eps * w2.sqrt()) {
                        return Err(self.convexity_lost(i, h11 / w2.sqrt(), eps));
                    }
                    // kappa = h11 / w^3, speed = (w/r) kappa
                    let speed = h11 / (r * w2);
                    out[i] = -speed;
                    stats.max_speed = stats.max_speed.max(speed.abs());
                    stats.min_sigma = stats.min_sigma.min(w2.sqrt() * w2 / h11);
                    // d(speed)/d(r'') = -1/w2 (sign aside)
                    stats.max_rate = stats.max_rate.max(self.stencil_factor[i] / w2);
                }
            }
            Chart::LatLon {
                n_lon, sin_colat, ..
            } => {
                for i in 0..f.len() {
                    let r = f[i];
                    let s = sin_colat[i / n_lon];
                    let s2 = s * s;
                    let r_p = self.grad[2 * i];
                    let r_l = self.grad[2 * i + 1];
                    let hc0 = self.hess[3 * i];
                    let hc1 = self.hess[3 * i + 1];
                    let hc2 = self.hess[3 * i + 2];
                    let grad2 = r_p * r_p + r_l * r_l / s2;
                    let w2 = r * r + grad2;
                    let w = w2.sqrt();
                    let h11 = (-r * hc0 + 2.0 * r_p * r_p + r * r) / w;
                    let h12 = (-r * hc1 + 2.0 * r_p * r_l) / w;
                    let h22 = (-r * hc2 + 2.0 * r_l * r_l + r * r * s2) / w;
                    let g11 = r * r + r_p * r_p;
                    let g12 = r_p * r_l;
                    let g22 = r * r * s2 + r_l * r_l;
                    let det_g = g11 * g22 - g12 * g12;
                    let det_h = h11 * h22 - h12 * h12;
                    // orthonormal-frame eigenvalues of h
                    let a = h11;
                    let b = h12 / s;
                    let c = h22 / s2;
                    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
                    let eig_min = 0.5 * (a + c - disc);
                    if !(eig_min > eps) {
                        return Err(self.convexity_lost(i, eig_min, eps));
                    }
                    let kappa = det_h / det_g;
                    let speed = (w / r) * kappa;
                    out[i] = -speed;
                    stats.max_speed = stats.max_speed.max(speed.abs());
                    stats.min_sigma = stats.min_sigma.min(1.0 / kappa);
                    // d(h_ij)/d(hess_ij) = -r/w; rate ~ (w/r) kappa h^{-1} (r/w)
                    stats.max_rate = stats
                        .max_rate
                        .max(kappa / eig_min * self.stencil_factor[i]);
                }
            }
        }
        Ok(stats)
    }

    fn convexity_lost(&self, node: usize, eig: f64, eps: f64) -> GcfError {
        let p = self.grid.node(node);
        GcfError::ConvexityLost {
            node,
            x: p[0],
            y: p[1],
            z: p[2],
            eigenvalue: eig,
            threshold: eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{build_support, BodySpec};

    fn ball(grid: &Arc<SphereGrid>, r: f64) -> SupportField {
        build_support(grid, &BodySpec::Ball { radius: r }).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let g = make_grid(2, &[64]).unwrap();
        let b = ball(&g, 1.0);
        let st = FlowState::support(b.clone());
        let next = step_primal(&st, 0.0).unwrap();
        match next.body {
            BodyRep::Support(s) => assert_eq!(s.values(), b.values()),
            _ => panic!(),
        }
        let stp = FlowState::support(polar(&b).unwrap());
        let next = step_dual(&stp, 0.0).unwrap();
        assert_eq!(next.t, 0.0);
        let str_ = FlowState::radial(radial_from_support(&b).unwrap());
        let next = step_radial(&str_, 0.0).unwrap();
        assert_eq!(next.step, 0);
    }

    #[test]
    fn ball_shrinks_on_the_exact_ode_n2() {
        // dR/dt = -1/R, so R(0.18) = sqrt(1 - 0.36) = 0.8
        let g = make_grid(2, &[64]).unwrap();
        let mut st = FlowState::support(ball(&g, 1.0));
        let dt = 1e-3_f64;
        while st.t < 0.18 - 1e-12 {
            let step = dt.min(0.18 - st.t);
            st = step_primal(&st, step).unwrap();
        }
        if let BodyRep::Support(b) = &st.body {
            for v in b.values() {
                assert!((v - 0.8).abs() < 1e-6, "v = {v}");
            }
        }
    }

    #[test]
    fn ball_shrinks_on_the_exact_ode_n3() {
        // dR/dt = -1/R^2, so R(t) = (1 - 3t)^{1/3}
        let g = make_grid(3, &[16, 32]).unwrap();
        let mut st = FlowState::support(ball(&g, 1.0));
        let dt = 5e-4_f64;
        let t_target = 0.2109375;
        while st.t < t_target - 1e-12 {
            let step = dt.min(t_target - st.t);
            st = step_primal(&st, step).unwrap();
        }
        let expect = (1.0f64 - 3.0 * t_target).powf(1.0 / 3.0);
        if let BodyRep::Support(b) = &st.body {
            for v in b.values() {
                assert!((v - expect).abs() < 1e-5, "v = {v}, expect = {expect}");
            }
        }
        // the time at which the radius reaches 3/4 exactly
        let t_for_three_quarters = (1.0 - 0.75f64.powi(3)) / 3.0;
        let g = make_grid(3, &[16, 32]).unwrap();
        let mut st = FlowState::support(ball(&g, 1.0));
        while st.t < t_for_three_quarters - 1e-12 {
            let step = dt.min(t_for_three_quarters - st.t);
            st = step_primal(&st, step).unwrap();
        }
        if let BodyRep::Support(b) = &st.body {
            for v in b.values() {
                assert!((v - 0.75).abs() < 1e-5, "v = {v}");
            }
        }
    }

    #[test]
    fn dual_ball_expands_on_the_exact_ode() {
        // polar radius rho(t) = (1 - n t)^{-1/n} for the unit-ball run, n=2
        let g = make_grid(2, &[64]).unwrap();
        let mut st = FlowState::support(ball(&g, 1.0)); // polar of unit ball is itself
        let dt = 1e-3_f64;
        while st.t < 0.18 - 1e-12 {
            let step = dt.min(0.18 - st.t);
            st = step_dual(&st, step).unwrap();
        }
        let expect = (1.0f64 - 2.0 * 0.18).powf(-0.5);
        if let BodyRep::Support(b) = &st.body {
            for v in b.values() {
                assert!((v - expect).abs() < 1e-6, "v = {v}, expect {expect}");
            }
        }
    }

    #[test]
    fn radial_ball_matches_primal() {
        let g = make_grid(2, &[64]).unwrap();
        let rad = RadialField::new(g.clone(), vec![1.0; g.node_count()]).unwrap();
        let mut st = FlowState::radial(rad);
        let dt = 1e-3_f64;
        while st.t < 0.18 - 1e-12 {
            let step = dt.min(0.18 - st.t);
            st = step_radial(&st, step).unwrap();
        }
        if let BodyRep::Radial(r) = &st.body {
            for v in r.values() {
                assert!((v - 0.8).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn normalize_scales_to_unit_ball_volume() {
        let g = make_grid(2, &[128]).unwrap();
        let st = FlowState::support(ball(&g, 2.0));
        let normalized = normalize(&st).unwrap();
        if let BodyRep::Support(b) = &normalized.body {
            for v in b.values() {
                assert!((v - 1.0).abs() < 1e-10);
            }
            // idempotent
            let again = normalize(&normalized).unwrap();
            if let BodyRep::Support(b2) = &again.body {
                for (x, y) in b2.values().iter().zip(b.values()) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
        // ellipse scales by (pi / 2pi)^{1/2}
        let e = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![2.0, 1.0],
                center: None,
            },
        )
        .unwrap();
        let n = normalize(&FlowState::support(e.clone())).unwrap();
        if let BodyRep::Support(b) = &n.body {
            let factor = 0.5f64.sqrt();
            for (v, orig) in b.values().iter().zip(e.values()) {
                assert!((v - orig * factor).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = FlowConfig::new(
            2,
            FlowKind::Primal,
            BodySpec::Ball { radius: 1.0 },
            vec![64],
        );
        assert!(c.validate().is_ok());
        c.cfl_factor = 0.0;
        assert!(c.validate().is_err());
        c.cfl_factor = 0.25;
        c.stop_threshold = 0.7;
        assert!(c.validate().is_err());
        c.stop_threshold = 0.05;
        c.resolution = vec![8];
        assert!(matches!(
            c.validate(),
            Err(GcfError::ResolutionTooLow { .. })
        ));
    }

    #[test]
    fn mismatched_state_kind_rejected() {
        let g = make_grid(2, &[64]).unwrap();
        let st = FlowState::support(ball(&g, 1.0));
        assert!(step_radial(&st, 0.1).is_err());
        let rad = FlowState::radial(RadialField::new(g.clone(), vec![1.0; g.node_count()]).unwrap());
        assert!(step_primal(&rad, 0.1).is_err());
    }
}
