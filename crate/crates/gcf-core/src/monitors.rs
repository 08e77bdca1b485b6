//! Flow diagnostics: the pointwise duality product, the cone-angle ratio
//! gamma, the admissible maximum-principle coefficient lambda with its test
//! field chi, extinction-scaled curvature tracks, asymptotic roundness, and
//! the polar Hessian relation between a body's radial chart and its polar's
//! support chart.

use crate::body::{
    boundary_points, curvature_radius_tensor, geometry_from_radial, polar, radial_from_support,
    recentre, sigma_from_support, volume, RadialField, SupportField,
};
use crate::error::{GcfError, Result};
use crate::flow::{FlowKind, Trajectory};
use crate::grid::{dot3, norm3, ScalarField};
use crate::interp::{CubicChart, TrigSeries};

/// Per-snapshot diagnostics. The band columns are filled after the run once
/// the extinction estimate is known, and only for t <= 0.95 * T_hat.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: u64,
    /// Volume of the flowing body.
    pub volume: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub min_kappa: f64,
    pub max_kappa: f64,
    /// Cone-angle ratio of the dual body, min s*/|x*| over the boundary.
    pub gamma: f64,
    /// Coefficient used by the chi monitor at this snapshot.
    pub lambda: f64,
    pub chi_max: f64,
    /// Max/min support ratio of the recentred primal body.
    pub roundness: f64,
    pub band_s_star_min: Option<f64>,
    pub band_s_star_max: Option<f64>,
    pub band_kstar_max: Option<f64>,
    pub band_k_min: Option<f64>,
    // Primal/dual-side extremes retained for extinction and band processing.
    pub primal_volume: f64,
    pub primal_min_s: f64,
    pub primal_min_kappa: f64,
    pub dual_min_s: f64,
    pub dual_max_s: f64,
    pub dual_max_kappa: f64,
}

/// Running state threaded through snapshot records: the run-minimum gamma
/// and the coefficient that makes chi vanish at the initial snapshot.
#[derive(Debug, Clone)]
pub struct MonitorState {
    pub gamma_min: f64,
    pub lambda0: Option<f64>,
}

impl MonitorState {
    pub fn new() -> MonitorState {
        MonitorState {
            gamma_min: 1.0,
            lambda0: None,
        }
    }
}

impl Default for MonitorState {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn snapshot_record(
    kind: FlowKind,
    t: f64,
    step: u64,
    flowing: &SupportField,
    state: &mut MonitorState,
) -> Result<DiagnosticsRecord> {
    let n = flowing.grid().dim();
    let sigma = sigma_from_support(flowing)?;
    let vol = {
        let mut acc = 0.0;
        for i in 0..sigma.values().len() {
            acc += flowing.values()[i] * sigma.values()[i] * flowing.grid().weights()[i];
        }
        acc / n as f64
    };
    let (min_sig, max_sig) = min_max(sigma.values());
    let (min_kappa, max_kappa) = (1.0 / max_sig, 1.0 / min_sig);

    let (primal, dual_body, primal_sigma_minmax) = match kind {
        FlowKind::Dual => {
            let primal = polar(flowing)?;
            let ps = sigma_from_support(&primal)?;
            let mm = min_max(ps.values());
            let pv = volume(&primal)?;
            ((primal, pv), flowing.clone(), mm)
        }
        _ => ((flowing.clone(), vol), polar(flowing)?, (min_sig, max_sig)),
    };
    let (primal, primal_volume) = primal;

    let gamma = gamma_of(&dual_body)?;
    state.gamma_min = state.gamma_min.min(gamma);
    if state.lambda0.is_none() {
        state.lambda0 = Some(chi_lambda0(&dual_body)?);
    }
    let lambda = lambda_threshold(n, state.gamma_min)?.max(1.05 * state.lambda0.unwrap());
    let (_, chi_max) = chi_field(&dual_body, lambda)?;

    let dual_sigma = sigma_from_support(&dual_body)?;
    let (dual_sig_min, _) = min_max(dual_sigma.values());

    Ok(DiagnosticsRecord {
        t,
        step,
        volume: vol,
        min_s: flowing.min(),
        max_s: flowing.max(),
        min_kappa,
        max_kappa,
        gamma,
        lambda,
        chi_max,
        roundness: roundness(&primal)?,
        band_s_star_min: None,
        band_s_star_max: None,
        band_kstar_max: None,
        band_k_min: None,
        primal_volume,
        primal_min_s: primal.min(),
        primal_min_kappa: 1.0 / primal_sigma_minmax.1,
        dual_min_s: dual_body.min(),
        dual_max_s: dual_body.max(),
        dual_max_kappa: 1.0 / dual_sig_min,
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Deviation of the pointwise duality product from one.
#[derive(Debug, Clone)]
pub struct DualityReport {
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub worst_node: usize,
    pub worst_direction: [f64; 3],
    pub worst_product: f64,
}

/// Check the identity (K/s^{n+1})(x) * (K*/s*^{n+1})(x*) = 1 over all nodes,
/// pairing each boundary point x with its dual point x* = u/s(u) (so that
/// <x, x*> = 1).
///
/// The primal factor comes from support-function stencils. The dual factor
/// is evaluated at the matched point on the polar body: on the circle from
/// the polar body's radial chart (r* = 1/s interpolated trigonometrically,
/// contact parameter solved by Newton), on the sphere by chart interpolation
/// of the polar support and its curvature.
pub fn duality_report(body: &SupportField) -> Result<DualityReport> {
    let grid = body.grid();
    let n = grid.dim();
    let sigma = sigma_from_support(body)?;
    let points = boundary_points(body)?;
    let node_count = grid.node_count();

    let mut max_dev = 0.0;
    let mut sum_dev = 0.0;
    let mut worst_node = 0;
    let mut worst_product = 1.0;

    match n {
        2 => {
            let reciprocal: Vec<f64> = body.values().iter().map(|s| 1.0 / s).collect();
            let series = TrigSeries::fit(&reciprocal);
            for j in 0..node_count {
                let p = points[j];
                let target = p[1].atan2(p[0]);
                let z = solve_contact_angle(&series, target)?;
                let (pv, dp, ddp) = series.eval_derivs(z);
                let w2 = pv * pv + dp * dp;
                let w = w2.sqrt();
                let kappa_star = (pv * pv + 2.0 * dp * dp - pv * ddp) / (w2 * w);
                let s_star = pv * pv / w;
                let f1 = (1.0 / sigma.values()[j]) / body.values()[j].powi(3);
                let f2 = kappa_star / s_star.powi(3);
                let product = f1 * f2;
                let dev = (product - 1.0).abs();
                sum_dev += dev;
                if dev > max_dev {
                    max_dev = dev;
                    worst_node = j;
                    worst_product = product;
                }
            }
        }
        _ => {
            // Dual factor from the polar body's radial chart: r* = 1/s is a
            // pointwise reciprocal of the support samples, so its stencil
            // curvature avoids the envelope optimization entirely. The
            // contact point of K* with normal v maximizes r*(z) <z, v>.
            let reciprocal: Vec<f64> = body.values().iter().map(|s| 1.0 / s).collect();
            let rad = RadialField::new(grid.clone(), reciprocal.clone())?;
            let geo = geometry_from_radial(&rad)?;
            let kappa_chart = CubicChart::new(grid, &geo.kappa);
            let r_chart = CubicChart::new(grid, &reciprocal);
            for j in 0..node_count {
                let p = points[j];
                let norm = norm3(p);
                let v = [p[0] / norm, p[1] / norm, p[2] / norm];
                let mut best_k = 0;
                let mut best = f64::NEG_INFINITY;
                for k in 0..node_count {
                    let cand = reciprocal[k] * dot3(grid.node(k), v);
                    if cand > best {
                        best = cand;
                        best_k = k;
                    }
                }
                let (c0, l0) = grid.colat_lon(best_k);
                let objective = |colat: f64, lon: f64| {
                    let (sphi, cphi) = colat.sin_cos();
                    let (slam, clam) = lon.sin_cos();
                    let z = [sphi * clam, sphi * slam, cphi];
                    r_chart.eval(colat, lon) * dot3(z, v)
                };
                let (s_star, zc, zl) =
                    crate::body::pattern_search_max(objective, c0, l0, grid, best);
                let kappa_star = kappa_chart.eval(zc, zl);
                let f1 = (1.0 / sigma.values()[j]) / body.values()[j].powi(4);
                let f2 = kappa_star / s_star.powi(4);
                let product = f1 * f2;
                let dev = (product - 1.0).abs();
                sum_dev += dev;
                if dev > max_dev {
                    max_dev = dev;
                    worst_node = j;
                    worst_product = product;
                }
            }
        }
    }

    Ok(DualityReport {
        max_deviation: max_dev,
        mean_deviation: sum_dev / node_count as f64,
        worst_node,
        worst_direction: grid.node(worst_node),
        worst_product,
    })
}

/// Find z with normal-direction angle beta(z) = z + atan2(-r'(z), r(z))
/// equal to `target`; beta is strictly increasing for convex bodies.
fn solve_contact_angle(series: &TrigSeries, target: f64) -> Result<f64> {
    let mut z = target;
    for _ in 0..80 {
        let (p, dp, ddp) = series.eval_derivs(z);
        let beta = z + (-dp).atan2(p);
        let diff = wrap_angle(beta - target);
        if diff.abs() < 1e-13 {
            return Ok(z);
        }
        let w2 = p * p + dp * dp;
        let dbeta = (p * p + 2.0 * dp * dp - p * ddp) / w2;
        if !(dbeta > 0.0) {
            return Err(GcfError::invalid(
                "contact solve hit a nonconvex configuration",
            ));
        }
        let step = (diff / dbeta).clamp(-0.5, 0.5);
        z -= step;
    }
    Ok(z)
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    } else if x < -std::f64::consts::PI {
        x += 2.0 * std::f64::consts::PI;
    }
    x
}

/// Largest gamma with gamma * |x*| <= <x*, nu*> over the boundary of the
/// given body: the minimum of s / sqrt(s^2 + |grad s|^2).
pub fn gamma_of(polar_body: &SupportField) -> Result<f64> {
    let grid = polar_body.grid();
    let f = polar_body.as_scalar_field();
    let grad = grid.differentiate(&f)?;
    let mut gamma = f64::INFINITY;
    for i in 0..grid.node_count() {
        let s = polar_body.values()[i];
        let ratio = s / (s * s + grad.norm_sq(i)).sqrt();
        gamma = gamma.min(ratio);
    }
    Ok(gamma)
}

/// Admissible coefficient floor:
/// ((2n^2 + 5n + 2) / ((n-1) gamma^{(4n+8)/(n-1) + 2n + 4}))^{n-1}.
pub fn lambda_threshold(n: usize, gamma: f64) -> Result<f64> {
    if n < 2 {
        return Err(GcfError::invalid("lambda_threshold requires n >= 2"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(GcfError::invalid(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    let nf = n as f64;
    let exponent = (4.0 * nf + 8.0) / (nf - 1.0) + 2.0 * nf + 4.0;
    let gamma_pow = if exponent.fract() == 0.0 {
        gamma.powi(exponent as i32)
    } else {
        gamma.powf(exponent)
    };
    let base = (2.0 * nf * nf + 5.0 * nf + 2.0) / ((nf - 1.0) * gamma_pow);
    Ok(base.powi(n as i32 - 1))
}

/// Maximum-principle test field on the dual body:
/// chi = w^{n+1} - lambda * s^{n+2} sigma / w^n with w = sqrt(s^2+|grad s|^2).
/// The subtrahend is lambda times the dual-flow speed. Returns the field and
/// its maximum.
pub fn chi_field(polar_body: &SupportField, lambda: f64) -> Result<(ScalarField, f64)> {
    let grid = polar_body.grid();
    let n = grid.dim() as i32;
    let f = polar_body.as_scalar_field();
    let grad = grid.differentiate(&f)?;
    let sigma = sigma_from_support(polar_body)?;
    let mut values = Vec::with_capacity(grid.node_count());
    let mut chi_max = f64::NEG_INFINITY;
    for i in 0..grid.node_count() {
        let s = polar_body.values()[i];
        let w2 = s * s + grad.norm_sq(i);
        let w = w2.sqrt();
        let chi = w.powi(n + 1) - lambda * s.powi(n + 2) * sigma.values()[i] / w.powi(n);
        chi_max = chi_max.max(chi);
        values.push(chi);
    }
    Ok((
        ScalarField::new(grid.clone(), values)?,
        chi_max,
    ))
}

/// Smallest lambda for which chi <= 0 everywhere on this body:
/// max over nodes of w^{2n+1} / (s^{n+2} sigma).
pub fn chi_lambda0(polar_body: &SupportField) -> Result<f64> {
    let grid = polar_body.grid();
    let n = grid.dim() as i32;
    let f = polar_body.as_scalar_field();
    let grad = grid.differentiate(&f)?;
    let sigma = sigma_from_support(polar_body)?;
    let mut lambda0 = 0.0f64;
    for i in 0..grid.node_count() {
        let s = polar_body.values()[i];
        let w = (s * s + grad.norm_sq(i)).sqrt();
        lambda0 = lambda0.max(w.powi(2 * n + 1) / (s.powi(n + 2) * sigma.values()[i]));
    }
    Ok(lambda0)
}

/// One row of the extinction-scaled tracks.
#[derive(Debug, Clone, Copy)]
pub struct BandRow {
    pub t: f64,
    pub s_star_min: f64,
    pub s_star_max: f64,
    pub kstar_max: f64,
    pub k_min: f64,
}

#[derive(Debug, Clone)]
pub struct BoundTracks {
    pub rows: Vec<BandRow>,
}

impl BoundTracks {
    /// Ratio of the largest to smallest scaled dual support over the window.
    pub fn s_star_band_ratio(&self) -> f64 {
        let hi = self.rows.iter().map(|r| r.s_star_max).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.rows.iter().map(|r| r.s_star_min).fold(f64::INFINITY, f64::min);
        hi / lo
    }

    pub fn k_min_floor(&self) -> f64 {
        self.rows.iter().map(|r| r.k_min).fold(f64::INFINITY, f64::min)
    }

    pub fn kstar_max_ceiling(&self) -> f64 {
        self.rows.iter().map(|r| r.kstar_max).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Extinction-scaled tracks over t <= 0.95 * t_hat:
/// min/max of s* (T-t)^{1/n}, max of K* (T-t)^{-(n-1)/n}, and
/// min of K (T-t)^{(n-1)/n}.
pub fn bound_tracks(traj: &Trajectory, t_hat: f64) -> Result<BoundTracks> {
    let t_last = traj
        .records
        .last()
        .map(|r| r.t)
        .ok_or(GcfError::InsufficientSnapshots { got: 0, min: 1 })?;
    if t_hat <= t_last {
        return Err(GcfError::ExtinctionBeforeData { t_hat, t_last });
    }
    let n = match traj.snapshots.first() {
        Some(s) => s.support.grid().dim() as f64,
        None => return Err(GcfError::InsufficientSnapshots { got: 0, min: 1 }),
    };
    let mut rows = Vec::new();
    for r in &traj.records {
        if r.t > 0.95 * t_hat {
            continue;
        }
        let remaining = t_hat - r.t;
        let scale_s = remaining.powf(1.0 / n);
        let scale_k = remaining.powf((n - 1.0) / n);
        rows.push(BandRow {
            t: r.t,
            s_star_min: r.dual_min_s * scale_s,
            s_star_max: r.dual_max_s * scale_s,
            kstar_max: r.dual_max_kappa / scale_k,
            k_min: r.primal_min_kappa * scale_k,
        });
    }
    Ok(BoundTracks { rows })
}

/// Fill the optional band columns of the records in place.
pub(crate) fn fill_bands_with_dim(records: &mut [DiagnosticsRecord], dim: usize, t_hat: f64) {
    let n = dim as f64;
    for r in records.iter_mut() {
        if r.t > 0.95 * t_hat {
            continue;
        }
        let remaining = t_hat - r.t;
        let scale_s = remaining.powf(1.0 / n);
        let scale_k = remaining.powf((n - 1.0) / n);
        r.band_s_star_min = Some(r.dual_min_s * scale_s);
        r.band_s_star_max = Some(r.dual_max_s * scale_s);
        r.band_kstar_max = Some(r.dual_max_kappa / scale_k);
        r.band_k_min = Some(r.primal_min_kappa * scale_k);
    }
}

/// Max/min support ratio of the Steiner-recentred body; scale-invariant, so
/// it equals the ratio of the volume-normalized solution. One exactly on a
/// centred ball.
pub fn roundness(body: &SupportField) -> Result<f64> {
    let (centred, _) = recentre(body)?;
    Ok(centred.max() / centred.min())
}

/// Two-route check of the polar Hessian relation:
/// det(hess(s*) + g s*) against (w/r^3)^{n-1} det h, where s* = 1/r on the
/// same directions, the left side differentiated on the polar support chart
/// and the right side assembled from the primal radial chart. Returns the
/// worst relative mismatch.
pub fn polar_hessian_check(body: &SupportField) -> Result<f64> {
    let rad = radial_from_support(body)?;
    let polar_support: Vec<f64> = rad.values().iter().map(|r| 1.0 / r).collect();
    let grid = body.grid();
    // The polar support samples form a valid support field; reuse the
    // curvature-radius tensor machinery for the left side.
    let star = SupportField::new(grid.clone(), polar_support)?;
    let tensor = curvature_radius_tensor(&star)?;
    let geo = geometry_from_radial(&rad)?;
    let n = grid.dim();
    let mut worst = 0.0f64;
    for i in 0..grid.node_count() {
        let lhs = tensor.det_over_metric(i);
        let r = rad.values()[i];
        let factor = geo.slant[i] / (r * r * r);
        let det_h_over_metric = match n {
            2 => geo.second_form[i][0],
            _ => {
                let h = geo.second_form[i];
                let (colat, _) = grid.colat_lon(i);
                (h[0] * h[2] - h[1] * h[1]) / colat.sin().powi(2)
            }
        };
        let rhs = factor.powi(n as i32 - 1) * det_h_over_metric;
        let denom = rhs.abs().max(1e-300);
        worst = worst.max((lhs - rhs).abs() / denom);
    }
    Ok(worst)
}
