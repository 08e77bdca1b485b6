//! Convex bodies represented by support or radial functions on a sphere grid,
//! with curvature, embedding, polar bodies, volume and the radial-chart
//! geometry (metric, normal, support, second fundamental form).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GcfError, Result};
use crate::grid::{dot3, norm3, ScalarField, SphereGrid, SymTensorField};
use crate::interp::{golden_min, CubicChart, TrigSeries};

/// Relative floor for the strict-convexity eigenvalue test.
pub const EPS_CONVEX_REL: f64 = 1e-10;
/// Relative floor under which polar operations refuse to run.
pub const EPS_ORIGIN_REL: f64 = 1e-8;

/// Support function samples of a convex body with the origin strictly
/// interior. Construction validates positivity and strict convexity.
#[derive(Debug, Clone)]
pub struct SupportField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl SupportField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(GcfError::MisalignedField {
                field_len: values.len(),
                node_count: grid.node_count(),
            });
        }
        let max_s = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_s = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_s > 0.0) || !max_s.is_finite() {
            return Err(GcfError::OriginNotInterior {
                min_s,
                threshold: 0.0,
            });
        }
        let body = SupportField { grid, values };
        body.check_convexity()?;
        Ok(body)
    }

    fn check_convexity(&self) -> Result<()> {
        let tensor = curvature_radius_tensor(self)?;
        let threshold = EPS_CONVEX_REL * self.max();
        for i in 0..self.grid.node_count() {
            let eig = tensor.min_eigenvalue(i);
            if !(eig > threshold) {
                let p = self.grid.node(i);
                return Err(GcfError::ConvexityLost {
                    node: i,
                    x: p[0],
                    y: p[1],
                    z: p[2],
                    eigenvalue: eig,
                    threshold,
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_scalar_field(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.values.clone()).expect("aligned by construction")
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<SupportField> {
        if !(factor > 0.0) {
            return Err(GcfError::invalid(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        SupportField::new(
            self.grid.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Radial function samples (distance from the origin to the boundary).
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(GcfError::MisalignedField {
                field_len: values.len(),
                node_count: grid.node_count(),
            });
        }
        let min_r = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_r > 0.0) {
            return Err(GcfError::OriginNotInterior {
                min_s: min_r,
                threshold: 0.0,
            });
        }
        Ok(RadialField { grid, values })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The tensor hess(s) + g*s whose eigenvalues are the principal radii of
/// curvature in support coordinates.
pub fn curvature_radius_tensor(body: &SupportField) -> Result<SymTensorField> {
    let grid = &body.grid;
    let f = body.as_scalar_field();
    let mut hess = grid.hessian(&f)?;
    add_metric_times_scalar(grid, &mut hess, body.values());
    Ok(hess)
}

pub(crate) fn add_metric_times_scalar(
    grid: &SphereGrid,
    tensor: &mut SymTensorField,
    scalar: &[f64],
) {
    match grid.chart_dim() {
        1 => {
            for i in 0..scalar.len() {
                tensor.comps[3 * i] += scalar[i];
            }
        }
        _ => {
            for i in 0..scalar.len() {
                let (colat, _) = grid.colat_lon(i);
                let s2 = colat.sin().powi(2);
                tensor.comps[3 * i] += scalar[i];
                tensor.comps[3 * i + 2] += s2 * scalar[i];
            }
        }
    }
}

/// Product of principal curvature radii, det(hess s + g s) / det g.
/// On the circle this is s'' + s.
pub fn sigma_from_support(body: &SupportField) -> Result<ScalarField> {
    let tensor = curvature_radius_tensor(body)?;
    let threshold = EPS_CONVEX_REL * body.max();
    let mut sigma = Vec::with_capacity(body.values.len());
    for i in 0..body.values.len() {
        let eig = tensor.min_eigenvalue(i);
        if !(eig > threshold) {
            let p = body.grid.node(i);
            return Err(GcfError::ConvexityLost {
                node: i,
                x: p[0],
                y: p[1],
                z: p[2],
                eigenvalue: eig,
                threshold,
            });
        }
        sigma.push(tensor.det_over_metric(i));
    }
    ScalarField::new(body.grid.clone(), sigma)
}

/// Derived per-node geometry of a support-function body.
#[derive(Debug, Clone)]
pub struct BodyGeometry {
    /// Product of principal curvature radii per node.
    pub sigma: Vec<f64>,
    /// Gauss curvature per node (reciprocal of sigma).
    pub kappa: Vec<f64>,
    /// Boundary embedding s(u) u + grad s(u).
    pub points: Vec<[f64; 3]>,
    /// Euclidean norms of the boundary points.
    pub point_norms: Vec<f64>,
    /// Enclosed volume.
    pub volume: f64,
    pub convex: bool,
}

/// Boundary points of the body: x(u) = s(u) u + grad s(u) lifted to R^n.
pub fn boundary_points(body: &SupportField) -> Result<Vec<[f64; 3]>> {
    let grid = &body.grid;
    let f = body.as_scalar_field();
    let grad = grid.differentiate(&f)?;
    let n = grid.node_count();
    let mut pts = Vec::with_capacity(n);
    match grid.dim() {
        2 => {
            for k in 0..n {
                let u = grid.node(k);
                let s = body.values[k];
                let d = grad.component(k, 0);
                pts.push([s * u[0] - d * u[1], s * u[1] + d * u[0], 0.0]);
            }
        }
        _ => {
            for k in 0..n {
                let u = grid.node(k);
                let s = body.values[k];
                let (colat, lon) = grid.colat_lon(k);
                let (sphi, cphi) = colat.sin_cos();
                let (slam, clam) = lon.sin_cos();
                let e_phi = [cphi * clam, cphi * slam, -sphi];
                let e_lam = [-slam, clam, 0.0];
                let g_phi = grad.component(k, 0);
                let g_lam = grad.component(k, 1) / sphi;
                pts.push([
                    s * u[0] + g_phi * e_phi[0] + g_lam * e_lam[0],
                    s * u[1] + g_phi * e_phi[1] + g_lam * e_lam[1],
                    s * u[2] + g_phi * e_phi[2] + g_lam * e_lam[2],
                ]);
            }
        }
    }
    Ok(pts)
}

pub fn geometry_from_support(body: &SupportField) -> Result<BodyGeometry> {
    let sigma = sigma_from_support(body)?;
    let points = boundary_points(body)?;
    let point_norms: Vec<f64> = points.iter().map(|p| norm3(*p)).collect();
    let kappa: Vec<f64> = sigma.values().iter().map(|s| 1.0 / s).collect();
    let vol = volume_given_sigma(body, sigma.values());
    Ok(BodyGeometry {
        sigma: sigma.values().to_vec(),
        kappa,
        points,
        point_norms,
        volume: vol,
        convex: true,
    })
}

fn volume_given_sigma(body: &SupportField, sigma: &[f64]) -> f64 {
    let grid = &body.grid;
    let n = grid.dim() as f64;
    let mut acc = 0.0;
    for i in 0..sigma.len() {
        acc += body.values[i] * sigma[i] * grid.weights()[i];
    }
    acc / n
}

/// Enclosed volume, (1/n) * integral of s * sigma.
pub fn volume(body: &SupportField) -> Result<f64> {
    let sigma = sigma_from_support(body)?;
    Ok(volume_given_sigma(body, sigma.values()))
}

/// Translation-equivariant center: (n / |S^{n-1}|) * integral of s(u) u.
pub fn steiner_point(body: &SupportField) -> [f64; 3] {
    let grid = &body.grid;
    let n = grid.dim() as f64;
    let scale = n / grid.sphere_area();
    let mut acc = [0.0; 3];
    for i in 0..body.values.len() {
        let w = body.values[i] * grid.weights()[i];
        let u = grid.node(i);
        acc[0] += w * u[0];
        acc[1] += w * u[1];
        acc[2] += w * u[2];
    }
    [acc[0] * scale, acc[1] * scale, acc[2] * scale]
}

/// Translate the body by v (support transforms as s + <v, u>).
pub fn translate(body: &SupportField, v: [f64; 3]) -> Result<SupportField> {
    SupportField::new(
        body.grid.clone(),
        body.values
            .iter()
            .enumerate()
            .map(|(i, s)| s + dot3(v, body.grid.node(i)))
            .collect(),
    )
}

/// Translate so the Steiner point moves to the origin. Returns the recentred
/// body together with the applied shift.
pub fn recentre(body: &SupportField) -> Result<(SupportField, [f64; 3])> {
    let p = steiner_point(body);
    let shifted = translate(body, [-p[0], -p[1], -p[2]])?;
    Ok((shifted, p))
}

/// Per-node geometry of a body parametrized by its radial function:
/// induced metric, outward normal, support value and second fundamental
/// form, plus the derived curvature.
#[derive(Debug, Clone)]
pub struct RadialGeometry {
    /// Induced metric, packed [g11, g12, g22] in the chart.
    pub metric: Vec<[f64; 3]>,
    /// Outward unit normals at the boundary points r(z) z.
    pub normals: Vec<[f64; 3]>,
    /// Support values at those boundary points.
    pub support: Vec<f64>,
    /// Second fundamental form, packed like the metric.
    pub second_form: Vec<[f64; 3]>,
    /// Gauss curvature det(h) / det(g) at the boundary points.
    pub kappa: Vec<f64>,
    /// sqrt(r^2 + |grad r|^2), the slant factor.
    pub slant: Vec<f64>,
}

pub fn geometry_from_radial(rad: &RadialField) -> Result<RadialGeometry> {
    let grid = &rad.grid;
    let f = ScalarField::new(grid.clone(), rad.values.clone())?;
    let grad = grid.differentiate(&f)?;
    let hess = grid.hessian(&f)?;
    let n = grid.node_count();
    let mut metric = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut support = Vec::with_capacity(n);
    let mut second_form = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut slant = Vec::with_capacity(n);
    match grid.dim() {
        2 => {
            for k in 0..n {
                let r = rad.values[k];
                let rp = grad.component(k, 0);
                let rpp = hess.components(k)[0];
                let w2 = r * r + rp * rp;
                let w = w2.sqrt();
                let u = grid.node(k);
                let uperp = [-u[1], u[0], 0.0];
                metric.push([w2, 0.0, 0.0]);
                normals.push([
                    (r * u[0] - rp * uperp[0]) / w,
                    (r * u[1] - rp * uperp[1]) / w,
                    0.0,
                ]);
                support.push(r * r / w);
                let h11 = (-r * rpp + 2.0 * rp * rp + r * r) / w;
                second_form.push([h11, 0.0, 0.0]);
                kappa.push(h11 / w2);
                slant.push(w);
            }
        }
        _ => {
            for k in 0..n {
                let r = rad.values[k];
                let (colat, lon) = grid.colat_lon(k);
                let (sphi, cphi) = colat.sin_cos();
                let (slam, clam) = lon.sin_cos();
                let r_p = grad.component(k, 0);
                let r_l = grad.component(k, 1);
                let grad_norm2 = r_p * r_p + r_l * r_l / (sphi * sphi);
                let w2 = r * r + grad_norm2;
                let w = w2.sqrt();
                let hc = hess.components(k);
                let s2 = sphi * sphi;
                // g_ij = r^2 gbar_ij + r_i r_j (chart components)
                let g11 = r * r + r_p * r_p;
                let g12 = r_p * r_l;
                let g22 = r * r * s2 + r_l * r_l;
                metric.push([g11, g12, g22]);
                // normal = (r z - grad r) / w with grad lifted to R^3
                let e_phi = [cphi * clam, cphi * slam, -sphi];
                let e_lam = [-slam, clam, 0.0];
                let gp = r_p;
                let gl = r_l / sphi;
                let z = grid.node(k);
                normals.push([
                    (r * z[0] - gp * e_phi[0] - gl * e_lam[0]) / w,
                    (r * z[1] - gp * e_phi[1] - gl * e_lam[1]) / w,
                    (r * z[2] - gp * e_phi[2] - gl * e_lam[2]) / w,
                ]);
                support.push(r * r / w);
                // h_ij = (-r hess_ij + 2 r_i r_j + r^2 gbar_ij) / w
                let h11 = (-r * hc[0] + 2.0 * r_p * r_p + r * r) / w;
                let h12 = (-r * hc[1] + 2.0 * r_p * r_l) / w;
                let h22 = (-r * hc[2] + 2.0 * r_l * r_l + r * r * s2) / w;
                second_form.push([h11, h12, h22]);
                let det_g = g11 * g22 - g12 * g12;
                let det_h = h11 * h22 - h12 * h12;
                kappa.push(det_h / det_g);
                slant.push(w);
            }
        }
    }
    Ok(RadialGeometry {
        metric,
        normals,
        support,
        second_form,
        kappa,
        slant,
    })
}

/// Discrete support envelope s(u) = max_z r(z) <z, u> over the interpolated
/// radial function, seeded at the best node and refined locally.
pub fn support_from_radial(rad: &RadialField) -> Result<SupportField> {
    let values = support_envelope(&rad.grid, &rad.values);
    SupportField::new(rad.grid.clone(), values)
}

/// Discrete radial function r(z) = min_u s(u)/<z, u> over the interpolated
/// support function, seeded at the best node and refined locally.
pub fn radial_from_support(body: &SupportField) -> Result<RadialField> {
    let values = radial_envelope(&body.grid, &body.values);
    RadialField::new(body.grid.clone(), values)
}

/// Node-only version of the radial envelope (no interpolation or
/// refinement); the circumscribed-polytope oracle for the fast path.
pub fn radial_from_support_brute(body: &SupportField) -> Result<RadialField> {
    let grid = &body.grid;
    let n = grid.node_count();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let z = grid.node(j);
        let mut best = f64::INFINITY;
        for k in 0..n {
            let c = dot3(z, grid.node(k));
            if c > 1e-9 {
                best = best.min(body.values[k] / c);
            }
        }
        out.push(best);
    }
    RadialField::new(grid.clone(), out)
}

fn support_envelope(grid: &Arc<SphereGrid>, radial: &[f64]) -> Vec<f64> {
    let n = grid.node_count();
    let mut out = vec![0.0; n];
    match grid.dim() {
        2 => {
            let series = TrigSeries::fit(radial);
            for j in 0..n {
                let beta = grid.theta(j);
                let mut best_k = 0;
                let mut best = f64::NEG_INFINITY;
                for k in 0..n {
                    let v = radial[k] * (grid.theta(k) - beta).cos();
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
                let h = 2.0 * PI / n as f64;
                let center = grid.theta(best_k);
                let (_, neg) = golden_min(
                    |x| -series.eval(x) * (x - beta).cos(),
                    center - h,
                    center + h,
                    48,
                );
                out[j] = -neg;
            }
        }
        _ => {
            let bc = CubicChart::new(grid, radial);
            for j in 0..n {
                let u = grid.node(j);
                let mut best_k = 0;
                let mut best = f64::NEG_INFINITY;
                for k in 0..n {
                    let v = radial[k] * dot3(grid.node(k), u);
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
                let (c0, l0) = grid.colat_lon(best_k);
                let objective = |colat: f64, lon: f64| {
                    let (sphi, cphi) = colat.sin_cos();
                    let (slam, clam) = lon.sin_cos();
                    let z = [sphi * clam, sphi * slam, cphi];
                    bc.eval(colat, lon) * dot3(z, u)
                };
                out[j] = pattern_search_max(objective, c0, l0, grid, best).0;
            }
            filter_pole_rows(grid, &mut out);
        }
    }
    out
}

fn radial_envelope(grid: &Arc<SphereGrid>, support: &[f64]) -> Vec<f64> {
    let n = grid.node_count();
    let mut out = vec![0.0; n];
    match grid.dim() {
        2 => {
            let series = TrigSeries::fit(support);
            for j in 0..n {
                let alpha = grid.theta(j);
                let mut best_k = 0;
                let mut best = f64::INFINITY;
                for k in 0..n {
                    let c = (grid.theta(k) - alpha).cos();
                    if c > 1e-9 {
                        let v = support[k] / c;
                        if v < best {
                            best = v;
                            best_k = k;
                        }
                    }
                }
                let h = 2.0 * PI / n as f64;
                let center = grid.theta(best_k);
                let (_, v) = golden_min(
                    |x| {
                        let c = (x - alpha).cos();
                        series.eval(x) / c.max(1e-12)
                    },
                    center - h,
                    center + h,
                    48,
                );
                out[j] = v;
            }
        }
        _ => {
            let bc = CubicChart::new(grid, support);
            for j in 0..n {
                let z = grid.node(j);
                let mut best_k = 0;
                let mut best = f64::INFINITY;
                for k in 0..n {
                    let c = dot3(z, grid.node(k));
                    if c > 1e-9 {
                        let v = support[k] / c;
                        if v < best {
                            best = v;
                            best_k = k;
                        }
                    }
                }
                let (c0, l0) = grid.colat_lon(best_k);
                let objective = |colat: f64, lon: f64| {
                    let (sphi, cphi) = colat.sin_cos();
                    let (slam, clam) = lon.sin_cos();
                    let u = [sphi * clam, sphi * slam, cphi];
                    let c = dot3(z, u);
                    if c > 1e-9 {
                        bc.eval(colat, lon) / c
                    } else {
                        f64::INFINITY
                    }
                };
                out[j] = -pattern_search_max(|c, l| -objective(c, l), c0, l0, grid, -best).0;
            }
            filter_pole_rows(grid, &mut out);
        }
    }
    out
}

/// Project each latitude row onto the longitude harmonics a smooth function
/// on the sphere can carry there (mode m scales like sin(colat)^m toward a
/// pole). This removes per-node optimization noise that the near-pole
/// metric would otherwise amplify quadratically when the envelope output is
/// differentiated.
fn filter_pole_rows(grid: &SphereGrid, values: &mut [f64]) {
    let (n_colat, n_lon) = match grid.resolution() {
        [m, l] => (*m, *l),
        _ => return,
    };
    let nyquist = n_lon / 2;
    for i in 0..n_colat {
        let (colat, _) = grid.colat_lon(i * n_lon);
        let keep = 4 + (1.3 * nyquist as f64 * colat.sin()).ceil() as usize;
        if keep >= nyquist {
            continue;
        }
        let row = &mut values[i * n_lon..(i + 1) * n_lon];
        let mut truncated = vec![0.0; n_lon];
        let step = 2.0 * PI / n_lon as f64;
        for m in 0..=keep {
            let (mut am, mut bm) = (0.0, 0.0);
            for (j, &v) in row.iter().enumerate() {
                let (s, c) = (m as f64 * step * j as f64).sin_cos();
                am += v * c;
                bm += v * s;
            }
            let scale = if m == 0 { 1.0 } else { 2.0 } / n_lon as f64;
            am *= scale;
            bm *= scale;
            for (j, t) in truncated.iter_mut().enumerate() {
                let (s, c) = (m as f64 * step * j as f64).sin_cos();
                *t += am * c + bm * s;
            }
        }
        row.copy_from_slice(&truncated);
    }
}

/// Shrinking 5x5 chart search around a seed cell; returns the best value
/// found (at least the seed value) with its chart location. The box halves
/// each round, which keeps the maximizer inside the sampled span; thirteen
/// rounds push the value residual to ~1e-10 so that near-pole second
/// differences of the envelope stay clean.
pub(crate) fn pattern_search_max(
    objective: impl Fn(f64, f64) -> f64,
    colat0: f64,
    lon0: f64,
    grid: &SphereGrid,
    seed_value: f64,
) -> (f64, f64, f64) {
    let (d_colat, d_lon) = match grid.resolution() {
        [m, l] => (PI / *m as f64, 2.0 * PI / *l as f64),
        _ => unreachable!(),
    };
    let mut best = seed_value;
    let (mut bc, mut bl) = (colat0, lon0);
    let (mut rc, mut rl) = (d_colat, d_lon);
    for _ in 0..13 {
        let (mut round_best, mut round_c, mut round_l) = (best, bc, bl);
        for ic in -2..=2i32 {
            for il in -2..=2i32 {
                if ic == 0 && il == 0 {
                    continue;
                }
                let c = bc + rc * f64::from(ic) / 2.0;
                let l = bl + rl * f64::from(il) / 2.0;
                let v = objective(c, l);
                if v > round_best {
                    round_best = v;
                    round_c = c;
                    round_l = l;
                }
            }
        }
        best = round_best;
        bc = round_c;
        bl = round_l;
        rc *= 0.5;
        rl *= 0.5;
    }
    (best, bc, bl)
}

/// Polar body: the support of K* is the envelope of the reciprocal support
/// interpreted as a radial function (r_{K*} = 1/s_K).
pub fn polar(body: &SupportField) -> Result<SupportField> {
    let min_s = body.min();
    let threshold = EPS_ORIGIN_REL * body.max();
    if min_s <= threshold {
        return Err(GcfError::OriginNotInterior {
            min_s,
            threshold,
        });
    }
    let reciprocal: Vec<f64> = body.values.iter().map(|s| 1.0 / s).collect();
    let rad = RadialField::new(body.grid.clone(), reciprocal)?;
    support_from_radial(&rad)
}

/// Analytic body seeds and the on-grid sampled format.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        radius: f64,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// Unit ball with cosine perturbations: on the circle the modes act on
    /// the polar angle, on the sphere on the colatitude (zonal).
    PerturbedBall {
        modes: Vec<(u32, f64)>,
    },
    SupportGrid {
        n: usize,
        resolution: Vec<usize>,
        values: Vec<f64>,
    },
}

impl BodySpec {
    pub fn from_json(text: &str) -> Result<BodySpec> {
        serde_json::from_str(text).map_err(|e| GcfError::invalid(format!("body spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("body spec serializes")
    }

    /// Grid resolution embedded in the spec, if any.
    pub fn embedded_grid(&self) -> Option<(usize, &[usize])> {
        match self {
            BodySpec::SupportGrid { n, resolution, .. } => Some((*n, resolution)),
            _ => None,
        }
    }
}

/// Sample a body spec on a grid.
pub fn build_support(grid: &Arc<SphereGrid>, spec: &BodySpec) -> Result<SupportField> {
    let n = grid.node_count();
    let values = match spec {
        BodySpec::Ball { radius } => {
            if !(*radius > 0.0) {
                return Err(GcfError::invalid("ball radius must be positive"));
            }
            vec![*radius; n]
        }
        BodySpec::Ellipsoid { semi_axes, center } => {
            if semi_axes.len() != grid.dim() {
                return Err(GcfError::invalid(format!(
                    "expected {} semi-axes, got {}",
                    grid.dim(),
                    semi_axes.len()
                )));
            }
            if semi_axes.iter().any(|a| !(*a > 0.0)) {
                return Err(GcfError::invalid("semi-axes must be positive"));
            }
            let c = match center {
                Some(c) if c.len() == grid.dim() => [
                    c[0],
                    c[1],
                    if grid.dim() == 3 { c[2] } else { 0.0 },
                ],
                Some(c) => {
                    return Err(GcfError::invalid(format!(
                        "expected {} center coordinates, got {}",
                        grid.dim(),
                        c.len()
                    )))
                }
                None => [0.0; 3],
            };
            let a = [
                semi_axes[0],
                semi_axes[1],
                if grid.dim() == 3 { semi_axes[2] } else { 0.0 },
            ];
            (0..n)
                .map(|i| {
                    let u = grid.node(i);
                    let q = (a[0] * u[0]).powi(2) + (a[1] * u[1]).powi(2) + (a[2] * u[2]).powi(2);
                    dot3(c, u) + q.sqrt()
                })
                .collect()
        }
        BodySpec::PerturbedBall { modes } => (0..n)
            .map(|i| {
                let angle = match grid.dim() {
                    2 => grid.theta(i),
                    _ => grid.colat_lon(i).0,
                };
                let mut s = 1.0;
                for (k, amp) in modes {
                    s += amp * (*k as f64 * angle).cos();
                }
                s
            })
            .collect(),
        BodySpec::SupportGrid {
            n: dim,
            resolution,
            values,
        } => {
            if *dim != grid.dim() || resolution != grid.resolution() {
                return Err(GcfError::invalid(format!(
                    "support grid is {}d {:?}, grid is {}d {:?}",
                    dim,
                    resolution,
                    grid.dim(),
                    grid.resolution()
                )));
            }
            values.clone()
        }
    };
    SupportField::new(grid.clone(), values)
}

/// On-grid spec of a support field (for serialization).
pub fn support_to_spec(body: &SupportField) -> BodySpec {
    BodySpec::SupportGrid {
        n: body.grid.dim(),
        resolution: body.grid.resolution().to_vec(),
        values: body.values.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn ellipse(grid: &Arc<SphereGrid>) -> SupportField {
        build_support(
            grid,
            &BodySpec::Ellipsoid {
                semi_axes: vec![2.0, 1.0],
                center: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn ball_sigma_is_constant() {
        let g = make_grid(2, &[64]).unwrap();
        let b = build_support(&g, &BodySpec::Ball { radius: 1.5 }).unwrap();
        let s = sigma_from_support(&b).unwrap();
        for v in s.values() {
            assert!((v - 1.5).abs() < 1e-12);
        }
        let g3 = make_grid(3, &[16, 32]).unwrap();
        let b3 = build_support(&g3, &BodySpec::Ball { radius: 1.5 }).unwrap();
        let s3 = sigma_from_support(&b3).unwrap();
        for v in s3.values() {
            assert!((v - 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_sigma_matches_curvature_radius() {
        let g = make_grid(2, &[256]).unwrap();
        let b = ellipse(&g);
        let s = sigma_from_support(&b).unwrap();
        // curvature radius of the ellipse at theta=0 is b^2/a = 0.5
        assert!((s.values()[0] - 0.5).abs() < 1e-6);
        // analytic value a^2 b^2 / (a^2 cos^2 + b^2 sin^2)^{3/2} elsewhere
        let k = 57;
        let th = g.theta(k);
        let denom = (4.0 * th.cos().powi(2) + th.sin().powi(2)).powf(1.5);
        assert!((s.values()[k] - 4.0 / denom).abs() < 1e-6);
    }

    #[test]
    fn ellipsoid_sigma_matches_analytic() {
        let g = make_grid(3, &[32, 64]).unwrap();
        let (a, b, c) = (1.3, 1.0, 0.8);
        let body = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![a, b, c],
                center: None,
            },
        )
        .unwrap();
        let s = sigma_from_support(&body).unwrap();
        let mut worst = 0.0f64;
        for i in 0..g.node_count() {
            let u = g.node(i);
            let w2 = (a * u[0]).powi(2) + (b * u[1]).powi(2) + (c * u[2]).powi(2);
            let expect = (a * b * c).powi(2) / (w2 * w2);
            worst = worst.max((s.values()[i] - expect).abs() / expect);
        }
        // chart-scale accuracy at 32 x 64; the pole rows dominate
        assert!(worst < 3e-2, "worst rel err {worst}");
    }

    #[test]
    fn translated_ball_sigma_is_unchanged() {
        let g = make_grid(2, &[256]).unwrap();
        let b = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![1.0, 1.0],
                center: Some(vec![0.5, 0.0]),
            },
        )
        .unwrap();
        let s = sigma_from_support(&b).unwrap();
        // linear terms lie in the stencil kernel to scheme accuracy
        for v in s.values() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ball_geometry_from_radial() {
        let g = make_grid(3, &[16, 32]).unwrap();
        let r = RadialField::new(g.clone(), vec![2.0; g.node_count()]).unwrap();
        let geo = geometry_from_radial(&r).unwrap();
        for i in 0..g.node_count() {
            assert!((geo.support[i] - 2.0).abs() < 1e-12);
            assert!((geo.kappa[i] - 0.25).abs() < 1e-12);
            assert!((norm3(geo.normals[i]) - 1.0).abs() < 1e-12);
            let u = g.node(i);
            for d in 0..3 {
                assert!((geo.normals[i][d] - u[d]).abs() < 1e-12);
            }
            let (colat, _) = g.colat_lon(i);
            let s2 = colat.sin().powi(2);
            let m = geo.metric[i];
            assert!((m[0] - 4.0).abs() < 1e-12 && (m[2] - 4.0 * s2).abs() < 1e-12);
            let h = geo.second_form[i];
            assert!((h[0] - 2.0).abs() < 1e-12 && (h[2] - 2.0 * s2).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_formula_support_matches_envelope() {
        let g = make_grid(2, &[256]).unwrap();
        let n = g.node_count();
        // ellipse radial function r = ab / sqrt(b^2 cos^2 + a^2 sin^2)
        let r: Vec<f64> = (0..n)
            .map(|k| {
                let th = g.theta(k);
                2.0 / (th.cos().powi(2) + 4.0 * th.sin().powi(2)).sqrt()
            })
            .collect();
        let rad = RadialField::new(g.clone(), r).unwrap();
        let geo = geometry_from_radial(&rad).unwrap();
        let sup = support_from_radial(&rad).unwrap();
        // formula (support at the point with normal nu(z)) vs envelope
        // (support at grid directions): compare through interpolation
        let series = TrigSeries::fit(sup.values());
        let mut worst = 0.0f64;
        for k in 0..n {
            let nu = geo.normals[k];
            let ang = nu[1].atan2(nu[0]);
            worst = worst.max((series.eval(ang) - geo.support[k]).abs());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn radial_kappa_consistent_with_support_route() {
        let g = make_grid(2, &[256]).unwrap();
        let b = ellipse(&g);
        let rad = radial_from_support(&b).unwrap();
        let geo = geometry_from_radial(&rad).unwrap();
        let sigma = sigma_from_support(&b).unwrap();
        let series = TrigSeries::fit(sigma.values());
        let mut worst = 0.0f64;
        for k in 0..g.node_count() {
            let nu = geo.normals[k];
            let ang = nu[1].atan2(nu[0]);
            let kappa_support = 1.0 / series.eval(ang);
            worst = worst.max((geo.kappa[k] - kappa_support).abs() / kappa_support);
        }
        assert!(worst < 1e-5, "worst rel {worst}");
    }

    #[test]
    fn ellipse_support_radial_round_trips() {
        let g = make_grid(2, &[256]).unwrap();
        let b = ellipse(&g);
        let rad = radial_from_support(&b).unwrap();
        assert!((rad.values()[0] - 2.0).abs() < 1e-4);
        assert!((rad.values()[64] - 1.0).abs() < 1e-4);
        let back = support_from_radial(&rad).unwrap();
        let mut worst = 0.0f64;
        for k in 0..g.node_count() {
            worst = worst.max((back.values()[k] - b.values()[k]).abs());
        }
        assert!(worst < 1e-6, "round trip {worst}");
    }

    #[test]
    fn perturbed_ball_round_trip() {
        let g = make_grid(2, &[256]).unwrap();
        let b = build_support(&g, &BodySpec::PerturbedBall { modes: vec![(3, 0.1)] }).unwrap();
        let rad = radial_from_support(&b).unwrap();
        let back = support_from_radial(&rad).unwrap();
        let mut worst = 0.0f64;
        for k in 0..g.node_count() {
            worst = worst.max((back.values()[k] - b.values()[k]).abs());
        }
        assert!(worst < 1e-4, "round trip {worst}");
    }

    #[test]
    fn brute_force_is_an_upper_bound_near_the_fast_path() {
        // The node-restricted envelope describes the circumscribed polytope:
        // it can only overshoot the interpolated radial function, and by at
        // most an O(h^2) sag between supporting lines.
        for n in [32usize, 64] {
            let g = make_grid(2, &[n]).unwrap();
            let b = ellipse(&g);
            let fast = radial_from_support(&b).unwrap();
            let brute = radial_from_support_brute(&b).unwrap();
            let h = 2.0 * PI / n as f64;
            let cap = h * h * b.max();
            for k in 0..g.node_count() {
                let gap = brute.values()[k] - fast.values()[k];
                assert!(gap > -1e-9, "brute below fast at node {k}: {gap}");
                assert!(gap < cap, "gap {gap} exceeds O(h^2) cap {cap}");
            }
        }
    }

    #[test]
    fn polar_of_ball_and_ellipse() {
        let g = make_grid(2, &[256]).unwrap();
        let ball = build_support(&g, &BodySpec::Ball { radius: 2.0 }).unwrap();
        let p = polar(&ball).unwrap();
        for v in p.values() {
            assert!((v - 0.5).abs() < 1e-10);
        }
        let b = ellipse(&g);
        let pe = polar(&b).unwrap();
        // polar of the centred ellipse has reciprocal semi-axes (1/2, 1)
        assert!((pe.values()[64] - 1.0).abs() < 1e-4);
        assert!((pe.values()[0] - 0.5).abs() < 1e-4);
        let back = polar(&pe).unwrap();
        let mut worst = 0.0f64;
        for k in 0..g.node_count() {
            worst = worst.max((back.values()[k] - b.values()[k]).abs());
        }
        assert!(worst < 1e-4, "involution {worst}");
    }

    #[test]
    fn polar_requires_interior_origin() {
        let g = make_grid(2, &[64]).unwrap();
        let b = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![1.0, 1.0],
                center: Some(vec![0.999, 0.0]),
            },
        )
        .unwrap();
        // strictly interior but within the relative threshold of the boundary
        let tight = SupportField::new(
            g.clone(),
            b.values().iter().map(|v| v - b.min() + 1e-12).collect(),
        );
        match tight {
            Ok(body) => assert!(matches!(
                polar(&body),
                Err(GcfError::OriginNotInterior { .. })
            )),
            Err(_) => {} // construction may already reject; both are fine
        }
    }

    #[test]
    fn degenerate_radial_rejected() {
        let g = make_grid(2, &[64]).unwrap();
        let mut vals = vec![1.0; g.node_count()];
        vals[3] = 0.0;
        assert!(matches!(
            RadialField::new(g, vals),
            Err(GcfError::OriginNotInterior { .. })
        ));
    }

    #[test]
    fn volumes() {
        let g = make_grid(2, &[256]).unwrap();
        let disc = build_support(&g, &BodySpec::Ball { radius: 1.0 }).unwrap();
        assert!((volume(&disc).unwrap() - PI).abs() < 1e-10);
        let b = ellipse(&g);
        assert!((volume(&b).unwrap() - 2.0 * PI).abs() < 1e-6);
        let g3 = make_grid(3, &[32, 64]).unwrap();
        let ball = build_support(&g3, &BodySpec::Ball { radius: 1.0 }).unwrap();
        assert!((volume(&ball).unwrap() - 4.0 * PI / 3.0).abs() < 1e-8);
    }

    #[test]
    fn volume_scaling_law() {
        let g = make_grid(2, &[128]).unwrap();
        let b = ellipse(&g);
        let c = 1.7;
        let scaled = b.scaled(c).unwrap();
        let v1 = volume(&b).unwrap();
        let v2 = volume(&scaled).unwrap();
        assert!((v2 - c * c * v1).abs() < 1e-9 * v1);
        let s1 = sigma_from_support(&b).unwrap();
        let s2 = sigma_from_support(&scaled).unwrap();
        for k in 0..g.node_count() {
            assert!((s2.values()[k] - c * s1.values()[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn steiner_points() {
        let g = make_grid(2, &[256]).unwrap();
        let ball = build_support(&g, &BodySpec::Ball { radius: 2.0 }).unwrap();
        let p = steiner_point(&ball);
        assert!(norm3(p) < 1e-12);

        let shifted = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![1.0, 1.0],
                center: Some(vec![0.3, -0.2]),
            },
        )
        .unwrap();
        let p = steiner_point(&shifted);
        assert!((p[0] - 0.3).abs() < 1e-10 && (p[1] + 0.2).abs() < 1e-10);

        let ell = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![2.0, 1.0],
                center: Some(vec![0.3, 0.0]),
            },
        )
        .unwrap();
        let p = steiner_point(&ell);
        assert!((p[0] - 0.3).abs() < 1e-6 && p[1].abs() < 1e-10);
        let (rec, shift) = recentre(&ell).unwrap();
        assert!((shift[0] - 0.3).abs() < 1e-6);
        let q = steiner_point(&rec);
        assert!(norm3(q) < 1e-9);
    }

    #[test]
    fn boundary_points_satisfy_support_identity() {
        let g = make_grid(3, &[32, 64]).unwrap();
        let body = build_support(
            &g,
            &BodySpec::Ellipsoid {
                semi_axes: vec![1.3, 1.0, 0.8],
                center: None,
            },
        )
        .unwrap();
        let pts = boundary_points(&body).unwrap();
        for i in 0..g.node_count() {
            let u = g.node(i);
            assert!((dot3(pts[i], u) - body.values()[i]).abs() < 1e-10);
            assert!(body.values()[i] <= norm3(pts[i]) + 1e-12);
        }
    }

    #[test]
    fn body_spec_json_round_trip() {
        let spec = BodySpec::PerturbedBall {
            modes: vec![(3, 0.1), (5, -0.02)],
        };
        let text = spec.to_json();
        let back = BodySpec::from_json(&text).unwrap();
        assert_eq!(spec, back);

        let err = BodySpec::from_json(r#"{"kind":"ball","radius":1,"extra":2}"#);
        assert!(err.is_err());
    }

    #[test]
    fn nonconvex_support_rejected() {
        let g = make_grid(2, &[128]).unwrap();
        // amplitude far beyond the convexity limit for mode 6
        let res = build_support(&g, &BodySpec::PerturbedBall { modes: vec![(6, 0.2)] });
        assert!(matches!(res, Err(GcfError::ConvexityLost { .. })));
    }
}
