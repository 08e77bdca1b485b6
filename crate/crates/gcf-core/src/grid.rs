//! Discretization of the unit sphere S^{n-1} for n in {2, 3}.
//!
//! The circle is sampled at uniform angles with 4th-order periodic stencils.
//! The 2-sphere uses a colatitude/longitude chart staggered half a cell off
//! the poles; stencils are 2nd-order central with the usual half-turn shift
//! when a stencil arm crosses a pole. Quadrature weights are exact cell
//! solid angles, so they sum to |S^{n-1}| up to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{GcfError, Result};

/// Hard floor on nodes per angular direction. Grids this small are only
/// useful for layout tests; flow configurations enforce 16 and up.
pub const MIN_NODES_PER_DIRECTION: usize = 4;

#[derive(Debug, Clone)]
pub(crate) enum Chart {
    Circle {
        step: f64,
    },
    LatLon {
        n_colat: usize,
        n_lon: usize,
        d_colat: f64,
        d_lon: f64,
        colat: Vec<f64>,
        sin_colat: Vec<f64>,
        cos_colat: Vec<f64>,
        cot_colat: Vec<f64>,
    },
}

/// Immutable sphere discretization: nodes, quadrature weights, and the chart
/// data (round metric components and connection coefficients) used by the
/// covariant operators.
#[derive(Debug)]
pub struct SphereGrid {
    dim: usize,
    resolution: Vec<usize>,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    pub(crate) chart: Chart,
}

/// Build a grid for S^{n-1}. `resolution` is `[N]` for the circle and
/// `[n_colat, n_lon]` for the 2-sphere (longitude count must be even).
pub fn make_grid(dim: usize, resolution: &[usize]) -> Result<Arc<SphereGrid>> {
    match dim {
        2 => {
            if resolution.len() != 1 {
                return Err(GcfError::BadResolutionShape {
                    dim,
                    expected: 1,
                    got: resolution.to_vec(),
                });
            }
            let n = resolution[0];
            if n < MIN_NODES_PER_DIRECTION {
                return Err(GcfError::ResolutionTooLow {
                    got: resolution.to_vec(),
                    min: MIN_NODES_PER_DIRECTION,
                });
            }
            let step = 2.0 * PI / n as f64;
            let mut nodes = Vec::with_capacity(n);
            for k in 0..n {
                let th = step * k as f64;
                nodes.push([th.cos(), th.sin(), 0.0]);
            }
            Ok(Arc::new(SphereGrid {
                dim,
                resolution: resolution.to_vec(),
                nodes,
                weights: vec![step; n],
                chart: Chart::Circle { step },
            }))
        }
        3 => {
            if resolution.len() != 2 {
                return Err(GcfError::BadResolutionShape {
                    dim,
                    expected: 2,
                    got: resolution.to_vec(),
                });
            }
            let (m, l) = (resolution[0], resolution[1]);
            if m < MIN_NODES_PER_DIRECTION || l < MIN_NODES_PER_DIRECTION {
                return Err(GcfError::ResolutionTooLow {
                    got: resolution.to_vec(),
                    min: MIN_NODES_PER_DIRECTION,
                });
            }
            if l % 2 != 0 {
                return Err(GcfError::OddLongitudeCount(l));
            }
            let d_colat = PI / m as f64;
            let d_lon = 2.0 * PI / l as f64;
            let mut colat = Vec::with_capacity(m);
            let mut sin_colat = Vec::with_capacity(m);
            let mut cos_colat = Vec::with_capacity(m);
            let mut cot_colat = Vec::with_capacity(m);
            for i in 0..m {
                let phi = (i as f64 + 0.5) * d_colat;
                colat.push(phi);
                sin_colat.push(phi.sin());
                cos_colat.push(phi.cos());
                cot_colat.push(phi.cos() / phi.sin());
            }
            let mut nodes = Vec::with_capacity(m * l);
            let mut weights = Vec::with_capacity(m * l);
            let half = d_colat / 2.0;
            for i in 0..m {
                // Exact solid angle of the cell row: telescopes to 4*pi.
                let w = (colat[i] - half).cos() - (colat[i] + half).cos();
                for j in 0..l {
                    let lam = d_lon * j as f64;
                    nodes.push([
                        sin_colat[i] * lam.cos(),
                        sin_colat[i] * lam.sin(),
                        cos_colat[i],
                    ]);
                    weights.push(w * d_lon);
                }
            }
            Ok(Arc::new(SphereGrid {
                dim,
                resolution: resolution.to_vec(),
                nodes,
                weights,
                chart: Chart::LatLon {
                    n_colat: m,
                    n_lon: l,
                    d_colat,
                    d_lon,
                    colat,
                    sin_colat,
                    cos_colat,
                    cot_colat,
                },
            }))
        }
        other => Err(GcfError::UnsupportedDimension(other)),
    }
}

impl SphereGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Chart dimension n-1 (1 on the circle, 2 on the sphere).
    pub fn chart_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Area |S^{n-1}| of the continuum sphere: 2*pi or 4*pi.
    pub fn sphere_area(&self) -> f64 {
        match self.dim {
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Volume of the unit ball in R^n.
    pub fn unit_ball_volume(&self) -> f64 {
        match self.dim {
            2 => PI,
            _ => 4.0 * PI / 3.0,
        }
    }

    /// Node angle on the circle.
    pub fn theta(&self, k: usize) -> f64 {
        match &self.chart {
            Chart::Circle { step } => step * k as f64,
            _ => panic!("theta() is only defined on the circle chart"),
        }
    }

    /// (colatitude, longitude) of a sphere node.
    pub fn colat_lon(&self, idx: usize) -> (f64, f64) {
        match &self.chart {
            Chart::LatLon {
                n_lon,
                d_lon,
                colat,
                ..
            } => {
                let i = idx / n_lon;
                let j = idx % n_lon;
                (colat[i], d_lon * j as f64)
            }
            _ => panic!("colat_lon() is only defined on the lat-lon chart"),
        }
    }

    /// Diagonal round-metric components in the chart at a node:
    /// [1] on the circle, [1, sin^2(colat)] on the sphere.
    pub fn metric_diag(&self, idx: usize) -> [f64; 2] {
        match &self.chart {
            Chart::Circle { .. } => [1.0, 0.0],
            Chart::LatLon {
                n_lon, sin_colat, ..
            } => {
                let s = sin_colat[idx / n_lon];
                [1.0, s * s]
            }
        }
    }

    /// The nonzero connection coefficients of the sphere chart at a node,
    /// (Gamma^colat_{lon lon}, Gamma^lon_{colat lon}) = (-sin cos, cot).
    pub fn connection(&self, idx: usize) -> (f64, f64) {
        match &self.chart {
            Chart::Circle { .. } => (0.0, 0.0),
            Chart::LatLon {
                n_lon,
                sin_colat,
                cos_colat,
                cot_colat,
                ..
            } => {
                let row = idx / n_lon;
                (-sin_colat[row] * cos_colat[row], cot_colat[row])
            }
        }
    }

    pub fn same_layout(&self, other: &SphereGrid) -> bool {
        self.dim == other.dim && self.resolution == other.resolution
    }

    fn check_aligned(&self, len: usize) -> Result<()> {
        if len != self.node_count() {
            return Err(GcfError::MisalignedField {
                field_len: len,
                node_count: self.node_count(),
            });
        }
        Ok(())
    }

    /// Quadrature of a scalar field: sum of value * cell weight.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.check_field(f)?;
        Ok(f.values
            .iter()
            .zip(self.weights.iter())
            .map(|(v, w)| v * w)
            .sum())
    }

    /// Covariant gradient (chart components, lower index).
    pub fn differentiate(&self, f: &ScalarField) -> Result<GradientField> {
        self.check_field(f)?;
        let mut comps = vec![0.0; self.node_count() * self.chart_dim()];
        self.gradient_raw(&f.values, &mut comps);
        Ok(GradientField {
            grid: f.grid.clone(),
            comps,
        })
    }

    /// Covariant Hessian (chart components, packed [t11, t12, t22]).
    pub fn hessian(&self, f: &ScalarField) -> Result<SymTensorField> {
        self.check_field(f)?;
        let mut comps = vec![0.0; self.node_count() * 3];
        self.hessian_raw(&f.values, &mut comps);
        Ok(SymTensorField {
            grid: f.grid.clone(),
            comps,
        })
    }

    fn check_field(&self, f: &ScalarField) -> Result<()> {
        if !self.same_layout(&f.grid) {
            return Err(GcfError::MisalignedField {
                field_len: f.values.len(),
                node_count: self.node_count(),
            });
        }
        self.check_aligned(f.values.len())
    }

    /// First derivatives into `out` (stride = chart_dim).
    pub(crate) fn gradient_raw(&self, f: &[f64], out: &mut [f64]) {
        match &self.chart {
            Chart::Circle { step } => {
                let n = f.len();
                let c = 1.0 / (12.0 * step);
                for i in 0..n {
                    let m2 = f[(i + n - 2) % n];
                    let m1 = f[(i + n - 1) % n];
                    let p1 = f[(i + 1) % n];
                    let p2 = f[(i + 2) % n];
                    out[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * c;
                }
            }
            Chart::LatLon {
                n_colat,
                n_lon,
                d_colat,
                d_lon,
                ..
            } => {
                let (m, l) = (*n_colat, *n_lon);
                let half = l / 2;
                let cphi = 1.0 / (2.0 * d_colat);
                let clam = 1.0 / (2.0 * d_lon);
                for i in 0..m {
                    let base = i * l;
                    // Colatitude neighbours cross the pole with a half-turn shift.
                    let (up_base, up_shift) = if i == 0 {
                        (0, true)
                    } else {
                        ((i - 1) * l, false)
                    };
                    let (dn_base, dn_shift) = if i + 1 == m {
                        ((m - 1) * l, true)
                    } else {
                        ((i + 1) * l, false)
                    };
                    for j in 0..l {
                        let idx = base + j;
                        let up = f[up_base + if up_shift { (j + half) % l } else { j }];
                        let dn = f[dn_base + if dn_shift { (j + half) % l } else { j }];
                        let east = f[base + if j + 1 == l { 0 } else { j + 1 }];
                        let west = f[base + if j == 0 { l - 1 } else { j - 1 }];
                        out[2 * idx] = (dn - up) * cphi;
                        out[2 * idx + 1] = (east - west) * clam;
                    }
                }
            }
        }
    }

    /// Covariant Hessian into `out` (stride 3, packed [t11, t12, t22]).
    pub(crate) fn hessian_raw(&self, f: &[f64], out: &mut [f64]) {
        match &self.chart {
            Chart::Circle { step } => {
                let n = f.len();
                let c = 1.0 / (12.0 * step * step);
                for i in 0..n {
                    let m2 = f[(i + n - 2) % n];
                    let m1 = f[(i + n - 1) % n];
                    let p1 = f[(i + 1) % n];
                    let p2 = f[(i + 2) % n];
                    out[3 * i] = (-m2 + 16.0 * m1 - 30.0 * f[i] + 16.0 * p1 - p2) * c;
                    out[3 * i + 1] = 0.0;
                    out[3 * i + 2] = 0.0;
                }
            }
            Chart::LatLon {
                n_colat,
                n_lon,
                d_colat,
                d_lon,
                colat,
                sin_colat,
                ..
            } => {
                let (m, l) = (*n_colat, *n_lon);
                let half = l / 2;
                let inv_dp2 = 1.0 / (d_colat * d_colat);
                let inv_dl2 = 1.0 / (d_lon * d_lon);
                let inv_2dp = 1.0 / (2.0 * d_colat);
                let inv_2dl = 1.0 / (2.0 * d_lon);
                // q = f_lam / sin(colat) is smooth across the poles (odd
                // under the half-turn reflection); differencing it directly
                // keeps the mixed term second order in the pole rows, where
                // forming f_philam - cot * f_lam would divide an O(h^2)
                // cancellation error by sin(colat).
                let mut q = vec![0.0; m * l];
                for i in 0..m {
                    let inv_sin = inv_2dl / sin_colat[i];
                    let base = i * l;
                    for j in 0..l {
                        let jp = base + if j + 1 == l { 0 } else { j + 1 };
                        let jm = base + if j == 0 { l - 1 } else { j - 1 };
                        q[base + j] = (f[jp] - f[jm]) * inv_sin;
                    }
                }
                for i in 0..m {
                    let s = sin_colat[i];
                    let s2 = s * s;
                    // Half-level sines for the flux-form Laplacian; they
                    // vanish exactly at the poles.
                    let sin_up = (colat[i] - 0.5 * d_colat).sin();
                    let sin_dn = (colat[i] + 0.5 * d_colat).sin();
                    let base = i * l;
                    let (up_base, up_shift) = if i == 0 {
                        (0, true)
                    } else {
                        ((i - 1) * l, false)
                    };
                    let (dn_base, dn_shift) = if i + 1 == m {
                        ((m - 1) * l, true)
                    } else {
                        ((i + 1) * l, false)
                    };
                    for j in 0..l {
                        let idx = base + j;
                        let ju = up_base + if up_shift { (j + half) % l } else { j };
                        let jd = dn_base + if dn_shift { (j + half) % l } else { j };
                        let c0 = f[idx];
                        let up = f[ju];
                        let dn = f[jd];
                        let jp = base + if j + 1 == l { 0 } else { j + 1 };
                        let jm = base + if j == 0 { l - 1 } else { j - 1 };
                        let f_pp = (dn - 2.0 * c0 + up) * inv_dp2;
                        let f_ll = (f[jp] - 2.0 * c0 + f[jm]) * inv_dl2;
                        // t12 = sin * d/dphi (f_lam / sin); q flips sign
                        // across a pole
                        let q_up = if up_shift { -q[ju] } else { q[ju] };
                        let q_dn = if dn_shift { -q[jd] } else { q[jd] };
                        let t12 = s * (q_dn - q_up) * inv_2dp;
                        // Laplace-Beltrami in flux form is uniformly second
                        // order on the staggered rows; t22 follows from
                        // t22 = sin^2 (lap - f_pp).
                        let lap = (sin_dn * (dn - c0) - sin_up * (c0 - up)) * inv_dp2 / s
                            + f_ll / s2;
                        out[3 * idx] = f_pp;
                        out[3 * idx + 1] = t12;
                        out[3 * idx + 2] = s2 * (lap - f_pp);
                    }
                }
            }
        }
    }
}

/// Per-node scalar values aligned with a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub(crate) grid: Arc<SphereGrid>,
    pub(crate) values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_aligned(values.len())?;
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Arc<SphereGrid>, value: f64) -> Self {
        let n = grid.node_count();
        ScalarField {
            grid,
            values: vec![value; n],
        }
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

/// Covariant gradient components in the chart (stride n-1).
#[derive(Debug, Clone)]
pub struct GradientField {
    pub(crate) grid: Arc<SphereGrid>,
    pub(crate) comps: Vec<f64>,
}

impl GradientField {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn component(&self, node: usize, a: usize) -> f64 {
        self.comps[node * self.grid.chart_dim() + a]
    }

    /// |grad f|^2 in the round metric at a node.
    pub fn norm_sq(&self, node: usize) -> f64 {
        match &self.grid.chart {
            Chart::Circle { .. } => {
                let d = self.comps[node];
                d * d
            }
            Chart::LatLon {
                n_lon, sin_colat, ..
            } => {
                let fp = self.comps[2 * node];
                let fl = self.comps[2 * node + 1];
                let s = sin_colat[node / n_lon];
                fp * fp + fl * fl / (s * s)
            }
        }
    }
}

/// Symmetric chart 2-tensor, packed per node as [t11, t12, t22]
/// (the circle only uses t11).
#[derive(Debug, Clone)]
pub struct SymTensorField {
    pub(crate) grid: Arc<SphereGrid>,
    pub(crate) comps: Vec<f64>,
}

impl SymTensorField {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn components(&self, node: usize) -> [f64; 3] {
        [
            self.comps[3 * node],
            self.comps[3 * node + 1],
            self.comps[3 * node + 2],
        ]
    }

    /// Determinant relative to the round metric, det(t) / det(g).
    pub fn det_over_metric(&self, node: usize) -> f64 {
        match &self.grid.chart {
            Chart::Circle { .. } => self.comps[3 * node],
            Chart::LatLon {
                n_lon, sin_colat, ..
            } => {
                let s = sin_colat[node / n_lon];
                let t11 = self.comps[3 * node];
                let t12 = self.comps[3 * node + 1];
                let t22 = self.comps[3 * node + 2];
                (t11 * t22 - t12 * t12) / (s * s)
            }
        }
    }

    /// Smallest eigenvalue in an orthonormal frame of the round metric.
    pub fn min_eigenvalue(&self, node: usize) -> f64 {
        match &self.grid.chart {
            Chart::Circle { .. } => self.comps[3 * node],
            Chart::LatLon {
                n_lon, sin_colat, ..
            } => {
                let s = sin_colat[node / n_lon];
                let a = self.comps[3 * node];
                let b = self.comps[3 * node + 1] / s;
                let c = self.comps[3 * node + 2] / (s * s);
                let tr = a + c;
                let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
                0.5 * (tr - disc)
            }
        }
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_layout_n4() {
        let g = make_grid(2, &[4]).unwrap();
        assert_eq!(g.node_count(), 4);
        for (k, expect) in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
            .iter()
            .enumerate()
        {
            let n = g.node(k);
            assert!((n[0] - expect[0]).abs() < 1e-15);
            assert!((n[1] - expect[1]).abs() < 1e-15);
        }
        for w in g.weights() {
            assert!((w - PI / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_sums() {
        let g = make_grid(2, &[256]).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);

        let g3 = make_grid(3, &[32, 64]).unwrap();
        let total3: f64 = g3.weights().iter().sum();
        assert!((total3 - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn nodes_are_unit() {
        for g in [make_grid(2, &[64]).unwrap(), make_grid(3, &[16, 32]).unwrap()] {
            for i in 0..g.node_count() {
                assert!((norm3(g.node(i)) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            make_grid(4, &[16]),
            Err(GcfError::UnsupportedDimension(4))
        ));
        assert!(matches!(
            make_grid(2, &[2]),
            Err(GcfError::ResolutionTooLow { .. })
        ));
        assert!(matches!(
            make_grid(3, &[16]),
            Err(GcfError::BadResolutionShape { .. })
        ));
        assert!(matches!(
            make_grid(3, &[16, 17]),
            Err(GcfError::OddLongitudeCount(17))
        ));
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        for g in [make_grid(2, &[64]).unwrap(), make_grid(3, &[16, 32]).unwrap()] {
            let f = ScalarField::constant(g.clone(), 3.25);
            let grad = g.differentiate(&f).unwrap();
            let hess = g.hessian(&f).unwrap();
            for i in 0..g.node_count() {
                assert!(grad.norm_sq(i).abs() < 1e-22);
                let t = hess.components(i);
                assert!(t[0].abs() < 1e-11 && t[1].abs() < 1e-11 && t[2].abs() < 1e-11);
            }
        }
    }

    #[test]
    fn circle_derivative_accuracy_and_order() {
        let mut errs = Vec::new();
        for n in [64usize, 128] {
            let g = make_grid(2, &[n]).unwrap();
            let f = ScalarField::new(
                g.clone(),
                (0..n).map(|k| g.theta(k).cos()).collect(),
            )
            .unwrap();
            let grad = g.differentiate(&f).unwrap();
            let err = (0..n)
                .map(|k| (grad.component(k, 0) + g.theta(k).sin()).abs())
                .fold(0.0, f64::max)
                as f64;
            errs.push(err);
        }
        assert!(errs[0] < 1e-5, "err at N=64: {}", errs[0]);
        // 4th-order stencil: halving h divides the error by about 16.
        assert!(errs[0] / errs[1] > 8.0, "ratios {:?}", errs);
    }

    #[test]
    fn sphere_gradient_of_height_function() {
        let g = make_grid(3, &[32, 64]).unwrap();
        let f = ScalarField::new(g.clone(), g.nodes().iter().map(|p| p[2]).collect()).unwrap();
        let grad = g.differentiate(&f).unwrap();
        let mut worst = 0.0f64;
        for i in 0..g.node_count() {
            let z = g.node(i)[2];
            let expect = 1.0 - z * z;
            worst = worst.max((grad.norm_sq(i) - expect).abs());
        }
        assert!(worst < 5e-3, "worst = {worst}");
    }

    #[test]
    fn linear_functions_lie_in_the_kernel() {
        // For f(u) = <u, v>, the covariant Hessian satisfies hess(f) + g*f = 0.
        // The sup norm stays within an O(h^2) envelope; the pole-adjacent
        // rows carry the largest constant, so the clean second-order rate is
        // checked away from them.
        let v = [0.3, -0.5, 0.8];
        let mut sup_errs = Vec::new();
        let mut interior_errs = Vec::new();
        for res in [[16usize, 32], [32, 64]] {
            let g = make_grid(3, &res).unwrap();
            let f = ScalarField::new(
                g.clone(),
                g.nodes().iter().map(|p| dot3(*p, v)).collect(),
            )
            .unwrap();
            let hess = g.hessian(&f).unwrap();
            let mut worst = 0.0f64;
            let mut worst_interior = 0.0f64;
            for i in 0..g.node_count() {
                let t = hess.components(i);
                let (colat, _) = g.colat_lon(i);
                let s2 = colat.sin().powi(2);
                let fv = f.values()[i];
                // orthonormal-frame components of hess + g*f
                let r11 = t[0] + fv;
                let r12 = t[1] / colat.sin();
                let r22 = t[2] / s2 + fv;
                let e = r11.abs().max(r12.abs()).max(r22.abs());
                worst = worst.max(e);
                if colat > 0.7 && colat < PI - 0.7 {
                    worst_interior = worst_interior.max(e);
                }
            }
            let h2 = (PI / res[0] as f64).powi(2);
            assert!(worst < 2.5 * h2, "res {res:?}: sup {worst} vs h^2 {h2}");
            sup_errs.push(worst);
            interior_errs.push(worst_interior);
        }
        assert!(
            interior_errs[0] / interior_errs[1] > 2.5,
            "interior errs {:?}",
            interior_errs
        );
    }

    #[test]
    fn circle_hessian_of_cosine() {
        let g = make_grid(2, &[64]).unwrap();
        let n = g.node_count();
        let f = ScalarField::new(g.clone(), (0..n).map(|k| g.theta(k).cos()).collect()).unwrap();
        let hess = g.hessian(&f).unwrap();
        for k in 0..n {
            // f'' + f = 0 for a degree-one harmonic
            let r = hess.components(k)[0] + f.values()[k];
            assert!(r.abs() < 1e-5);
        }
    }

    #[test]
    fn quadrature_of_cos_squared() {
        let g = make_grid(2, &[256]).unwrap();
        let n = g.node_count();
        let f = ScalarField::new(
            g.clone(),
            (0..n).map(|k| g.theta(k).cos().powi(2)).collect(),
        )
        .unwrap();
        assert!((g.integrate(&f).unwrap() - PI).abs() < 1e-10);
    }

    #[test]
    fn operators_are_linear() {
        let g = make_grid(2, &[64]).unwrap();
        let n = g.node_count();
        let f1: Vec<f64> = (0..n).map(|k| (2.0 * g.theta(k)).cos()).collect();
        let f2: Vec<f64> = (0..n).map(|k| (3.0 * g.theta(k)).sin() + 0.5).collect();
        let (a, b) = (1.7, -0.4);
        let combo: Vec<f64> = f1
            .iter()
            .zip(f2.iter())
            .map(|(x, y)| a * x + b * y)
            .collect();
        let sf = |v: Vec<f64>| ScalarField::new(g.clone(), v).unwrap();
        let d_combo = g.differentiate(&sf(combo)).unwrap();
        let d1 = g.differentiate(&sf(f1)).unwrap();
        let d2 = g.differentiate(&sf(f2)).unwrap();
        for k in 0..n {
            let expect = a * d1.component(k, 0) + b * d2.component(k, 0);
            assert!((d_combo.component(k, 0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn misaligned_field_rejected() {
        let g = make_grid(2, &[64]).unwrap();
        let g2 = make_grid(2, &[32]).unwrap();
        let f = ScalarField::constant(g2, 1.0);
        assert!(matches!(
            g.integrate(&f),
            Err(GcfError::MisalignedField { .. })
        ));
    }
}
