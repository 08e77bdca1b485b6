//! Off-node evaluation of grid fields.
//!
//! Circle fields are evaluated through their trigonometric interpolant, which
//! keeps resampled quantities differentiable to the accuracy of the samples
//! themselves. Sphere fields use bilinear interpolation in the chart with the
//! half-turn pole rule.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::grid::{Chart, ScalarField, SphereGrid};

/// Trigonometric interpolant of uniform periodic samples:
/// p(x) = a0 + sum a_m cos(mx) + b_m sin(mx).
#[derive(Debug, Clone)]
pub struct TrigSeries {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigSeries {
    pub fn fit(values: &[f64]) -> TrigSeries {
        let n = values.len();
        let m_max = n / 2;
        let mut a = vec![0.0; m_max + 1];
        let mut b = vec![0.0; m_max + 1];
        let step = 2.0 * PI / n as f64;
        for (k, &fk) in values.iter().enumerate() {
            let (s1, c1) = (step * k as f64).sin_cos();
            // rotate (c, s) through multiples of theta_k
            let (mut c, mut s) = (1.0, 0.0);
            for m in 0..=m_max {
                a[m] += fk * c;
                b[m] += fk * s;
                let cn = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = cn;
            }
        }
        let scale = 2.0 / n as f64;
        for m in 0..=m_max {
            a[m] *= scale;
            b[m] *= scale;
        }
        a[0] *= 0.5;
        if n % 2 == 0 {
            // Nyquist mode: cosine only, half weight.
            a[m_max] *= 0.5;
            b[m_max] = 0.0;
        }
        TrigSeries { a, b }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (s1, c1) = x.sin_cos();
        let (mut c, mut s) = (1.0, 0.0);
        let mut acc = 0.0;
        for m in 0..self.a.len() {
            acc += self.a[m] * c + self.b[m] * s;
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
        acc
    }

    /// Value together with first and second derivatives.
    pub fn eval_derivs(&self, x: f64) -> (f64, f64, f64) {
        let (s1, c1) = x.sin_cos();
        let (mut c, mut s) = (1.0, 0.0);
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for m in 0..self.a.len() {
            let mf = m as f64;
            p += self.a[m] * c + self.b[m] * s;
            dp += mf * (self.b[m] * c - self.a[m] * s);
            ddp -= mf * mf * (self.a[m] * c + self.b[m] * s);
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
        (p, dp, ddp)
    }
}

/// Bilinear chart interpolation on the staggered lat-lon grid.
#[derive(Debug)]
pub struct BilinearChart<'a> {
    n_colat: usize,
    n_lon: usize,
    d_colat: f64,
    d_lon: f64,
    values: &'a [f64],
}

impl<'a> BilinearChart<'a> {
    pub fn new(grid: &SphereGrid, values: &'a [f64]) -> BilinearChart<'a> {
        match &grid.chart {
            Chart::LatLon {
                n_colat,
                n_lon,
                d_colat,
                d_lon,
                ..
            } => BilinearChart {
                n_colat: *n_colat,
                n_lon: *n_lon,
                d_colat: *d_colat,
                d_lon: *d_lon,
                values,
            },
            _ => panic!("BilinearChart requires a lat-lon grid"),
        }
    }

    fn row_value(&self, row: isize, lon: f64) -> f64 {
        // Rows beyond the staggered range reflect across the pole with a
        // half-turn in longitude.
        let (r, lon) = if row < 0 {
            (0usize, lon + PI)
        } else if row as usize >= self.n_colat {
            (self.n_colat - 1, lon + PI)
        } else {
            (row as usize, lon)
        };
        let t = (lon / self.d_lon).rem_euclid(self.n_lon as f64);
        let j0 = t.floor() as usize % self.n_lon;
        let frac = t - t.floor();
        let j1 = (j0 + 1) % self.n_lon;
        let base = r * self.n_lon;
        self.values[base + j0] * (1.0 - frac) + self.values[base + j1] * frac
    }

    pub fn eval(&self, colat: f64, lon: f64) -> f64 {
        let t = colat / self.d_colat - 0.5;
        let i0 = t.floor() as isize;
        let frac = t - t.floor();
        let v0 = self.row_value(i0, lon);
        let v1 = self.row_value(i0 + 1, lon);
        v0 * (1.0 - frac) + v1 * frac
    }

    /// Evaluate at a unit direction.
    pub fn eval_dir(&self, dir: [f64; 3]) -> f64 {
        let colat = dir[2].clamp(-1.0, 1.0).acos();
        let lon = dir[1].atan2(dir[0]).rem_euclid(2.0 * PI);
        self.eval(colat, lon)
    }
}

/// 4-point Lagrange interpolation per chart direction (exact for cubics).
/// Near-pole envelope output is differentiated with metric weights that
/// amplify longitudinal structure by 1/sin^2; bilinear interpolation bias is
/// too coarse there, cubic reproduction is sufficient.
#[derive(Debug)]
pub struct CubicChart<'a> {
    n_colat: usize,
    n_lon: usize,
    d_colat: f64,
    d_lon: f64,
    values: &'a [f64],
}

fn lagrange_weights(x: f64) -> [f64; 4] {
    [
        -x * (x - 1.0) * (x - 2.0) / 6.0,
        (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
        -(x + 1.0) * x * (x - 2.0) / 2.0,
        (x + 1.0) * x * (x - 1.0) / 6.0,
    ]
}

impl<'a> CubicChart<'a> {
    pub fn new(grid: &SphereGrid, values: &'a [f64]) -> CubicChart<'a> {
        match &grid.chart {
            Chart::LatLon {
                n_colat,
                n_lon,
                d_colat,
                d_lon,
                ..
            } => CubicChart {
                n_colat: *n_colat,
                n_lon: *n_lon,
                d_colat: *d_colat,
                d_lon: *d_lon,
                values,
            },
            _ => panic!("CubicChart requires a lat-lon grid"),
        }
    }

    fn row_eval(&self, row: isize, lon: f64) -> f64 {
        // Reflect rows beyond the poles: colat -x maps to (x, lon + pi).
        let (r, lon) = if row < 0 {
            ((-1 - row) as usize, lon + PI)
        } else if row as usize >= self.n_colat {
            (2 * self.n_colat - 1 - row as usize, lon + PI)
        } else {
            (row as usize, lon)
        };
        let r = r.min(self.n_colat - 1);
        let t = (lon / self.d_lon).rem_euclid(self.n_lon as f64);
        let j1 = t.floor() as usize % self.n_lon;
        let w = lagrange_weights(t - t.floor());
        let base = r * self.n_lon;
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let j = (j1 + self.n_lon + k - 1) % self.n_lon;
            acc += wk * self.values[base + j];
        }
        acc
    }

    pub fn eval(&self, colat: f64, lon: f64) -> f64 {
        let t = colat / self.d_colat - 0.5;
        let i1 = t.floor() as isize;
        let w = lagrange_weights(t - t.floor());
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * self.row_eval(i1 + k as isize - 1, lon);
        }
        acc
    }

    pub fn eval_dir(&self, dir: [f64; 3]) -> f64 {
        let colat = dir[2].clamp(-1.0, 1.0).acos();
        let lon = dir[1].atan2(dir[0]).rem_euclid(2.0 * PI);
        self.eval(colat, lon)
    }
}

/// Evaluate a scalar field at an arbitrary unit direction.
pub enum Interpolant<'a> {
    Circle(TrigSeries),
    Sphere(CubicChart<'a>),
}

pub fn interpolant<'a>(grid: &'a Arc<SphereGrid>, field: &'a ScalarField) -> Interpolant<'a> {
    match grid.dim() {
        2 => Interpolant::Circle(TrigSeries::fit(field.values())),
        _ => Interpolant::Sphere(CubicChart::new(grid, field.values())),
    }
}

impl Interpolant<'_> {
    pub fn eval_dir(&self, dir: [f64; 3]) -> f64 {
        match self {
            Interpolant::Circle(ts) => ts.eval(dir[1].atan2(dir[0])),
            Interpolant::Sphere(bc) => bc.eval_dir(dir),
        }
    }
}

/// Golden-section minimization of a unimodal function on [a, b].
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx)
}
