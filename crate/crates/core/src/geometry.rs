//! Monge-gauge surface geometry.
//!
//! A surface is the graph `(x, y, H(x, y))` of a periodic height function over
//! the coordinate rectangle `[0, Lx) x [0, Ly)`. Everything the solvers need is
//! a function of the slopes `p = dH/dx`, `q = dH/dy`:
//!
//! ```text
//! G      = I + grad H (x) grad H          |G| = s = 1 + p^2 + q^2
//! G^-1   = (1/s) [[1 + q^2, -pq], [-pq, 1 + p^2]]
//! G^-1/2 = [[1 - c p^2, -c pq], [-c pq, 1 - c q^2]],   c = 1 / (s + sqrt(s))
//! b      = (1/sqrt|G|) div(sqrt|G| G^-1)
//! ```
//!
//! `G^-1/2` is the symmetric root. The drift `b` makes the Langevin SDE with
//! noise `sqrt(2) G^-1/2 dB` generate the Laplace-Beltrami operator.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::GeometryError;

/// Coordinate pair `(x, y)`.
pub type Point = [f64; 2];

/// Scalar function of the coordinates.
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Gradient `[d/dx, d/dy]` of a scalar function.
pub type GradientFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;
/// Hessian `[xx, xy, yy]` of a scalar function.
pub type HessianFn = Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;

/// Symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// `self * self^T`, which for a symmetric matrix is its square.
    pub fn gram(&self) -> Sym2 {
        Sym2 {
            xx: self.xx * self.xx + self.xy * self.xy,
            xy: self.xx * self.xy + self.xy * self.yy,
            yy: self.xy * self.xy + self.yy * self.yy,
        }
    }

    pub fn scale(&self, k: f64) -> Sym2 {
        Sym2 {
            xx: k * self.xx,
            xy: k * self.xy,
            yy: k * self.yy,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = (half_diff * half_diff + self.xy * self.xy).sqrt();
        [mean - r, mean + r]
    }
}

/// User-supplied height function. The gradient is required for any metric
/// evaluation; the Hessian, when present, gives a closed-form drift.
#[derive(Clone)]
pub struct CustomSurface {
    pub height: ScalarFn,
    pub gradient: Option<GradientFn>,
    pub hessian: Option<HessianFn>,
}

#[derive(Clone)]
pub enum SurfaceKind {
    /// `H = a sin(x) sin(y)`.
    Sinusoidal {
        amplitude: f64,
    },
    /// `H = a sin^2(x) sin^2(y)`, four peaks at `(pi +- pi/2, pi +- pi/2)`.
    FourPeak {
        amplitude: f64,
    },
    Custom(CustomSurface),
}

impl fmt::Debug for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceKind::Sinusoidal { amplitude } => f
                .debug_struct("Sinusoidal")
                .field("amplitude", amplitude)
                .finish(),
            SurfaceKind::FourPeak { amplitude } => f
                .debug_struct("FourPeak")
                .field("amplitude", amplitude)
                .finish(),
            SurfaceKind::Custom(c) => f
                .debug_struct("Custom")
                .field("gradient", &c.gradient.is_some())
                .field("hessian", &c.hessian.is_some())
                .finish(),
        }
    }
}

/// A periodic Monge patch over `[0, Lx) x [0, Ly)`.
#[derive(Clone, Debug)]
pub struct HeightSurface {
    kind: SurfaceKind,
    lx: f64,
    ly: f64,
}

/// Geometric quantities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub p: f64,
    pub q: f64,
    /// `|G| = 1 + p^2 + q^2`.
    pub s: f64,
    pub g_inv: Sym2,
    pub g_inv_sqrt: Sym2,
    pub sqrt_det: f64,
    pub drift: [f64; 2],
}

impl MetricSample {
    /// Metric quantities from the slopes alone; the drift is left at zero.
    pub fn from_slopes(p: f64, q: f64) -> Self {
        let s = 1.0 + p * p + q * q;
        let sqrt_det = s.sqrt();
        let g_inv = Sym2 {
            xx: (1.0 + q * q) / s,
            xy: -p * q / s,
            yy: (1.0 + p * p) / s,
        };
        let c = 1.0 / (s + sqrt_det);
        let g_inv_sqrt = Sym2 {
            xx: 1.0 - c * p * p,
            xy: -c * p * q,
            yy: 1.0 - c * q * q,
        };
        MetricSample {
            p,
            q,
            s,
            g_inv,
            g_inv_sqrt,
            sqrt_det,
            drift: [0.0; 2],
        }
    }

    /// The metric `G` itself.
    pub fn g(&self) -> Sym2 {
        Sym2 {
            xx: 1.0 + self.p * self.p,
            xy: self.p * self.q,
            yy: 1.0 + self.q * self.q,
        }
    }
}

/// Drift from slopes and Hessian:
/// `b = -(grad H / s) (lap H - grad H . Hess grad H / s)`.
fn drift_from_hessian(p: f64, q: f64, hess: [f64; 3]) -> [f64; 2] {
    let [hxx, hxy, hyy] = hess;
    let s = 1.0 + p * p + q * q;
    let k = (hxx + hyy) - (p * p * hxx + 2.0 * p * q * hxy + q * q * hyy) / s;
    [-p / s * k, -q / s * k]
}

impl HeightSurface {
    pub fn sinusoidal(amplitude: f64) -> Self {
        HeightSurface {
            kind: SurfaceKind::Sinusoidal { amplitude },
            lx: TAU,
            ly: TAU,
        }
    }

    pub fn four_peak(amplitude: f64) -> Self {
        HeightSurface {
            kind: SurfaceKind::FourPeak { amplitude },
            lx: TAU,
            ly: TAU,
        }
    }

    /// The flat square `[0, 2pi)^2`.
    pub fn flat() -> Self {
        Self::sinusoidal(0.0)
    }

    pub fn custom(lx: f64, ly: f64, surface: CustomSurface) -> Result<Self, GeometryError> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GeometryError::InvalidDomain { lx, ly });
        }
        Ok(HeightSurface {
            kind: SurfaceKind::Custom(surface),
            lx,
            ly,
        })
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    pub fn lengths(&self) -> [f64; 2] {
        [self.lx, self.ly]
    }

    /// Reduce a point into `[0, Lx) x [0, Ly)`.
    pub fn wrap(&self, point: Point) -> Point {
        [wrap_coord(point[0], self.lx), wrap_coord(point[1], self.ly)]
    }

    pub fn height(&self, point: Point) -> f64 {
        let [x, y] = self.wrap(point);
        match &self.kind {
            SurfaceKind::Sinusoidal { amplitude } => amplitude * x.sin() * y.sin(),
            SurfaceKind::FourPeak { amplitude } => {
                let (sx, sy) = (x.sin(), y.sin());
                amplitude * sx * sx * sy * sy
            }
            SurfaceKind::Custom(c) => (c.height)(x, y),
        }
    }

    /// Slopes `(p, q) = grad H`.
    pub fn slopes(&self, point: Point) -> Result<[f64; 2], GeometryError> {
        let [x, y] = self.wrap(point);
        match &self.kind {
            SurfaceKind::Sinusoidal { amplitude: a } => {
                let (sx, cx) = x.sin_cos();
                let (sy, cy) = y.sin_cos();
                Ok([a * cx * sy, a * sx * cy])
            }
            SurfaceKind::FourPeak { amplitude: a } => {
                let (sx, cx) = x.sin_cos();
                let (sy, cy) = y.sin_cos();
                Ok([2.0 * a * cx * sx * sy * sy, 2.0 * a * sx * sx * cy * sy])
            }
            SurfaceKind::Custom(c) => match &c.gradient {
                Some(g) => Ok(g(x, y)),
                None => Err(GeometryError::MissingGradient),
            },
        }
    }

    /// Full metric sample including the drift.
    pub fn metric_at(&self, point: Point) -> Result<MetricSample, GeometryError> {
        let [x, y] = self.wrap(point);
        match &self.kind {
            SurfaceKind::Sinusoidal { amplitude } => Ok(sinusoidal_sample(*amplitude, x, y)),
            SurfaceKind::FourPeak { amplitude } => Ok(four_peak_sample(*amplitude, x, y)),
            SurfaceKind::Custom(_) => {
                let [p, q] = self.slopes([x, y])?;
                let mut sample = MetricSample::from_slopes(p, q);
                sample.drift = self.drift_b_at([x, y])?;
                Ok(sample)
            }
        }
    }

    /// Metric quantities without the drift.
    pub fn metric_only_at(&self, point: Point) -> Result<MetricSample, GeometryError> {
        let [p, q] = self.slopes(point)?;
        Ok(MetricSample::from_slopes(p, q))
    }

    /// Drift `b = (1/sqrt|G|) div(sqrt|G| G^-1)`.
    pub fn drift_b_at(&self, point: Point) -> Result<[f64; 2], GeometryError> {
        let [x, y] = self.wrap(point);
        match &self.kind {
            SurfaceKind::Sinusoidal { amplitude } => Ok(sinusoidal_sample(*amplitude, x, y).drift),
            SurfaceKind::FourPeak { amplitude } => Ok(four_peak_sample(*amplitude, x, y).drift),
            SurfaceKind::Custom(c) => {
                let gradient = c.gradient.as_ref().ok_or(GeometryError::MissingGradient)?;
                match &c.hessian {
                    Some(h) => {
                        let [p, q] = gradient(x, y);
                        Ok(drift_from_hessian(p, q, h(x, y)))
                    }
                    None => {
                        let step = 1e-5 * self.lx.min(self.ly);
                        Ok(drift_by_differences(gradient.as_ref(), x, y, step))
                    }
                }
            }
        }
    }
}

fn sinusoidal_sample(a: f64, x: f64, y: f64) -> MetricSample {
    let (sx, cx) = x.sin_cos();
    let (sy, cy) = y.sin_cos();
    let mut m = MetricSample::from_slopes(a * cx * sy, a * sx * cy);
    let common = a * a * (2.0 + a * a * (cx * cx + cy * cy)) / (m.s * m.s);
    m.drift = [common * sx * cx * sy * sy, common * sy * cy * sx * sx];
    m
}

fn four_peak_sample(a: f64, x: f64, y: f64) -> MetricSample {
    let (sx, cx) = x.sin_cos();
    let (sy, cy) = y.sin_cos();
    let p = 2.0 * a * cx * sx * sy * sy;
    let q = 2.0 * a * sx * sx * cy * sy;
    // d2/dx2 sin^2 x = 2 cos 2x
    let hxx = 2.0 * a * (cx * cx - sx * sx) * sy * sy;
    let hyy = 2.0 * a * sx * sx * (cy * cy - sy * sy);
    let hxy = 4.0 * a * sx * cx * sy * cy;
    let mut m = MetricSample::from_slopes(p, q);
    m.drift = drift_from_hessian(p, q, [hxx, hxy, hyy]);
    m
}

/// Fourth-order central differences of the flux columns `sqrt|G| G^-1`.
pub fn drift_by_differences(
    gradient: &dyn Fn(f64, f64) -> [f64; 2],
    x: f64,
    y: f64,
    h: f64,
) -> [f64; 2] {
    let flux = |x: f64, y: f64| {
        let [p, q] = gradient(x, y);
        let m = MetricSample::from_slopes(p, q);
        m.g_inv.scale(m.sqrt_det)
    };
    let d4 = |f: &dyn Fn(f64) -> Sym2| {
        let (a, b, c, d) = (f(2.0 * h), f(h), f(-h), f(-2.0 * h));
        let comb = |sel: fn(&Sym2) -> f64| {
            (-sel(&a) + 8.0 * sel(&b) - 8.0 * sel(&c) + sel(&d)) / (12.0 * h)
        };
        Sym2 {
            xx: comb(|m| m.xx),
            xy: comb(|m| m.xy),
            yy: comb(|m| m.yy),
        }
    };
    let dx = d4(&|t| flux(x + t, y));
    let dy = d4(&|t| flux(x, y + t));
    let [p, q] = gradient(x, y);
    let sqrt_det = (1.0 + p * p + q * q).sqrt();
    // column k: d/dx F[0][k] + d/dy F[1][k]
    [(dx.xx + dy.xy) / sqrt_det, (dx.xy + dy.yy) / sqrt_det]
}

pub(crate) fn wrap_coord(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    // rem_euclid can round up to exactly `l` for tiny negative inputs
    if r >= l {
        0.0
    } else {
        r
    }
}

/// Cell-centred uniform mesh on a periodic rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        Mesh {
            nx,
            ny,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index, `x` fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn center(&self, i: usize, j: usize) -> Point {
        [(i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy]
    }

    /// `(i, j)` of the cell containing a wrapped point.
    pub fn locate(&self, point: Point) -> (usize, usize) {
        let i = ((point[0] / self.dx) as usize).min(self.nx - 1);
        let j = ((point[1] / self.dy) as usize).min(self.ny - 1);
        (i, j)
    }
}

/// Geometry sampled at cell centres.
#[derive(Debug, Clone)]
pub struct MetricGrid {
    surface: HeightSurface,
    mesh: Mesh,
    samples: Vec<MetricSample>,
    surface_area: f64,
}

impl MetricGrid {
    pub fn surface(&self) -> &HeightSurface {
        &self.surface
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn nx(&self) -> usize {
        self.mesh.nx
    }

    pub fn ny(&self) -> usize {
        self.mesh.ny
    }

    pub fn samples(&self) -> &[MetricSample] {
        &self.samples
    }

    pub fn sample(&self, i: usize, j: usize) -> &MetricSample {
        &self.samples[self.mesh.idx(i, j)]
    }

    /// `A_S = sum sqrt|G| dx dy`.
    pub fn surface_area(&self) -> f64 {
        self.surface_area
    }

    pub fn sqrt_det(&self) -> Vec<f64> {
        self.samples.iter().map(|m| m.sqrt_det).collect()
    }

    pub fn cell_centers(&self) -> Vec<Point> {
        let m = &self.mesh;
        (0..m.ny)
            .flat_map(|j| (0..m.nx).map(move |i| m.center(i, j)))
            .collect()
    }
}

/// Sample the surface geometry at every cell centre.
pub fn precompute_grid(
    surface: &HeightSurface,
    nx: usize,
    ny: usize,
) -> Result<MetricGrid, GeometryError> {
    if nx < 2 || ny < 2 {
        return Err(GeometryError::GridTooSmall { nx, ny });
    }
    let [lx, ly] = surface.lengths();
    let mesh = Mesh::new(nx, ny, lx, ly);
    let samples = (0..mesh.len())
        .into_par_iter()
        .map(|k| surface.metric_at(mesh.center(k % nx, k / nx)))
        .collect::<Result<Vec<_>, _>>()?;
    let surface_area = samples.iter().map(|m| m.sqrt_det).sum::<f64>() * mesh.cell_area();
    Ok(MetricGrid {
        surface: surface.clone(),
        mesh,
        samples,
        surface_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sinusoidal_flat_spot() {
        let m = HeightSurface::sinusoidal(3.0)
            .metric_at([FRAC_PI_2, FRAC_PI_2])
            .unwrap();
        assert!(m.p.abs() < 1e-15 && m.q.abs() < 1e-15);
        assert!(close(m.s, 1.0, 1e-15));
        assert!(close(m.g_inv.xx, 1.0, 1e-15) && close(m.g_inv.yy, 1.0, 1e-15));
        assert!(close(m.g_inv_sqrt.xx, 1.0, 1e-15) && m.g_inv_sqrt.xy.abs() < 1e-15);
    }

    #[test]
    fn sinusoidal_steep_spot() {
        let m = HeightSurface::sinusoidal(3.0)
            .metric_at([0.0, FRAC_PI_2])
            .unwrap();
        assert!(close(m.p, 3.0, 1e-15) && m.q.abs() < 1e-15);
        assert!(close(m.s, 10.0, 1e-14));
        assert!(close(m.g_inv.xx, 0.1, 1e-15) && close(m.g_inv.yy, 1.0, 1e-15));
        assert!(close(m.g_inv_sqrt.xx, 1.0 / 10f64.sqrt(), 1e-15));
        assert!(close(m.g_inv_sqrt.yy, 1.0, 1e-15));
        let g = m.g_inv_sqrt.gram();
        assert!(close(g.xx, m.g_inv.xx, 1e-12) && close(g.yy, m.g_inv.yy, 1e-12));
    }

    #[test]
    fn four_peak_saddle_is_flat() {
        let m = HeightSurface::four_peak(4.0)
            .metric_at([FRAC_PI_2, FRAC_PI_2])
            .unwrap();
        assert!(m.p.abs() < 1e-15 && m.q.abs() < 1e-15);
        assert!(close(m.s, 1.0, 1e-15));
    }

    #[test]
    fn drift_vanishes_at_symmetric_points() {
        let b = HeightSurface::sinusoidal(3.0)
            .drift_b_at([FRAC_PI_2, FRAC_PI_2])
            .unwrap();
        assert!(b[0].abs() < 1e-13 && b[1].abs() < 1e-13);
        let b = HeightSurface::four_peak(4.0).drift_b_at([PI, PI]).unwrap();
        assert!(b[0].abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn custom_without_gradient_is_rejected() {
        let s = HeightSurface::custom(
            1.0,
            1.0,
            CustomSurface {
                height: Arc::new(|_, _| 0.0),
                gradient: None,
                hessian: None,
            },
        )
        .unwrap();
        assert!(matches!(
            s.metric_at([0.1, 0.2]),
            Err(GeometryError::MissingGradient)
        ));
        assert!(HeightSurface::custom(
            0.0,
            1.0,
            CustomSurface {
                height: Arc::new(|_, _| 0.0),
                gradient: None,
                hessian: None
            }
        )
        .is_err());
    }

    #[test]
    fn grid_needs_two_cells_per_axis() {
        assert!(matches!(
            precompute_grid(&HeightSurface::flat(), 1, 8),
            Err(GeometryError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn flat_grid_area_is_exact() {
        let g = precompute_grid(&HeightSurface::flat(), 7, 5).unwrap();
        assert!(close(g.surface_area(), 4.0 * PI * PI, 1e-12));
    }

    #[test]
    fn wrap_stays_in_range() {
        assert_eq!(wrap_coord(-1e-18, TAU), 0.0);
        assert!(wrap_coord(TAU, TAU) < TAU);
        assert!(close(wrap_coord(-0.5, 2.0), 1.5, 1e-15));
    }

    #[test]
    fn locate_cell() {
        let m = Mesh::new(4, 4, 4.0, 4.0);
        assert_eq!(m.locate([0.5, 3.99]), (0, 3));
        assert_eq!(m.locate([3.9999999, 0.0]), (3, 0));
    }
}
