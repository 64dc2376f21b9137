//! Cones over maps toward an ideal point: pointwise Jacobian decay, the integral inequality
//! with constant `1/(n-1)`, and the cone in a cusp, where it commutes with the lattice.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::fd::{Stencil, FD_STEP};
use crate::hypcore::{
    half_space_to_ball, hyp_distance, mobius_add, BallPoint, CuspModel, CuspPoint, IdealPoint,
};
use crate::rng::stream_rng;

/// Map from a box in `R^{n-1}` into the ball.
pub trait BaseMap: Send + Sync {
    /// Dimension of the target, `n`.
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> Result<BallPoint>;
}

/// A closure as a base map.
pub struct FnMap<F> {
    dim: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&DVector<f64>) -> Result<BallPoint> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> BaseMap for FnMap<F>
where
    F: Fn(&DVector<f64>) -> Result<BallPoint> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> Result<BallPoint> {
        (self.f)(x)
    }
}

/// Isometric parametrization `x -> (x, height)` of a horosphere centered at `e_n`, through the
/// half-space model.
pub struct HorospherePatch {
    pub dim: usize,
    pub height: f64,
}

impl BaseMap for HorospherePatch {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> Result<BallPoint> {
        // (x, z) has metric |dx|^2 / z^2, so scale to keep the parametrization isometric
        half_space_to_ball(&(x * self.height), self.height)
    }
}

/// Reparametrization of the cone coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConeParam {
    /// Distance `tan(s pi / 2 eps)` for `s in [0, eps)`.
    Tangent { eps: f64 },
    /// Distance `s`.
    UnitSpeed,
}

/// A base map, the ideal point coned toward and the cone parametrization.
#[derive(Clone)]
pub struct ConeChart {
    pub base: Arc<dyn BaseMap>,
    pub target: IdealPoint,
    pub param: ConeParam,
}

impl ConeChart {
    pub fn new(base: Arc<dyn BaseMap>, target: IdealPoint, param: ConeParam) -> Result<Self> {
        if target.dim() != base.dim() {
            return Err(LabError::DimensionMismatch {
                expected: base.dim(),
                got: target.dim(),
            });
        }
        if let ConeParam::Tangent { eps } = param {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(LabError::InvalidInput(format!("cone depth {eps}")));
            }
        }
        Ok(Self {
            base,
            target,
            param,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Geodesic distance travelled at parameter `s`.
    pub fn distance_at(&self, s: f64) -> Result<f64> {
        match self.param {
            ConeParam::UnitSpeed => Ok(s),
            ConeParam::Tangent { eps } => {
                if s >= eps {
                    return Err(LabError::NearBoundary { norm: 1.0 });
                }
                let d = (s * FRAC_PI_2 / eps).tan();
                if !d.is_finite() || d > 40.0 {
                    return Err(LabError::NearBoundary { norm: 1.0 });
                }
                Ok(d)
            }
        }
    }

    /// Discrete Lipschitz constant of the base map over axis-neighbouring cells of `region`.
    pub fn base_lipschitz(&self, region: &MeshRegion) -> Result<f64> {
        let k = self.dim() - 1;
        let (centers, _) = region.centers(k);
        let h = (region.hi - region.lo) / region.cells as f64;
        let images = centers
            .iter()
            .map(|x| self.base.eval(x))
            .collect::<Result<Vec<_>>>()?;
        let mut lip: f64 = 0.0;
        for (idx, p) in images.iter().enumerate() {
            let mut stride = 1;
            for _ in 0..k {
                let i = (idx / stride) % region.cells;
                if i + 1 < region.cells {
                    lip = lip.max(hyp_distance(p, &images[idx + stride]) / h);
                }
                stride *= region.cells;
            }
        }
        Ok(lip)
    }
}

/// Point at signed distance `d` along the geodesic through `x` toward `theta`.
fn flow(x: &BallPoint, theta: &IdealPoint, d: f64) -> Result<BallPoint> {
    let mut local = mobius_add(&(-x.coords()), theta.dir());
    local /= local.norm();
    let p = BallPoint::new(mobius_add(x.coords(), &(local * (0.5 * d).tanh())))?;
    p.guard()?;
    Ok(p)
}

/// `C(x, s)`: the point at the reparametrized distance from `phi(x)` toward the target.
pub fn cone_map(chart: &ConeChart, x: &DVector<f64>, s: f64) -> Result<BallPoint> {
    if s < 0.0 || !s.is_finite() {
        return Err(LabError::InvalidInput(format!("cone parameter {s}")));
    }
    let d = chart.distance_at(s)?;
    flow(&chart.base.eval(x)?, &chart.target, d)
}

/// Unit-speed cone with negative parameters allowed, for difference stencils at `s = 0`.
fn cone_signed(chart: &ConeChart, x: &DVector<f64>, d: f64) -> Result<BallPoint> {
    flow(&chart.base.eval(x)?, &chart.target, d)
}

fn inner(p: &BallPoint, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let lam = p.conformal_factor();
    lam * lam * a.dot(b)
}

/// Chart derivative of `x -> C(x, d)` by Richardson differences; columns per domain axis.
fn domain_derivative(chart: &ConeChart, x: &DVector<f64>, d: f64) -> Result<DMatrix<f64>> {
    let st = Stencil::new(x.clone(), FD_STEP);
    let vals = st
        .points()
        .iter()
        .map(|q| cone_signed(chart, q, d).map(|p| p.coords().iter().cloned().collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let cols = st.derivative(&vals);
    let n = chart.dim();
    Ok(DMatrix::from_fn(n, cols.len(), |i, k| cols[k][i]))
}

/// `dC/ds` in ball coordinates (unit speed), Richardson-extrapolated.
fn s_derivative(chart: &ConeChart, x: &DVector<f64>, d: f64) -> Result<DVector<f64>> {
    let base = chart.base.eval(x)?;
    let h = FD_STEP;
    let at = |t: f64| flow(&base, &chart.target, t).map(|p| p.coords().clone());
    let full = (at(d + h)? - at(d - h)?) / (2.0 * h);
    let half = (at(d + 0.5 * h)? - at(d - 0.5 * h)?) / h;
    Ok((half * 4.0 - full) / 3.0)
}

fn gram(p: &BallPoint, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let k = cols.len();
    DMatrix::from_fn(k, k, |i, j| inner(p, &cols[i], &cols[j]))
}

/// `sqrt(det <dC(e_i), dC(e_j)>)` on the frame `(e_1, ..., e_{n-1}, d/ds)`.
fn cone_jacobian(chart: &ConeChart, x: &DVector<f64>, d: f64) -> Result<f64> {
    let p = cone_signed(chart, x, d)?;
    let dx = domain_derivative(chart, x, d)?;
    let mut cols: Vec<DVector<f64>> = dx.column_iter().map(|c| c.into_owned()).collect();
    cols.push(s_derivative(chart, x, d)?);
    Ok(gram(&p, &cols).determinant().max(0.0).sqrt())
}

/// `sqrt(det <dphi(e_i), dphi(e_j)>)`.
fn base_jacobian(chart: &ConeChart, x: &DVector<f64>) -> Result<f64> {
    let p = chart.base.eval(x)?;
    let dx = domain_derivative(chart, x, 0.0)?;
    let cols: Vec<DVector<f64>> = dx.column_iter().map(|c| c.into_owned()).collect();
    Ok(gram(&p, &cols).determinant().max(0.0).sqrt())
}

/// One decay measurement at `(x, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecaySample {
    pub x: Vec<f64>,
    pub s: f64,
    /// `|Jac C(x, s)| / |Jac phi(x)|`.
    pub ratio: f64,
    /// `e^{-(n-1) s}`.
    pub bound: f64,
    /// Worst `|pi dC(V_i)| / (e^{-s} |pi dphi(v_i)|)` over the frame.
    pub contraction: f64,
    /// Hyperbolic length of `dC/ds`.
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub samples: Vec<DecaySample>,
    /// Samples skipped because `dphi` is not injective.
    pub degenerate: usize,
}

impl DecayReport {
    pub fn max_ratio_over_bound(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.ratio / s.bound)
            .fold(0.0, f64::max)
    }

    pub fn max_contraction(&self) -> f64 {
        self.samples.iter().map(|s| s.contraction).fold(0.0, f64::max)
    }

    pub fn max_speed_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.speed - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, slack: f64) -> bool {
        self.max_ratio_over_bound() <= 1.0 + slack && self.max_contraction() <= 1.0 + slack
    }

    /// Rows `s,ratio,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,ratio,bound\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.12e},{:.12e},{:.12e}", s.s, s.ratio, s.bound);
        }
        out
    }
}

fn decay_at(chart: &ConeChart, x: &DVector<f64>, s: f64) -> Result<DecaySample> {
    if chart.param != ConeParam::UnitSpeed {
        return Err(LabError::InvalidInput("decay is measured in the unit-speed chart".into()));
    }
    let n = chart.dim();
    let p0 = chart.base.eval(x)?;
    let d0 = domain_derivative(chart, x, 0.0)?;
    // frame v_i with dphi(v_i) orthonormal: QR of the metric-scaled image
    let scaled = &d0 * p0.conformal_factor();
    let qr = scaled.clone().qr();
    let r = qr.r();
    let diag_min = (0..n - 1).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    let diag_max = (0..n - 1).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(diag_min > 1e-8 * diag_max.max(1e-300)) {
        return Err(LabError::DegenerateFrame);
    }
    let r_inv = r.clone().try_inverse().ok_or(LabError::DegenerateFrame)?;
    let jac_phi = (0..n - 1).map(|i| r[(i, i)].abs()).product::<f64>();
    let p = cone_signed(chart, x, s)?;
    let ds = s_derivative(chart, x, s)?;
    let speed = inner(&p, &ds, &ds).sqrt();
    let u = &ds / speed;
    let u0 = {
        let v = s_derivative(chart, x, 0.0)?;
        let norm = inner(&p0, &v, &v).sqrt();
        v / norm
    };
    let dx = domain_derivative(chart, x, s)?;
    let mut contraction: f64 = 0.0;
    for i in 0..n - 1 {
        let v = r_inv.column(i).into_owned();
        let w = &dx * &v;
        let w0 = &d0 * &v;
        let perp = &w - &u * inner(&p, &w, &u);
        let perp0 = &w0 - &u0 * inner(&p0, &w0, &u0);
        let num = inner(&p, &perp, &perp).sqrt();
        let den = (-s).exp() * inner(&p0, &perp0, &perp0).sqrt();
        if den > 0.0 {
            contraction = contraction.max(num / den);
        }
    }
    let ratio = cone_jacobian(chart, x, s)? / jac_phi;
    Ok(DecaySample {
        x: x.iter().cloned().collect(),
        s,
        ratio,
        bound: (-((n - 1) as f64) * s).exp(),
        contraction,
        speed,
    })
}

/// Pointwise `|Jac C(x, s)| <= e^{-(n-1)s} |Jac phi(x)|` and the `e^{-s}` contraction of
/// components orthogonal to the cone lines.
pub fn cone_jacobian_decay_check(chart: &ConeChart, samples: &[(DVector<f64>, f64)]) -> Result<DecayReport> {
    let results: Vec<Result<Option<DecaySample>>> = samples
        .par_iter()
        .map(|(x, s)| match decay_at(chart, x, *s) {
            Ok(d) => Ok(Some(d)),
            Err(LabError::DegenerateFrame) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Vec::with_capacity(samples.len());
    let mut degenerate = 0;
    for r in results {
        match r? {
            Some(d) => out.push(d),
            None => degenerate += 1,
        }
    }
    Ok(DecayReport {
        samples: out,
        degenerate,
    })
}

/// `count` points uniform in `[lo, hi]^{n-1}`, each paired with every `s` in `levels`.
pub fn decay_samples(
    dim: usize,
    lo: f64,
    hi: f64,
    count: usize,
    levels: &[f64],
    seed: u64,
) -> Vec<(DVector<f64>, f64)> {
    let mut rng = stream_rng(seed, 0x636f_6e65);
    let mut out = Vec::with_capacity(count * levels.len());
    for _ in 0..count {
        let x = DVector::from_fn(dim - 1, |_, _| lo + (hi - lo) * rng.random::<f64>());
        for &s in levels {
            out.push((x.clone(), s));
        }
    }
    out
}

/// Square region `[lo, hi]^{n-1}` of the base domain with an `m^{n-1}` midpoint mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshRegion {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl MeshRegion {
    fn centers(&self, k: usize) -> (Vec<DVector<f64>>, f64) {
        let h = (self.hi - self.lo) / self.cells as f64;
        let total = self.cells.pow(k as u32);
        let pts = (0..total)
            .map(|mut idx| {
                DVector::from_fn(k, |_, _| {
                    let i = idx % self.cells;
                    idx /= self.cells;
                    self.lo + (i as f64 + 0.5) * h
                })
            })
            .collect();
        (pts, h.powi(k as i32))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeIntegral {
    /// `int_{U x [0, inf)} |Jac C|`.
    pub lhs: f64,
    /// `(1/(n-1)) int_U |Jac phi|`.
    pub rhs: f64,
}

impl ConeIntegral {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + slack) + 1e-12
    }
}

/// Simpson nodes and weights on `[0, s_max]`.
fn simpson(s_max: f64, intervals: usize) -> Vec<(f64, f64)> {
    let m = intervals + intervals % 2;
    let h = s_max / m as f64;
    (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// Both sides of `int_{U x [0, inf)} |Jac C| <= (1/(n-1)) int_U |Jac phi|` by mesh quadrature
/// in `x` and Simpson's rule in the unit-speed cone coordinate up to depth `24/(n-1)`.
pub fn cone_integral_inequality(chart: &ConeChart, region: &MeshRegion) -> Result<ConeIntegral> {
    let n = chart.dim();
    let k = n - 1;
    let (centers, cell) = region.centers(k);
    let s_nodes = simpson(24.0 / k as f64, 240);
    let parts: Vec<Result<(f64, f64)>> = centers
        .par_iter()
        .map(|x| {
            let base = base_jacobian(chart, x)?;
            if base == 0.0 {
                // constant or collapsed maps: the cone has no volume either
                return Ok((0.0, 0.0));
            }
            let mut lhs = 0.0;
            for &(s, w) in &s_nodes {
                lhs += w * cone_jacobian(chart, x, s)?;
            }
            Ok((lhs, base))
        })
        .collect();
    let mut lhs = 0.0;
    let mut base = 0.0;
    for p in parts {
        let (a, b) = p?;
        lhs += a * cell;
        base += b * cell;
    }
    Ok(ConeIntegral {
        lhs,
        rhs: base / k as f64,
    })
}

/// Base map of a torus mesh into a cusp: `x -> (L x, t(x))` for lattice coordinates `x`.
#[derive(Clone)]
pub struct CuspChart {
    pub cusp: CuspModel,
    height: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    /// Lattice translate, in lattice coordinates, applied to the base map.
    pub shift: DVector<f64>,
}

impl CuspChart {
    pub fn new<F>(cusp: CuspModel, height: F) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        let k = cusp.dim() - 1;
        Self {
            cusp,
            height: Arc::new(height),
            shift: DVector::zeros(k),
        }
    }

    /// Same chart composed with a deck translation by the integer vector `m`.
    pub fn translated(mut self, m: &[i64]) -> Self {
        self.shift += DVector::from_iterator(m.len(), m.iter().map(|&v| v as f64));
        self
    }

    pub fn base(&self, x: &DVector<f64>) -> CuspPoint {
        let y = self.cusp.lattice() * (x + &self.shift);
        // heights are periodic functions of the torus coordinate
        CuspPoint {
            y,
            t: (self.height)(x),
        }
    }

    /// The cone toward the cusp point: `(y, t) -> (y, t + s)`.
    pub fn cone(&self, x: &DVector<f64>, s: f64) -> Result<CuspPoint> {
        self.cusp.shift(s, &self.base(x))
    }
}

/// `sqrt(det)` of the pulled-back cusp metric on the frame `(d/dx_1, ..., d/dx_{n-1}, d/ds)`.
fn cusp_cone_jacobian(chart: &CuspChart, x: &DVector<f64>, s: f64) -> Result<(f64, f64)> {
    let n = chart.cusp.dim();
    let k = n - 1;
    let st = Stencil::new(x.clone(), FD_STEP);
    let vals = st
        .points()
        .iter()
        .map(|q| {
            let p = chart.cone(q, s)?;
            let mut v: Vec<f64> = p.y.iter().cloned().collect();
            v.push(p.t);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols: Vec<DVector<f64>> = st
        .derivative(&vals)
        .into_iter()
        .map(DVector::from_vec)
        .collect();
    let at = chart.cone(x, s)?;
    let g = chart.cusp.metric(at.t);
    let base_g = chart.cusp.metric(chart.base(x).t);
    // the x-derivatives do not depend on s
    let base_gram = DMatrix::from_fn(k, k, |i, j| (cols[i].transpose() * &base_g * &cols[j])[0]);
    let mut e = DVector::zeros(n);
    e[k] = 1.0;
    cols.push(e);
    let gram = DMatrix::from_fn(n, n, |i, j| (cols[i].transpose() * &g * &cols[j])[0]);
    Ok((
        gram.determinant().max(0.0).sqrt(),
        base_gram.determinant().max(0.0).sqrt(),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DownstairsReport {
    pub integral: ConeIntegral,
    /// Largest coordinate gap between the cone of the chart and of its lattice translate,
    /// after reduction to the fundamental domain.
    pub equivariance_gap: f64,
}

/// The cone in the cusp over a torus chart: integral inequality over the fundamental domain and
/// commutation with a lattice translate of the base map.
pub fn downstairs_cone_check(chart: &CuspChart, translate: &[i64], cells: usize) -> Result<DownstairsReport> {
    let n = chart.cusp.dim();
    let k = n - 1;
    let region = MeshRegion {
        lo: 0.0,
        hi: 1.0,
        cells,
    };
    let (centers, cell) = region.centers(k);
    let s_nodes = simpson(24.0 / k as f64, 240);
    let mut lhs = 0.0;
    let mut base = 0.0;
    for x in &centers {
        let (_, b) = cusp_cone_jacobian(chart, x, 0.0)?;
        base += b * cell;
        for &(s, w) in &s_nodes {
            lhs += w * cusp_cone_jacobian(chart, x, s)?.0 * cell;
        }
    }
    let moved = chart.clone().translated(translate);
    let mut gap: f64 = 0.0;
    for x in centers.iter().step_by((centers.len() / 16).max(1)) {
        for s in [0.0, 0.5, 2.0] {
            let a = chart.cusp.reduce(&chart.cone(x, s)?);
            let b = chart.cusp.reduce(&moved.cone(x, s)?);
            gap = gap.max((&a.y - &b.y).amax()).max((a.t - b.t).abs());
        }
    }
    Ok(DownstairsReport {
        integral: ConeIntegral {
            lhs,
            rhs: base / k as f64,
        },
        equivariance_gap: gap,
    })
}
