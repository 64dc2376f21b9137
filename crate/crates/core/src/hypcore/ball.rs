//! Points, ideal points and closed-form geometry of the Poincaré ball.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

/// Points with `|x| >= 1 - CONSTRUCT_MARGIN` cannot be represented.
pub const CONSTRUCT_MARGIN: f64 = 1e-12;
/// Operations refuse points with `|x| >= 1 - BOUNDARY_GUARD`.
pub const BOUNDARY_GUARD: f64 = 1e-9;

/// Interior point of the unit ball, in ball-model coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BallPoint {
    coords: DVector<f64>,
}

impl BallPoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(LabError::UnsupportedDimension {
                dim: coords.len(),
                reason: "ball model needs n >= 2",
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(LabError::InvalidInput("non-finite coordinate".into()));
        }
        let norm = coords.norm();
        if norm >= 1.0 - CONSTRUCT_MARGIN {
            return Err(LabError::NearBoundary { norm });
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 2, "ball model needs n >= 2");
        Self {
            coords: DVector::zeros(dim),
        }
    }

    /// Point at hyperbolic distance `dist` from the origin in direction `dir`.
    pub fn from_polar(dir: &IdealPoint, dist: f64) -> Result<Self> {
        Self::new(dir.dir() * (0.5 * dist).tanh())
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.norm_squared()
    }

    /// Conformal factor `2 / (1 - |x|^2)` of the hyperbolic metric.
    pub fn conformal_factor(&self) -> f64 {
        2.0 / (1.0 - self.norm_sq())
    }

    /// Hyperbolic distance to the origin.
    pub fn dist_to_origin(&self) -> f64 {
        2.0 * self.coords.norm().atanh()
    }

    /// Fails with `NearBoundary` when the point sits inside the guard band.
    pub fn guard(&self) -> Result<()> {
        let norm = self.coords.norm();
        if norm >= 1.0 - BOUNDARY_GUARD {
            Err(LabError::NearBoundary { norm })
        } else {
            Ok(())
        }
    }

    /// Metric tensor of `g0` in ball coordinates.
    pub fn metric(&self) -> DMatrix<f64> {
        let lam = self.conformal_factor();
        DMatrix::identity(self.dim(), self.dim()) * (lam * lam)
    }
}

/// Point of the ideal boundary, stored as a unit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct IdealPoint {
    dir: DVector<f64>,
}

impl IdealPoint {
    /// Normalizes `v`; rejects zero or non-finite input.
    pub fn new(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(LabError::InvalidInput("ideal point needs a nonzero direction".into()));
        }
        if v.len() < 2 {
            return Err(LabError::UnsupportedDimension {
                dim: v.len(),
                reason: "ball model needs n >= 2",
            });
        }
        Ok(Self { dir: v / norm })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    /// The `i`-th coordinate direction.
    pub fn axis(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        Self { dir: v }
    }

    pub fn dir(&self) -> &DVector<f64> {
        &self.dir
    }

    pub fn dim(&self) -> usize {
        self.dir.len()
    }

    pub fn antipode(&self) -> Self {
        Self { dir: -&self.dir }
    }
}

/// Tangent vector in ball-model coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: BallPoint,
    pub vec: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: BallPoint, vec: DVector<f64>) -> Self {
        debug_assert_eq!(base.dim(), vec.len());
        Self { base, vec }
    }

    pub fn hyp_norm(&self) -> f64 {
        self.base.conformal_factor() * self.vec.norm()
    }

    pub fn hyp_inner(&self, other: &DVector<f64>) -> f64 {
        let lam = self.base.conformal_factor();
        lam * lam * self.vec.dot(other)
    }
}

/// Hyperbolic distance, `2 asinh(|p-q| / sqrt((1-|p|^2)(1-|q|^2)))`.
pub fn hyp_distance(p: &BallPoint, q: &BallPoint) -> f64 {
    let diff = (p.coords() - q.coords()).norm();
    let denom = ((1.0 - p.norm_sq()) * (1.0 - q.norm_sq())).sqrt();
    2.0 * (diff / denom).asinh()
}

/// Busemann function normalized by `B_theta(o) = 0`: `log(|x-theta|^2 / (1-|x|^2))`.
pub fn busemann(theta: &IdealPoint, x: &BallPoint) -> Result<f64> {
    x.guard()?;
    Ok(busemann_unchecked(theta.dir(), x.coords()))
}

pub(crate) fn busemann_unchecked(theta: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let d2 = (x - theta).norm_squared();
    (d2 / (1.0 - x.norm_squared())).ln()
}

/// Euclidean (coordinate) gradient of `B_theta` at `x`.
pub(crate) fn busemann_coord_grad(theta: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let diff = x - theta;
    let d2 = diff.norm_squared();
    let s = 1.0 - x.norm_squared();
    diff * (2.0 / d2) + x * (2.0 / s)
}

/// Riemannian gradient of `B_theta`, a hyperbolic unit vector pointing away from `theta`.
pub fn busemann_grad(theta: &IdealPoint, x: &BallPoint) -> Result<TangentVector> {
    x.guard()?;
    let lam = x.conformal_factor();
    let grad = busemann_coord_grad(theta.dir(), x.coords()) / (lam * lam);
    Ok(TangentVector::new(x.clone(), grad))
}

/// Coordinate matrix of `Hess B_theta = g - dB (x) dB` at `x`.
pub fn busemann_hess(theta: &IdealPoint, x: &BallPoint) -> Result<DMatrix<f64>> {
    x.guard()?;
    let lam = x.conformal_factor();
    let d = busemann_coord_grad(theta.dir(), x.coords());
    let n = x.dim();
    Ok(DMatrix::identity(n, n) * (lam * lam) - &d * d.transpose())
}

/// Poisson kernel `(1-|x|^2)/|x-theta|^2 = exp(-B_theta(x))`.
pub fn poisson_kernel(x: &BallPoint, theta: &IdealPoint) -> Result<f64> {
    x.guard()?;
    Ok(poisson_unchecked(x.coords(), theta.dir()))
}

pub(crate) fn poisson_unchecked(x: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    (1.0 - x.norm_squared()) / (x - theta).norm_squared()
}

/// Möbius addition `a (+) x`; an orientation-preserving isometry sending 0 to `a`.
/// Also valid for `|x| = 1`, where it acts on the ideal boundary.
pub(crate) fn mobius_add(a: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let ax = a.dot(x);
    let a2 = a.norm_squared();
    let x2 = x.norm_squared();
    let denom = 1.0 + 2.0 * ax + a2 * x2;
    (a * (1.0 + 2.0 * ax + x2) + x * (1.0 - a2)) / denom
}

/// Point at distance `s` along the geodesic ray from `x` to `theta`.
pub fn geodesic_toward(x: &BallPoint, theta: &IdealPoint, s: f64) -> Result<BallPoint> {
    if s < 0.0 || !s.is_finite() {
        return Err(LabError::InvalidInput(format!("geodesic parameter {s}")));
    }
    let neg = -x.coords();
    let mut local = mobius_add(&neg, theta.dir());
    local /= local.norm();
    let y = local * (0.5 * s).tanh();
    BallPoint::new(mobius_add(x.coords(), &y))
}

/// Ideal endpoint of the geodesic ray from `x` with initial coordinate velocity `v`.
pub fn ray_endpoint(x: &BallPoint, v: &DVector<f64>) -> Result<IdealPoint> {
    IdealPoint::new(v.clone()).map(|dir| {
        let mut e = mobius_add(x.coords(), dir.dir());
        e /= e.norm();
        IdealPoint { dir: e }
    })
}

/// Exponential map at `v.base`.
pub fn exp_map(v: &TangentVector) -> Result<BallPoint> {
    let len = v.hyp_norm();
    if len == 0.0 {
        return Ok(v.base.clone());
    }
    let local = &v.vec * ((0.5 * len).tanh() / v.vec.norm());
    BallPoint::new(mobius_add(v.base.coords(), &local))
}

/// Inverse of the exponential map: coordinate tangent vector at `x` pointing to `y`.
pub fn log_map(x: &BallPoint, y: &BallPoint) -> TangentVector {
    let neg = -x.coords();
    let local = mobius_add(&neg, y.coords());
    let r = local.norm();
    if r == 0.0 {
        return TangentVector::new(x.clone(), DVector::zeros(x.dim()));
    }
    let dist = 2.0 * r.atanh();
    // differential of the translation at 0 is (1-|x|^2) Id; at the origin hyperbolic length is 2|w|
    let w = &local * (0.5 * dist / r);
    TangentVector::new(x.clone(), w * (1.0 - x.norm_sq()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> BallPoint {
        BallPoint::from_slice(c).unwrap()
    }

    #[test]
    fn construction_rejects_boundary_points() {
        assert!(matches!(
            BallPoint::from_slice(&[1.0, 0.0]),
            Err(LabError::NearBoundary { .. })
        ));
        assert!(BallPoint::from_slice(&[0.5]).is_err());
        assert!(BallPoint::from_slice(&[f64::NAN, 0.0]).is_err());
        assert!(IdealPoint::from_slice(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn radial_distance_matches_arclength_quadrature() {
        // integrate 2/(1-s^2) ds with composite Simpson
        let r: f64 = 0.7;
        let m = 2000;
        let h = r / m as f64;
        let f = |s: f64| 2.0 / (1.0 - s * s);
        let mut acc = f(0.0) + f(r);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        let oracle = acc * h / 3.0;
        let d = hyp_distance(&BallPoint::origin(3), &pt(&[r, 0.0, 0.0]));
        assert_abs_diff_eq!(d, oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(d, ((1.0 + r) / (1.0 - r)).ln(), epsilon = 1e-12);
        assert_eq!(hyp_distance(&BallPoint::origin(3), &BallPoint::origin(3)), 0.0);
    }

    #[test]
    fn busemann_along_geodesic_rays() {
        let theta = IdealPoint::from_slice(&[0.6, 0.0, 0.8]).unwrap();
        let o = BallPoint::origin(3);
        assert_eq!(busemann(&theta, &o).unwrap(), 0.0);
        for &t in &[0.3, 1.0, 2.5] {
            let toward = BallPoint::from_polar(&theta, t).unwrap();
            let away = BallPoint::from_polar(&theta.antipode(), t).unwrap();
            assert_abs_diff_eq!(hyp_distance(&o, &toward), t, epsilon = 1e-12);
            assert_abs_diff_eq!(busemann(&theta, &toward).unwrap(), -t, epsilon = 1e-12);
            assert_abs_diff_eq!(busemann(&theta, &away).unwrap(), t, epsilon = 1e-12);
        }
    }

    #[test]
    fn near_boundary_guard() {
        let theta = IdealPoint::axis(2, 0);
        let x = pt(&[1.0 - 1e-10, 0.0]);
        assert!(matches!(busemann(&theta, &x), Err(LabError::NearBoundary { .. })));
        assert!(busemann_grad(&theta, &x).is_err());
        assert!(busemann_hess(&theta, &x).is_err());
        assert!(poisson_kernel(&x, &theta).is_err());
    }

    #[test]
    fn gradient_at_origin_points_away_from_theta() {
        let theta = IdealPoint::from_slice(&[0.0, 1.0, 0.0]).unwrap();
        let g = busemann_grad(&theta, &BallPoint::origin(3)).unwrap();
        assert_abs_diff_eq!(g.hyp_norm(), 1.0, epsilon = 1e-14);
        let unit = &g.vec / g.vec.norm();
        assert_abs_diff_eq!((unit + theta.dir()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let theta = IdealPoint::from_slice(&[0.3, -0.4, 0.5]).unwrap();
        let x = pt(&[0.2, 0.5, -0.3]);
        let g = busemann_coord_grad(theta.dir(), x.coords());
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x.coords().clone();
            let mut xm = x.coords().clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (busemann_unchecked(theta.dir(), &xp) - busemann_unchecked(theta.dir(), &xm))
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn hessian_along_geodesics() {
        let theta = IdealPoint::from_slice(&[0.1, 0.9, -0.2]).unwrap();
        let x = pt(&[-0.3, 0.1, 0.4]);
        let hess = busemann_hess(&theta, &x).unwrap();
        let grad = busemann_grad(&theta, &x).unwrap();
        // kernel direction
        assert_abs_diff_eq!((&hess * &grad.vec).norm(), 0.0, epsilon = 1e-10);
        // unit vector orthogonal to the gradient (in g0) has Hess = 1
        let lam = x.conformal_factor();
        let mut w = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let gu = &grad.vec * lam;
        w -= &gu * w.dot(&gu);
        w /= w.norm() * lam;
        let hww = w.dot(&(&hess * &w));
        assert_abs_diff_eq!(hww, 1.0, epsilon = 1e-12);
        // second difference of B along the geodesic with velocity w
        let h = 1e-3;
        let f = |t: f64| {
            let p = exp_map(&TangentVector::new(x.clone(), &w * t)).unwrap();
            busemann(&theta, &p).unwrap()
        };
        let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!((second - 1.0).abs() < 1e-5, "second difference {second}");
        // trace in an orthonormal frame is n - 1
        let trace = hess.trace() / (lam * lam);
        assert_abs_diff_eq!(trace, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_kernel_identities() {
        let theta = IdealPoint::from_slice(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(poisson_kernel(&BallPoint::origin(2), &theta).unwrap(), 1.0, epsilon = 1e-15);
        let x = pt(&[0.3, -0.5]);
        let p = poisson_kernel(&x, &theta).unwrap();
        assert_abs_diff_eq!(p, (-busemann(&theta, &x).unwrap()).exp(), epsilon = 1e-14);
        let r = x.coords().norm();
        assert!(p >= (1.0 - r) / (1.0 + r) - 1e-15);
    }

    #[test]
    fn geodesic_toward_semigroup_and_busemann_decrease() {
        let theta = IdealPoint::from_slice(&[0.2, -0.7, 0.4]).unwrap();
        let x = pt(&[0.4, 0.3, -0.2]);
        assert_abs_diff_eq!(
            (geodesic_toward(&x, &theta, 0.0).unwrap().coords() - x.coords()).norm(),
            0.0,
            epsilon = 1e-15
        );
        let b0 = busemann(&theta, &x).unwrap();
        for &s in &[0.5, 1.7, 4.0] {
            let y = geodesic_toward(&x, &theta, s).unwrap();
            assert_abs_diff_eq!(hyp_distance(&x, &y), s, epsilon = 1e-8);
            assert_abs_diff_eq!(busemann(&theta, &y).unwrap(), b0 - s, epsilon = 1e-8);
        }
        let ab = geodesic_toward(&geodesic_toward(&x, &theta, 0.8).unwrap(), &theta, 1.3).unwrap();
        let direct = geodesic_toward(&x, &theta, 2.1).unwrap();
        assert_abs_diff_eq!((ab.coords() - direct.coords()).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn exp_and_log_are_inverse() {
        let x = pt(&[0.5, -0.1, 0.2]);
        let y = pt(&[-0.3, 0.6, 0.1]);
        let v = log_map(&x, &y);
        assert_abs_diff_eq!(v.hyp_norm(), hyp_distance(&x, &y), epsilon = 1e-10);
        let back = exp_map(&v).unwrap();
        assert_abs_diff_eq!((back.coords() - y.coords()).norm(), 0.0, epsilon = 1e-10);
    }
}
