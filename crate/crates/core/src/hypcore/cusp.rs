use nalgebra::{DMatrix, DVector};

use super::ball::BallPoint;
use crate::error::{LabError, Result};

/// Cusp end `Y x [0, inf)` with metric `dt^2 + e^{-2t} g_Y`, `Y` a flat torus `R^{n-1}/lattice`.
#[derive(Clone, Debug, PartialEq)]
pub struct CuspModel {
    dim: usize,
    lattice: DMatrix<f64>,
}

/// Point `(y, t)` of the cusp; `y` is kept in lattice-reduced form by [`CuspModel::reduce`].
#[derive(Clone, Debug, PartialEq)]
pub struct CuspPoint {
    pub y: DVector<f64>,
    pub t: f64,
}

impl CuspModel {
    /// `lattice` columns are the basis vectors of the torus lattice.
    pub fn new(dim: usize, lattice: DMatrix<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(LabError::UnsupportedDimension {
                dim,
                reason: "cusp needs n >= 2",
            });
        }
        if lattice.nrows() != dim - 1 || lattice.ncols() != dim - 1 {
            return Err(LabError::DimensionMismatch {
                expected: dim - 1,
                got: lattice.nrows(),
            });
        }
        if lattice.determinant().abs() < 1e-14 {
            return Err(LabError::InvalidInput("degenerate lattice".into()));
        }
        Ok(Self { dim, lattice })
    }

    pub fn unit_square(dim: usize) -> Result<Self> {
        Self::new(dim, DMatrix::identity(dim - 1, dim - 1))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lattice(&self) -> &DMatrix<f64> {
        &self.lattice
    }

    /// Flat volume of the cross-section `Y x {0}`.
    pub fn base_volume(&self) -> f64 {
        self.lattice.determinant().abs()
    }

    /// `Vol(Y x {t}) = e^{-(n-1) t} Vol(Y x {0})`.
    pub fn slice_volume(&self, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(LabError::InvalidInput(format!("slice level {t}")));
        }
        Ok((-((self.dim - 1) as f64) * t).exp() * self.base_volume())
    }

    /// Shift map `(y, t) -> (y, t + r)`.
    pub fn shift(&self, r: f64, p: &CuspPoint) -> Result<CuspPoint> {
        if r < 0.0 || !r.is_finite() {
            return Err(LabError::InvalidInput(format!("shift {r}")));
        }
        Ok(CuspPoint {
            y: p.y.clone(),
            t: p.t + r,
        })
    }

    /// Length of the tangent vector `(dy, dt)` at height `t`.
    pub fn tangent_norm(&self, t: f64, dy: &DVector<f64>, dt: f64) -> f64 {
        (dt * dt + (-2.0 * t).exp() * dy.norm_squared()).sqrt()
    }

    /// Metric tensor in `(y, t)` coordinates at height `t` (y block first).
    pub fn metric(&self, t: f64) -> DMatrix<f64> {
        let mut g = DMatrix::identity(self.dim, self.dim) * (-2.0 * t).exp();
        g[(self.dim - 1, self.dim - 1)] = 1.0;
        g
    }

    /// The lift `(y, t) -> (y, e^t)` into upper half space, then into the ball. The slice
    /// `t = 0` is the horosphere through the origin centered at `e_n`.
    pub fn to_ball(&self, p: &CuspPoint) -> Result<BallPoint> {
        if p.y.len() != self.dim - 1 {
            return Err(LabError::DimensionMismatch {
                expected: self.dim - 1,
                got: p.y.len(),
            });
        }
        half_space_to_ball(&p.y, p.t.exp())
    }

    /// Reduces `y` into the fundamental parallelepiped of the lattice.
    pub fn reduce(&self, p: &CuspPoint) -> CuspPoint {
        let inv = self
            .lattice
            .clone()
            .try_inverse()
            .expect("lattice validated at construction");
        let frac = (inv * &p.y).map(|c| c - c.floor());
        CuspPoint {
            y: &self.lattice * frac,
            t: p.t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn slice_volume_closed_form() {
        let cusp = CuspModel::unit_square(3).unwrap();
        assert_eq!(cusp.slice_volume(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(cusp.slice_volume(1.0).unwrap(), (-2.0f64).exp(), epsilon = 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let v = cusp.slice_volume(0.2 * k as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let skew = CuspModel::new(3, DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 1.5])).unwrap();
        assert_abs_diff_eq!(skew.slice_volume(0.5).unwrap(), 3.0 * (-1.0f64).exp(), epsilon = 1e-12);
        assert!(skew.slice_volume(-1.0).is_err());
    }

    #[test]
    fn shift_contracts_slices_only() {
        let cusp = CuspModel::unit_square(3).unwrap();
        let p = CuspPoint {
            y: DVector::from_column_slice(&[0.2, 0.7]),
            t: 0.4,
        };
        assert_eq!(cusp.shift(0.0, &p).unwrap(), p);
        let r = 1.3;
        let q = cusp.shift(r, &p).unwrap();
        let dy = DVector::from_column_slice(&[0.3, -0.4]);
        // the differential of the shift is the identity in coordinates
        let slice_ratio = cusp.tangent_norm(q.t, &dy, 0.0) / cusp.tangent_norm(p.t, &dy, 0.0);
        assert_abs_diff_eq!(slice_ratio, (-r).exp(), epsilon = 1e-14);
        let zero = DVector::zeros(2);
        let vertical = cusp.tangent_norm(q.t, &zero, 1.0) / cusp.tangent_norm(p.t, &zero, 1.0);
        assert_abs_diff_eq!(vertical, 1.0, epsilon = 1e-15);
        let ratio = cusp.slice_volume(q.t).unwrap() / cusp.slice_volume(p.t).unwrap();
        assert_abs_diff_eq!(ratio, (-2.0 * r).exp(), epsilon = 1e-14);
    }

    #[test]
    fn reduce_to_fundamental_domain() {
        let cusp = CuspModel::unit_square(3).unwrap();
        let p = CuspPoint {
            y: DVector::from_column_slice(&[2.25, -0.5]),
            t: 1.0,
        };
        let r = cusp.reduce(&p);
        assert_abs_diff_eq!(r.y[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(r.y[1], 0.5, epsilon = 1e-14);
    }
}

/// Isometry from upper half space `{(y, z) : z > 0}` onto the ball, sending `(0, 1)` to the
/// origin and the point at infinity to `e_n`.
pub fn half_space_to_ball(y: &DVector<f64>, z: f64) -> Result<BallPoint> {
    if !(z > 0.0) {
        return Err(LabError::InvalidInput(format!("half-space height {z}")));
    }
    let n = y.len() + 1;
    let y2 = y.norm_squared();
    let denom = y2 + (z + 1.0) * (z + 1.0);
    let mut x = DVector::zeros(n);
    x.rows_mut(0, n - 1).copy_from(&(y * (2.0 / denom)));
    x[n - 1] = (y2 + z * z - 1.0) / denom;
    BallPoint::new(x)
}
