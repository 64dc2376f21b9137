use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ball::{mobius_add, BallPoint, IdealPoint};
use crate::error::{LabError, Result};

/// Orientation-preserving isometry of the ball, `x -> a (+) R x`.
///
/// `rotation` is in SO(n) and `translation` is the image of the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusIsometry {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl MobiusIsometry {
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let n = translation.len();
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: rotation.nrows(),
            });
        }
        let ortho_err = (rotation.transpose() * &rotation - DMatrix::identity(n, n)).norm();
        if ortho_err > 1e-9 {
            return Err(LabError::InvalidInput(format!(
                "rotation is not orthogonal (error {ortho_err:e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(LabError::InvalidInput("rotation has determinant -1".into()));
        }
        BallPoint::new(translation.clone())?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            rotation: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn rotation(rotation: DMatrix<f64>) -> Result<Self> {
        let n = rotation.nrows();
        Self::new(rotation, DVector::zeros(n))
    }

    /// Pure translation along the geodesic from the origin to `target`.
    pub fn translation(target: &BallPoint) -> Self {
        Self {
            rotation: DMatrix::identity(target.dim(), target.dim()),
            translation: target.coords().clone(),
        }
    }

    /// Random rotation (Haar via QR) composed with a translation to distance `<= max_dist`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, max_dist: f64) -> Self {
        let rotation = random_rotation(rng, dim);
        let dir: DVector<f64> = DVector::from_fn(dim, |_, _| rng.sample(StandardNormal));
        let dist = max_dist * rng.random::<f64>();
        let translation = dir.normalize() * (0.5 * dist).tanh();
        Self {
            rotation,
            translation,
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn rotation_part(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation_part(&self) -> &DVector<f64> {
        &self.translation
    }

    pub(crate) fn apply_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        mobius_add(&self.translation, &(&self.rotation * x))
    }

    pub fn apply_point(&self, x: &BallPoint) -> Result<BallPoint> {
        BallPoint::new(self.apply_coords(x.coords()))
    }

    pub fn apply_ideal(&self, theta: &IdealPoint) -> IdealPoint {
        IdealPoint::new(self.apply_coords(theta.dir())).expect("isometries map the sphere to itself")
    }

    /// Image of the origin.
    pub fn origin_image(&self) -> BallPoint {
        BallPoint::new(self.translation.clone()).expect("validated at construction")
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let neg = -&self.translation;
        let inv = |y: &DVector<f64>| &rt * mobius_add(&neg, y);
        Self::from_map(self.dim(), inv)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_map(self.dim(), |x| self.apply_coords(&other.apply_coords(x)))
    }

    /// Recovers the (rotation, translation) pair of an isometry given as a map.
    /// An isometry fixing the origin is linear, so its columns are the images of the axes.
    fn from_map<F: Fn(&DVector<f64>) -> DVector<f64>>(dim: usize, map: F) -> Self {
        let translation = map(&DVector::zeros(dim));
        let neg = -&translation;
        let mut cols = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            let img = mobius_add(&neg, &map(&e));
            cols.set_column(i, &img);
        }
        let svd = cols.svd(true, true);
        let rotation = svd.u.unwrap() * svd.v_t.unwrap();
        Self {
            rotation,
            translation,
        }
    }

    /// Row-major rotation followed by the translation vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n + n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.rotation[(i, j)]);
            }
        }
        out.extend(self.translation.iter());
        out
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != dim * dim + dim {
            return Err(LabError::InvalidInput(format!(
                "isometry needs {} numbers, got {}",
                dim * dim + dim,
                flat.len()
            )));
        }
        let rotation = DMatrix::from_row_slice(dim, dim, &flat[..dim * dim]);
        let translation = DVector::from_column_slice(&flat[dim * dim..]);
        Self::new(rotation, translation)
    }
}

/// Haar-random element of SO(n).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    if q.determinant() < 0.0 {
        let col = -q.column(0);
        q.set_column(0, &col);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypcore::ball::{busemann, hyp_distance};
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn random_point<R: Rng>(rng: &mut R, dim: usize, max_dist: f64) -> BallPoint {
        MobiusIsometry::random(rng, dim, max_dist).origin_image()
    }

    #[test]
    fn identity_and_rotations() {
        let x = BallPoint::from_slice(&[0.2, -0.3, 0.1]).unwrap();
        let id = MobiusIsometry::identity(3);
        assert_eq!(id.apply_point(&x).unwrap(), x);
        let mut rng = stream_rng(7, 0);
        let rot = MobiusIsometry::rotation(random_rotation(&mut rng, 3)).unwrap();
        let o = rot.apply_point(&BallPoint::origin(3)).unwrap();
        assert_abs_diff_eq!(o.coords().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn preserves_distances_and_composes() {
        let mut rng = stream_rng(11, 0);
        for n in 2..=4 {
            for _ in 0..20 {
                let g = MobiusIsometry::random(&mut rng, n, 2.0);
                let h = MobiusIsometry::random(&mut rng, n, 2.0);
                let x = random_point(&mut rng, n, 2.5);
                let y = random_point(&mut rng, n, 2.5);
                let d = hyp_distance(&x, &y);
                let gx = g.apply_point(&x).unwrap();
                let gy = g.apply_point(&y).unwrap();
                assert_abs_diff_eq!(hyp_distance(&gx, &gy), d, epsilon = 1e-10);
                let gh = g.compose(&h);
                let lhs = gh.apply_point(&x).unwrap();
                let rhs = g.apply_point(&h.apply_point(&x).unwrap()).unwrap();
                assert_abs_diff_eq!((lhs.coords() - rhs.coords()).norm(), 0.0, epsilon = 1e-10);
                let back = g.inverse().apply_point(&gx).unwrap();
                assert_abs_diff_eq!((back.coords() - x.coords()).norm(), 0.0, epsilon = 1e-10);
                assert!(gh.rotation_part().determinant() > 0.0);
            }
        }
    }

    #[test]
    fn busemann_cocycle_under_isometries() {
        let mut rng = stream_rng(5, 1);
        let o = BallPoint::origin(3);
        for _ in 0..50 {
            let g = MobiusIsometry::random(&mut rng, 3, 2.0);
            let x = random_point(&mut rng, 3, 2.0);
            let theta = IdealPoint::new(DVector::from_fn(3, |_, _| rng.sample(StandardNormal))).unwrap();
            let gt = g.apply_ideal(&theta);
            let lhs = busemann(&gt, &g.apply_point(&x).unwrap()).unwrap()
                - busemann(&gt, &g.apply_point(&o).unwrap()).unwrap();
            assert_abs_diff_eq!(lhs, busemann(&theta, &x).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn flat_round_trip_and_validation() {
        let mut rng = stream_rng(3, 3);
        let g = MobiusIsometry::random(&mut rng, 4, 1.0);
        let back = MobiusIsometry::from_flat(4, &g.to_flat()).unwrap();
        assert_eq!(back, g);
        assert!(MobiusIsometry::from_flat(2, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]).is_err());
        assert!(MobiusIsometry::from_flat(2, &[1.0, 0.0]).is_err());
    }
}
