use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::backend::MetricBackend;
use super::estimator::{NaturalMapConfig, PsiEstimator};
use crate::barycenter::{solve_barycenter, solve_barycenter_from, BarycenterProblem};
use crate::bmeasure::{BoundaryFunction, QuadratureGrid};
use crate::error::{LabError, Result};
use crate::fd::{Stencil, FD_STEP};
use crate::hypcore::{busemann_coord_grad, busemann_unchecked, BallPoint};

/// Tolerance for barycenters inside finite-difference stencils.
pub const STENCIL_BARY_TOL: f64 = 1e-12;
/// Slack added to the query distance when an estimator is built for a single point.
const REACH_SLACK: f64 = 0.1;

/// `Phi_0(p) = exp(-(h/2) B_theta(p))` with `h = n - 1`.
pub fn phi0(p: &BallPoint, grid: &Arc<QuadratureGrid>) -> Result<BoundaryFunction> {
    p.guard()?;
    check_dim(p.dim(), grid)?;
    let h = (p.dim() - 1) as f64;
    Ok(BoundaryFunction::from_fn(Arc::clone(grid), |t| {
        (-0.5 * h * busemann_unchecked(&DVector::from_column_slice(t), p.coords())).exp()
    }))
}

/// `dPhi_0(v) = -(h/2) dB_theta(p)(v) Phi_0(p)` for a coordinate vector `v` at `p`.
pub fn dphi0(p: &BallPoint, v: &DVector<f64>, grid: &Arc<QuadratureGrid>) -> Result<BoundaryFunction> {
    p.guard()?;
    check_dim(p.dim(), grid)?;
    let h = (p.dim() - 1) as f64;
    Ok(BoundaryFunction::from_fn(Arc::clone(grid), |t| {
        let theta = DVector::from_column_slice(t);
        let db = busemann_coord_grad(&theta, p.coords()).dot(v);
        let f = (-0.5 * h * busemann_unchecked(&theta, p.coords())).exp();
        -0.5 * h * db * f
    }))
}

fn check_dim(n: usize, grid: &QuadratureGrid) -> Result<()> {
    if grid.dim() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: grid.dim(),
        });
    }
    Ok(())
}

/// `g_Phi(u, v) = <dPhi(u), dPhi(v)>` at a base point, in ball coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PulledBackTensor {
    base: BallPoint,
    matrix: DMatrix<f64>,
}

impl PulledBackTensor {
    pub fn new(base: BallPoint, matrix: DMatrix<f64>) -> Result<Self> {
        let n = base.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { base, matrix })
    }

    /// Gram matrix of chart derivatives: `G_kl = <columns[k], columns[l]>`.
    pub fn from_columns(base: BallPoint, columns: &[BoundaryFunction]) -> Result<Self> {
        let n = columns.len();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in k..n {
                let v = columns[k].l2_inner(&columns[l])?;
                m[(k, l)] = v;
                m[(l, k)] = v;
            }
        }
        Self::new(base, m)
    }

    pub fn base(&self) -> &BallPoint {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-10
    }

    /// Eigenvalues relative to a conformal metric `lambda^2 I`.
    pub fn relative_eigenvalues(&self, lambda: f64) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.matrix.clone() / (lambda * lambda))
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `max |G - target| / max |target|`, entrywise.
    pub fn relative_error(&self, target: &DMatrix<f64>) -> f64 {
        (&self.matrix - target).amax() / target.amax()
    }

    /// `v^T G v`.
    pub fn quadratic(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.matrix * v))
    }
}

/// `g_{Phi_0}` at `p` from the analytic derivative.
pub fn g_phi0(p: &BallPoint, grid: &Arc<QuadratureGrid>) -> Result<PulledBackTensor> {
    let n = p.dim();
    let cols = (0..n)
        .map(|k| {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            dphi0(p, &e, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    PulledBackTensor::from_columns(p.clone(), &cols)
}

/// The model value `(h^2 / 4n) g0(p)`.
pub fn g_phi0_model(p: &BallPoint) -> DMatrix<f64> {
    let n = p.dim() as f64;
    let h = n - 1.0;
    p.metric() * (h * h / (4.0 * n))
}

/// Unnormalized `Psi^b_c(p, .)` with a one-off estimator.
pub fn psi_c(
    backend: &dyn MetricBackend,
    cfg: &NaturalMapConfig,
    p: &BallPoint,
    grid: &Arc<QuadratureGrid>,
) -> Result<BoundaryFunction> {
    let o = BallPoint::origin(backend.dim());
    PsiEstimator::new(backend, cfg, Arc::clone(grid), &o, p.dist_to_origin() + REACH_SLACK)?.psi(p)
}

/// `Phi^b_c(p, .)` with a one-off estimator.
pub fn phi_c(
    backend: &dyn MetricBackend,
    cfg: &NaturalMapConfig,
    p: &BallPoint,
    grid: &Arc<QuadratureGrid>,
) -> Result<BoundaryFunction> {
    let o = BallPoint::origin(backend.dim());
    PsiEstimator::new(backend, cfg, Arc::clone(grid), &o, p.dist_to_origin() + REACH_SLACK)?.phi(p)
}

/// Chart derivative of `Phi^b_c` at a point.
#[derive(Clone, Debug)]
pub struct PhiDerivative {
    pub base: BallPoint,
    pub phi: BoundaryFunction,
    /// `d Phi / d x_k`.
    pub columns: Vec<BoundaryFunction>,
    /// `b` at the base point.
    pub metric: DMatrix<f64>,
}

impl PhiDerivative {
    pub fn tensor(&self) -> Result<PulledBackTensor> {
        PulledBackTensor::from_columns(self.base.clone(), &self.columns)
    }

    /// `|dPhi(v)|^2 / b(v, v)`.
    pub fn rayleigh(&self, v: &DVector<f64>) -> Result<f64> {
        let g = self.tensor()?;
        Ok(g.quadratic(v) / v.dot(&(&self.metric * v)))
    }

    /// Largest Rayleigh quotient over all directions.
    pub fn max_rayleigh(&self) -> Result<f64> {
        let g = self.tensor()?;
        let scale = self.metric[(0, 0)];
        Ok(g.relative_eigenvalues(scale.sqrt()).last().cloned().unwrap_or(0.0))
    }

    /// `sqrt(det g_Phi) / sqrt(det b)`: the Jacobian on a `b`-orthonormal frame.
    pub fn gram_jacobian(&self) -> Result<f64> {
        let g = self.tensor()?;
        Ok((g.matrix().determinant().max(0.0) / self.metric.determinant()).sqrt())
    }
}

/// Result of differentiating `F_c` at one point.
#[derive(Clone, Debug)]
pub struct JacobianReport {
    pub point: BallPoint,
    pub image: BallPoint,
    /// `dF` in ball coordinates.
    pub chart_derivative: DMatrix<f64>,
    /// `|Jac F|` measured from `b` to `g0`, signed by orientation.
    pub jacobian: f64,
}

/// `F_c = bar o Phi^b_c` with one shared volume cloud.
pub struct NaturalMap<'a> {
    estimator: PsiEstimator<'a>,
}

impl<'a> NaturalMap<'a> {
    /// Map for query points within hyperbolic distance `reach` of the origin.
    pub fn new(
        backend: &'a dyn MetricBackend,
        cfg: &NaturalMapConfig,
        grid: Arc<QuadratureGrid>,
        reach: f64,
    ) -> Result<Self> {
        let o = BallPoint::origin(backend.dim());
        Ok(Self {
            estimator: PsiEstimator::new(backend, cfg, grid, &o, reach)?,
        })
    }

    pub fn estimator(&self) -> &PsiEstimator<'a> {
        &self.estimator
    }

    pub fn phi(&self, p: &BallPoint) -> Result<BoundaryFunction> {
        self.estimator.phi(p)
    }

    pub fn map(&self, p: &BallPoint) -> Result<BallPoint> {
        let phi = self.estimator.phi(p)?;
        Ok(solve_barycenter(&BarycenterProblem::new(&phi)?, STENCIL_BARY_TOL, 200)?.point)
    }

    pub fn map_many(&self, points: &[BallPoint]) -> Result<Vec<BallPoint>> {
        let groups: Vec<Vec<BallPoint>> = points.iter().map(|p| vec![p.clone()]).collect();
        self.estimator
            .phi_groups(&groups)?
            .iter()
            .map(|phi| {
                Ok(solve_barycenter(&BarycenterProblem::new(phi)?, STENCIL_BARY_TOL, 200)?.point)
            })
            .collect()
    }

    fn stencils(&self, points: &[BallPoint]) -> Result<(Vec<Stencil>, Vec<Vec<BallPoint>>)> {
        let mut stencils = Vec::with_capacity(points.len());
        let mut groups = Vec::with_capacity(points.len());
        for p in points {
            let s = Stencil::new(p.coords().clone(), FD_STEP);
            let pts = s
                .points()
                .into_iter()
                .map(|x| BallPoint::new(x).map_err(|_| LabError::StencilOutOfDomain))
                .collect::<Result<Vec<_>>>()?;
            for q in &pts {
                q.guard().map_err(|_| LabError::StencilOutOfDomain)?;
            }
            stencils.push(s);
            groups.push(pts);
        }
        Ok((stencils, groups))
    }

    /// `dPhi^b_c` at each point by Richardson finite differences.
    pub fn phi_derivatives(&self, points: &[BallPoint]) -> Result<Vec<PhiDerivative>> {
        let (stencils, groups) = self.stencils(points)?;
        let phis = self.estimator.phi_groups(&groups)?;
        let grid = self.estimator.grid();
        let backend = self.estimator.backend();
        let mut out = Vec::with_capacity(points.len());
        let mut offset = 0;
        for (p, s) in points.iter().zip(&stencils) {
            let vals: Vec<Vec<f64>> = phis[offset..offset + s.len()]
                .iter()
                .map(|f| f.values().to_vec())
                .collect();
            let cols = s
                .derivative(&vals)
                .into_iter()
                .map(|c| BoundaryFunction::new(Arc::clone(grid), c))
                .collect::<Result<Vec<_>>>()?;
            out.push(PhiDerivative {
                base: p.clone(),
                phi: phis[offset].clone(),
                columns: cols,
                metric: backend.metric(p),
            });
            offset += s.len();
        }
        Ok(out)
    }

    /// `dF_c` and its Jacobian at each point.
    pub fn jacobians(&self, points: &[BallPoint]) -> Result<Vec<JacobianReport>> {
        let (stencils, groups) = self.stencils(points)?;
        let phis = self.estimator.phi_groups(&groups)?;
        let backend = self.estimator.backend();
        let n = backend.dim();
        let mut out = Vec::with_capacity(points.len());
        let mut offset = 0;
        for (p, s) in points.iter().zip(&stencils) {
            let center_prob = BarycenterProblem::new(&phis[offset])?;
            let image = solve_barycenter(&center_prob, STENCIL_BARY_TOL, 200)?.point;
            let mut vals = Vec::with_capacity(s.len());
            vals.push(image.coords().iter().cloned().collect::<Vec<f64>>());
            for phi in &phis[offset + 1..offset + s.len()] {
                let prob = BarycenterProblem::new(phi)?;
                let sol = solve_barycenter_from(&prob, &image, STENCIL_BARY_TOL, 200)?;
                vals.push(sol.point.coords().iter().cloned().collect());
            }
            let cols = s.derivative(&vals);
            let d = DMatrix::from_fn(n, n, |i, k| cols[k][i]);
            let u = backend.log_conformal(p.coords());
            let ratio = image.conformal_factor() / (u.exp() * p.conformal_factor());
            let jacobian = d.determinant() * ratio.powi(n as i32);
            out.push(JacobianReport {
                point: p.clone(),
                image,
                chart_derivative: d,
                jacobian,
            });
            offset += s.len();
        }
        Ok(out)
    }
}

/// `F_c(p)` on the default boundary grid.
pub fn natural_map_fc(
    backend: &dyn MetricBackend,
    cfg: &NaturalMapConfig,
    p: &BallPoint,
) -> Result<BallPoint> {
    let grid = Arc::new(QuadratureGrid::default_for(backend.dim())?);
    NaturalMap::new(backend, cfg, grid, p.dist_to_origin() + REACH_SLACK)?.map(p)
}

/// `Jac F_c(p)` on the default boundary grid.
pub fn jacobian_fc(backend: &dyn MetricBackend, cfg: &NaturalMapConfig, p: &BallPoint) -> Result<f64> {
    let grid = Arc::new(QuadratureGrid::default_for(backend.dim())?);
    let map = NaturalMap::new(backend, cfg, grid, p.dist_to_origin() + REACH_SLACK)?;
    Ok(map.jacobians(std::slice::from_ref(p))?.remove(0).jacobian)
}
