//! Barycenter map `bar: L^2_+ -> H^n`, the unique minimizer of `x -> sum_i w_i B_{theta_i}(x)`
//! with `w_i = q_i phi_i^2`.
//!
//! Every Newton step is taken after translating the current iterate to the origin, where the
//! Busemann gradient and Hessian are `-2 theta'` and `4 (I - theta' theta'^T)` in coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::bmeasure::{BoundaryFunction, QuadratureGrid};
use crate::error::{LabError, Result};
use crate::hypcore::{busemann_unchecked, hyp_distance, mobius_add, BallPoint, TangentVector};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Smallest admissible ratio of extreme Hessian eigenvalues.
pub const SINGULAR_RATIO: f64 = 1e-8;

/// The measure `phi^2 d mu_o` on the grid nodes.
#[derive(Clone, Debug)]
pub struct BarycenterProblem {
    grid: Arc<QuadratureGrid>,
    weights: Vec<f64>,
    mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterSolution {
    pub point: BallPoint,
    /// Hyperbolic norm of `sum_i w_i grad B_{theta_i}` divided by the total mass.
    pub residual: f64,
    pub iterations: usize,
}

impl BarycenterProblem {
    pub fn new(phi: &BoundaryFunction) -> Result<Self> {
        if !phi.is_positive() {
            return Err(LabError::InvalidInput(
                "barycenter needs a strictly positive function".into(),
            ));
        }
        let grid = Arc::clone(phi.grid());
        let weights: Vec<f64> = grid
            .weights()
            .iter()
            .zip(phi.values())
            .map(|(q, v)| q * v * v)
            .collect();
        Self::from_weights(grid, weights)
    }

    /// Arbitrary positive point masses at the grid nodes.
    pub fn from_weights(grid: Arc<QuadratureGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(LabError::DimensionMismatch {
                expected: grid.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LabError::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0) {
            return Err(LabError::ZeroFunction);
        }
        Ok(Self { grid, weights, mass })
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// `x0 = 0.5 * sum_i w_i theta_i / sum_i w_i`.
    pub fn default_start(&self) -> BallPoint {
        let n = self.dim();
        let mut mean = DVector::zeros(n);
        for (i, w) in self.weights.iter().enumerate() {
            for (m, t) in mean.iter_mut().zip(self.grid.node(i)) {
                *m += w * t;
            }
        }
        BallPoint::new(mean * (0.5 / self.mass)).expect("mean of unit vectors lies in the closed ball")
    }

    /// Nodes seen from `x`: `theta' = T_x^{-1} theta`, where `T_x` translates `o` to `x`.
    fn pulled_nodes(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let neg = -x;
        (0..self.grid.len())
            .map(|i| {
                let t = mobius_add(&neg, &self.grid.node_vec(i));
                let norm = t.norm();
                t / norm
            })
            .collect()
    }
}

/// `sum_i w_i B_{theta_i}(x)`.
pub fn bary_objective(x: &BallPoint, prob: &BarycenterProblem) -> Result<f64> {
    x.guard()?;
    Ok((0..prob.grid.len())
        .map(|i| prob.weights[i] * busemann_unchecked(&prob.grid.node_vec(i), x.coords()))
        .sum())
}

struct LocalModel {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Mass-normalized coordinate gradient and Hessian at the origin after translating `x` there.
fn local_model(prob: &BarycenterProblem, pulled: &[DVector<f64>]) -> LocalModel {
    let n = prob.dim();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for (w, t) in prob.weights.iter().zip(pulled) {
        let w = w / prob.mass;
        grad.axpy(-2.0 * w, t, 1.0);
        hess.ger(-4.0 * w, t, t, 1.0);
        for k in 0..n {
            hess[(k, k)] += 4.0 * w;
        }
    }
    LocalModel { grad, hess }
}

fn check_conditioning(hess: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(hess.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < SINGULAR_RATIO * max {
        return Err(LabError::SingularHessian {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok(())
}

/// Objective relative to its value at the current iterate, as a function of the local point `z`.
fn local_objective(prob: &BarycenterProblem, pulled: &[DVector<f64>], z: &DVector<f64>) -> f64 {
    prob.weights
        .iter()
        .zip(pulled)
        .map(|(w, t)| w / prob.mass * busemann_unchecked(t, z))
        .sum()
}

pub fn solve_barycenter(
    prob: &BarycenterProblem,
    tol: f64,
    max_iter: usize,
) -> Result<BarycenterSolution> {
    solve_barycenter_from(prob, &prob.default_start(), tol, max_iter)
}

/// Damped Newton with step halving on the objective, started at `start`.
pub fn solve_barycenter_from(
    prob: &BarycenterProblem,
    start: &BallPoint,
    tol: f64,
    max_iter: usize,
) -> Result<BarycenterSolution> {
    start.guard()?;
    let mut x = start.coords().clone();
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iter {
        let pulled = prob.pulled_nodes(&x);
        let model = local_model(prob, &pulled);
        // coordinate gradient at o has hyperbolic norm |g| / 2
        residual = 0.5 * model.grad.norm();
        if residual <= tol {
            let point = BallPoint::new(x)?;
            point.guard()?;
            return Ok(BarycenterSolution {
                point,
                residual,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }
        check_conditioning(&model.hess)?;
        let step = model
            .hess
            .clone()
            .cholesky()
            .ok_or(LabError::SingularHessian { ratio: 0.0 })?
            .solve(&(-&model.grad));
        let mut scale = 1.0;
        let mut z = DVector::zeros(prob.dim());
        for _ in 0..60 {
            let v = &step * scale;
            let len = v.norm();
            z = if len > 0.0 { &v * (len.tanh() / len) } else { v };
            // below 1e-6 the quadratic model is exact to rounding and the objective
            // difference carries no information
            if len < 1e-6 || local_objective(prob, &pulled, &z) < 0.0 || scale < 1e-12 {
                break;
            }
            scale *= 0.5;
        }
        x = mobius_add(&x, &z);
        BallPoint::new(x.clone())?.guard()?;
    }
    Err(LabError::MaxIterExceeded {
        iterations: max_iter,
        residual,
    })
}

/// True iff `bar(c phi)` and `bar(phi)` agree within `1e-8`.
pub fn bar_scale_invariance_check(phi: &BoundaryFunction, c: f64) -> Result<bool> {
    if !(c > 0.0) {
        return Err(LabError::InvalidInput(format!("scale {c} must be positive")));
    }
    let a = solve_barycenter(&BarycenterProblem::new(phi)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let b = solve_barycenter(
        &BarycenterProblem::new(&phi.scaled(c))?,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    Ok(hyp_distance(&a.point, &b.point) <= 1e-8)
}

/// Derivative of `bar` at a solved `phi`, reusable across directions.
///
/// With `A(psi) = sum 2 q_i phi_i psi_i grad B_i` and `H = sum q_i phi_i^2 Hess B_i`,
/// `dbar(psi) = -H^{-1} A(psi)`.
#[derive(Clone, Debug)]
pub struct BarDerivative {
    phi: BoundaryFunction,
    point: BallPoint,
    pulled: Vec<DVector<f64>>,
    hess_inv: DMatrix<f64>,
}

impl BarDerivative {
    pub fn new(phi: &BoundaryFunction) -> Result<Self> {
        let prob = BarycenterProblem::new(phi)?;
        let sol = solve_barycenter(&prob, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        Self::at(phi, sol.point)
    }

    /// Uses a barycenter already computed for `phi`.
    pub fn at(phi: &BoundaryFunction, point: BallPoint) -> Result<Self> {
        let prob = BarycenterProblem::new(phi)?;
        let pulled = prob.pulled_nodes(point.coords());
        let n = prob.dim();
        let mut hess = DMatrix::zeros(n, n);
        for (w, t) in prob.weights.iter().zip(&pulled) {
            hess.ger(-4.0 * w, t, t, 1.0);
            for k in 0..n {
                hess[(k, k)] += 4.0 * w;
            }
        }
        check_conditioning(&hess)?;
        let hess_inv = hess
            .try_inverse()
            .ok_or(LabError::SingularHessian { ratio: 0.0 })?;
        Ok(Self {
            phi: phi.clone(),
            point,
            pulled,
            hess_inv,
        })
    }

    pub fn point(&self) -> &BallPoint {
        &self.point
    }

    pub fn phi(&self) -> &BoundaryFunction {
        &self.phi
    }

    /// Derivative in ball coordinates at the origin after translating `bar(phi)` there.
    /// A hyperbolic orthonormal frame at `o` is half a Euclidean one.
    pub fn origin_frame(&self, direction: &BoundaryFunction) -> Result<DVector<f64>> {
        if !self.phi.same_grid(direction) {
            return Err(LabError::GridMismatch);
        }
        let grid = self.phi.grid();
        let n = grid.dim();
        let mut a = DVector::zeros(n);
        for (i, t) in self.pulled.iter().enumerate() {
            let c = 2.0 * grid.weight(i) * self.phi.values()[i] * direction.values()[i];
            a.axpy(-2.0 * c, t, 1.0);
        }
        Ok(-(&self.hess_inv * a))
    }

    /// Tangent vector at `bar(phi)` in ball coordinates.
    pub fn apply(&self, direction: &BoundaryFunction) -> Result<TangentVector> {
        let dz = self.origin_frame(direction)?;
        let shrink = 1.0 - self.point.norm_sq();
        Ok(TangentVector::new(self.point.clone(), dz * shrink))
    }
}

/// `dbar_phi(direction)`.
pub fn dbar(phi: &BoundaryFunction, direction: &BoundaryFunction) -> Result<TangentVector> {
    BarDerivative::new(phi)?.apply(direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmeasure::GridScheme;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Arc<QuadratureGrid> {
        Arc::new(QuadratureGrid::default_for(n).unwrap())
    }

    #[test]
    fn constant_function_has_origin_barycenter() {
        for n in 2..=4 {
            let one = BoundaryFunction::constant(grid(n), 1.0);
            let sol = solve_barycenter(&BarycenterProblem::new(&one).unwrap(), 1e-9, 50).unwrap();
            assert!(sol.residual <= 1e-9);
            assert!(sol.point.coords().norm() < 1e-12);
        }
    }

    #[test]
    fn objective_vanishes_at_origin_for_constant() {
        let one = BoundaryFunction::constant(grid(3), 1.0);
        let prob = BarycenterProblem::new(&one).unwrap();
        assert_abs_diff_eq!(bary_objective(&BallPoint::origin(3), &prob).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_nonpositive_and_concentrated() {
        let g = Arc::new(QuadratureGrid::new(2, GridScheme::CircleUniform, 32).unwrap());
        let mut f = BoundaryFunction::constant(Arc::clone(&g), 1.0);
        f.values_mut()[3] = 0.0;
        assert!(BarycenterProblem::new(&f).is_err());
        let mut w = vec![0.0; 32];
        w[5] = 1.0;
        let prob = BarycenterProblem::from_weights(g, w).unwrap();
        assert!(matches!(
            solve_barycenter(&prob, 1e-9, 50),
            Err(LabError::SingularHessian { .. })
        ));
    }
}
