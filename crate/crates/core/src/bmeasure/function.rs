use std::sync::Arc;

use nalgebra::DVector;

use super::grid::QuadratureGrid;
use crate::error::{LabError, Result};
use crate::hypcore::{busemann_unchecked, poisson_unchecked, BallPoint, MobiusIsometry};

/// Number of neighbours used by the inverse-distance interpolation in [`isom_action`].
pub const IDW_NEIGHBOURS: usize = 4;

/// Real function on the boundary sphere, sampled at the nodes of a quadrature grid.
#[derive(Clone, Debug)]
pub struct BoundaryFunction {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
}

impl PartialEq for BoundaryFunction {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.values == other.values
    }
}

impl BoundaryFunction {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<QuadratureGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Arc<QuadratureGrid>, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(LabError::GridMismatch)
        }
    }

    /// `sum_i w_i phi_i psi_i`.
    pub fn l2_inner(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, a)| w * a * a)
            .sum::<f64>()
            .sqrt()
    }

    /// `sum_i w_i phi_i`.
    pub fn integral(&self) -> f64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, a)| w * a).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// `phi / |phi|`, the radial projection onto the unit sphere of L^2.
    pub fn radial_project(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(LabError::ZeroFunction);
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Value at an arbitrary unit vector by inverse-distance weighting over the
    /// [`IDW_NEIGHBOURS`] closest nodes.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let near = self.grid.nearest(x, IDW_NEIGHBOURS);
        if near[0].1 < 1e-12 {
            return self.values[near[0].0];
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, d) in near {
            let w = 1.0 / (d * d);
            num += w * self.values[i];
            den += w;
        }
        num / den
    }

    /// CSV dump: node coordinates, weight and value per node.
    pub fn to_csv(&self) -> String {
        let dim = self.grid.dim();
        let mut out = String::new();
        for j in 0..dim {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("weight,value\n");
        for i in 0..self.len() {
            for c in self.grid.node(i) {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{:.17e},{:.17e}\n", self.grid.weight(i), self.values[i]));
        }
        out
    }
}

/// `free` form of [`BoundaryFunction::l2_inner`].
pub fn l2_inner(phi: &BoundaryFunction, psi: &BoundaryFunction) -> Result<f64> {
    phi.l2_inner(psi)
}

/// Density of the visual measure `mu_x` against `mu_o`: `P(x, theta)^{n-1}`.
pub fn visual_density(x: &BallPoint, grid: &Arc<QuadratureGrid>) -> Result<BoundaryFunction> {
    x.guard()?;
    check_dim(grid, x.dim())?;
    let exp = (x.dim() - 1) as i32;
    let xc = x.coords();
    Ok(BoundaryFunction::from_fn(Arc::clone(grid), |t| {
        poisson_unchecked(xc, &DVector::from_column_slice(t)).powi(exp)
    }))
}

/// `(gamma.phi)(theta) = phi(gamma^{-1} theta) * exp(-h/2 * B_theta(gamma o))`, with
/// `phi(gamma^{-1} theta)` interpolated from the grid.
pub fn isom_action(
    gamma: &MobiusIsometry,
    phi: &BoundaryFunction,
    h: f64,
) -> Result<BoundaryFunction> {
    let grid = phi.grid();
    check_dim(grid, gamma.dim())?;
    let inv = gamma.inverse();
    isom_action_with(gamma, grid, h, |theta| {
        let pulled = inv.apply_coords(theta);
        phi.interpolate(pulled.as_slice())
    })
}

/// Same action for a function known in closed form; no interpolation error.
pub fn isom_action_exact<F: Fn(&DVector<f64>) -> f64>(
    gamma: &MobiusIsometry,
    f: F,
    h: f64,
    grid: &Arc<QuadratureGrid>,
) -> Result<BoundaryFunction> {
    check_dim(grid, gamma.dim())?;
    let inv = gamma.inverse();
    isom_action_with(gamma, grid, h, |theta| f(&inv.apply_coords(theta)))
}

fn isom_action_with<F: Fn(&DVector<f64>) -> f64>(
    gamma: &MobiusIsometry,
    grid: &Arc<QuadratureGrid>,
    h: f64,
    pulled_value: F,
) -> Result<BoundaryFunction> {
    let go = gamma.origin_image();
    go.guard()?;
    let values = (0..grid.len())
        .map(|i| {
            let theta = grid.node_vec(i);
            let factor = (-0.5 * h * busemann_unchecked(&theta, go.coords())).exp();
            pulled_value(&theta) * factor
        })
        .collect();
    BoundaryFunction::new(Arc::clone(grid), values)
}

fn check_dim(grid: &QuadratureGrid, dim: usize) -> Result<()> {
    if grid.dim() != dim {
        return Err(LabError::DimensionMismatch {
            expected: grid.dim(),
            got: dim,
        });
    }
    Ok(())
}
