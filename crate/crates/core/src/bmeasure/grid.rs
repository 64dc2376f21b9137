use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;

use crate::error::{LabError, Result};

/// Discretization scheme for the unit sphere `S^{n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridScheme {
    /// `resolution` equally spaced nodes on the circle; `n = 2` only.
    CircleUniform,
    /// Spherical Fibonacci lattice with `resolution` nodes; `n = 3` only.
    FibonacciSphere,
    /// Tensor Gauss rule with `resolution` nodes per polar angle and `2 * resolution` azimuths.
    ProductGauss,
}

impl GridScheme {
    pub fn name(self) -> &'static str {
        match self {
            GridScheme::CircleUniform => "circle_uniform",
            GridScheme::FibonacciSphere => "fibonacci_sphere",
            GridScheme::ProductGauss => "product_gauss",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "circle_uniform" => Ok(GridScheme::CircleUniform),
            "fibonacci_sphere" => Ok(GridScheme::FibonacciSphere),
            "product_gauss" => Ok(GridScheme::ProductGauss),
            other => Err(LabError::InvalidInput(format!("unknown grid scheme {other}"))),
        }
    }
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Quadrature rule for the normalized visual measure `mu_o` on `S^{n-1}`.
///
/// Weights are positive and sum to one. Nodes are stored row-major in a flat buffer.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    dim: usize,
    scheme: GridScheme,
    resolution: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for QuadratureGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.scheme == other.scheme && self.resolution == other.resolution
    }
}

impl QuadratureGrid {
    pub fn new(dim: usize, scheme: GridScheme, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(LabError::InvalidInput(format!(
                "grid resolution {resolution} below the minimum of 8"
            )));
        }
        let (nodes, weights) = match (scheme, dim) {
            (GridScheme::CircleUniform, 2) => circle(resolution),
            (GridScheme::CircleUniform, _) => {
                return Err(LabError::UnsupportedDimension {
                    dim,
                    reason: "circle_uniform needs n = 2",
                })
            }
            (GridScheme::FibonacciSphere, 3) => fibonacci(resolution),
            (GridScheme::FibonacciSphere, _) => {
                return Err(LabError::UnsupportedDimension {
                    dim,
                    reason: "fibonacci_sphere needs n = 3",
                })
            }
            (GridScheme::ProductGauss, 2..=4) => product_gauss(dim, resolution),
            (GridScheme::ProductGauss, _) => {
                return Err(LabError::UnsupportedDimension {
                    dim,
                    reason: "product_gauss supports 2 <= n <= 4",
                })
            }
        };
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            scheme,
            resolution,
            nodes,
            weights,
        })
    }

    /// Default grid per dimension: 512 circle nodes, 3200 and 4394 product-Gauss nodes.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::new(2, GridScheme::CircleUniform, 512),
            3 => Self::new(3, GridScheme::ProductGauss, 40),
            4 => Self::new(4, GridScheme::ProductGauss, 13),
            _ => Err(LabError::UnsupportedDimension {
                dim,
                reason: "grids exist for 2 <= n <= 4",
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_vec(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.node(i))
    }

    pub fn nodes_flat(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `sum_i w_i f(theta_i)` in node order.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.node(i))).sum()
    }

    /// Indices and chord distances of the `k` nodes closest to `x`, nearest first.
    pub fn nearest(&self, x: &[f64], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        for i in 0..self.len() {
            let node = self.node(i);
            let d2: f64 = node.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() < k || d2 < best[best.len() - 1].1 {
                let pos = best.partition_point(|&(_, d)| d <= d2);
                best.insert(pos, (i, d2));
                best.truncate(k);
            }
        }
        best.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }

    /// CSV dump: node coordinates and weight, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 0..self.dim {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("weight\n");
        for i in 0..self.len() {
            for c in self.node(i) {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{:.17e}\n", self.weights[i]));
        }
        out
    }
}

fn circle(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(2 * count);
    for i in 0..count {
        let a = 2.0 * PI * i as f64 / count as f64;
        nodes.push(a.cos());
        nodes.push(a.sin());
    }
    (nodes, vec![1.0; count])
}

fn fibonacci(count: usize) -> (Vec<f64>, Vec<f64>) {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let mut nodes = Vec::with_capacity(3 * count);
    for i in 0..count {
        let z = 1.0 - (2 * i + 1) as f64 / count as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let a = golden_angle * i as f64;
        nodes.extend_from_slice(&[r * a.cos(), r * a.sin(), z]);
    }
    (nodes, vec![1.0; count])
}

/// Recursive tensor rule: `x_1 = t` carries weight `(1-t^2)^{(n-3)/2}` and the rest is
/// `sqrt(1-t^2)` times a point of `S^{n-2}`.
fn product_gauss(dim: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    if dim == 2 {
        return circle(2 * m);
    }
    let (ts, tw) = match dim {
        3 => gauss_legendre(m),
        4 => gauss_chebyshev_second(m),
        _ => unreachable!("validated by caller"),
    };
    let (sub_nodes, sub_weights) = product_gauss(dim - 1, m);
    let sub_dim = dim - 1;
    let mut nodes = Vec::with_capacity(ts.len() * sub_weights.len() * dim);
    let mut weights = Vec::with_capacity(ts.len() * sub_weights.len());
    for (t, w) in ts.iter().zip(&tw) {
        let s = (1.0 - t * t).sqrt();
        for (j, sw) in sub_weights.iter().enumerate() {
            nodes.push(*t);
            nodes.extend(sub_nodes[j * sub_dim..(j + 1) * sub_dim].iter().map(|c| c * s));
            weights.push(w * sw);
        }
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_m`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        let mut x = (PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Chebyshev rule of the second kind: `int sqrt(1-t^2) f(t) dt`.
fn gauss_chebyshev_second(m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = PI / (m as f64 + 1.0);
    (1..=m)
        .map(|k| {
            let a = k as f64 * h;
            (a.cos(), h * a.sin() * a.sin())
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let sum: f64 = w.iter().sum();
        assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-14);
        let m18: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_abs_diff_eq!(m18, 2.0 / 19.0, epsilon = 1e-14);
    }

    #[test]
    fn scheme_dimension_checks() {
        assert!(matches!(
            QuadratureGrid::new(3, GridScheme::CircleUniform, 64),
            Err(LabError::UnsupportedDimension { .. })
        ));
        assert!(QuadratureGrid::new(2, GridScheme::FibonacciSphere, 64).is_err());
        assert!(QuadratureGrid::new(5, GridScheme::ProductGauss, 8).is_err());
        assert!(QuadratureGrid::new(2, GridScheme::CircleUniform, 4).is_err());
    }

    #[test]
    fn circle_grid_is_uniform() {
        let g = QuadratureGrid::new(2, GridScheme::CircleUniform, 256).unwrap();
        assert_eq!(g.len(), 256);
        assert!(g.weights().iter().all(|&w| (w - 1.0 / 256.0).abs() < 1e-18));
    }

    #[test]
    fn node_counts_and_unit_nodes() {
        for (dim, scheme, res, count) in [
            (3, GridScheme::FibonacciSphere, 2000, 2000),
            (3, GridScheme::ProductGauss, 32, 32 * 64),
            (4, GridScheme::ProductGauss, 13, 13 * 13 * 26),
        ] {
            let g = QuadratureGrid::new(dim, scheme, res).unwrap();
            assert_eq!(g.len(), count);
            for i in 0..g.len() {
                let r: f64 = g.node(i).iter().map(|c| c * c).sum();
                assert_abs_diff_eq!(r, 1.0, epsilon = 1e-13);
            }
            assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nearest_neighbours_sorted() {
        let g = QuadratureGrid::new(2, GridScheme::CircleUniform, 16).unwrap();
        let near = g.nearest(&[1.0, 0.0], 3);
        assert_eq!(near[0].0, 0);
        assert!(near[0].1 < 1e-15);
        assert!(near[1].1 <= near[2].1);
    }
}
