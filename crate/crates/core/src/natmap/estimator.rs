use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::backend::{log_sinh, sphere_area, MetricBackend, VolumeCloud};
use crate::bmeasure::{BoundaryFunction, QuadratureGrid};
use crate::error::{LabError, Result};
use crate::hypcore::{hyp_distance, poisson_unchecked, BallPoint, IdealPoint, MobiusIsometry};

/// Relative size of the discarded tail allowed before an estimate is rejected.
pub const TAIL_REJECT: f64 = 1e-4;
/// Relative tail targeted when the truncation radius is derived automatically.
pub const TAIL_TARGET: f64 = 1e-6;
/// Default number of volume samples.
pub const DEFAULT_MC_COUNT: usize = 200_000;

const CHUNK: usize = 2048;

/// Parameters of the map `Phi^b_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalMapConfig {
    pub c: f64,
    /// Entropy of the target, `n - 1`.
    pub h: f64,
    pub mc_count: usize,
    pub seed: u64,
    /// Truncation radius of the volume integral; derived from the query reach when `None`.
    pub r_trunc: Option<f64>,
}

impl NaturalMapConfig {
    pub fn new(dim: usize, c: f64, mc_count: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            c,
            h: (dim - 1) as f64,
            mc_count,
            seed,
            r_trunc: None,
        };
        cfg.validate(dim)?;
        Ok(cfg)
    }

    pub fn with_truncation(mut self, r: f64) -> Self {
        self.r_trunc = Some(r);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if (self.h - (dim - 1) as f64).abs() > 1e-12 {
            return Err(LabError::InvalidInput(format!(
                "target entropy must be n - 1 = {}, got {}",
                dim - 1,
                self.h
            )));
        }
        if !(self.c > self.h) || !self.c.is_finite() {
            return Err(LabError::InvalidInput(format!("need c > h, got c = {}", self.c)));
        }
        if self.mc_count < 2 {
            return Err(LabError::InvalidInput("mc_count must be at least 2".into()));
        }
        Ok(())
    }

    /// Radius beyond which the integrand carries at most [`TAIL_TARGET`] of the total for query
    /// points within `reach` of the cloud center.
    pub fn truncation_radius(&self, reach: f64) -> f64 {
        self.r_trunc.unwrap_or_else(|| {
            let n = self.h.round() as usize + 1;
            let gap = self.c - self.h;
            // constant of the tail bound against the hyperbolic mass of Psi^2
            let constant = sphere_area(n) * 2f64.powi(1 - n as i32) / (gap * hyperbolic_psi_mass(n, self.c));
            (((1.0 / TAIL_TARGET) * constant.max(1.0)).ln() + self.c * reach) / gap
        })
    }
}

/// `int |Psi_c(p, .)|^2 = omega_{n-1} int_0^inf e^{-c r} sinh^{n-1} r dr` for `b = g0`.
pub fn hyperbolic_psi_mass(n: usize, c: f64) -> f64 {
    let h = (n - 1) as f64;
    let r_max = 40.0 / (c - h).max(1e-3);
    let m = 8000;
    let dr = r_max / m as f64;
    let f = |r: f64| if r == 0.0 { if n == 1 { 1.0 } else { 0.0 } } else { (-c * r + h * log_sinh(r)).exp() };
    let inner: f64 = (1..m)
        .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dr))
        .sum();
    sphere_area(n) * dr / 3.0 * (f(0.0) + inner + f(r_max))
}

/// Monte-Carlo evaluator of `Psi^b_c(p, .)^2` on a fixed boundary grid.
///
/// One volume cloud, centered at the backend's base point, is shared by every query so that
/// finite differences see common random numbers. For each sample `y` the boundary factor
/// `e^{-h B_theta(y)}` is deposited on the grid normalized to unit discrete mass, which is its
/// exact mass when `h = n - 1`.
pub struct PsiEstimator<'a> {
    backend: &'a dyn MetricBackend,
    cfg: NaturalMapConfig,
    grid: Arc<QuadratureGrid>,
    cloud: VolumeCloud,
    /// `P(center, theta_i)^h`.
    center_factor: Vec<f64>,
    /// Grid nodes seen from the cloud center, flat.
    pulled: Vec<f64>,
}

impl<'a> PsiEstimator<'a> {
    /// Estimator for query points within hyperbolic distance `reach` of `center`.
    pub fn new(
        backend: &'a dyn MetricBackend,
        cfg: &NaturalMapConfig,
        grid: Arc<QuadratureGrid>,
        center: &BallPoint,
        reach: f64,
    ) -> Result<Self> {
        let n = backend.dim();
        if grid.dim() != n || center.dim() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: grid.dim().min(center.dim()),
            });
        }
        cfg.validate(n)?;
        let r_max = cfg.truncation_radius(reach);
        let cloud = backend.sample_volume_weighted(center, r_max, cfg.mc_count, cfg.c, cfg.seed)?;
        let to_center = MobiusIsometry::translation(center).inverse();
        let mut pulled = Vec::with_capacity(grid.len() * n);
        let mut center_factor = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let theta = grid.node_vec(i);
            center_factor.push(poisson_unchecked(center.coords(), &theta).powf(cfg.h));
            let t = to_center.apply_ideal(&IdealPoint::new(theta)?);
            pulled.extend(t.dir().iter());
        }
        Ok(Self {
            backend,
            cfg: cfg.clone(),
            grid,
            cloud,
            center_factor,
            pulled,
        })
    }

    pub fn config(&self) -> &NaturalMapConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn cloud(&self) -> &VolumeCloud {
        &self.cloud
    }

    pub fn backend(&self) -> &dyn MetricBackend {
        self.backend
    }

    /// Deposits of samples `range`, one grid column per sample (`N x len`).
    fn deposits(&self, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let n = self.grid.dim();
        let nodes = self.grid.len();
        let q = self.grid.weights();
        let h = self.cfg.h;
        let h_int = if h.fract() == 0.0 { Some(h as i32) } else { None };
        let mut out = DMatrix::zeros(nodes, range.len());
        out.as_mut_slice()
            .par_chunks_mut(nodes)
            .zip(range.into_par_iter())
            .for_each(|(col, j)| {
                let w = self.cloud.dir(j);
                let e2r = (-2.0 * self.cloud.radius(j)).exp();
                let mut lo = f64::INFINITY;
                for (i, v) in col.iter_mut().enumerate() {
                    let t = &self.pulled[i * n..(i + 1) * n];
                    let gap: f64 = w.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                    // (cosh r - u sinh r) e^{-r} with 1 - u = gap / 2
                    let base = (0.25 * gap + e2r * (1.0 - 0.25 * gap)).max(1e-150);
                    lo = lo.min(base);
                    *v = base;
                }
                let mut mass = 0.0;
                for (i, v) in col.iter_mut().enumerate() {
                    let ratio = lo / *v;
                    let d = match h_int {
                        Some(k) => ratio.powi(k),
                        None => ratio.powf(h),
                    };
                    *v = d;
                    mass += q[i] * self.center_factor[i] * d;
                }
                let inv = 1.0 / mass;
                for v in col.iter_mut() {
                    *v *= inv;
                }
            });
        out
    }

    /// `Psi^2(p, theta_i)` for groups of query points. Each group shares one anchor (the first
    /// point of the group) for backend decisions. Returns one vector of node values per point.
    pub fn psi_sq_groups(&self, groups: &[Vec<BallPoint>]) -> Result<Vec<Vec<f64>>> {
        let total: usize = groups.iter().map(|g| g.len()).sum();
        let nodes = self.grid.len();
        let m = self.cloud.len();
        let c = self.cfg.c;
        let mut acc = DMatrix::<f64>::zeros(nodes, total);
        let mut start = 0;
        while start < m {
            let end = (start + CHUNK).min(m);
            let k = self.deposits(start..end);
            let mut a = DMatrix::<f64>::zeros(end - start, total);
            let mut col = 0;
            for g in groups {
                if g.is_empty() {
                    continue;
                }
                let d = self
                    .backend
                    .cloud_distances(&self.cloud, &g[0], g, start..end)?;
                for (s, row) in d.chunks(end - start).enumerate() {
                    let dst = a.column_mut(col + s);
                    for (jj, (slot, dist)) in dst.into_iter().zip(row).enumerate() {
                        *slot = (self.cloud.log_weight(start + jj) - c * dist).exp();
                    }
                }
                col += g.len();
            }
            acc.gemm(1.0, &k, &a, 1.0);
            start = end;
        }
        let mut out = Vec::with_capacity(total);
        let flat: Vec<&BallPoint> = groups.iter().flatten().collect();
        for (s, p) in flat.into_iter().enumerate() {
            let vals: Vec<f64> = acc
                .column(s)
                .iter()
                .zip(&self.center_factor)
                .map(|(v, f)| v * f)
                .collect();
            let norm_sq: f64 = vals.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum();
            if !(norm_sq > 0.0) || vals.iter().any(|v| !(*v > 0.0)) {
                return Err(LabError::ZeroFunction);
            }
            let tail = self.tail_bound(p) / norm_sq;
            if tail > TAIL_REJECT {
                return Err(LabError::TailNotConverged {
                    relative_tail: tail,
                });
            }
            out.push(vals);
        }
        Ok(out)
    }

    /// Upper bound on the `int |Psi|^2 dmu` mass dropped by truncation, for query `p`.
    ///
    /// Uses `d_b(p, y) >= r - rho`, `sinh r <= e^r / 2` and unit visual mass, valid when
    /// `b >= g0` outside the truncation ball.
    pub fn tail_bound(&self, p: &BallPoint) -> f64 {
        let n = self.grid.dim();
        let rho = hyp_distance(self.cloud.center(), p);
        let (c, h) = (self.cfg.c, self.cfg.h);
        let r = self.cloud.r_max();
        (c * rho - (c - h) * r).exp() * sphere_area(n) * 2f64.powi(1 - n as i32) / (c - h)
    }

    pub fn psi_sq(&self, p: &BallPoint) -> Result<Vec<f64>> {
        Ok(self.psi_sq_groups(&[vec![p.clone()]])?.remove(0))
    }

    /// Unnormalized `Psi^b_c(p, .)`.
    pub fn psi(&self, p: &BallPoint) -> Result<BoundaryFunction> {
        let v = self.psi_sq(p)?;
        BoundaryFunction::new(Arc::clone(&self.grid), v.into_iter().map(f64::sqrt).collect())
    }

    /// `Phi^b_c(p, .)`, the normalized square root.
    pub fn phi(&self, p: &BallPoint) -> Result<BoundaryFunction> {
        Ok(self.phi_groups(&[vec![p.clone()]])?.remove(0))
    }

    pub fn phi_groups(&self, groups: &[Vec<BallPoint>]) -> Result<Vec<BoundaryFunction>> {
        self.psi_sq_groups(groups)?
            .into_iter()
            .map(|v| {
                let f = BoundaryFunction::new(
                    Arc::clone(&self.grid),
                    v.into_iter().map(f64::sqrt).collect(),
                )?;
                let norm = f.norm();
                Ok(f.scaled(1.0 / norm))
            })
            .collect()
    }
}
