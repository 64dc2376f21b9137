use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::backend::MetricBackend;
use super::estimator::NaturalMapConfig;
use super::exhaustion::Slice;
use super::maps::{phi0, NaturalMap};
use crate::bmeasure::{BoundaryFunction, QuadratureGrid};
use crate::calib::off_sphere_comass_bound;
use crate::error::{LabError, Result};
use crate::fd::{Stencil, FD_STEP};
use crate::hypcore::{half_space_to_ball, BallPoint, CuspModel, MobiusIsometry};
use crate::rng::stream_rng;

/// Batch evaluation of a map into positive unit functions.
pub type BatchMap<'f> = dyn Fn(&[BallPoint]) -> Result<Vec<BoundaryFunction>> + 'f;

/// One sampled `(x, t, v)` for the straight-line homotopy.
#[derive(Clone, Debug)]
pub struct HomotopySample {
    pub point: BallPoint,
    pub time: f64,
    /// Chart vector at `point`.
    pub direction: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyMeasurement {
    /// `|dH^t(v)|^2`.
    pub space: f64,
    /// `|dTheta(v)|^2 + |dUpsilon(v)|^2`.
    pub space_bound: f64,
    /// `|dH/dt|^2`.
    pub time_sq: f64,
    /// `|H(x, t)|`.
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyReport {
    pub measurements: Vec<HomotopyMeasurement>,
    /// Largest `space / space_bound`.
    pub max_space_ratio: f64,
    pub max_time_sq: f64,
    pub min_norm: f64,
}

impl HomotopyReport {
    pub fn space_ok(&self) -> bool {
        self.max_space_ratio <= 1.0 + 1e-9
    }

    pub fn time_ok(&self) -> bool {
        self.max_time_sq <= 2.0
    }

    pub fn norm_ok(&self) -> bool {
        self.min_norm >= 0.5
    }
}

/// Random points within `radius` of `o`, uniform times and random unit-`g0` directions.
pub fn homotopy_samples(dim: usize, count: usize, radius: f64, seed: u64) -> Vec<HomotopySample> {
    let mut rng = stream_rng(seed, 0x686f_6d6f);
    (0..count)
        .map(|_| {
            let point = MobiusIsometry::random(&mut rng, dim, radius).origin_image();
            let v: DVector<f64> = DVector::from_fn(dim, |_, _| rng.sample(StandardNormal));
            let direction = v.normalize() / point.conformal_factor();
            HomotopySample {
                point,
                time: rng.random::<f64>(),
                direction,
            }
        })
        .collect()
}

fn line_points(s: &HomotopySample) -> Result<Vec<BallPoint>> {
    let h = FD_STEP;
    [0.0, h, -h, 0.5 * h, -0.5 * h]
        .iter()
        .map(|t| {
            BallPoint::new(s.point.coords() + &s.direction * (t / s.direction.norm()))
                .map_err(|_| LabError::StencilOutOfDomain)
        })
        .collect()
}

/// Richardson directional derivative from values at `x, x +- h, x +- h/2`.
fn line_derivative(vals: &[&[f64]], scale: f64) -> Vec<f64> {
    let h = FD_STEP;
    (0..vals[0].len())
        .map(|i| {
            let full = (vals[1][i] - vals[2][i]) / (2.0 * h);
            let half = (vals[3][i] - vals[4][i]) / h;
            scale * (4.0 * half - full) / 3.0
        })
        .collect()
}

fn blend(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

fn l2_sq(grid: &QuadratureGrid, v: &[f64]) -> f64 {
    v.iter().zip(grid.weights()).map(|(a, w)| w * a * a).sum()
}

/// Finite-difference check of the straight-line homotopy `H = (1 - t) Theta + t Upsilon`.
pub fn homotopy_stretch_bounds(
    theta: &BatchMap<'_>,
    upsilon: &BatchMap<'_>,
    samples: &[HomotopySample],
) -> Result<HomotopyReport> {
    let mut pts = Vec::with_capacity(5 * samples.len());
    for s in samples {
        pts.extend(line_points(s)?);
    }
    let th = theta(&pts)?;
    let up = upsilon(&pts)?;
    if th.len() != pts.len() || up.len() != pts.len() {
        return Err(LabError::InvalidInput("map returned the wrong number of functions".into()));
    }
    let mut measurements = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let th_k: Vec<&[f64]> = th[5 * k..5 * k + 5].iter().map(|f| f.values()).collect();
        let up_k: Vec<&[f64]> = up[5 * k..5 * k + 5].iter().map(|f| f.values()).collect();
        let grid = th[5 * k].grid();
        if !Arc::ptr_eq(grid, up[5 * k].grid()) && **grid != **up[5 * k].grid() {
            return Err(LabError::GridMismatch);
        }
        // H^t is differenced directly, not through the linear formula
        let h_vals: Vec<Vec<f64>> = (0..5).map(|j| blend(th_k[j], up_k[j], s.time)).collect();
        let h_refs: Vec<&[f64]> = h_vals.iter().map(|v| v.as_slice()).collect();
        let scale = s.direction.norm();
        let dh = line_derivative(&h_refs, scale);
        let dth = line_derivative(&th_k, scale);
        let dup = line_derivative(&up_k, scale);
        let dt = FD_STEP;
        let time_d: Vec<f64> = {
            let at = |t: f64| blend(th_k[0], up_k[0], t);
            let (p, m) = (at(s.time + dt), at(s.time - dt));
            let (ph, mh) = (at(s.time + 0.5 * dt), at(s.time - 0.5 * dt));
            (0..p.len())
                .map(|i| (4.0 * (ph[i] - mh[i]) / dt - (p[i] - m[i]) / (2.0 * dt)) / 3.0)
                .collect()
        };
        measurements.push(HomotopyMeasurement {
            space: l2_sq(grid, &dh),
            space_bound: l2_sq(grid, &dth) + l2_sq(grid, &dup),
            time_sq: l2_sq(grid, &time_d),
            norm: l2_sq(grid, &h_vals[0]).sqrt(),
        });
    }
    let max_space_ratio = measurements
        .iter()
        .map(|m| if m.space_bound > 0.0 { m.space / m.space_bound } else { 0.0 })
        .fold(0.0, f64::max);
    let max_time_sq = measurements.iter().map(|m| m.time_sq).fold(0.0, f64::max);
    let min_norm = measurements.iter().map(|m| m.norm).fold(f64::INFINITY, f64::min);
    Ok(HomotopyReport {
        measurements,
        max_space_ratio,
        max_time_sq,
        min_norm,
    })
}

/// Per-slice outcome of the Stokes error experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct StokesSlice {
    pub level: f64,
    pub slice_volume: f64,
    /// Largest singular value of `dH` on `L x [0, 1]` over the samples.
    pub lipschitz: f64,
    /// `comass * Lip^n * Vol(L)`.
    pub error_estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StokesReport {
    pub slices: Vec<StokesSlice>,
    /// `((c^2 + h^2)/4 + 2)^{1/2}`.
    pub lipschitz_bound: f64,
    pub comass_bound: f64,
    /// First over last error estimate.
    pub decrease: f64,
}

impl StokesReport {
    pub fn max_lipschitz(&self) -> f64 {
        self.slices.iter().map(|s| s.lipschitz).fold(0.0, f64::max)
    }

    pub fn lipschitz_ok(&self, slack: f64) -> bool {
        self.max_lipschitz() <= self.lipschitz_bound * (1.0 + slack)
    }
}

/// `((c^2 + h^2)/4 + 2)^{1/2}`.
pub fn homotopy_lipschitz_bound(c: f64, h: f64) -> f64 {
    ((c * c + h * h) / 4.0 + 2.0).sqrt()
}

/// Straight-line homotopy from `Phi^b_c` to `Phi_0` restricted to horospherical cusp slices.
///
/// The slice at depth `t` is `{z = e^t}` over a fundamental domain in upper half space. The
/// dilation by `e^{-t}` is an isometry of `g0` and moves it to the patch
/// `e^{-t} F x {1}` through the origin, where the `y` coordinate vectors are unit and orthogonal.
pub fn stokes_error_experiment(
    backend: &dyn MetricBackend,
    cfg: &NaturalMapConfig,
    cusp: &CuspModel,
    slices: &[Slice],
    grid: &Arc<QuadratureGrid>,
    samples_per_slice: usize,
    seed: u64,
) -> Result<StokesReport> {
    let n = backend.dim();
    if cusp.dim() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: cusp.dim(),
        });
    }
    if slices.is_empty() {
        return Err(LabError::NoLevelsFound);
    }
    let k = n - 1;
    let lattice = cusp.lattice();
    // farthest patch corner, to size the volume integral
    let mut reach: f64 = 0.0;
    for corner in 0..(1usize << k) {
        let u = DVector::from_fn(k, |i, _| ((corner >> i) & 1) as f64);
        let y = lattice * u;
        reach = reach.max(half_space_to_ball(&y, 1.0)?.dist_to_origin());
    }
    let map = NaturalMap::new(backend, cfg, Arc::clone(grid), reach + 0.1)?;
    let comass = off_sphere_comass_bound(n, cfg.h);
    let mut rng = stream_rng(seed, 0x7374_6f6b);
    let mut out = Vec::with_capacity(slices.len());
    for slice in slices {
        let shrink = (-slice.level).exp();
        let mut stencils = Vec::with_capacity(samples_per_slice);
        let mut groups = Vec::with_capacity(samples_per_slice);
        let mut times = Vec::with_capacity(samples_per_slice);
        for _ in 0..samples_per_slice {
            let u = DVector::from_fn(k, |_, _| rng.random::<f64>());
            let y = lattice * u * shrink;
            let st = Stencil::new(y, FD_STEP);
            let pts = st
                .points()
                .iter()
                .map(|q| half_space_to_ball(q, 1.0))
                .collect::<Result<Vec<_>>>()?;
            stencils.push(st);
            groups.push(pts);
            times.push(rng.random::<f64>());
        }
        let theta = map.estimator().phi_groups(&groups)?;
        let mut lip: f64 = 0.0;
        let mut offset = 0;
        for ((st, pts), t) in stencils.iter().zip(&groups).zip(&times) {
            let mut h_vals = Vec::with_capacity(pts.len());
            let mut th0 = None;
            let mut up0 = None;
            for (j, p) in pts.iter().enumerate() {
                let th = &theta[offset + j];
                let up = phi0(p, grid)?;
                h_vals.push(blend(th.values(), up.values(), *t));
                if j == 0 {
                    th0 = Some(th.values().to_vec());
                    up0 = Some(up.into_values());
                }
            }
            let mut cols = st.derivative(&h_vals);
            let (th0, up0) = (th0.expect("center"), up0.expect("center"));
            cols.push(up0.iter().zip(&th0).map(|(a, b)| a - b).collect());
            let gram = DMatrix::from_fn(n, n, |a, b| {
                cols[a]
                    .iter()
                    .zip(&cols[b])
                    .zip(grid.weights())
                    .map(|((x, y), w)| w * x * y)
                    .sum::<f64>()
            });
            let top = SymmetricEigen::new(gram).eigenvalues.max();
            lip = lip.max(top.max(0.0).sqrt());
            offset += pts.len();
        }
        let volume = cusp.slice_volume(slice.level)?;
        out.push(StokesSlice {
            level: slice.level,
            slice_volume: volume,
            lipschitz: lip,
            error_estimate: comass * lip.powi(n as i32) * volume,
        });
    }
    let decrease = out[0].error_estimate / out[out.len() - 1].error_estimate;
    Ok(StokesReport {
        slices: out,
        lipschitz_bound: homotopy_lipschitz_bound(cfg.c, cfg.h),
        comass_bound: comass,
        decrease,
    })
}
