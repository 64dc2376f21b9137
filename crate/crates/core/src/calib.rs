//! The calibrating form `Omega = bar^*(dvol_g0)` on positive boundary functions and its comass.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::barycenter::BarDerivative;
use crate::bmeasure::{BoundaryFunction, QuadratureGrid};
use crate::error::{LabError, Result};
use crate::fd::{Stencil, FD_STEP};
use crate::hypcore::{BallPoint, MobiusIsometry};
use crate::natmap::{dphi0, phi0};
use crate::rng::stream_rng;

/// Default tolerance of the calibration identity.
pub const CALIBRATION_TOL: f64 = 2e-2;

/// `(4n / h^2)^{n/2}`, the comass of `Omega` on the unit sphere of positive functions.
pub fn comass_bound(n: usize, h: f64) -> f64 {
    (4.0 * n as f64 / (h * h)).powf(0.5 * n as f64)
}

/// Bound off the half ball `B(0, 0.5)`: radial projection is 2-Lipschitz there.
pub fn off_sphere_comass_bound(n: usize, h: f64) -> f64 {
    2f64.powi(n as i32) * comass_bound(n, h)
}

/// One evaluation of `Omega`.
#[derive(Clone, Debug)]
pub struct FormEvaluation {
    pub base: BoundaryFunction,
    pub frame: Vec<BoundaryFunction>,
    pub value: f64,
}

/// `Omega_phi` with the barycenter derivative precomputed, for many frames at one base.
pub struct OmegaAt {
    deriv: BarDerivative,
}

impl OmegaAt {
    pub fn new(phi: &BoundaryFunction) -> Result<Self> {
        Ok(Self {
            deriv: BarDerivative::new(phi)?,
        })
    }

    pub fn barycenter(&self) -> &BallPoint {
        self.deriv.point()
    }

    /// `dvol_g0(dbar(f_1), ..., dbar(f_n))`. At the origin the metric is `4 I`, and the
    /// translation carrying `bar(phi)` there preserves orientation.
    pub fn eval(&self, frame: &[BoundaryFunction]) -> Result<f64> {
        let n = self.deriv.phi().grid().dim();
        if frame.len() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: frame.len(),
            });
        }
        let mut m = DMatrix::zeros(n, n);
        for (k, f) in frame.iter().enumerate() {
            m.set_column(k, &self.deriv.origin_frame(f)?);
        }
        Ok(2f64.powi(n as i32) * m.determinant())
    }
}

pub fn eval_omega(phi: &BoundaryFunction, frame: &[BoundaryFunction]) -> Result<FormEvaluation> {
    let value = OmegaAt::new(phi)?.eval(frame)?;
    Ok(FormEvaluation {
        base: phi.clone(),
        frame: frame.to_vec(),
        value,
    })
}

/// Gram-Schmidt in `L^2(mu_o)`, optionally after projecting out `normal`.
pub fn orthonormalize(
    vectors: &[BoundaryFunction],
    normal: Option<&BoundaryFunction>,
) -> Result<Vec<BoundaryFunction>> {
    let mut basis: Vec<BoundaryFunction> = Vec::with_capacity(vectors.len() + 1);
    if let Some(nu) = normal {
        let norm = nu.norm();
        if !(norm > 0.0) {
            return Err(LabError::ZeroFunction);
        }
        basis.push(nu.scaled(1.0 / norm));
    }
    let skip = basis.len();
    for v in vectors {
        let mut w = v.clone();
        // two passes keep the result orthogonal to round-off
        for _ in 0..2 {
            for b in &basis {
                let c = w.l2_inner(b)?;
                w = w.lin_comb(1.0, b, -c)?;
            }
        }
        let norm = w.norm();
        if !(norm > 1e-10 * v.norm().max(1e-300)) {
            return Err(LabError::DegenerateFrame);
        }
        basis.push(w.scaled(1.0 / norm));
    }
    Ok(basis.split_off(skip))
}

/// Pushed frame `dPhi_0(e_k / lambda(p))` of a `g0`-orthonormal basis at `p`.
pub fn phi0_frame(p: &BallPoint, grid: &Arc<QuadratureGrid>) -> Result<Vec<BoundaryFunction>> {
    let n = p.dim();
    let lam = p.conformal_factor();
    (0..n)
        .map(|k| {
            let mut e = DVector::zeros(n);
            e[k] = 1.0 / lam;
            dphi0(p, &e, grid)
        })
        .collect()
}

/// `(Omega(frame), comass * sqrt(det Gram(frame)))`.
pub fn calibration_sides(phi: &BoundaryFunction, frame: &[BoundaryFunction]) -> Result<(f64, f64)> {
    let n = frame.len();
    let h = (n - 1) as f64;
    let lhs = OmegaAt::new(phi)?.eval(frame)?;
    let gram = DMatrix::from_fn(n, n, |i, j| frame[i].l2_inner(&frame[j]).unwrap_or(f64::NAN));
    let rhs = comass_bound(n, h) * gram.determinant().max(0.0).sqrt();
    Ok((lhs, rhs))
}

/// Relative gap `|lhs - rhs| / rhs` of the calibration identity for `Phi_0` at `p`.
pub fn calibration_defect(p: &BallPoint, grid: &Arc<QuadratureGrid>) -> Result<f64> {
    let phi = phi0(p, grid)?;
    let frame = phi0_frame(p, grid)?;
    let (lhs, rhs) = calibration_sides(&phi, &frame)?;
    Ok((lhs - rhs).abs() / rhs)
}

pub fn calibration_identity_check(p: &BallPoint, tolerance: f64, grid: &Arc<QuadratureGrid>) -> Result<bool> {
    Ok(calibration_defect(p, grid)? <= tolerance)
}

/// Same defect for any immersion `theta`, differentiated by Richardson differences.
pub fn immersion_calibration_defect<F>(theta: F, p: &BallPoint) -> Result<f64>
where
    F: Fn(&BallPoint) -> Result<BoundaryFunction>,
{
    let n = p.dim();
    let stencil = Stencil::new(p.coords().clone(), FD_STEP);
    let mut vals = Vec::with_capacity(stencil.len());
    let mut center = None;
    for x in stencil.points() {
        let q = BallPoint::new(x).map_err(|_| LabError::StencilOutOfDomain)?;
        let f = theta(&q)?;
        vals.push(f.values().to_vec());
        center.get_or_insert(f);
    }
    let phi = center.expect("stencil has a center");
    let lam = p.conformal_factor();
    let frame = stencil
        .derivative(&vals)
        .into_iter()
        .map(|c| BoundaryFunction::new(Arc::clone(phi.grid()), c).map(|f| f.scaled(1.0 / lam)))
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(frame.len(), n);
    let (lhs, rhs) = calibration_sides(&phi, &frame)?;
    Ok((lhs - rhs).abs() / rhs)
}

/// `p -> normalize((1 + a theta_1) Phi_0(p))`: an equivariance-breaking immersion whose tangent
/// planes are not calibrated. Its barycenter map is not the identity.
pub fn anisotropic_immersion(
    p: &BallPoint,
    strength: f64,
    grid: &Arc<QuadratureGrid>,
) -> Result<BoundaryFunction> {
    if !(strength.abs() < 1.0) {
        return Err(LabError::InvalidInput("weight must stay positive".into()));
    }
    let base = phi0(p, grid)?;
    let w = BoundaryFunction::from_fn(Arc::clone(grid), |t| 1.0 + strength * t[0]);
    let vals = base
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| a * b)
        .collect();
    let f = BoundaryFunction::new(Arc::clone(grid), vals)?;
    let norm = f.norm();
    Ok(f.scaled(1.0 / norm))
}

/// Draws `(phi, frame)` pairs; sample `index` owns its own random stream.
pub trait FrameSampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, index: u64) -> Result<(BoundaryFunction, Vec<BoundaryFunction>)>;
}

/// Random positive `phi` built as a smooth modulation of `Phi_0(p)`, and orthonormal frames from
/// smooth bump combinations.
pub struct RandomFrameSampler {
    grid: Arc<QuadratureGrid>,
    seed: u64,
    /// `|p|` for the underlying `Phi_0(p)`.
    pub max_coord: f64,
    /// Range of `||phi||`; `(1, 1)` samples the unit sphere.
    pub norm_range: (f64, f64),
    /// Project frames orthogonally to `phi`.
    pub tangent: bool,
    /// Share of samples drawn as a perturbed calibrated frame at `Phi_0(p)`.
    pub calibrated_share: f64,
    pub bumps: usize,
}

impl RandomFrameSampler {
    pub fn unit_sphere(grid: Arc<QuadratureGrid>, seed: u64) -> Self {
        Self {
            grid,
            seed,
            max_coord: 0.6,
            norm_range: (1.0, 1.0),
            tangent: true,
            calibrated_share: 0.25,
            bumps: 6,
        }
    }

    /// Off-sphere sampler with `||phi|| in range`, frames orthonormal in `L^2` but not tangent.
    pub fn off_sphere(grid: Arc<QuadratureGrid>, seed: u64, range: (f64, f64)) -> Self {
        Self {
            norm_range: range,
            tangent: false,
            calibrated_share: 0.0,
            ..Self::unit_sphere(grid, seed)
        }
    }

    fn bump<R: Rng>(&self, rng: &mut R) -> BoundaryFunction {
        let n = self.grid.dim();
        let c: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let c = c.normalize();
        let kappa = 1.0 + 7.0 * rng.random::<f64>();
        BoundaryFunction::from_fn(Arc::clone(&self.grid), |t| {
            let dot: f64 = t.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            (kappa * (dot - 1.0)).exp()
        })
    }

    fn random_point<R: Rng>(&self, rng: &mut R) -> Result<BallPoint> {
        let n = self.grid.dim();
        let d: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let r = self.max_coord * rng.random::<f64>().powf(1.0 / n as f64);
        BallPoint::new(d.normalize() * r)
    }

    fn scale<R: Rng>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.norm_range;
        if hi > lo {
            // log-uniform, so small norms are represented
            (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
        } else {
            lo
        }
    }
}

impl FrameSampler for RandomFrameSampler {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn sample(&self, index: u64) -> Result<(BoundaryFunction, Vec<BoundaryFunction>)> {
        let n = self.grid.dim();
        let mut rng = stream_rng(self.seed, index);
        let p = self.random_point(&mut rng)?;
        let base = phi0(&p, &self.grid)?;
        if rng.random::<f64>() < self.calibrated_share {
            let eps = 0.3 * rng.random::<f64>();
            let cal = phi0_frame(&p, &self.grid)?;
            let mut raw = Vec::with_capacity(n);
            for f in cal {
                let noise = self.bump(&mut rng);
                let c = rng.sample::<f64, _>(StandardNormal) * eps;
                raw.push(f.scaled(1.0 / f.norm()).lin_comb(1.0, &noise.scaled(1.0 / noise.norm()), c)?);
            }
            let frame = orthonormalize(&raw, Some(&base))?;
            let s = self.scale(&mut rng);
            return Ok((base.scaled(s), frame));
        }
        let mut log_mod = BoundaryFunction::constant(Arc::clone(&self.grid), 0.0);
        for _ in 0..self.bumps {
            let a = 0.7 * rng.sample::<f64, _>(StandardNormal);
            log_mod = log_mod.lin_comb(1.0, &self.bump(&mut rng), a)?;
        }
        let phi = BoundaryFunction::new(
            Arc::clone(&self.grid),
            base.values()
                .iter()
                .zip(log_mod.values())
                .map(|(b, m)| b * m.exp())
                .collect(),
        )?;
        let phi = phi.scaled(self.scale(&mut rng) / phi.norm());
        let mut raw = Vec::with_capacity(n);
        for _ in 0..n {
            let mut f = BoundaryFunction::constant(Arc::clone(&self.grid), 0.0);
            for _ in 0..3 {
                let a = rng.sample::<f64, _>(StandardNormal);
                f = f.lin_comb(1.0, &self.bump(&mut rng), a)?;
            }
            // weighting by phi makes frames live where the measure does
            let weighted = f
                .values()
                .iter()
                .zip(phi.values())
                .map(|(a, b)| a * b)
                .collect();
            raw.push(BoundaryFunction::new(Arc::clone(&self.grid), weighted)?);
        }
        let frame = orthonormalize(&raw, if self.tangent { Some(&phi) } else { None })?;
        Ok((phi, frame))
    }
}

/// One sampled evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ComassSample {
    pub id: u64,
    pub norm: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComassReport {
    pub samples: Vec<ComassSample>,
    /// Largest `|Omega|` seen.
    pub max: f64,
    pub bound: f64,
    /// Samples discarded for a degenerate frame.
    pub skipped: usize,
}

impl ComassReport {
    pub fn within(&self, slack: f64) -> bool {
        self.max <= self.bound * (1.0 + slack)
    }

    /// Rows `id,norm,value,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,norm,value,bound\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{:.12e},{:.12e},{:.12e}", s.id, s.norm, s.value, s.bound);
        }
        out
    }
}

fn run_sampler(sampler: &dyn FrameSampler, trials: usize, bound: f64) -> Result<ComassReport> {
    let results: Vec<Result<Option<ComassSample>>> = (0..trials as u64)
        .into_par_iter()
        .map(|id| match sampler.sample(id) {
            Ok((phi, frame)) => {
                let value = OmegaAt::new(&phi)?.eval(&frame)?;
                Ok(Some(ComassSample {
                    id,
                    norm: phi.norm(),
                    value,
                    bound,
                }))
            }
            Err(LabError::DegenerateFrame) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut samples = Vec::with_capacity(trials);
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    let max = samples.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    Ok(ComassReport {
        samples,
        max,
        bound,
        skipped,
    })
}

/// Running maximum of `|Omega|` over `trials` draws, against `(4n/h^2)^{n/2}`.
pub fn comass_estimate(sampler: &dyn FrameSampler, trials: usize) -> Result<ComassReport> {
    let n = sampler.dim();
    run_sampler(sampler, trials, comass_bound(n, (n - 1) as f64))
}

/// Off-sphere draws against `2^n (4n/h^2)^{n/2}`.
pub fn bounded_comass_check(sampler: &dyn FrameSampler, trials: usize) -> Result<ComassReport> {
    let n = sampler.dim();
    run_sampler(sampler, trials, off_sphere_comass_bound(n, (n - 1) as f64))
}

/// `|Omega|` on the calibrated frame at `Phi_0(p)`, normalized to unit vectors.
pub fn calibrated_value(p: &BallPoint, grid: &Arc<QuadratureGrid>) -> Result<f64> {
    let phi = phi0(p, grid)?;
    let frame = orthonormalize(&phi0_frame(p, grid)?, Some(&phi))?;
    Ok(OmegaAt::new(&phi)?.eval(&frame)?.abs())
}

/// The action `gamma.f` on a frame vector: the same linear action as on `phi`.
pub fn push_frame(
    gamma: &MobiusIsometry,
    frame: &[BoundaryFunction],
) -> Result<Vec<BoundaryFunction>> {
    let h = (gamma.dim() - 1) as f64;
    frame
        .iter()
        .map(|f| crate::bmeasure::isom_action(gamma, f, h))
        .collect()
}

/// A frame rotated by angle `a` in the plane of its first two vectors.
pub fn rotate_frame(frame: &[BoundaryFunction], a: f64) -> Result<Vec<BoundaryFunction>> {
    if frame.len() < 2 {
        return Ok(frame.to_vec());
    }
    let mut out = frame.to_vec();
    out[0] = frame[0].lin_comb(a.cos(), &frame[1], a.sin())?;
    out[1] = frame[0].lin_comb(-a.sin(), &frame[1], a.cos())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_arithmetic() {
        assert!((comass_bound(3, 2.0) - 3f64.powf(1.5)).abs() < 1e-12);
        assert!((off_sphere_comass_bound(2, 1.0) - 32.0).abs() < 1e-12);
    }
}
