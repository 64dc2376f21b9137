use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;

use super::backend::MetricBackend;
use crate::error::{LabError, Result};
use crate::hypcore::{exp_map, BallPoint, CuspModel, MobiusIsometry, TangentVector};
use crate::rng::stream_rng;

/// `delta(x) = d_b(x, basepoint)`: 1-Lipschitz and proper.
pub struct ProperLipschitz<'a> {
    backend: &'a dyn MetricBackend,
    base: BallPoint,
}

/// Result of sampling the Lipschitz inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzCheck {
    pub pairs: usize,
    /// `max (|delta(x) - delta(y)| - d_b(x, y))`.
    pub worst_excess: f64,
    /// `max |delta(x) - delta(y)| / d_b(x, y)`.
    pub worst_ratio: f64,
}

pub fn proper_lipschitz_function(backend: &dyn MetricBackend) -> ProperLipschitz<'_> {
    ProperLipschitz {
        backend,
        base: BallPoint::origin(backend.dim()),
    }
}

impl<'a> ProperLipschitz<'a> {
    pub fn with_base(backend: &'a dyn MetricBackend, base: BallPoint) -> Self {
        Self { backend, base }
    }

    pub fn base(&self) -> &BallPoint {
        &self.base
    }

    pub fn eval(&self, x: &BallPoint) -> Result<f64> {
        self.backend.distance(&self.base, x)
    }

    pub fn eval_many(&self, xs: &[BallPoint]) -> Result<Vec<f64>> {
        self.backend.distances_from(&self.base, xs)
    }

    /// `|delta(x) - delta(y)| <= d_b(x, y)` on `pairs` random pairs within `radius` of the base.
    pub fn check_lipschitz(&self, pairs: usize, radius: f64, seed: u64) -> Result<LipschitzCheck> {
        let n = self.backend.dim();
        let mut rng = stream_rng(seed, 0x6c69_7073);
        let to_base = MobiusIsometry::translation(&self.base);
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..pairs {
            let x = to_base.apply_point(&MobiusIsometry::random(&mut rng, n, radius).origin_image())?;
            // half the pairs are close together, where the inequality is sharpest
            let y = if rng.random::<bool>() {
                let v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
                exp_map(&TangentVector::new(x.clone(), v * (0.05 / x.conformal_factor())))?
            } else {
                to_base.apply_point(&MobiusIsometry::random(&mut rng, n, radius).origin_image())?
            };
            let dx = self.eval(&x)?;
            let dy = self.eval(&y)?;
            let dxy = self.backend.distance(&x, &y)?;
            worst_excess = worst_excess.max((dx - dy).abs() - dxy);
            if dxy > 0.0 {
                worst_ratio = worst_ratio.max((dx - dy).abs() / dxy);
            }
        }
        Ok(LipschitzCheck {
            pairs,
            worst_excess,
            worst_ratio,
        })
    }
}

/// One level set `{delta = t}` with its `(n-1)`-volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub level: f64,
    pub area: f64,
    /// Difference between the area at full and at half mesh resolution.
    pub area_error: f64,
}

/// Level sets of a proper function whose areas can be measured on a mesh.
pub trait SliceFamily {
    fn dim(&self) -> usize;

    /// Area of `{delta = t}` and a mesh-error estimate.
    fn slice_area(&self, t: f64) -> Result<(f64, f64)>;

    /// Closed form, where one exists.
    fn analytic_area(&self, _t: f64) -> Option<f64> {
        None
    }
}

/// Horospherical slices `Y x {t}` of a cusp, with `delta = t`.
pub struct CuspSlices {
    cusp: CuspModel,
    resolution: usize,
}

impl CuspSlices {
    pub fn new(cusp: CuspModel, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(LabError::InvalidInput("slice mesh needs at least 2 cells".into()));
        }
        Ok(Self { cusp, resolution })
    }

    pub fn cusp(&self) -> &CuspModel {
        &self.cusp
    }

    /// Sum of cell areas over an `m^{n-1}` mesh of the fundamental parallelepiped.
    fn mesh_area(&self, t: f64, m: usize) -> f64 {
        let k = self.cusp.dim() - 1;
        let cell = self.cusp.lattice() / m as f64;
        let metric = self.cusp.metric(t);
        let g = metric.view((0, 0), (k, k)).into_owned();
        let cells = m.pow(k as u32);
        let per_cell = (cell.transpose() * g * &cell).determinant().abs().sqrt();
        (0..cells).map(|_| per_cell).sum()
    }
}

impl SliceFamily for CuspSlices {
    fn dim(&self) -> usize {
        self.cusp.dim()
    }

    fn slice_area(&self, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 || !t.is_finite() {
            return Err(LabError::InvalidInput(format!("slice level {t}")));
        }
        let fine = self.mesh_area(t, self.resolution);
        let coarse = self.mesh_area(t, (self.resolution / 2).max(1));
        Ok((fine, (fine - coarse).abs()))
    }

    fn analytic_area(&self, t: f64) -> Option<f64> {
        self.cusp.slice_volume(t).ok()
    }
}

/// Distance spheres `{d_b(base, .) = t}` in the plane, traced along rays from the base.
pub struct SphereSlices<'a> {
    backend: &'a dyn MetricBackend,
    base: BallPoint,
    rays: usize,
    dr: f64,
}

impl<'a> SphereSlices<'a> {
    pub fn new(backend: &'a dyn MetricBackend, base: BallPoint, rays: usize) -> Result<Self> {
        if backend.dim() != 2 {
            return Err(LabError::UnsupportedDimension {
                dim: backend.dim(),
                reason: "sphere slices are traced as plane curves",
            });
        }
        if rays < 8 || rays % 2 == 1 {
            return Err(LabError::InvalidInput("need an even number of at least 8 rays".into()));
        }
        Ok(Self {
            backend,
            base,
            rays,
            dr: 0.01,
        })
    }

    /// Crossing points of `{delta = t}` along each ray.
    fn crossings(&self, t: f64) -> Result<Vec<BallPoint>> {
        let steps = ((t + 1.0) / self.dr).ceil() as usize;
        let to_base = MobiusIsometry::translation(&self.base);
        let mut targets = Vec::with_capacity(self.rays * steps);
        for k in 0..self.rays {
            let a = 2.0 * PI * k as f64 / self.rays as f64;
            for i in 1..=steps {
                let r = i as f64 * self.dr;
                let local = DVector::from_column_slice(&[a.cos(), a.sin()]) * (0.5 * r).tanh();
                targets.push(to_base.apply_point(&BallPoint::new(local)?)?);
            }
        }
        let d = self.backend.distances_from(&self.base, &targets)?;
        let mut out = Vec::with_capacity(self.rays);
        for k in 0..self.rays {
            let row = &d[k * steps..(k + 1) * steps];
            let i = row
                .iter()
                .position(|&v| v >= t)
                .ok_or_else(|| LabError::InvalidInput(format!("level {t} not reached")))?;
            let (r0, d0) = if i == 0 {
                (0.0, 0.0)
            } else {
                (i as f64 * self.dr, row[i - 1])
            };
            let r1 = (i + 1) as f64 * self.dr;
            let s = if row[i] > d0 { (t - d0) / (row[i] - d0) } else { 0.0 };
            let r = r0 + s * (r1 - r0);
            let a = 2.0 * PI * k as f64 / self.rays as f64;
            let local = DVector::from_column_slice(&[a.cos(), a.sin()]) * (0.5 * r).tanh();
            out.push(to_base.apply_point(&BallPoint::new(local)?)?);
        }
        Ok(out)
    }

    fn polygon_length(&self, pts: &[BallPoint], stride: usize) -> f64 {
        let picked: Vec<&BallPoint> = pts.iter().step_by(stride).collect();
        let m = picked.len();
        (0..m)
            .map(|k| {
                let a = picked[k];
                let b = picked[(k + 1) % m];
                let mid = BallPoint::new((a.coords() + b.coords()) * 0.5)
                    .expect("midpoint of interior points is interior");
                let u = self.backend.log_conformal(mid.coords());
                crate::hypcore::hyp_distance(a, b) * u.exp()
            })
            .sum()
    }
}

impl SliceFamily for SphereSlices<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn slice_area(&self, t: f64) -> Result<(f64, f64)> {
        let pts = self.crossings(t)?;
        let fine = self.polygon_length(&pts, 1);
        let coarse = self.polygon_length(&pts, 2);
        Ok((fine, (fine - coarse).abs()))
    }

    fn analytic_area(&self, t: f64) -> Option<f64> {
        if self.backend.name() == "exact" {
            Some(2.0 * PI * t.sinh())
        } else {
            None
        }
    }
}

/// Levels whose slice area is below the running median, in increasing `t`. When no level
/// qualifies, the `count` smallest slices are returned instead.
pub fn find_small_slices(family: &dyn SliceFamily, levels: &[f64], count: usize) -> Result<Vec<Slice>> {
    if levels.is_empty() || count == 0 {
        return Err(LabError::NoLevelsFound);
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut slices = Vec::with_capacity(sorted.len());
    for &t in &sorted {
        let (area, err) = family.slice_area(t)?;
        if area.is_finite() {
            slices.push(Slice {
                level: t,
                area,
                area_error: err,
            });
        }
    }
    if slices.is_empty() {
        return Err(LabError::NoLevelsFound);
    }
    let mut picked = Vec::new();
    for i in 0..slices.len() {
        let mut seen: Vec<f64> = slices[..=i].iter().map(|s| s.area).collect();
        seen.sort_by(f64::total_cmp);
        let median = if seen.len() % 2 == 1 {
            seen[seen.len() / 2]
        } else {
            0.5 * (seen[seen.len() / 2 - 1] + seen[seen.len() / 2])
        };
        if slices[i].area < median {
            picked.push(slices[i].clone());
        }
    }
    if picked.is_empty() {
        let mut by_area = slices.clone();
        by_area.sort_by(|a, b| a.area.total_cmp(&b.area));
        by_area.truncate(count);
        by_area.sort_by(|a, b| a.level.total_cmp(&b.level));
        return Ok(by_area);
    }
    picked.truncate(count);
    Ok(picked)
}

/// Sampled coarea inequality `int_0^T Area(delta = t) dt <= Vol(delta <= T)` for a distance
/// function. `levels` must start at 0; Simpson's rule is used when they are equally spaced
/// with an even number of intervals, the trapezoid rule otherwise.
pub fn coarea_check(
    family: &dyn SliceFamily,
    backend: &dyn MetricBackend,
    base: &BallPoint,
    levels: &[f64],
) -> Result<(f64, f64)> {
    if levels.len() < 2 || levels[0] != 0.0 {
        return Err(LabError::InvalidInput("levels must start at 0 and have two entries".into()));
    }
    let mut areas = vec![0.0];
    for &t in &levels[1..] {
        areas.push(family.slice_area(t)?.0);
    }
    let step = levels[1] - levels[0];
    let uniform = levels
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-12 * step.max(1.0));
    let lhs = if uniform && levels.len() % 2 == 1 {
        let m = areas.len() - 1;
        let inner: f64 = (1..m)
            .map(|i| if i % 2 == 1 { 4.0 * areas[i] } else { 2.0 * areas[i] })
            .sum();
        step / 3.0 * (areas[0] + inner + areas[m])
    } else {
        levels
            .windows(2)
            .zip(areas.windows(2))
            .map(|(t, a)| 0.5 * (t[1] - t[0]) * (a[0] + a[1]))
            .sum()
    };
    let rhs = backend.ball_volumes(base, &[*levels.last().unwrap()])?[0];
    Ok((lhs, rhs))
}
