use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LabError, Result};
use crate::hypcore::{mobius_add, BallPoint};
use crate::rng::stream_rng;

/// Area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => 2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n),
    }
}

fn gamma_half(n: usize) -> f64 {
    // Gamma(n/2) by the recurrence from Gamma(1) = 1 and Gamma(1/2) = sqrt(pi)
    let mut g = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut k = if n % 2 == 0 { 1.0 } else { 0.5 };
    while k < n as f64 / 2.0 {
        g *= k;
        k += 1.0;
    }
    g
}

/// Hyperbolic distance between the point at distance `r` in direction `w` and the point at
/// distance `rho` in direction `v` from a common base, given `|w - v|^2`.
///
/// Uses `sinh^2(d/2) = sinh^2((r - rho)/2) + sinh(r) sinh(rho) |w - v|^2 / 4`, which keeps full
/// relative accuracy for tiny and for very large distances.
pub fn polar_distance(r: f64, rho: f64, dir_gap_sq: f64) -> f64 {
    let a = (0.5 * (r - rho)).sinh();
    let s = a * a + r.sinh() * rho.sinh() * 0.25 * dir_gap_sq;
    2.0 * s.max(0.0).sqrt().asinh()
}

/// Inverse-CDF sampler for the radial density `e^{-rate r} sinh^{n-1}(r)` on `[0, r_max]`.
#[derive(Clone, Debug)]
pub struct RadialSampler {
    r_max: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
    /// `log` of the total mass `int_0^{r_max} e^{-rate r} sinh^{n-1} r dr`.
    log_mass: f64,
    rate: f64,
}

impl RadialSampler {
    pub fn new(dim: usize, rate: f64, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(LabError::InvalidInput(format!("sampling radius {r_max}")));
        }
        let m = 20_000;
        let dr = r_max / m as f64;
        let grid: Vec<f64> = (0..=m).map(|i| i as f64 * dr).collect();
        let log_f: Vec<f64> = grid
            .iter()
            .map(|&r| {
                if r == 0.0 {
                    if dim == 1 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    -rate * r + (dim - 1) as f64 * log_sinh(r)
                }
            })
            .collect();
        let top = log_f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = log_f.iter().map(|l| (l - top).exp()).collect();
        let mut cdf = vec![0.0; m + 1];
        for i in 1..=m {
            cdf[i] = cdf[i - 1] + 0.5 * dr * (f[i] + f[i - 1]);
        }
        let total = cdf[m];
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self {
            r_max,
            grid,
            cdf,
            log_mass: top + total.ln(),
            rate,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// Radius at cumulative probability `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid[k - 1] + t * (self.grid[k] - self.grid[k - 1])
    }
}

/// `log sinh r` without overflow.
pub fn log_sinh(r: f64) -> f64 {
    if r > 20.0 {
        r - std::f64::consts::LN_2 + (-(-2.0 * r).exp()).ln_1p()
    } else {
        r.sinh().ln()
    }
}

/// Weighted sample of `dvol_b` in geodesic polar coordinates around `center`.
///
/// Sample `j` sits at distance `radii[j]` from `center` in direction `T_center(dir_j)`, where
/// `T_center` is the translation taking `o` to `center`. Weights are stored as logs because
/// they grow like `e^{rate r}`.
#[derive(Clone, Debug)]
pub struct VolumeCloud {
    center: BallPoint,
    radii: Vec<f64>,
    sinh_radii: Vec<f64>,
    dirs: Vec<f64>,
    log_weights: Vec<f64>,
    rate: f64,
    r_max: f64,
}

impl VolumeCloud {
    pub fn center(&self) -> &BallPoint {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.radii[j]
    }

    pub fn sinh_radius(&self, j: usize) -> f64 {
        self.sinh_radii[j]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn dir(&self, j: usize) -> &[f64] {
        let n = self.dim();
        &self.dirs[j * n..(j + 1) * n]
    }

    pub fn log_weight(&self, j: usize) -> f64 {
        self.log_weights[j]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Ball coordinates of sample `j` when it is representable (`r` below about 30).
    pub fn coords(&self, j: usize) -> Option<DVector<f64>> {
        let r = self.radii[j];
        let t = (0.5 * r).tanh();
        if 1.0 - t < 1e-12 {
            return None;
        }
        let local = DVector::from_column_slice(self.dir(j)) * t;
        Some(mobius_add(self.center.coords(), &local))
    }

    /// Moves a query point into the frame where the cloud center is the origin.
    pub fn to_local(&self, p: &DVector<f64>) -> DVector<f64> {
        mobius_add(&(-self.center.coords()), p)
    }

    /// `sum_j w_j f(j)`.
    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        (0..self.len()).map(|j| self.log_weights[j].exp() * f(j)).sum()
    }

    /// Multiplies weight `j` by `e^{delta[j]}`.
    pub fn reweight(&mut self, delta: &[f64]) {
        for (w, d) in self.log_weights.iter_mut().zip(delta) {
            *w += d;
        }
    }
}

/// Draws `count` samples of `dvol_{g0}` on the ball of radius `r_max` around `center`, with
/// radial density proportional to `e^{-rate r} sinh^{n-1} r`. Radii are stratified and
/// directions come in antipodal pairs.
pub fn sample_hyperbolic_volume(
    center: &BallPoint,
    r_max: f64,
    count: usize,
    rate: f64,
    seed: u64,
) -> Result<VolumeCloud> {
    if count < 2 {
        return Err(LabError::InvalidInput("volume sample needs at least 2 points".into()));
    }
    center.guard()?;
    let n = center.dim();
    let sampler = RadialSampler::new(n, rate, r_max)?;
    let pairs = count / 2;
    let mut rng = stream_rng(seed, 0x766f_6c75_6d65);
    let mut radii = Vec::with_capacity(count);
    let mut dirs = Vec::with_capacity(count * n);
    let mut log_weights = Vec::with_capacity(count);
    // dvol / density = sphere_area * mass * e^{rate r}, averaged over `count` draws
    let log_base = sphere_area(n).ln() + sampler.log_mass() - (count as f64).ln();
    let mut push = |r: f64, d: &DVector<f64>, dirs: &mut Vec<f64>| {
        radii.push(r);
        dirs.extend(d.iter());
        log_weights.push(log_base + rate * r);
    };
    for k in 0..pairs {
        let u = (k as f64 + rng.random::<f64>()) / pairs as f64;
        let r = sampler.quantile(u);
        let d = random_unit(&mut rng, n);
        push(r, &d, &mut dirs);
        push(r, &(-&d), &mut dirs);
    }
    if count % 2 == 1 {
        let r = sampler.quantile(rng.random::<f64>());
        let d = random_unit(&mut rng, n);
        push(r, &d, &mut dirs);
    }
    let sinh_radii = radii.iter().map(|r| r.sinh()).collect();
    Ok(VolumeCloud {
        center: center.clone(),
        radii,
        sinh_radii,
        dirs,
        log_weights,
        rate,
        r_max,
    })
}

fn random_unit<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Domain geometry `(M, b)` used by the natural-map machinery. Both backends are conformal to
/// the hyperbolic metric on the ball, `b = e^{2u} g0`.
pub trait MetricBackend: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &'static str;

    /// `u(x)` in `b = e^{2u} g0`.
    fn log_conformal(&self, x: &DVector<f64>) -> f64;

    /// `d_b(p, q)`.
    fn distance(&self, p: &BallPoint, q: &BallPoint) -> Result<f64>;

    /// `d_b(p, q)` for many `q`.
    fn distances_from(&self, p: &BallPoint, targets: &[BallPoint]) -> Result<Vec<f64>> {
        targets.iter().map(|q| self.distance(p, q)).collect()
    }

    /// `b` at `p` in ball coordinates.
    fn metric(&self, p: &BallPoint) -> DMatrix<f64> {
        p.metric() * (2.0 * self.log_conformal(p.coords())).exp()
    }

    /// Weighted point cloud approximating `dvol_b` on the ball of radius `radius` around
    /// `center`, with radial importance density `e^{-rate r} sinh^{n-1} r`.
    fn sample_volume_weighted(
        &self,
        center: &BallPoint,
        radius: f64,
        count: usize,
        rate: f64,
        seed: u64,
    ) -> Result<VolumeCloud> {
        let mut cloud = sample_hyperbolic_volume(center, radius, count, rate, seed)?;
        let n = self.dim() as f64;
        let delta: Vec<f64> = (0..cloud.len())
            .map(|j| match cloud.coords(j) {
                Some(y) => n * self.log_conformal(&y),
                None => 0.0,
            })
            .collect();
        cloud.reweight(&delta);
        Ok(cloud)
    }

    /// Volume-uniform cloud (`rate = 0`).
    fn sample_volume(
        &self,
        center: &BallPoint,
        radius: f64,
        count: usize,
        seed: u64,
    ) -> Result<VolumeCloud> {
        self.sample_volume_weighted(center, radius, count, 0.0, seed)
    }

    /// `d_b(points[s], y_j)` for the cloud samples `j` in `samples`, row-major with one row
    /// per point. All points must lie close to `anchor`; backends may use it to make
    /// per-sample choices shared by the rows.
    fn cloud_distances(
        &self,
        cloud: &VolumeCloud,
        anchor: &BallPoint,
        points: &[BallPoint],
        samples: Range<usize>,
    ) -> Result<Vec<f64>>;

    /// `Vol_b(B_b(center, R))` for each radius.
    fn ball_volumes(&self, center: &BallPoint, radii: &[f64]) -> Result<Vec<f64>>;
}

/// Hyperbolic distances from `points` to the cloud samples in `samples`, by the polar formula.
pub fn exact_cloud_distances(
    cloud: &VolumeCloud,
    points: &[BallPoint],
    samples: Range<usize>,
) -> Vec<f64> {
    let n = cloud.dim();
    let mut out = Vec::with_capacity(points.len() * samples.len());
    for p in points {
        let local = cloud.to_local(p.coords());
        let norm = local.norm();
        let rho = 2.0 * norm.atanh();
        let unit: Vec<f64> = if norm > 0.0 {
            local.iter().map(|c| c / norm).collect()
        } else {
            vec![0.0; n]
        };
        let sinh_rho = rho.sinh();
        for j in samples.clone() {
            let r = cloud.radius(j);
            let gap: f64 = cloud
                .dir(j)
                .iter()
                .zip(&unit)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let a = (0.5 * (r - rho)).sinh();
            let s = a * a + cloud.sinh_radius(j) * sinh_rho * 0.25 * gap;
            out.push(2.0 * s.max(0.0).sqrt().asinh());
        }
    }
    out
}

/// `Vol(B(R)) = |S^{n-1}| int_0^R sinh^{n-1} t dt` by composite Simpson.
pub fn hyperbolic_ball_volume(n: usize, radius: f64) -> f64 {
    let m = 2 * ((radius * 200.0).ceil() as usize).max(8);
    let h = radius / m as f64;
    let f = |t: f64| t.sinh().powi(n as i32 - 1);
    let mut acc = f(0.0) + f(radius);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    sphere_area(n) * acc * h / 3.0
}

/// Constant curvature `-1`: the ball model itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactBackend {
    dim: usize,
}

impl ExactBackend {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(LabError::UnsupportedDimension {
                dim,
                reason: "hyperbolic space needs n >= 2",
            });
        }
        Ok(Self { dim })
    }
}

impl MetricBackend for ExactBackend {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "exact"
    }

    fn log_conformal(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn distance(&self, p: &BallPoint, q: &BallPoint) -> Result<f64> {
        Ok(crate::hypcore::hyp_distance(p, q))
    }

    fn cloud_distances(
        &self,
        cloud: &VolumeCloud,
        _anchor: &BallPoint,
        points: &[BallPoint],
        samples: Range<usize>,
    ) -> Result<Vec<f64>> {
        Ok(exact_cloud_distances(cloud, points, samples))
    }

    fn ball_volumes(&self, center: &BallPoint, radii: &[f64]) -> Result<Vec<f64>> {
        center.guard()?;
        Ok(radii
            .iter()
            .map(|&r| hyperbolic_ball_volume(self.dim, r))
            .collect())
    }
}
