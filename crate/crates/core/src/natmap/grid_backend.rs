use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Range;

use nalgebra::{DVector, Vector2};

use super::backend::{MetricBackend, VolumeCloud};
use crate::error::{LabError, Result};
use crate::hypcore::BallPoint;

/// Compactly supported conformal factor `u(x) = A exp(1 - 1/(1 - s^2))`, `s = d0(x, center) / radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalBump {
    pub center: BallPoint,
    pub radius: f64,
    pub amplitude: f64,
}

impl ConformalBump {
    pub fn new(center: BallPoint, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !(amplitude >= 0.0) {
            return Err(LabError::InvalidInput(format!(
                "bump radius {radius} and amplitude {amplitude}"
            )));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
        })
    }

    /// Value at hyperbolic distance `d` from the center.
    pub fn profile(&self, d: f64) -> f64 {
        let s = d / self.radius;
        if s >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }
}

/// Mesh parameters of [`GridBackend`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridBackendConfig {
    pub bump: Option<ConformalBump>,
    /// Lattice spacing in ball coordinates of the mesh frame.
    pub spacing: f64,
    /// Hyperbolic radius of the meshed disk around the bump center.
    pub mesh_radius: f64,
    /// Hyperbolic clearance around the obstacle inside which geodesics are routed through
    /// the mesh.
    pub margin: f64,
    /// Treat the disk of radius `mesh_radius - 2 margin` as an obstacle even where `u = 0`,
    /// so that geodesics crossing it are measured on the mesh.
    pub force_mesh: bool,
}

impl GridBackendConfig {
    pub fn with_bump(bump: ConformalBump) -> Self {
        let mesh_radius = bump.radius + 0.75;
        Self {
            bump: Some(bump),
            spacing: 0.01,
            mesh_radius,
            margin: 0.25,
            force_mesh: false,
        }
    }

    /// `u = 0` with all distances through the mesh: the calibration configuration.
    pub fn flat_calibration(mesh_radius: f64, spacing: f64) -> Self {
        Self {
            bump: None,
            spacing,
            mesh_radius,
            margin: 0.25,
            force_mesh: true,
        }
    }
}

/// Primitive lattice directions with max-norm at most 3.
fn lattice_offsets() -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for i in -3i32..=3 {
        for j in -3i32..=3 {
            if (i, j) != (0, 0) && gcd(i.unsigned_abs(), j.unsigned_abs()) == 1 {
                out.push((i, j));
            }
        }
    }
    out
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

type V2 = Vector2<f64>;
type Lift = (f64, V2);

fn v2(x: &DVector<f64>) -> V2 {
    V2::new(x[0], x[1])
}

/// Lorentz boost sending the hyperboloid origin to the lift of ball point `c`, and its inverse.
#[derive(Clone, Debug)]
struct Boost {
    gamma: f64,
    v: V2,
}

impl Boost {
    fn new(c: &V2) -> Self {
        let s = 1.0 - c.norm_squared();
        let gamma = (1.0 + c.norm_squared()) / s;
        Self {
            gamma,
            v: c * (2.0 / s) / gamma,
        }
    }

    fn apply(&self, t: f64, x: &V2, inverse: bool) -> Lift {
        let v = if inverse { -self.v } else { self.v };
        let v2 = v.norm_squared();
        let vx = v.dot(x);
        let t2 = self.gamma * (t + vx);
        let coef = if v2 > 0.0 {
            (self.gamma - 1.0) * vx / v2 + self.gamma * t
        } else {
            0.0
        };
        (t2, x + v * coef)
    }
}

fn lift(x: &V2) -> Lift {
    let s = 1.0 - x.norm_squared();
    ((1.0 + x.norm_squared()) / s, x * (2.0 / s))
}

fn hyperboloid_distance(a: &Lift, b: &Lift) -> f64 {
    let c = a.0 * b.0 - a.1.dot(&b.1);
    c.max(1.0).acosh()
}

fn ball_distance(a: &V2, b: &V2) -> f64 {
    let diff = (a - b).norm();
    let denom = ((1.0 - a.norm_squared()) * (1.0 - b.norm_squared())).sqrt();
    2.0 * (diff / denom).asinh()
}

fn mobius_add2(a: &V2, x: &V2) -> V2 {
    let ax = a.dot(x);
    let a2 = a.norm_squared();
    let x2 = x.norm_squared();
    (a * (1.0 + 2.0 * ax + x2) + x * (1.0 - a2)) / (1.0 + 2.0 * ax + a2 * x2)
}

/// Euclidean distance from the origin to the segment `[a, b]`.
fn segment_origin_distance(a: &V2, b: &V2) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        (-a.dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t).norm()
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// A target of a distance query, in the mesh frame.
struct Target {
    /// Ball coordinates, when representable.
    ball: Option<V2>,
    lift: Lift,
    klein: V2,
}

impl Target {
    fn from_ball(x: V2) -> Self {
        let l = lift(&x);
        Self {
            ball: Some(x),
            klein: l.1 / l.0,
            lift: l,
        }
    }

    fn from_lift(l: Lift) -> Self {
        let ball = if l.0 < 1e12 { Some(l.1 / (1.0 + l.0)) } else { None };
        Self {
            ball,
            klein: l.1 / l.0,
            lift: l,
        }
    }

    fn distance_from(&self, x: &V2, x_lift: &Lift) -> f64 {
        match &self.ball {
            Some(y) if self.lift.0 < 1e6 && x_lift.0 < 1e6 => ball_distance(x, y),
            _ => hyperboloid_distance(x_lift, &self.lift),
        }
    }
}

/// Conformal metric `b = e^{2u} g0` on the hyperbolic plane with `u` a compact bump.
///
/// Distances equal `d0` whenever the `g0` geodesic avoids the bump. Otherwise they come from a
/// Dijkstra field on a square lattice in ball coordinates centered at the bump, with 32 edge
/// directions, continued outside the mesh by `g0` geodesics through the boundary nodes.
#[derive(Clone, Debug)]
pub struct GridBackend {
    cfg: GridBackendConfig,
    /// Mesh frame center in global ball coordinates.
    frame: V2,
    boost: Boost,
    half: i32,
    spacing: f64,
    /// Euclidean radius of the meshed disk in the mesh frame.
    disk: f64,
    slots: Vec<Option<usize>>,
    nodes: Vec<V2>,
    /// Adjacency: `(neighbor, b-length)`.
    edges: Vec<Vec<(usize, f64)>>,
    shell: Vec<usize>,
    shell_lift: Vec<Lift>,
    shell_klein: Vec<V2>,
    /// Klein radius of the obstacle: the support of `u`, or the forced disk.
    obstacle_klein: f64,
    /// Klein radius of the obstacle enlarged by the margin.
    shadow_klein: f64,
}

impl GridBackend {
    pub fn new(cfg: GridBackendConfig) -> Result<Self> {
        if !(cfg.spacing > 0.0) || !(cfg.mesh_radius > 0.0) || !(cfg.margin > 0.0) {
            return Err(LabError::InvalidInput(
                "mesh spacing, radius and margin must be positive".into(),
            ));
        }
        let (frame, obstacle) = match &cfg.bump {
            Some(b) => {
                if b.center.dim() != 2 {
                    return Err(LabError::UnsupportedDimension {
                        dim: b.center.dim(),
                        reason: "the meshed backend is planar",
                    });
                }
                (v2(b.center.coords()), b.radius)
            }
            None => (V2::zeros(), 0.0),
        };
        let obstacle = if cfg.force_mesh {
            obstacle.max(cfg.mesh_radius - 2.0 * cfg.margin)
        } else {
            obstacle
        };
        if obstacle + 2.0 * cfg.margin > cfg.mesh_radius + 1e-12 {
            return Err(LabError::InvalidInput(
                "mesh must extend two margins beyond the obstacle".into(),
            ));
        }
        let disk = (0.5 * cfg.mesh_radius).tanh();
        let half = (disk / cfg.spacing).ceil() as i32 + 1;
        let side = (2 * half + 1) as usize;
        let mut slots = vec![None; side * side];
        let mut nodes = Vec::new();
        for i in -half..=half {
            for j in -half..=half {
                let x = V2::new(i as f64 * cfg.spacing, j as f64 * cfg.spacing);
                if x.norm() <= disk {
                    slots[((i + half) as usize) * side + (j + half) as usize] = Some(nodes.len());
                    nodes.push(x);
                }
            }
        }
        let mut backend = Self {
            boost: Boost::new(&frame),
            frame,
            half,
            spacing: cfg.spacing,
            disk,
            slots,
            nodes,
            edges: Vec::new(),
            shell: Vec::new(),
            shell_lift: Vec::new(),
            shell_klein: Vec::new(),
            obstacle_klein: obstacle.tanh(),
            shadow_klein: (obstacle + cfg.margin).tanh(),
            cfg,
        };
        let offsets = lattice_offsets();
        let mut edges = vec![Vec::with_capacity(offsets.len()); backend.nodes.len()];
        let mut shell = Vec::new();
        for (idx, x) in backend.nodes.iter().enumerate() {
            let (i, j) = backend.lattice_index(x);
            for &(di, dj) in &offsets {
                if let Some(nb) = backend.slot(i + di, j + dj) {
                    edges[idx].push((nb, backend.segment_length(x, &backend.nodes[nb])));
                }
            }
            let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(di, dj)| backend.slot(i + di, j + dj).is_none());
            if boundary {
                shell.push(idx);
            }
        }
        backend.edges = edges;
        backend.shell_lift = shell.iter().map(|&k| lift(&backend.nodes[k])).collect();
        backend.shell_klein = backend.shell_lift.iter().map(|l| l.1 / l.0).collect();
        backend.shell = shell;
        Ok(backend)
    }

    pub fn config(&self) -> &GridBackendConfig {
        &self.cfg
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn shell_count(&self) -> usize {
        self.shell.len()
    }

    /// Hyperbolic length of the longest lattice edge.
    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().flatten().map(|e| e.1).fold(0.0, f64::max)
    }

    fn to_frame(&self, x: &DVector<f64>) -> V2 {
        mobius_add2(&(-self.frame), &v2(x))
    }

    fn u_local(&self, x: &V2) -> f64 {
        match &self.cfg.bump {
            Some(b) => b.profile(2.0 * x.norm().min(1.0 - 1e-16).atanh()),
            None => 0.0,
        }
    }

    fn lattice_index(&self, x: &V2) -> (i32, i32) {
        (
            (x[0] / self.spacing).round() as i32,
            (x[1] / self.spacing).round() as i32,
        )
    }

    fn slot(&self, i: i32, j: i32) -> Option<usize> {
        if i.abs() > self.half || j.abs() > self.half {
            return None;
        }
        let side = (2 * self.half + 1) as usize;
        self.slots[((i + self.half) as usize) * side + (j + self.half) as usize]
    }

    /// `b`-length of the `g0` geodesic between nearby frame points, Simpson in `e^u`.
    fn segment_length(&self, a: &V2, b: &V2) -> f64 {
        let d = ball_distance(a, b);
        if self.cfg.bump.is_none() {
            return d;
        }
        let mid = (a + b) * 0.5;
        let avg = (self.u_local(a).exp() + 4.0 * self.u_local(&mid).exp() + self.u_local(b).exp()) / 6.0;
        d * avg
    }

    fn neighborhood(&self, x: &V2) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.lattice_index(x);
        (-2..=2)
            .flat_map(move |di| (-2..=2).map(move |dj| (di, dj)))
            .filter_map(move |(di, dj)| self.slot(i + di, j + dj))
    }

    fn inside(&self, x: &V2) -> bool {
        x.norm() <= self.disk - 3.0 * self.spacing
    }

    /// Whether the `g0` segment between two Klein points avoids the obstacle, so that its
    /// `b`-length is its `g0`-length.
    fn clear(&self, a: &V2, b: &V2) -> bool {
        segment_origin_distance(a, b) >= self.obstacle_klein
    }

    /// Whether the geodesic from the anchor to `target` passes near enough to the obstacle
    /// to be measured on the mesh.
    fn needs_mesh(&self, anchor_klein: &V2, target: &Target) -> bool {
        (self.cfg.bump.is_some() || self.cfg.force_mesh)
            && segment_origin_distance(anchor_klein, &target.klein) < self.shadow_klein
    }

    /// Dijkstra field for source `p` (frame coordinates) with seeds chosen from `anchor`.
    fn field(&self, p: &V2, anchor: &V2) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        if anchor.norm() <= self.disk {
            for k in self.neighborhood(anchor) {
                let d = self.segment_length(p, &self.nodes[k]);
                if d < dist[k] {
                    dist[k] = d;
                    heap.push(HeapItem(d, k));
                }
            }
        }
        if !self.inside(anchor) {
            let a_klein = klein_of_ball(anchor);
            let p_lift = lift(p);
            for (s, &k) in self.shell.iter().enumerate() {
                if self.clear(&a_klein, &self.shell_klein[s]) {
                    let d = Target::from_ball(self.nodes[k]).distance_from(p, &p_lift);
                    if d < dist[k] {
                        dist[k] = d;
                        heap.push(HeapItem(d, k));
                    }
                }
            }
        }
        while let Some(HeapItem(d, k)) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            for &(nb, len) in &self.edges[k] {
                let nd = d + len;
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(HeapItem(nd, nb));
                }
            }
        }
        dist
    }

    /// Per-target exit data shared by every source: `(shell slot, g0 distance)` for boundary
    /// nodes with a clear chord, or `None` for targets inside the mesh.
    fn exits(&self, target: &Target) -> Option<Vec<(usize, f64)>> {
        if let Some(y) = &target.ball {
            if self.inside(y) {
                return None;
            }
        }
        Some(
            self.shell
                .iter()
                .enumerate()
                .filter(|(s, _)| self.clear(&self.shell_klein[*s], &target.klein))
                .map(|(s, &k)| (k, target.distance_from(&self.nodes[k], &self.shell_lift[s])))
                .collect(),
        )
    }

    fn evaluate(&self, p: &V2, field: &[f64], target: &Target, exits: &Option<Vec<(usize, f64)>>) -> f64 {
        let mut best = f64::INFINITY;
        if let Some(y) = target.ball.as_ref().filter(|y| y.norm() <= self.disk) {
            // near the rim the neighborhood is partial, and exits below may still win
            for k in self.neighborhood(y) {
                best = best.min(field[k] + self.segment_length(&self.nodes[k], y));
            }
            if ball_distance(p, y) < 3.0 * self.max_step() {
                best = best.min(self.segment_length(p, y));
            }
        }
        if let Some(list) = exits {
            for &(k, d) in list {
                best = best.min(field[k] + d);
            }
        }
        best
    }

    fn max_step(&self) -> f64 {
        // hyperbolic length of a diagonal lattice step at the rim
        2.0 * 1.5 * self.spacing / (1.0 - self.disk * self.disk)
    }

    fn target_from_global(&self, x: &DVector<f64>) -> Target {
        Target::from_ball(self.to_frame(x))
    }

    fn cloud_target(&self, cloud: &VolumeCloud, center_boost: &Boost, j: usize) -> Target {
        let r = cloud.radius(j);
        if r < 25.0 {
            if let Some(y) = cloud.coords(j) {
                return self.target_from_global(&y);
            }
        }
        let w = V2::new(cloud.dir(j)[0], cloud.dir(j)[1]);
        let (t, x) = center_boost.apply(r.cosh(), &(w * r.sinh()), false);
        Target::from_lift(self.boost.apply(t, &x, true))
    }

    /// Distances from each of `points` to each target, with decisions taken at `anchor`.
    fn distances_to(&self, anchor: &BallPoint, points: &[BallPoint], targets: &[Target]) -> Vec<f64> {
        let anchor_f = self.to_frame(anchor.coords());
        let anchor_k = klein_of_ball(&anchor_f);
        let pts: Vec<V2> = points.iter().map(|p| self.to_frame(p.coords())).collect();
        let exits: Vec<Option<Option<Vec<(usize, f64)>>>> = targets
            .iter()
            .map(|t| {
                if self.needs_mesh(&anchor_k, t) {
                    Some(self.exits(t))
                } else {
                    None
                }
            })
            .collect();
        let any = exits.iter().any(|e| e.is_some());
        let mut out = Vec::with_capacity(points.len() * targets.len());
        for p in &pts {
            let field = if any { Some(self.field(p, &anchor_f)) } else { None };
            let p_lift = lift(p);
            for (t, e) in targets.iter().zip(&exits) {
                out.push(match e {
                    Some(ex) => self.evaluate(p, field.as_ref().unwrap(), t, ex),
                    None => t.distance_from(p, &p_lift),
                });
            }
        }
        out
    }
}

fn klein_of_ball(x: &V2) -> V2 {
    x * (2.0 / (1.0 + x.norm_squared()))
}

impl MetricBackend for GridBackend {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "grid"
    }

    fn log_conformal(&self, x: &DVector<f64>) -> f64 {
        if self.cfg.bump.is_none() {
            return 0.0;
        }
        self.u_local(&self.to_frame(x))
    }

    fn distance(&self, p: &BallPoint, q: &BallPoint) -> Result<f64> {
        if p.dim() != 2 || q.dim() != 2 {
            return Err(LabError::DimensionMismatch {
                expected: 2,
                got: p.dim().max(q.dim()),
            });
        }
        let t = self.target_from_global(q.coords());
        Ok(self.distances_to(p, std::slice::from_ref(p), &[t])[0])
    }

    fn distances_from(&self, p: &BallPoint, targets: &[BallPoint]) -> Result<Vec<f64>> {
        let t: Vec<Target> = targets.iter().map(|q| self.target_from_global(q.coords())).collect();
        Ok(self.distances_to(p, std::slice::from_ref(p), &t))
    }

    fn cloud_distances(
        &self,
        cloud: &VolumeCloud,
        anchor: &BallPoint,
        points: &[BallPoint],
        samples: Range<usize>,
    ) -> Result<Vec<f64>> {
        let center_boost = Boost::new(&v2(cloud.center().coords()));
        let targets: Vec<Target> = samples
            .map(|j| self.cloud_target(cloud, &center_boost, j))
            .collect();
        Ok(self.distances_to(anchor, points, &targets))
    }

    fn ball_volumes(&self, center: &BallPoint, radii: &[f64]) -> Result<Vec<f64>> {
        center.guard()?;
        let r_max = radii.iter().cloned().fold(0.0, f64::max);
        let rays = 720;
        let dr = 0.01;
        let steps = (r_max / dr).ceil() as usize;
        let c_boost = Boost::new(&v2(center.coords()));
        let mut targets = Vec::with_capacity(rays * steps);
        let mut cells = Vec::with_capacity(rays * steps);
        for k in 0..rays {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / rays as f64;
            let w = V2::new(a.cos(), a.sin());
            for i in 0..steps {
                let r = (i as f64 + 0.5) * dr;
                let (t, x) = c_boost.apply(r.cosh(), &(w * r.sinh()), false);
                let (t, x) = self.boost.apply(t, &x, true);
                let target = Target::from_lift((t, x));
                let u = target.ball.as_ref().map(|y| self.u_local(y)).unwrap_or(0.0);
                cells.push((2.0 * u).exp() * r.sinh() * dr * 2.0 * std::f64::consts::PI / rays as f64);
                targets.push(target);
            }
        }
        let d = self.distances_to(center, std::slice::from_ref(center), &targets);
        let mut vols = vec![0.0; radii.len()];
        for (cell, dist) in cells.iter().zip(&d) {
            for (v, &rr) in vols.iter_mut().zip(radii) {
                if *dist <= rr {
                    *v += cell;
                }
            }
        }
        Ok(vols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_thirty_two_primitive_directions() {
        assert_eq!(lattice_offsets().len(), 32);
    }

    #[test]
    fn boost_matches_mobius_translation() {
        let c = V2::new(0.3, -0.4);
        let x = V2::new(-0.2, 0.5);
        let b = Boost::new(&c);
        let (t, s) = lift(&x);
        let (t2, s2) = b.apply(t, &s, false);
        let ball = s2 / (1.0 + t2);
        assert!((ball - mobius_add2(&c, &x)).norm() < 1e-12);
        let l = lift(&mobius_add2(&c, &x));
        let (t3, s3) = b.apply(l.0, &l.1, true);
        assert!((s3 / (1.0 + t3) - x).norm() < 1e-12);
    }
}
