use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use natmaplab_core::bmeasure::{
    isom_action, isom_action_exact, visual_density, BoundaryFunction, GridScheme, QuadratureGrid,
};
use natmaplab_core::hypcore::{busemann, random_rotation, BallPoint, IdealPoint, MobiusIsometry};
use natmaplab_core::rng::stream_rng;
use proptest::prelude::*;

fn default_grid(n: usize) -> Arc<QuadratureGrid> {
    Arc::new(QuadratureGrid::default_for(n).unwrap())
}

fn phi0(p: &BallPoint, grid: &Arc<QuadratureGrid>) -> BoundaryFunction {
    let h = (p.dim() - 1) as f64;
    BoundaryFunction::from_fn(Arc::clone(grid), |t| {
        (-0.5 * h * busemann(&IdealPoint::from_slice(t).unwrap(), p).unwrap()).exp()
    })
}

/// Independent oracle: midpoint rule in spherical coordinates with the explicit surface
/// element, normalized by the area of the sphere.
fn brute_force_mean<F: Fn(&[f64]) -> f64>(n: usize, f: F) -> f64 {
    match n {
        2 => {
            let m = 20_000;
            (0..m)
                .map(|i| {
                    let a = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                    f(&[a.cos(), a.sin()])
                })
                .sum::<f64>()
                / m as f64
        }
        3 => {
            let (mt, mp) = (1200, 2400);
            let mut total = 0.0;
            for i in 0..mt {
                let t = PI * (i as f64 + 0.5) / mt as f64;
                let mut row = 0.0;
                for j in 0..mp {
                    let p = 2.0 * PI * (j as f64 + 0.5) / mp as f64;
                    row += f(&[t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]);
                }
                total += row * t.sin() * (PI / mt as f64) * (2.0 * PI / mp as f64);
            }
            total / (4.0 * PI)
        }
        _ => unreachable!(),
    }
}

#[test]
fn second_moment_is_one_over_n() {
    for n in 2..=4 {
        let g = default_grid(n);
        assert_abs_diff_eq!(g.integrate(|_| 1.0), 1.0, epsilon = 1e-12);
        let m2 = g.integrate(|t| t[0] * t[0]);
        assert_abs_diff_eq!(m2, 1.0 / n as f64, epsilon = 1e-6);
        for j in 0..n {
            assert_abs_diff_eq!(g.integrate(|t| t[j]), 0.0, epsilon = 1e-6);
        }
    }
    for n in 2..=3 {
        let oracle = brute_force_mean(n, |t| t[0] * t[0]);
        assert_abs_diff_eq!(oracle, 1.0 / n as f64, epsilon = 1e-5);
    }
}

#[test]
fn fibonacci_grid_meets_degree_two_exactness() {
    let g = QuadratureGrid::new(3, GridScheme::FibonacciSphere, 2000).unwrap();
    let m = g.integrate(|t| t[0] * t[0] + 0.5 * t[1] * t[2]);
    assert_abs_diff_eq!(m, 1.0 / 3.0, epsilon = 1e-6);
}

#[test]
fn visual_mass_is_one() {
    let mut rng = stream_rng(21, 0);
    for (n, max_norm) in [(2, 0.8), (3, 0.8), (4, 0.3)] {
        let g = default_grid(n);
        for _ in 0..10 {
            let dir = IdealPoint::new(DVector::from_fn(n, |_, _| {
                rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng)
            }))
            .unwrap();
            let r: f64 = max_norm * rand::Rng::random::<f64>(&mut rng);
            let x = BallPoint::new(dir.dir() * r).unwrap();
            let mass = visual_density(&x, &g).unwrap().integral();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 5e-6);
        }
    }
    // independent high-resolution oracle for one off-centre point in each of n = 2, 3
    for n in 2..=3 {
        let mut c = vec![0.0; n];
        c[0] = 0.5;
        c[n - 1] += 0.3;
        let xc = c.clone();
        let oracle = brute_force_mean(n, |t| {
            let d2: f64 = t.iter().zip(&xc).map(|(a, b)| (a - b) * (a - b)).sum();
            let x2: f64 = xc.iter().map(|v| v * v).sum();
            ((1.0 - x2) / d2).powi(n as i32 - 1)
        });
        assert_abs_diff_eq!(oracle, 1.0, epsilon = 1e-5);
    }
}

#[test]
fn phi0_has_unit_norm() {
    let mut rng = stream_rng(22, 0);
    for (n, dist) in [(2, 2.0 * 0.8f64.atanh()), (3, 2.0 * 0.8f64.atanh())] {
        let g = default_grid(n);
        for _ in 0..10 {
            let p = MobiusIsometry::random(&mut rng, n, dist).origin_image();
            assert_abs_diff_eq!(phi0(&p, &g).norm(), 1.0, epsilon = 5e-6);
        }
    }
}

#[test]
fn density_is_poisson_power() {
    let g = default_grid(3);
    let x = BallPoint::from_slice(&[0.1, -0.4, 0.2]).unwrap();
    let d = visual_density(&x, &g).unwrap();
    let p = phi0(&x, &g);
    for (a, b) in d.values().iter().zip(p.values()) {
        assert_abs_diff_eq!(*a, b * b, epsilon = 1e-12 * a.max(1.0));
    }
}

#[test]
fn rotations_preserve_norm() {
    let mut rng = stream_rng(23, 0);
    for n in 2..=3 {
        let g = default_grid(n);
        let p = MobiusIsometry::random(&mut rng, n, 1.0).origin_image();
        let f = phi0(&p, &g);
        for _ in 0..5 {
            let rot = MobiusIsometry::rotation(random_rotation(&mut rng, n)).unwrap();
            let moved = isom_action(&rot, &f, (n - 1) as f64).unwrap();
            assert_abs_diff_eq!(moved.norm(), f.norm(), epsilon = 1e-3);
        }
    }
}

#[test]
fn action_is_isometric_only_for_h_equal_n_minus_one() {
    let g = default_grid(3);
    let gamma = MobiusIsometry::translation(&BallPoint::from_slice(&[0.3, 0.4, -0.2]).unwrap());
    let smooth = |t: &DVector<f64>| 2.0 + t[0] - 0.5 * t[1] * t[2];
    let f = BoundaryFunction::from_fn(Arc::clone(&g), |t| smooth(&DVector::from_column_slice(t)));
    let right = isom_action_exact(&gamma, smooth, 2.0, &g).unwrap();
    assert_abs_diff_eq!(right.norm(), f.norm(), epsilon = 1e-5);
    let wrong = isom_action_exact(&gamma, smooth, 1.0, &g).unwrap();
    assert!((wrong.norm() - f.norm()).abs() > 1e-2);
}

#[test]
fn equivariance_of_phi0() {
    let mut rng = stream_rng(25, 0);
    for (n, tau) in [(2, 1e-3), (3, 2e-2)] {
        let g = default_grid(n);
        for _ in 0..5 {
            let p = MobiusIsometry::random(&mut rng, n, 1.0).origin_image();
            let gamma = MobiusIsometry::random(&mut rng, n, 1.0);
            let lhs = isom_action(&gamma, &phi0(&p, &g), (n - 1) as f64).unwrap();
            let rhs = phi0(&gamma.apply_point(&p).unwrap(), &g);
            assert!(lhs.l2_distance(&rhs).unwrap() < tau);
            let pp = p.clone();
            let exact = isom_action_exact(
                &gamma,
                |t| (-0.5 * (n - 1) as f64 * busemann(&IdealPoint::new(t.clone()).unwrap(), &pp).unwrap()).exp(),
                (n - 1) as f64,
                &g,
            )
            .unwrap();
            assert!(exact.l2_distance(&rhs).unwrap() < 1e-10);
        }
    }
}

#[test]
fn group_action_up_to_interpolation() {
    let mut rng = stream_rng(26, 0);
    for (n, tau) in [(2, 1e-3), (3, 2e-2)] {
        let g = default_grid(n);
        let h = (n - 1) as f64;
        let f = phi0(&MobiusIsometry::random(&mut rng, n, 1.0).origin_image(), &g);
        for _ in 0..3 {
            let a = MobiusIsometry::random(&mut rng, n, 1.0);
            let b = MobiusIsometry::random(&mut rng, n, 1.0);
            let once = isom_action(&a.compose(&b), &f, h).unwrap();
            let twice = isom_action(&a, &isom_action(&b, &f, h).unwrap(), h).unwrap();
            assert!(once.l2_distance(&twice).unwrap() < tau);
        }
    }
}

#[test]
fn csv_dump_has_header_and_rows() {
    let g = Arc::new(QuadratureGrid::new(2, GridScheme::CircleUniform, 16).unwrap());
    let f = BoundaryFunction::constant(Arc::clone(&g), 0.5);
    let csv = f.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,x1,weight,value"));
    assert_eq!(lines.count(), 16);
    assert_eq!(g.to_csv().lines().count(), 17);
}

fn circle_grid() -> Arc<QuadratureGrid> {
    Arc::new(QuadratureGrid::new(2, GridScheme::CircleUniform, 64).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz(a in prop::collection::vec(-5.0f64..5.0, 64), b in prop::collection::vec(-5.0f64..5.0, 64)) {
        let g = circle_grid();
        let f = BoundaryFunction::new(Arc::clone(&g), a).unwrap();
        let k = BoundaryFunction::new(g, b).unwrap();
        let ip = f.l2_inner(&k).unwrap();
        prop_assert!(ip.abs() <= f.norm() * k.norm() * (1.0 + 1e-12) + 1e-300);
        prop_assert!((ip - k.l2_inner(&f).unwrap()).abs() <= 1e-12 * (1.0 + ip.abs()));
    }

    #[test]
    fn radial_projection_two_lipschitz_off_half_ball(
        a in prop::collection::vec(0.01f64..3.0, 64),
        b in prop::collection::vec(0.01f64..3.0, 64),
        sa in 0.5f64..10.0,
        sb in 0.5f64..10.0,
    ) {
        let g = circle_grid();
        let f = BoundaryFunction::new(Arc::clone(&g), a).unwrap();
        let k = BoundaryFunction::new(g, b).unwrap();
        let f = f.scaled(sa / f.norm());
        let k = k.scaled(sb / k.norm());
        let lhs = f.radial_project().unwrap().l2_distance(&k.radial_project().unwrap()).unwrap();
        prop_assert!(lhs <= 2.0 * f.l2_distance(&k).unwrap() + 1e-12);
    }

    #[test]
    fn radial_projection_is_homogeneous(a in prop::collection::vec(0.01f64..3.0, 64), c in 1e-3f64..1e3) {
        let f = BoundaryFunction::new(circle_grid(), a).unwrap();
        let p = f.radial_project().unwrap();
        prop_assert!((p.norm() - 1.0).abs() < 1e-12);
        prop_assert!(f.scaled(c).radial_project().unwrap().l2_distance(&p).unwrap() < 1e-12);
    }
}
