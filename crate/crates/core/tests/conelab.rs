use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use natmaplab_core::conelab::*;
use natmaplab_core::hypcore::{
    busemann, geodesic_toward, hyp_distance, BallPoint, CuspModel, CuspPoint, IdealPoint,
};
use natmaplab_core::LabError;
use proptest::prelude::*;

fn wavy(n: usize) -> Arc<dyn BaseMap> {
    assert_eq!(n, 3);
    Arc::new(FnMap::new(n, |x: &DVector<f64>| {
        BallPoint::from_slice(&[
            0.3 * x[0] + 0.1 * x[1] * x[1],
            0.25 * x[1] - 0.1 * x[0] * x[1],
            0.2 * (2.0 * x[0]).sin() - 0.1,
        ])
    }))
}

fn unit_chart(base: Arc<dyn BaseMap>, target: IdealPoint) -> ConeChart {
    ConeChart::new(base, target, ConeParam::UnitSpeed).unwrap()
}

fn ripple(x: &DVector<f64>) -> f64 {
    0.3 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
}

fn ripple_grad(x: &DVector<f64>) -> (f64, f64) {
    (
        0.6 * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos(),
        -0.6 * PI * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin(),
    )
}

#[test]
fn zero_parameter_returns_base_point() {
    let chart = ConeChart::new(wavy(3), IdealPoint::axis(3, 0), ConeParam::Tangent { eps: 1.0 }).unwrap();
    let x = DVector::from_vec(vec![0.4, -0.3]);
    let p = cone_map(&chart, &x, 0.0).unwrap();
    let q = chart.base.eval(&x).unwrap();
    assert!((p.coords() - q.coords()).norm() < 1e-15);
}

#[test]
fn tangent_chart_moves_busemann_by_tan() {
    let theta = IdealPoint::from_slice(&[0.6, 0.0, 0.8]).unwrap();
    let eps = 0.7;
    let chart = ConeChart::new(wavy(3), theta.clone(), ConeParam::Tangent { eps }).unwrap();
    for &(a, b) in &[(0.1, 0.2), (-0.8, 0.5), (0.9, -0.9)] {
        let x = DVector::from_vec(vec![a, b]);
        let base = busemann(&theta, &chart.base.eval(&x).unwrap()).unwrap();
        for s in [0.1, 0.3, 0.5] {
            let p = cone_map(&chart, &x, s).unwrap();
            let expected = base - (s * PI / (2.0 * eps)).tan();
            assert!((busemann(&theta, &p).unwrap() - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn unit_speed_cone_sits_at_distance_s() {
    let chart = unit_chart(wavy(3), IdealPoint::axis(3, 1));
    let x = DVector::from_vec(vec![-0.2, 0.7]);
    let base = chart.base.eval(&x).unwrap();
    for s in [0.25, 1.0, 3.0] {
        let p = cone_map(&chart, &x, s).unwrap();
        assert!((hyp_distance(&base, &p) - s).abs() < 1e-9);
        let q = geodesic_toward(&base, &IdealPoint::axis(3, 1), s).unwrap();
        assert!((p.coords() - q.coords()).norm() < 1e-12);
    }
}

#[test]
fn tangent_chart_errors_near_depth() {
    let chart = ConeChart::new(wavy(3), IdealPoint::axis(3, 0), ConeParam::Tangent { eps: 0.5 }).unwrap();
    let x = DVector::from_vec(vec![0.0, 0.0]);
    assert!(matches!(cone_map(&chart, &x, 0.5), Err(LabError::NearBoundary { .. })));
    assert!(matches!(cone_map(&chart, &x, 0.4999999), Err(LabError::NearBoundary { .. })));
    assert!(cone_map(&chart, &x, -0.1).is_err());
    assert!(ConeChart::new(wavy(3), IdealPoint::axis(3, 0), ConeParam::Tangent { eps: 0.0 }).is_err());
    assert!(ConeChart::new(wavy(3), IdealPoint::axis(2, 0), ConeParam::UnitSpeed).is_err());
}

#[test]
fn horosphere_cone_is_vertical_in_half_space() {
    let cusp = CuspModel::unit_square(3).unwrap();
    let up = IdealPoint::axis(3, 2);
    for &(a, b, t) in &[(0.0, 0.0, 0.0), (0.3, -0.4, 0.5), (1.5, 0.2, -1.0)] {
        let p = CuspPoint {
            y: DVector::from_vec(vec![a, b]),
            t,
        };
        let start = cusp.to_ball(&p).unwrap();
        for s in [0.5, 1.0, 2.0] {
            let moved = geodesic_toward(&start, &up, s).unwrap();
            let expected = cusp.to_ball(&cusp.shift(s, &p).unwrap()).unwrap();
            assert!((moved.coords() - expected.coords()).norm() < 1e-12);
        }
    }
}

#[test]
fn decay_bound_at_three_depths() {
    let chart = unit_chart(wavy(3), IdealPoint::axis(3, 0));
    let levels = [0.5, 1.0, 2.0];
    let samples = decay_samples(3, -1.0, 1.0, 500, &levels, 7);
    let report = cone_jacobian_decay_check(&chart, &samples).unwrap();
    assert_eq!(report.samples.len(), 1500);
    assert_eq!(report.degenerate, 0);
    for s in &report.samples {
        assert!(s.ratio <= (-2.0 * s.s).exp() * 1.05, "{s:?}");
    }
    assert!(report.passes(0.05));
    // e^{-2} (1 + 5e-2) at s = 1
    let worst_at_one = report
        .samples
        .iter()
        .filter(|s| s.s == 1.0)
        .map(|s| s.ratio)
        .fold(0.0, f64::max);
    assert!(worst_at_one <= 0.1421);
    assert!(report.max_contraction() <= 1.05);
    assert!(report.max_speed_error() < 1e-6);
}

#[test]
fn decay_at_base_is_one() {
    let chart = unit_chart(wavy(3), IdealPoint::from_slice(&[0.0, -0.6, 0.8]).unwrap());
    let samples = decay_samples(3, -1.0, 1.0, 50, &[0.0], 3);
    let report = cone_jacobian_decay_check(&chart, &samples).unwrap();
    assert!(report.max_ratio_over_bound() <= 1.0 + 1e-6);
}

#[test]
fn horosphere_decay_is_exact() {
    let chart = unit_chart(Arc::new(HorospherePatch { dim: 3, height: 1.0 }), IdealPoint::axis(3, 2));
    let samples = decay_samples(3, -0.5, 0.5, 40, &[0.5, 1.0, 2.0], 11);
    let report = cone_jacobian_decay_check(&chart, &samples).unwrap();
    for s in &report.samples {
        assert!((s.ratio / s.bound - 1.0).abs() < 1e-6, "{s:?}");
        assert!((s.contraction - 1.0).abs() < 1e-6);
    }
}

#[test]
fn rank_deficient_base_is_skipped_and_counted() {
    let flat = Arc::new(FnMap::new(3, |x: &DVector<f64>| {
        BallPoint::from_slice(&[0.4 * x[0].tanh(), 0.0, 0.1])
    }));
    let chart = unit_chart(flat, IdealPoint::axis(3, 1));
    let samples = decay_samples(3, -1.0, 1.0, 20, &[0.5, 1.0], 5);
    let report = cone_jacobian_decay_check(&chart, &samples).unwrap();
    assert_eq!(report.degenerate, 40);
    assert!(report.samples.is_empty());
    let integral = cone_integral_inequality(&chart, &MeshRegion { lo: -1.0, hi: 1.0, cells: 6 }).unwrap();
    assert!(integral.lhs < 1e-8 && integral.rhs < 1e-8);
}

#[test]
fn decay_requires_unit_speed() {
    let chart = ConeChart::new(wavy(3), IdealPoint::axis(3, 0), ConeParam::Tangent { eps: 1.0 }).unwrap();
    let samples = decay_samples(3, -1.0, 1.0, 2, &[0.5], 1);
    assert!(cone_jacobian_decay_check(&chart, &samples).is_err());
}

#[test]
fn integral_inequality_generic_map() {
    let chart = unit_chart(wavy(3), IdealPoint::axis(3, 0));
    let integral = cone_integral_inequality(&chart, &MeshRegion { lo: -1.0, hi: 1.0, cells: 16 }).unwrap();
    assert!(integral.lhs > 0.0);
    assert!(integral.holds(0.05), "{integral:?}");
    assert!(integral.lhs <= 0.5 * integral.rhs * 2.0 * 1.05);
}

#[test]
fn horosphere_patch_attains_the_constant() {
    let chart = unit_chart(Arc::new(HorospherePatch { dim: 3, height: 1.0 }), IdealPoint::axis(3, 2));
    let area = 1.0;
    let integral = cone_integral_inequality(&chart, &MeshRegion { lo: -0.5, hi: 0.5, cells: 8 }).unwrap();
    assert!((integral.rhs - area / 2.0).abs() < 1e-8);
    assert!((integral.lhs - area / 2.0).abs() < 1e-5, "{integral:?}");
    assert!(integral.holds(0.05));
}

#[test]
fn constant_base_has_no_cone_volume() {
    let point = Arc::new(FnMap::new(3, |_: &DVector<f64>| BallPoint::from_slice(&[0.2, -0.1, 0.3])));
    let chart = unit_chart(point, IdealPoint::axis(3, 0));
    let integral = cone_integral_inequality(&chart, &MeshRegion { lo: 0.0, hi: 1.0, cells: 4 }).unwrap();
    assert_eq!(integral.lhs, 0.0);
    assert_eq!(integral.rhs, 0.0);
}

#[test]
fn mesh_refinement_converges() {
    let chart = unit_chart(wavy(3), IdealPoint::axis(3, 0));
    let run = |cells| cone_integral_inequality(&chart, &MeshRegion { lo: -1.0, hi: 1.0, cells }).unwrap();
    let (a, b, c) = (run(12), run(24), run(48));
    let first = (a.lhs - b.lhs).abs();
    let second = (b.lhs - c.lhs).abs();
    assert!(second < 0.5 * first, "{first} {second}");
    let margin = |i: &ConeIntegral| i.lhs - i.rhs;
    assert!(margin(&c) < 0.0);
}

#[test]
fn base_lipschitz_is_finite() {
    let chart = unit_chart(wavy(3), IdealPoint::axis(3, 0));
    let lip = chart.base_lipschitz(&MeshRegion { lo: -1.0, hi: 1.0, cells: 20 }).unwrap();
    assert!(lip.is_finite() && lip > 0.5 && lip < 3.0, "{lip}");
    let horo = unit_chart(Arc::new(HorospherePatch { dim: 3, height: 1.0 }), IdealPoint::axis(3, 2));
    let lip = horo.base_lipschitz(&MeshRegion { lo: -0.5, hi: 0.5, cells: 20 }).unwrap();
    // chords of a horosphere are shorter than arcs
    assert!(lip <= 1.0 && lip > 0.99);
}

#[test]
fn decay_csv_rows() {
    let chart = unit_chart(wavy(3), IdealPoint::axis(3, 0));
    let report = cone_jacobian_decay_check(&chart, &decay_samples(3, -1.0, 1.0, 3, &[1.0], 2)).unwrap();
    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,ratio,bound");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').count(), 3);
}

#[test]
fn flat_torus_slice_coned_upward() {
    let cusp = CuspModel::unit_square(3).unwrap();
    let chart = CuspChart::new(cusp, |_: &DVector<f64>| 0.0);
    let report = downstairs_cone_check(&chart, &[1, 0], 8).unwrap();
    assert!((report.integral.rhs - 1.0 / 2.0).abs() < 1e-9);
    assert!((report.integral.lhs - report.integral.rhs).abs() < 1e-6);
    assert!(report.equivariance_gap < 1e-12);
}

#[test]
fn rippled_torus_slice_matches_quadrature_oracle() {
    let cusp = CuspModel::unit_square(3).unwrap();
    let chart = CuspChart::new(cusp, ripple);
    let report = downstairs_cone_check(&chart, &[2, -1], 24).unwrap();
    // cone volume int e^{-2t}/2 and slice area int e^{-2t} sqrt(1 + e^{2t} |grad t|^2), on a fine mesh
    let m = 400;
    let (mut vol, mut area) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let x = DVector::from_vec(vec![(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64]);
            let t = ripple(&x);
            let (gx, gy) = ripple_grad(&x);
            vol += (-2.0 * t).exp() / 2.0;
            area += (-2.0 * t).exp() * (1.0 + (2.0 * t).exp() * (gx * gx + gy * gy)).sqrt();
        }
    }
    vol /= (m * m) as f64;
    area /= (m * m) as f64;
    assert!((report.integral.lhs - vol).abs() < 1e-3 * vol, "{} {vol}", report.integral.lhs);
    assert!((report.integral.rhs - area / 2.0).abs() < 1e-3 * area, "{} {area}", report.integral.rhs);
    assert!(report.integral.holds(0.05));
    assert!(report.equivariance_gap < 1e-12);
}

#[test]
fn skewed_lattice_cone_descends() {
    let lattice = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 1.3]);
    let cusp = CuspModel::new(3, lattice).unwrap();
    let chart = CuspChart::new(cusp, ripple);
    let report = downstairs_cone_check(&chart, &[-3, 5], 12).unwrap();
    assert!(report.equivariance_gap < 1e-12);
    assert!(report.integral.holds(0.05));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cone_map_is_continuous_in_s(a in -1.0f64..1.0, b in -1.0f64..1.0, s in 0.0f64..3.0) {
        let chart = unit_chart(wavy(3), IdealPoint::axis(3, 0));
        let x = DVector::from_vec(vec![a, b]);
        let p = cone_map(&chart, &x, s).unwrap();
        let q = cone_map(&chart, &x, s + 1e-6).unwrap();
        prop_assert!((hyp_distance(&p, &q) - 1e-6).abs() < 1e-9);
    }

    #[test]
    fn pointwise_decay_holds(a in -1.0f64..1.0, b in -1.0f64..1.0, s in 0.0f64..4.0) {
        let chart = unit_chart(wavy(3), IdealPoint::from_slice(&[0.0, 0.6, -0.8]).unwrap());
        let report = cone_jacobian_decay_check(&chart, &[(DVector::from_vec(vec![a, b]), s)]).unwrap();
        prop_assert!(report.passes(1e-6));
    }
}
