use nalgebra::DVector;
use natmaplab_core::hypcore::{
    busemann, half_space_to_ball, hyp_distance, BallPoint, CuspModel, CuspPoint, IdealPoint,
};
use proptest::prelude::*;

/// Half-space distance `arccosh(1 + |p - q|^2 / (2 z_p z_q))`.
fn half_space_distance(y1: &DVector<f64>, z1: f64, y2: &DVector<f64>, z2: f64) -> f64 {
    let d2 = (y1 - y2).norm_squared() + (z1 - z2).powi(2);
    (1.0 + d2 / (2.0 * z1 * z2)).acosh()
}

#[test]
fn unit_height_origin_is_ball_center() {
    let p = half_space_to_ball(&DVector::zeros(2), 1.0).unwrap();
    assert!(p.coords().norm() < 1e-15);
    assert!(half_space_to_ball(&DVector::zeros(2), 0.0).is_err());
    assert!(half_space_to_ball(&DVector::zeros(2), -1.0).is_err());
}

#[test]
fn cusp_slices_are_horospheres_about_the_top() {
    let cusp = CuspModel::unit_square(3).unwrap();
    let top = IdealPoint::axis(3, 2);
    for t in [-1.0, 0.0, 0.7, 2.0] {
        for y in [[0.0, 0.0], [0.4, -0.9], [2.0, 1.0]] {
            let p = cusp
                .to_ball(&CuspPoint {
                    y: DVector::from_row_slice(&y),
                    t,
                })
                .unwrap();
            assert!((busemann(&top, &p).unwrap() + t).abs() < 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn half_space_chart_is_an_isometry(
        a in -2.0f64..2.0, b in -2.0f64..2.0, z1 in 0.2f64..3.0,
        c in -2.0f64..2.0, d in -2.0f64..2.0, z2 in 0.2f64..3.0,
    ) {
        let y1 = DVector::from_vec(vec![a, b]);
        let y2 = DVector::from_vec(vec![c, d]);
        let p = half_space_to_ball(&y1, z1).unwrap();
        let q = half_space_to_ball(&y2, z2).unwrap();
        let expected = half_space_distance(&y1, z1, &y2, z2);
        prop_assert!((hyp_distance(&p, &q) - expected).abs() < 1e-9 * expected.max(1.0));
    }

    #[test]
    fn ball_distance_is_symmetric_and_positive(x in prop::collection::vec(-0.5f64..0.5, 3), y in prop::collection::vec(-0.5f64..0.5, 3)) {
        let p = BallPoint::from_slice(&x).unwrap();
        let q = BallPoint::from_slice(&y).unwrap();
        prop_assert!((hyp_distance(&p, &q) - hyp_distance(&q, &p)).abs() < 1e-12);
        prop_assert!(hyp_distance(&p, &q) >= 0.0);
        prop_assert!(hyp_distance(&p, &p) < 1e-7);
    }
}
