//! The form `Omega`: comass, calibration of `Phi_0`; and the barycenter map.

use std::fmt::Write;
use std::sync::Arc;

use nalgebra::DVector;
use natmaplab_core::barycenter::{solve_barycenter, BarycenterProblem};
use natmaplab_core::bmeasure::{isom_action_exact, BoundaryFunction};
use natmaplab_core::calib::{
    anisotropic_immersion, bounded_comass_check, calibrated_value, calibration_defect, comass_estimate,
    immersion_calibration_defect, RandomFrameSampler,
};
use natmaplab_core::hypcore::{hyp_distance, random_rotation, BallPoint, MobiusIsometry};
use natmaplab_core::natmap::{phi0, STENCIL_BARY_TOL};
use natmaplab_core::rng::stream_rng;
use natmaplab_core::Result;

use super::{build_grid, random_points};
use crate::result::Checks;

pub fn comass(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let grid = build_grid(&cfg)?;
    let sampler = RandomFrameSampler::unit_sphere(Arc::clone(&grid), cfg.seed);
    let report = comass_estimate(&sampler, cfg.samples)?;
    ck.record("comass.max", None, report.max, report.bound);
    ck.data("comass.max", report.to_csv());

    let mut points = vec![BallPoint::origin(cfg.n)];
    points.extend(random_points(cfg.n, 4, 1.0, cfg.seed, 1));
    let mut csv = String::from("x_norm,value,bound\n");
    let mut least = f64::INFINITY;
    for p in &points {
        let v = calibrated_value(p, &grid)?;
        let _ = writeln!(csv, "{:.6},{v:.10e},{:.10e}", p.coords().norm(), report.bound);
        least = least.min(v);
    }
    ck.record("comass.calibrated", None, least, report.bound);
    ck.data("comass.calibrated", csv);

    let off = RandomFrameSampler::off_sphere(Arc::clone(&grid), cfg.seed.wrapping_add(1), (0.5, 2.0));
    let report = bounded_comass_check(&off, (cfg.samples / 10).max(1))?;
    ck.record("comass.off_sphere", None, report.max, report.bound);
    ck.data("comass.off_sphere", report.to_csv());
    Ok(())
}

pub fn calibration(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let grid = build_grid(&cfg)?;
    // |p| <= 0.6
    let radius = 2.0 * 0.6f64.atanh();
    let mut csv = String::from("x_norm,defect\n");
    let mut worst = 0.0f64;
    for p in random_points(cfg.n, cfg.samples, radius, cfg.seed, 0) {
        let d = calibration_defect(&p, &grid)?;
        let _ = writeln!(csv, "{:.6},{d:.8e}", p.coords().norm());
        worst = worst.max(d);
    }
    ck.record("calibration.defect", None, worst, 0.0);
    ck.data("calibration.defect", csv);

    let o = BallPoint::origin(cfg.n);
    let control = immersion_calibration_defect(|q| anisotropic_immersion(q, 0.6, &grid), &o)?;
    let floor = 2.0 * cfg.tolerance("calibration.defect");
    ck.record("calibration.negative_control", None, control, floor);
    Ok(())
}

fn solve(phi: &BoundaryFunction) -> Result<BallPoint> {
    Ok(solve_barycenter(&BarycenterProblem::new(phi)?, STENCIL_BARY_TOL, 200)?.point)
}

/// A positive test function with a barycenter away from `o`.
fn smooth(t: &DVector<f64>) -> f64 {
    let z = if t.len() > 2 { t[2] } else { 0.0 };
    1.2 + 0.5 * t[0] - 0.4 * t[1] * z + 0.2 * t[1]
}

pub fn barycenter_suite(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let h = cfg.h();
    let grid = build_grid(&cfg)?;
    let o = BallPoint::origin(cfg.n);
    let mut csv = String::from("case,distance\n");

    let one = BoundaryFunction::constant(Arc::clone(&grid), 1.0);
    let d = hyp_distance(&solve(&one)?, &o);
    let _ = writeln!(csv, "constant,{d:.6e}");
    ck.record("bar.constant", None, d, 0.0);

    let f = BoundaryFunction::from_fn(Arc::clone(&grid), |t| smooth(&DVector::from_column_slice(t)));
    let base = solve(&f)?;
    let mut worst = 0.0f64;
    for c in [1e-3, 7.3, 1e3] {
        let d = hyp_distance(&solve(&f.scaled(c))?, &base);
        let _ = writeln!(csv, "scale {c},{d:.6e}");
        worst = worst.max(d);
    }
    ck.record("bar.scale", None, worst, 0.0);

    let mut rng = stream_rng(cfg.seed, 2);
    let mut worst = 0.0f64;
    for i in 0..5 {
        let rot = MobiusIsometry::rotation(random_rotation(&mut rng, cfg.n))?;
        let moved = isom_action_exact(&rot, smooth, h, &grid)?;
        let d = hyp_distance(&solve(&moved)?, &rot.apply_point(&base)?);
        let _ = writeln!(csv, "rotation {i},{d:.6e}");
        worst = worst.max(d);
    }
    ck.record("bar.rotation", None, worst, 0.0);

    // |p| <= 0.8
    let radius = 2.0 * 0.8f64.atanh();
    let mut worst = 0.0f64;
    for (i, p) in random_points(cfg.n, cfg.samples, radius, cfg.seed, 3).iter().enumerate() {
        let d = hyp_distance(&solve(&phi0(p, &grid)?)?, p);
        let _ = writeln!(csv, "phi0 {i},{d:.6e}");
        worst = worst.max(d);
    }
    ck.record("bar.phi0", None, worst, 0.0);
    ck.data("barycenter", csv);
    Ok(())
}
