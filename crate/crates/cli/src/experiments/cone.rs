//! Cone maps toward an ideal point, in the ball and down a cusp.

use std::f64::consts::PI;
use std::fmt::Write;
use std::sync::Arc;

use nalgebra::DVector;
use natmaplab_core::conelab::{
    cone_integral_inequality, cone_jacobian_decay_check, decay_samples, downstairs_cone_check, BaseMap,
    ConeChart, ConeParam, CuspChart, FnMap, HorospherePatch, MeshRegion,
};
use natmaplab_core::hypcore::{BallPoint, CuspModel, IdealPoint};
use natmaplab_core::natmap::{find_small_slices, CuspSlices, SliceFamily};
use natmaplab_core::Result;

use crate::result::Checks;

const DEPTHS: [f64; 3] = [0.5, 1.0, 2.0];

/// A smooth immersion of `[-1, 1]^{n-1}` with no symmetry.
fn wavy(n: usize) -> Arc<dyn BaseMap> {
    let k = n - 1;
    Arc::new(FnMap::new(n, move |x: &DVector<f64>| {
        let mut c: Vec<f64> = (0..k)
            .map(|i| (0.3 - 0.05 * i as f64) * x[i] + 0.1 * x[(i + 1) % k].powi(2))
            .collect();
        c.push(0.2 * (2.0 * x[0]).sin() - 0.1);
        BallPoint::from_slice(&c)
    }))
}

fn unit_chart(base: Arc<dyn BaseMap>, target: IdealPoint) -> Result<ConeChart> {
    ConeChart::new(base, target, ConeParam::UnitSpeed)
}

pub fn cone_decay(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let chart = unit_chart(wavy(cfg.n), IdealPoint::axis(cfg.n, 0))?;
    let samples = decay_samples(cfg.n, -1.0, 1.0, cfg.samples, &DEPTHS, cfg.seed);
    let report = cone_jacobian_decay_check(&chart, &samples)?;
    ck.record("cone.decay", None, report.max_ratio_over_bound(), 1.0);
    ck.record("cone.contraction", None, report.max_contraction(), 1.0);
    ck.record("cone.speed", None, report.max_speed_error(), 0.0);
    ck.record("cone.samples", None, report.samples.len() as f64, samples.len() as f64);
    ck.data("cone.decay", report.to_csv());
    Ok(())
}

pub fn cone_integral(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let n = cfg.n;
    let m = cfg.samples.max(2);
    let chart = unit_chart(wavy(n), IdealPoint::axis(n, 0))?;
    let mut csv = String::from("cells,lhs,rhs,base_lipschitz\n");
    let mut runs = Vec::new();
    for cells in [m / 2, m, 2 * m] {
        let region = MeshRegion {
            lo: -1.0,
            hi: 1.0,
            cells,
        };
        let r = cone_integral_inequality(&chart, &region)?;
        let lip = chart.base_lipschitz(&region)?;
        let _ = writeln!(csv, "{cells},{:.10e},{:.10e},{lip:.6e}", r.lhs, r.rhs);
        runs.push(r);
    }
    let fine = &runs[2];
    ck.record("cone.integral", None, fine.lhs, fine.rhs);
    let first = (runs[0].lhs - runs[1].lhs).abs();
    let second = (runs[1].lhs - runs[2].lhs).abs();
    ck.record("cone.refinement", None, second - 0.5 * first, 0.0);
    ck.data("cone.integral", csv);

    let horo = unit_chart(
        Arc::new(HorospherePatch { dim: n, height: 1.0 }),
        IdealPoint::axis(n, n - 1),
    )?;
    let r = cone_integral_inequality(
        &horo,
        &MeshRegion {
            lo: -0.5,
            hi: 0.5,
            cells: (m / 2).max(2),
        },
    )?;
    ck.record("cone.horosphere", None, r.lhs, r.rhs);

    let point = BallPoint::from_slice(&vec![0.1; n])?;
    let constant = unit_chart(
        Arc::new(FnMap::new(n, move |_: &DVector<f64>| Ok(point.clone()))),
        IdealPoint::axis(n, 0),
    )?;
    let r = cone_integral_inequality(
        &constant,
        &MeshRegion {
            lo: 0.0,
            hi: 1.0,
            cells: 4,
        },
    )?;
    ck.record("cone.constant", None, r.lhs, 0.0);
    Ok(())
}

fn ripple(x: &DVector<f64>) -> f64 {
    let y = if x.len() > 1 { (2.0 * PI * x[1]).cos() } else { 1.0 };
    0.3 * (2.0 * PI * x[0]).sin() * y
}

pub fn cusp_suite(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let n = cfg.n;
    let cusp = CuspModel::unit_square(n)?;
    let family = CuspSlices::new(cusp.clone(), 8)?;
    let levels: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
    let v0 = cusp.base_volume();
    let mut csv = String::from("t,area,model\n");
    let (mut worst, mut rise) = (0.0f64, f64::NEG_INFINITY);
    let mut prev = f64::INFINITY;
    for &t in &levels {
        let (area, _) = family.slice_area(t)?;
        let model = v0 * (-((n - 1) as f64) * t).exp();
        let _ = writeln!(csv, "{t},{area:.15e},{model:.15e}");
        worst = worst.max((area - model).abs() / model);
        rise = rise.max(area - prev);
        prev = area;
    }
    ck.record("cusp.slice_volume", None, worst, 0.0);
    // decreasing, and the last slice below a hundredth of the first
    ck.record("cusp.monotone", None, rise.max(prev - 0.01 * v0), 0.0);
    ck.data("cusp.slice_volume", csv);

    let small = find_small_slices(&family, &levels, 3)?;
    ck.record("cusp.small_slices", None, small.len() as f64, 3.0);

    let chart = CuspChart::new(cusp, ripple);
    let mut translate = vec![0i64; n - 1];
    translate[0] = 2;
    if n > 2 {
        translate[1] = -1;
    }
    let report = downstairs_cone_check(&chart, &translate, cfg.samples)?;
    ck.record("cusp.downstairs", None, report.integral.lhs, report.integral.rhs);
    ck.record("cusp.equivariance", None, report.equivariance_gap, 0.0);
    ck.data(
        "cusp.downstairs",
        format!("lhs,rhs\n{:.10e},{:.10e}\n", report.integral.lhs, report.integral.rhs),
    );
    Ok(())
}
