//! Experiments on the maps `Phi_0`, `Phi^b_c` and `F_c`, the homotopy between them, and the
//! volume entropy.

use std::f64::consts::PI;
use std::fmt::Write;
use std::sync::Arc;

use nalgebra::DVector;
use natmaplab_core::bmeasure::BoundaryFunction;
use natmaplab_core::hypcore::{hyp_distance, BallPoint, CuspModel};
use natmaplab_core::natmap::{
    entropy_fit, find_small_slices, g_phi0, g_phi0_model, homotopy_samples, homotopy_stretch_bounds,
    phi0, stokes_error_experiment, CuspSlices, NaturalMap, NaturalMapConfig,
};
use natmaplab_core::rng::stream_rng;
use natmaplab_core::Result;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{build_backend, build_grid, label, random_points};
use crate::config::BackendSpec;
use crate::result::Checks;

/// Query points stay within this distance of `o`; the volume cloud covers `QUERY_REACH`.
const QUERY_RADIUS: f64 = 0.7;
const QUERY_REACH: f64 = 1.0;

fn c_label(ck: &Checks, c: f64) -> Option<String> {
    if ck.config().c_schedule.len() > 1 {
        label("c", c)
    } else {
        None
    }
}

pub fn g_phi0_identity(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let n = cfg.n as f64;
    let h = cfg.h();
    let grid = build_grid(&cfg)?;
    let scale = h * h / (4.0 * n);
    let mut csv = String::from("x_norm,relative_error,min_eigenvalue,eigenvalue_spread\n");
    let (mut worst_err, mut min_eig, mut worst_spread) = (0.0f64, f64::INFINITY, 0.0f64);
    for p in random_points(cfg.n, cfg.samples, 2.0, cfg.seed, 0) {
        let t = g_phi0(&p, &grid)?;
        let err = t.relative_error(&g_phi0_model(&p));
        let rel = t.relative_eigenvalues(p.conformal_factor());
        let spread = (rel[rel.len() - 1] - rel[0]) / scale;
        let eig = t.min_eigenvalue();
        let _ = writeln!(csv, "{:.6},{err:.6e},{eig:.6e},{spread:.6e}", p.coords().norm());
        worst_err = worst_err.max(err);
        min_eig = min_eig.min(eig);
        worst_spread = worst_spread.max(spread);
    }
    ck.record("g_phi0.relative_error", None, worst_err, 0.0);
    ck.record("g_phi0.min_eigenvalue", None, min_eig, 0.0);
    ck.record("g_phi0.eigenvalue_spread", None, worst_spread, 0.0);
    ck.data("g_phi0.relative_error", csv);
    Ok(())
}

pub fn derivative_bound(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let backend = build_backend(&cfg)?;
    let grid = build_grid(&cfg)?;
    let dirs = 5;
    let count = cfg.samples.div_ceil(dirs);
    let points = random_points(cfg.n, count, QUERY_RADIUS, cfg.seed, 0);
    let mut rng = stream_rng(cfg.seed, 1);
    let directions: Vec<DVector<f64>> = (0..count * dirs)
        .map(|_| DVector::from_fn(cfg.n, |_, _| rng.sample(StandardNormal)))
        .collect();
    let mut csv = String::from("c,point,rayleigh,bound\n");
    for &c in &cfg.c_schedule {
        let nm = NaturalMapConfig::new(cfg.n, c, cfg.mc_count, cfg.seed)?;
        let map = NaturalMap::new(backend.as_ref(), &nm, Arc::clone(&grid), QUERY_REACH)?;
        let bound = c * c / 4.0;
        let mut worst = 0.0f64;
        let mut norm_gap = 0.0f64;
        let mut taken = 0;
        for (i, d) in map.phi_derivatives(&points)?.iter().enumerate() {
            norm_gap = norm_gap.max((d.phi.norm() - 1.0).abs());
            for v in &directions[i * dirs..(i + 1) * dirs] {
                if taken == cfg.samples {
                    break;
                }
                let r = d.rayleigh(v)?;
                let _ = writeln!(csv, "{c},{i},{r:.8e},{bound:.8e}");
                worst = worst.max(r);
                taken += 1;
            }
        }
        ck.record("rayleigh", c_label(ck, c), worst, bound);
        ck.record("phi_c.unit_norm", c_label(ck, c), 1.0 + norm_gap, 1.0);
    }
    ck.data("rayleigh", csv);
    Ok(())
}

pub fn jacobian_bound_phi(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let n = cfg.n as f64;
    let backend = build_backend(&cfg)?;
    let grid = build_grid(&cfg)?;
    let points = random_points(cfg.n, cfg.samples, QUERY_RADIUS, cfg.seed, 0);
    let mut csv = String::from("c,point,jacobian,bound\n");
    for &c in &cfg.c_schedule {
        let nm = NaturalMapConfig::new(cfg.n, c, cfg.mc_count, cfg.seed)?;
        let map = NaturalMap::new(backend.as_ref(), &nm, Arc::clone(&grid), QUERY_REACH)?;
        let bound = (c * c / (4.0 * n)).powf(n / 2.0);
        let (mut worst, mut min_eig) = (0.0f64, f64::INFINITY);
        for (i, d) in map.phi_derivatives(&points)?.iter().enumerate() {
            let jac = d.gram_jacobian()?;
            let _ = writeln!(csv, "{c},{i},{jac:.8e},{bound:.8e}");
            worst = worst.max(jac);
            min_eig = min_eig.min(d.tensor()?.min_eigenvalue());
        }
        ck.record("jacobian_phi", c_label(ck, c), worst, bound);
        ck.record("g_phi_c.min_eigenvalue", c_label(ck, c), min_eig, 0.0);
    }
    ck.data("jacobian_phi", csv);
    Ok(())
}

pub fn natural_map_suite(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let n = cfg.n as f64;
    let h = cfg.h();
    let exact = matches!(cfg.backend, BackendSpec::Exact);
    let backend = build_backend(&cfg)?;
    let grid = build_grid(&cfg)?;
    let points = random_points(cfg.n, cfg.samples, QUERY_RADIUS, cfg.seed, 0);
    let mut jac_csv = String::from("c,point,jacobian,bound\n");
    let mut dist_csv = String::from("c,point,distance\n");
    // (c, mean distance, mean |Jac - 1|)
    let mut per_c = Vec::new();
    for &c in &cfg.c_schedule {
        let nm = NaturalMapConfig::new(cfg.n, c, cfg.mc_count, cfg.seed)?;
        let map = NaturalMap::new(backend.as_ref(), &nm, Arc::clone(&grid), QUERY_REACH)?;
        let reports = map.jacobians(&points)?;
        let bound = (c / h).powf(n);
        let (mut worst, mut least) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut worst_dist, mut sum_dist, mut l1) = (0.0f64, 0.0, 0.0);
        for (i, r) in reports.iter().enumerate() {
            let _ = writeln!(jac_csv, "{c},{i},{:.8e},{bound:.8e}", r.jacobian);
            worst = worst.max(r.jacobian);
            least = least.min(r.jacobian);
            l1 += (r.jacobian - 1.0).abs();
            let d = hyp_distance(&r.image, &r.point);
            let _ = writeln!(dist_csv, "{c},{i},{d:.8e}");
            worst_dist = worst_dist.max(d);
            sum_dist += d;
        }
        let m = reports.len() as f64;
        ck.record("jacobian_fc", label("c", c), worst, bound);
        if exact {
            ck.record("jacobian_fc.sign", label("c", c), least, 0.0);
            ck.record("distance_fc", label("c", c), worst_dist, 0.0);
        }
        per_c.push((c, sum_dist / m, l1 / m));
    }
    // along the schedule as c decreases to h
    per_c.sort_by(|a, b| b.0.total_cmp(&a.0));
    if per_c.len() >= 2 {
        if exact {
            let rise = per_c.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
            ck.record("distance_fc.trend", None, rise, 0.0);
        } else {
            let last = per_c[per_c.len() - 1].2;
            ck.record("jacobian_fc.l1_trend", None, last - per_c[0].2, 0.0);
        }
    }
    let mut trend_csv = String::from("c,mean_distance,mean_abs_jacobian_minus_one\n");
    for (c, d, l1) in &per_c {
        let _ = writeln!(trend_csv, "{c},{d:.8e},{l1:.8e}");
    }
    ck.data("jacobian_fc", jac_csv);
    ck.data("distance_fc", dist_csv);
    ck.data("jacobian_fc.trend", trend_csv);
    Ok(())
}

pub fn homotopy_bounds(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let backend = build_backend(&cfg)?;
    let grid = build_grid(&cfg)?;
    let samples = homotopy_samples(cfg.n, cfg.samples, 1.0, cfg.seed);
    let mut csv = String::from("c,space,space_bound,time_sq,norm\n");
    for &c in &cfg.c_schedule {
        let nm = NaturalMapConfig::new(cfg.n, c, cfg.mc_count, cfg.seed)?;
        let map = NaturalMap::new(backend.as_ref(), &nm, Arc::clone(&grid), 1.2)?;
        let theta = |pts: &[BallPoint]| {
            let groups: Vec<Vec<BallPoint>> = pts.iter().map(|p| vec![p.clone()]).collect();
            map.estimator().phi_groups(&groups)
        };
        let upsilon = |pts: &[BallPoint]| pts.iter().map(|p| phi0(p, &grid)).collect::<Result<Vec<BoundaryFunction>>>();
        let report = homotopy_stretch_bounds(&theta, &upsilon, &samples)?;
        for m in &report.measurements {
            let _ = writeln!(csv, "{c},{:.8e},{:.8e},{:.8e},{:.8e}", m.space, m.space_bound, m.time_sq, m.norm);
        }
        ck.record("homotopy.time", c_label(ck, c), report.max_time_sq, 2.0);
        ck.record("homotopy.space", c_label(ck, c), report.max_space_ratio, 1.0);
        ck.record("homotopy.norm", c_label(ck, c), report.min_norm, 0.5);
    }
    ck.data("homotopy", csv);
    Ok(())
}

pub fn stokes_error(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let backend = build_backend(&cfg)?;
    let grid = build_grid(&cfg)?;
    let cusp = CuspModel::unit_square(cfg.n)?;
    let family = CuspSlices::new(cusp.clone(), 8)?;
    let slices = find_small_slices(&family, &[0.0, 1.5, 3.0, 4.5], 3)?;
    ck.record("stokes.slices", None, slices.len() as f64, 3.0);
    let mut csv = String::from("c,level,slice_volume,lipschitz,lipschitz_bound,error_estimate\n");
    for &c in &cfg.c_schedule {
        let nm = NaturalMapConfig::new(cfg.n, c, cfg.mc_count, cfg.seed)?;
        let report =
            stokes_error_experiment(backend.as_ref(), &nm, &cusp, &slices, &grid, cfg.samples, cfg.seed)?;
        for s in &report.slices {
            let _ = writeln!(
                csv,
                "{c},{},{:.8e},{:.8e},{:.8e},{:.8e}",
                s.level, s.slice_volume, s.lipschitz, report.lipschitz_bound, s.error_estimate
            );
        }
        ck.record("stokes.lipschitz", c_label(ck, c), report.max_lipschitz(), report.lipschitz_bound);
        ck.record("stokes.decrease", c_label(ck, c), report.decrease, 10.0);
    }
    ck.data("stokes", csv);
    Ok(())
}

/// `omega_{n-1} int_0^R sinh^{n-1}`.
fn closed_form_volume(n: usize, r: f64) -> Option<f64> {
    match n {
        2 => Some(2.0 * PI * (r.cosh() - 1.0)),
        3 => Some(PI * ((2.0 * r).sinh() - 2.0 * r)),
        4 => {
            let ch = r.cosh();
            Some(2.0 * PI * PI * (ch.powi(3) / 3.0 - ch + 2.0 / 3.0))
        }
        _ => None,
    }
}

pub fn entropy(ck: &mut Checks) -> Result<()> {
    let cfg = ck.config().clone();
    let backend = build_backend(&cfg)?;
    let radii: Vec<f64> = (0..cfg.samples.max(4))
        .map(|i| 4.0 + 4.0 * i as f64 / (cfg.samples.max(4) - 1) as f64)
        .collect();
    let o = BallPoint::origin(cfg.n);
    let fit = entropy_fit(backend.as_ref(), &radii, &o)?;
    ck.record("entropy", None, fit.slope, cfg.h());
    let mut csv = String::from("radius,volume,closed_form\n");
    let mut worst = 0.0f64;
    for (&r, &v) in fit.window.iter().zip(&fit.volumes) {
        let exact = closed_form_volume(cfg.n, r).unwrap_or(f64::NAN);
        let _ = writeln!(csv, "{r},{v:.12e},{exact:.12e}");
        worst = worst.max((v - exact).abs() / exact);
    }
    if matches!(cfg.backend, BackendSpec::Exact) {
        ck.record("entropy.volumes", None, worst, 0.0);
    }
    ck.data("entropy", csv);
    Ok(())
}
