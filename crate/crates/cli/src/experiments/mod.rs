//! The thirteen experiments. Each writes rows into a [`Checks`] collector; a module error ends the
//! experiment and marks every check it had not yet measured as failed.

mod cone;
mod forms;
mod geometry;

use std::collections::BTreeSet;
use std::sync::Arc;

use natmaplab_core::bmeasure::{GridScheme, QuadratureGrid};
use natmaplab_core::hypcore::{BallPoint, MobiusIsometry};
use natmaplab_core::natmap::{ConformalBump, ExactBackend, GridBackend, GridBackendConfig, MetricBackend};
use natmaplab_core::rng::stream_rng;
use natmaplab_core::{LabError, Result};

use crate::checks::check_specs;
use crate::config::{BackendSpec, Experiment, ResolvedConfig};
use crate::result::{Checks, Row};

/// Rows and `(name, csv)` plot data of one experiment.
pub fn execute(cfg: &ResolvedConfig) -> (Vec<Row>, Vec<(String, String)>) {
    let mut ck = Checks::new(cfg);
    let outcome = match cfg.experiment {
        Experiment::GPhi0Identity => geometry::g_phi0_identity(&mut ck),
        Experiment::DerivativeBound => geometry::derivative_bound(&mut ck),
        Experiment::JacobianBoundPhi => geometry::jacobian_bound_phi(&mut ck),
        Experiment::NaturalMapSuite => geometry::natural_map_suite(&mut ck),
        Experiment::HomotopyBounds => geometry::homotopy_bounds(&mut ck),
        Experiment::StokesError => geometry::stokes_error(&mut ck),
        Experiment::Entropy => geometry::entropy(&mut ck),
        Experiment::Comass => forms::comass(&mut ck),
        Experiment::Calibration => forms::calibration(&mut ck),
        Experiment::BarycenterSuite => forms::barycenter_suite(&mut ck),
        Experiment::ConeDecay => cone::cone_decay(&mut ck),
        Experiment::ConeIntegral => cone::cone_integral(&mut ck),
        Experiment::CuspSuite => cone::cusp_suite(&mut ck),
    };
    if let Err(e) = outcome {
        let seen: BTreeSet<String> = ck
            .rows
            .iter()
            .map(|r| r.name.split('[').next().unwrap_or_default().to_string())
            .collect();
        let skip = not_applicable(cfg);
        for spec in check_specs(cfg.experiment) {
            if !seen.contains(spec.id) && !skip.contains(&spec.id) {
                ck.failed(spec.id, None, f64::NAN, &e);
            }
        }
    }
    (ck.rows, ck.data)
}

/// Checks an experiment does not run for this backend.
fn not_applicable(cfg: &ResolvedConfig) -> Vec<&'static str> {
    let exact = matches!(cfg.backend, BackendSpec::Exact);
    match cfg.experiment {
        Experiment::NaturalMapSuite if exact => vec!["jacobian_fc.l1_trend"],
        Experiment::NaturalMapSuite => vec!["jacobian_fc.sign", "distance_fc", "distance_fc.trend"],
        Experiment::Entropy if !exact => vec!["entropy.volumes"],
        _ => Vec::new(),
    }
}

pub(crate) fn build_grid(cfg: &ResolvedConfig) -> Result<Arc<QuadratureGrid>> {
    let scheme = GridScheme::parse(&cfg.grid.scheme)?;
    Ok(Arc::new(QuadratureGrid::new(cfg.n, scheme, cfg.grid.resolution)?))
}

pub(crate) fn build_backend(cfg: &ResolvedConfig) -> Result<Box<dyn MetricBackend>> {
    match &cfg.backend {
        BackendSpec::Exact => Ok(Box::new(ExactBackend::new(cfg.n)?)),
        BackendSpec::Grid {
            bump,
            spacing,
            mesh_radius,
            margin,
        } => {
            let bump = match bump {
                Some(b) => Some(ConformalBump::new(BallPoint::from_slice(&b.center)?, b.radius, b.amplitude)?),
                None => None,
            };
            let force_mesh = bump.is_none();
            let missing = || LabError::InvalidInput("unresolved grid backend".into());
            Ok(Box::new(GridBackend::new(GridBackendConfig {
                bump,
                spacing: spacing.ok_or_else(missing)?,
                mesh_radius: mesh_radius.ok_or_else(missing)?,
                margin: margin.ok_or_else(missing)?,
                force_mesh,
            })?))
        }
    }
}

/// `count` points within hyperbolic distance `max_dist` of `o`.
pub(crate) fn random_points(n: usize, count: usize, max_dist: f64, seed: u64, stream: u64) -> Vec<BallPoint> {
    let mut rng = stream_rng(seed, stream);
    (0..count)
        .map(|_| MobiusIsometry::random(&mut rng, n, max_dist).origin_image())
        .collect()
}

/// `"{value}"` label for a parameter.
pub(crate) fn label(name: &str, value: f64) -> Option<String> {
    Some(format!("{name}={value}"))
}
