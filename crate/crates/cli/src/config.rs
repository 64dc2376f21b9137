//! Experiment configuration: one JSON document, unknown fields rejected, defaults resolved
//! before anything runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checks::check_specs;
use crate::error::CliError;

/// Environment variable overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "NATMAPLAB_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GPhi0Identity,
    DerivativeBound,
    JacobianBoundPhi,
    Comass,
    Calibration,
    BarycenterSuite,
    NaturalMapSuite,
    HomotopyBounds,
    StokesError,
    ConeDecay,
    ConeIntegral,
    CuspSuite,
    Entropy,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::GPhi0Identity,
        Experiment::DerivativeBound,
        Experiment::JacobianBoundPhi,
        Experiment::Comass,
        Experiment::Calibration,
        Experiment::BarycenterSuite,
        Experiment::NaturalMapSuite,
        Experiment::HomotopyBounds,
        Experiment::StokesError,
        Experiment::ConeDecay,
        Experiment::ConeIntegral,
        Experiment::CuspSuite,
        Experiment::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GPhi0Identity => "g_phi0_identity",
            Experiment::DerivativeBound => "derivative_bound",
            Experiment::JacobianBoundPhi => "jacobian_bound_phi",
            Experiment::Comass => "comass",
            Experiment::Calibration => "calibration",
            Experiment::BarycenterSuite => "barycenter_suite",
            Experiment::NaturalMapSuite => "natural_map_suite",
            Experiment::HomotopyBounds => "homotopy_bounds",
            Experiment::StokesError => "stokes_error",
            Experiment::ConeDecay => "cone_decay",
            Experiment::ConeIntegral => "cone_integral",
            Experiment::CuspSuite => "cusp_suite",
            Experiment::Entropy => "entropy",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Experiment::GPhi0Identity => "pulled-back tensor of Phi_0 against (h^2/4n) g0",
            Experiment::DerivativeBound => "Rayleigh quotients of dPhi_c against c^2/4",
            Experiment::JacobianBoundPhi => "Gram Jacobians of Phi_c against (c^2/4n)^{n/2}",
            Experiment::Comass => "sampled comass of Omega and its calibrated value",
            Experiment::Calibration => "Omega on the tangent planes of Phi_0, with a negative control",
            Experiment::BarycenterSuite => "barycenter of constants, scaling, rotations and Phi_0",
            Experiment::NaturalMapSuite => "Jacobian bound and distance to the identity of F_c",
            Experiment::HomotopyBounds => "stretch bounds of the straight-line homotopy",
            Experiment::StokesError => "Lipschitz constant and Stokes error on cusp slices",
            Experiment::ConeDecay => "pointwise Jacobian decay of cone maps",
            Experiment::ConeIntegral => "integral inequality of cone maps",
            Experiment::CuspSuite => "cusp slice volumes and the downstairs cone",
            Experiment::Entropy => "volume growth entropy",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    #[default]
    Exact,
    Grid {
        #[serde(default)]
        bump: Option<BumpSpec>,
        #[serde(default)]
        spacing: Option<f64>,
        #[serde(default)]
        mesh_radius: Option<f64>,
        #[serde(default)]
        margin: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub scheme: String,
    pub resolution: usize,
}

/// The configuration file as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub c_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub mc_count: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    /// Per-check tolerance overrides, keyed by check id.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Every parameter an experiment reads, with defaults filled in. Embedded in `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub backend: BackendSpec,
    pub grid: GridSpec,
    pub c_schedule: Vec<f64>,
    pub mc_count: usize,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: BTreeMap<String, f64>,
}

impl ResolvedConfig {
    pub fn h(&self) -> f64 {
        (self.n - 1) as f64
    }

    pub fn tolerance(&self, id: &str) -> f64 {
        self.tolerances[id]
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

/// `(n, mc_count, samples)` defaults.
fn defaults(exp: Experiment) -> (usize, usize, usize) {
    match exp {
        Experiment::GPhi0Identity => (3, 0, 100),
        Experiment::DerivativeBound => (3, 50_000, 200),
        Experiment::JacobianBoundPhi => (3, 20_000, 20),
        Experiment::Comass => (3, 0, 10_000),
        Experiment::Calibration => (3, 0, 20),
        Experiment::BarycenterSuite => (3, 0, 16),
        Experiment::NaturalMapSuite => (3, 200_000, 4),
        Experiment::HomotopyBounds => (3, 20_000, 500),
        Experiment::StokesError => (3, 20_000, 10),
        Experiment::ConeDecay => (3, 0, 500),
        Experiment::ConeIntegral => (3, 0, 24),
        Experiment::CuspSuite => (3, 0, 12),
        Experiment::Entropy => (3, 0, 9),
    }
}

fn default_schedule(exp: Experiment, h: f64) -> Vec<f64> {
    match exp {
        Experiment::DerivativeBound | Experiment::HomotopyBounds | Experiment::StokesError => {
            vec![h + 0.5]
        }
        Experiment::JacobianBoundPhi | Experiment::NaturalMapSuite => vec![h + 1.0, h + 0.5, h + 0.25],
        _ => Vec::new(),
    }
}

fn default_grid(n: usize) -> GridSpec {
    match n {
        2 => GridSpec {
            scheme: "circle_uniform".into(),
            resolution: 512,
        },
        3 => GridSpec {
            scheme: "product_gauss".into(),
            resolution: 40,
        },
        _ => GridSpec {
            scheme: "product_gauss".into(),
            resolution: 13,
        },
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let experiment = Experiment::parse(&self.experiment)
            .ok_or_else(|| invalid(format!("unknown experiment {:?}", self.experiment)))?;
        let (n0, mc0, samples0) = defaults(experiment);
        let n = self.n.unwrap_or(n0);
        if !(2..=4).contains(&n) {
            return Err(invalid(format!("dimension {n} outside 2..=4")));
        }
        let h = (n - 1) as f64;
        if let BackendSpec::Grid { bump, .. } = &self.backend {
            if n != 2 {
                return Err(invalid("the grid backend is planar: n must be 2"));
            }
            if let Some(b) = bump {
                if b.center.len() != n {
                    return Err(invalid("bump center has the wrong dimension"));
                }
            }
        }
        let c_schedule = self
            .c_schedule
            .clone()
            .unwrap_or_else(|| default_schedule(experiment, h));
        if let Some(c) = c_schedule.iter().find(|c| !(**c > h) || !c.is_finite()) {
            return Err(invalid(format!("c = {c} must exceed h = {h}")));
        }
        let needs_c = !default_schedule(experiment, h).is_empty();
        if needs_c && c_schedule.is_empty() {
            return Err(invalid("c_schedule must not be empty"));
        }
        let mc_count = self.mc_count.unwrap_or(mc0);
        if mc0 > 0 && mc_count < 2 {
            return Err(invalid("mc_count must be at least 2"));
        }
        let samples = self.samples.unwrap_or(samples0);
        if samples == 0 {
            return Err(invalid("samples must be positive"));
        }
        let grid = self.grid.clone().unwrap_or_else(|| default_grid(n));
        natmaplab_core::bmeasure::GridScheme::parse(&grid.scheme).map_err(|e| invalid(e.to_string()))?;
        let mut tolerances: BTreeMap<String, f64> = check_specs(experiment)
            .iter()
            .map(|s| (s.id.to_string(), s.tolerance))
            .collect();
        for (k, v) in &self.tolerances {
            match tolerances.get_mut(k) {
                Some(slot) if v.is_finite() && *v >= 0.0 => *slot = *v,
                Some(_) => return Err(invalid(format!("tolerance {k} = {v} must be finite and >= 0"))),
                None => {
                    return Err(invalid(format!(
                        "unknown check {k:?} for experiment {}",
                        experiment.name()
                    )))
                }
            }
        }
        Ok(ResolvedConfig {
            experiment,
            n,
            backend: resolve_backend(&self.backend),
            grid,
            c_schedule,
            mc_count: if mc0 == 0 { 0 } else { mc_count },
            seed: self.seed.unwrap_or(1),
            samples,
            tolerances,
        })
    }

    /// Environment override, then the config value, then `runs/<experiment>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            return PathBuf::from(dir);
        }
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment))
    }
}

fn resolve_backend(spec: &BackendSpec) -> BackendSpec {
    match spec {
        BackendSpec::Exact => BackendSpec::Exact,
        BackendSpec::Grid {
            bump,
            spacing,
            mesh_radius,
            margin,
        } => BackendSpec::Grid {
            bump: bump.clone(),
            spacing: Some(spacing.unwrap_or(0.01)),
            mesh_radius: Some(mesh_radius.unwrap_or_else(|| {
                bump.as_ref().map_or(2.0, |b| b.radius + 0.75)
            })),
            margin: Some(margin.unwrap_or(0.25)),
        },
    }
}
