//! Maps into the sphere of positive functions, the natural maps built from them, and the
//! exhaustion tools used around finite-volume ends.

mod backend;
mod entropy;
mod estimator;
mod exhaustion;
mod grid_backend;
mod homotopy;
mod maps;

pub use backend::{
    exact_cloud_distances, hyperbolic_ball_volume, log_sinh, polar_distance,
    sample_hyperbolic_volume, sphere_area, ExactBackend, MetricBackend, RadialSampler,
    VolumeCloud,
};
pub use estimator::{
    hyperbolic_psi_mass, NaturalMapConfig, PsiEstimator, DEFAULT_MC_COUNT, TAIL_REJECT, TAIL_TARGET,
};
pub use entropy::{entropy_estimate, entropy_fit, least_squares, EntropyFit};
pub use exhaustion::{
    coarea_check, find_small_slices, proper_lipschitz_function, CuspSlices, LipschitzCheck,
    ProperLipschitz, Slice, SliceFamily, SphereSlices,
};
pub use grid_backend::{ConformalBump, GridBackend, GridBackendConfig};
pub use homotopy::{
    homotopy_lipschitz_bound, homotopy_samples, homotopy_stretch_bounds, stokes_error_experiment,
    BatchMap, HomotopyMeasurement, HomotopyReport, HomotopySample, StokesReport, StokesSlice,
};
pub use maps::{
    dphi0, g_phi0, g_phi0_model, jacobian_fc, natural_map_fc, phi0, phi_c, psi_c,
    JacobianReport, NaturalMap, PhiDerivative, PulledBackTensor, STENCIL_BARY_TOL,
};
