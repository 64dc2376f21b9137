//! The checks each experiment reports: relation to the bound, default tolerance and the claim.

use serde::{Deserialize, Serialize};

use crate::config::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    /// `|measured - bound|` within the tolerance.
    #[serde(rename = "~")]
    Near,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slack {
    /// Tolerance is a fraction of `|bound|`.
    Relative,
    Absolute,
}

#[derive(Clone, Copy, Debug)]
pub struct CheckSpec {
    pub id: &'static str,
    pub relation: Relation,
    pub slack: Slack,
    pub tolerance: f64,
    pub anchor: &'static str,
}

const fn spec(
    id: &'static str,
    relation: Relation,
    slack: Slack,
    tolerance: f64,
    anchor: &'static str,
) -> CheckSpec {
    CheckSpec {
        id,
        relation,
        slack,
        tolerance,
        anchor,
    }
}

use Relation::*;
use Slack::*;

const G_PHI0: &[CheckSpec] = &[
    spec("g_phi0.relative_error", AtMost, Absolute, 1e-6, "g_Phi0 = (h^2/4n) g0"),
    spec("g_phi0.min_eigenvalue", AtLeast, Absolute, 1e-10, "g_Phi0 is positive semi-definite"),
    spec("g_phi0.eigenvalue_spread", AtMost, Absolute, 2e-6, "g_Phi0 is isotropic"),
];

const DERIVATIVE: &[CheckSpec] = &[
    spec("rayleigh", AtMost, Relative, 1e-2, "|dPhi_c(v)|^2 <= (c^2/4) b(v,v)"),
    spec("phi_c.unit_norm", Near, Absolute, 1e-9, "Phi_c(p) lies on the unit sphere"),
];

const JACOBIAN_PHI: &[CheckSpec] = &[
    spec("jacobian_phi", AtMost, Relative, 5e-2, "|Jac Phi_c| <= (c^2/4n)^{n/2}"),
    spec("g_phi_c.min_eigenvalue", AtLeast, Absolute, 1e-10, "g_Phi_c is positive semi-definite"),
];

const COMASS: &[CheckSpec] = &[
    spec("comass.max", AtMost, Relative, 1e-2, "comass of Omega on the unit sphere = (4n/h^2)^{n/2}"),
    spec("comass.calibrated", AtLeast, Relative, 5e-2, "Omega attains its comass on the tangent planes of Phi_0"),
    spec("comass.off_sphere", AtMost, Relative, 0.0, "|Omega| <= 2^n (4n/h^2)^{n/2} off the ball of radius 1/2"),
];

const CALIBRATION: &[CheckSpec] = &[
    spec("calibration.defect", AtMost, Absolute, 2e-2, "Omega calibrates the immersion Phi_0"),
    spec("calibration.negative_control", AtLeast, Absolute, 0.0, "an anisotropic immersion is not calibrated"),
];

const BARYCENTER: &[CheckSpec] = &[
    spec("bar.constant", AtMost, Absolute, 1e-9, "bar(1) = o"),
    spec("bar.scale", AtMost, Absolute, 1e-8, "bar(c phi) = bar(phi)"),
    spec("bar.rotation", AtMost, Absolute, 1e-6, "bar(R.phi) = R bar(phi)"),
    spec("bar.phi0", AtMost, Absolute, 1e-4, "bar(Phi_0(p)) = p"),
];

const NATURAL_MAP: &[CheckSpec] = &[
    spec("jacobian_fc", AtMost, Relative, 5e-2, "Jac F_c <= (c/h)^n"),
    spec("jacobian_fc.sign", AtLeast, Absolute, 0.0, "F_c preserves orientation"),
    spec("distance_fc", AtMost, Absolute, 2e-2, "F_c is the identity for the hyperbolic metric"),
    spec("distance_fc.trend", AtMost, Absolute, 0.0, "d(F_c(p), p) decreases as c decreases to h"),
    spec("jacobian_fc.l1_trend", AtMost, Absolute, 0.0, "Jac F_c tends to 1 in L^1 as c decreases to h"),
];

const HOMOTOPY: &[CheckSpec] = &[
    spec("homotopy.time", AtMost, Absolute, 0.0, "|dH/dt|^2 <= int (Upsilon^2 + Theta^2) = 2"),
    spec("homotopy.space", AtMost, Absolute, 1e-9, "|dH(v)|^2 <= |dTheta(v)|^2 + |dUpsilon(v)|^2"),
    spec("homotopy.norm", AtLeast, Absolute, 0.0, "the straight-line homotopy avoids the L^2 ball of radius 1/2"),
];

const STOKES: &[CheckSpec] = &[
    spec("stokes.lipschitz", AtMost, Relative, 5e-2, "H is ((c^2+h^2)/4 + 2)^{1/2}-Lipschitz on slices"),
    spec("stokes.decrease", AtLeast, Absolute, 0.0, "the Stokes error term vanishes along shrinking slices"),
    spec("stokes.slices", AtLeast, Absolute, 0.0, "small slices exist"),
];

const CONE_DECAY: &[CheckSpec] = &[
    spec("cone.decay", AtMost, Relative, 5e-2, "|Jac C(x,s)| <= e^{-(n-1)s} |Jac phi(x)|"),
    spec("cone.contraction", AtMost, Relative, 5e-2, "orthogonal components of coned frames contract by e^{-s}"),
    spec("cone.speed", AtMost, Absolute, 1e-6, "unit-speed cone lines have unit speed"),
    spec("cone.samples", AtLeast, Absolute, 0.0, "decay is measured at every requested sample"),
];

const CONE_INTEGRAL: &[CheckSpec] = &[
    spec("cone.integral", AtMost, Relative, 5e-2, "int |Jac C| <= (1/(n-1)) int |Jac phi|"),
    spec("cone.horosphere", Near, Relative, 1e-3, "coning a horosphere patch attains the constant 1/(n-1)"),
    spec("cone.constant", AtMost, Absolute, 1e-12, "a constant base map has a cone of zero volume"),
    spec("cone.refinement", AtMost, Absolute, 0.0, "mesh refinement halves the quadrature change"),
];

const CUSP: &[CheckSpec] = &[
    spec("cusp.slice_volume", AtMost, Absolute, 1e-12, "cusp slice volumes are V_0 e^{-(n-1)t}"),
    spec("cusp.monotone", AtMost, Absolute, 0.0, "cusp slice volumes decrease to zero"),
    spec("cusp.small_slices", AtLeast, Absolute, 0.0, "small slices exist"),
    spec("cusp.downstairs", AtMost, Relative, 5e-2, "the downstairs cone has volume at most area/(n-1)"),
    spec("cusp.equivariance", AtMost, Absolute, 1e-12, "coning commutes with lattice translations"),
];

const ENTROPY: &[CheckSpec] = &[
    spec("entropy", Near, Relative, 1e-2, "volume growth entropy of H^n is n-1"),
    spec("entropy.volumes", AtMost, Absolute, 1e-8, "ball volumes are omega_{n-1} int_0^R sinh^{n-1}"),
];

pub fn check_specs(exp: Experiment) -> &'static [CheckSpec] {
    match exp {
        Experiment::GPhi0Identity => G_PHI0,
        Experiment::DerivativeBound => DERIVATIVE,
        Experiment::JacobianBoundPhi => JACOBIAN_PHI,
        Experiment::Comass => COMASS,
        Experiment::Calibration => CALIBRATION,
        Experiment::BarycenterSuite => BARYCENTER,
        Experiment::NaturalMapSuite => NATURAL_MAP,
        Experiment::HomotopyBounds => HOMOTOPY,
        Experiment::StokesError => STOKES,
        Experiment::ConeDecay => CONE_DECAY,
        Experiment::ConeIntegral => CONE_INTEGRAL,
        Experiment::CuspSuite => CUSP,
        Experiment::Entropy => ENTROPY,
    }
}

pub fn find_spec(exp: Experiment, id: &str) -> &'static CheckSpec {
    check_specs(exp)
        .iter()
        .find(|s| s.id == id)
        .unwrap_or_else(|| panic!("check {id} is not declared for {}", exp.name()))
}
