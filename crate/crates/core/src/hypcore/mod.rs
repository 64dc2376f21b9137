//! Closed-form geometry of the Poincaré ball model of real hyperbolic space, plus an
//! intrinsic model of a cusp end.

mod ball;
mod cusp;
mod mobius;

pub use ball::{
    busemann, busemann_grad, busemann_hess, exp_map, geodesic_toward, hyp_distance, log_map,
    poisson_kernel, ray_endpoint, BallPoint, IdealPoint, TangentVector, BOUNDARY_GUARD,
    CONSTRUCT_MARGIN,
};
pub(crate) use ball::{busemann_coord_grad, busemann_unchecked, mobius_add, poisson_unchecked};
pub use cusp::{half_space_to_ball, CuspModel, CuspPoint};
pub use mobius::{random_rotation, MobiusIsometry};
