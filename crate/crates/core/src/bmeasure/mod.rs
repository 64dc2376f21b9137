//! Discretized boundary sphere: quadrature grids for the visual measure, sampled boundary
//! functions, the L^2 structure and the isometry action.

mod function;
mod grid;

pub use function::{
    isom_action, isom_action_exact, l2_inner, visual_density, BoundaryFunction, IDW_NEIGHBOURS,
};
pub use grid::{gauss_legendre, GridScheme, QuadratureGrid};
