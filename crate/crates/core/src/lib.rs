//! Numerical laboratory for the natural-map construction on real hyperbolic space.

pub mod barycenter;
pub mod calib;
pub mod conelab;
pub mod bmeasure;
pub mod error;
pub mod fd;
pub mod hypcore;
pub mod natmap;
pub mod rng;

pub use error::{LabError, Result};
