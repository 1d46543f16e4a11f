//! Finite elements of arbitrary order, Galerkin and streamline-diffusion,
//! on layer-adapted piecewise-equidistant meshes for singularly perturbed
//! problems with an interior turning point.

// NaN must fail positivity checks, and index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod basis;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod norms;
pub mod problem;

pub use error::{Error, Result};
