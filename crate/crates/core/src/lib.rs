//! Multilinear fractional maximal and integral operators with rough
//! homogeneous kernels, on piecewise-constant data.
//!
//! Everything is computed on a cell-aligned box (see [`grid`]) over explicit
//! finite cube families (see [`family`]); suprema over "all cubes" are always
//! restricted to a stated family.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod family;
pub mod grid;
pub mod kernels;
pub mod operators;
pub mod presets;
pub mod profile;
pub mod sparse;
pub mod weights;

pub use error::{Error, Result};
pub use family::CubeFamily;
pub use grid::{CellGrid, Cube, Field, SampledFunctions};
pub use profile::ExponentProfile;
