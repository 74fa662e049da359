//! Time-fractional poroelasticity in fractured and multicontinuum media:
//! a fine finite-element reference solver and a multiscale (GMsFEM) coarse
//! solver sharing the same L1 Caputo time discretization.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision,
    clippy::type_complexity
)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fine_solver;
pub mod fractional;
pub mod gmsfem;
pub mod linalg;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
