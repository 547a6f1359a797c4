//! Inverse data matching under `L2`, Sobolev and quadratic Wasserstein
//! discrepancies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod fourier;
pub mod grid;
pub mod invert;
pub mod io;
pub mod linalg;
pub mod models;
pub mod par;
pub mod sobolev;
pub mod stats;
pub mod transport1d;
pub mod transport_nd;

pub use error::{Error, Result};
pub use grid::{add_noise, make_density, mass, spectrum_report, Convention, Density, Grid, GridFn, NoiseSpec};
