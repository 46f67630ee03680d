//! Poisson kernels on model domains, walk-on-spheres estimates on general
//! C² domains, boundary scaling, and empirical checks of the boundary
//! asymptotic P(x, y) ≍ δ(x)/|x − y|^d.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod harmonic_measure;
pub mod model_kernels;
pub mod scaling;

pub use error::{Error, Result};
