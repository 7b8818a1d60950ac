//! Mesh-free operators for advection-diffusion problems on point clouds.
//!
//! Diffusion-maps (DM) estimators for closed manifolds, ghost-point (GPDM)
//! estimators for manifolds with boundary, a truncated baseline (VCDM),
//! implicit Euler stepping and a pseudo-spectral Burgers solver.

#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod ghost;
pub mod kernel;
pub mod knn;
mod schur;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod timestep;

pub use error::{Error, Result};
pub use geometry::PointCloud;
pub use sparse::CsrMatrix;
