//! Matrix-free hp-multigrid for the interior penalty discontinuous Galerkin
//! discretisation of the Poisson problem on uniform spacetree meshes.
//!
//! The solver keeps the DG system in its facet-augmented form: cells hold
//! nodal values, facets hold projections of the adjacent cell traces and
//! numerical fluxes. Smoothing is block-Jacobi with the cell-local Schur
//! block; the coarse correction goes through the lowest-order continuous
//! space and a geometric multigrid on its vertex hierarchy.

#![allow(clippy::needless_range_loop)]

pub mod basis;
pub mod dense;
pub mod error;
pub mod fields;
pub mod localops;
pub mod mesh;
pub mod multigrid;
pub mod operator;
pub mod oracle;
pub mod problems;
pub mod smoother;

pub use error::{Error, Result};
