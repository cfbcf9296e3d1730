//! Anisotropic tensor-product wavelet compression of boundary integral operators.
//!
//! The crate builds piecewise polynomial orthonormal multiwavelets on the unit
//! interval, forms their tensor products on the unit square (or on patches of a
//! parametric surface), evaluates Galerkin entries of singular kernels and drops
//! entries with the multi-stage level-dependent cutoff rules.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analysis;
pub mod assembly;
pub mod basis1d;
pub mod cli;
pub mod experiments;
pub mod compression;
pub mod index_geometry;
pub mod kernels;
pub mod manifold;
pub mod poly;
pub mod quadrature;

pub use basis1d::{Kind, Member1D, WaveletFamily};
pub use assembly::BasisWindow;
pub use index_geometry::MultiIndex;
pub use kernels::Kernel;
