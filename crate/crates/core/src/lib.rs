//! Nodal topology of Gaussian band-limited random fields.
//!
//! Sampling of the spherical, toral, circle and planar ensembles, extraction
//! of nodal domains and curves on grids, the nesting tree of nodal domains,
//! the limiting covariance kernels, barrier constructions realizing a given
//! tree end or topology, and statistics over the resulting empirical measures.

// `!(x > 0.0)` is used throughout so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod nesting;
pub mod nodal2d;
pub mod nodal3d;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
