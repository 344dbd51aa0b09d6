//! Bi-fidelity stochastic collocation for multiscale kinetic equations with
//! random inputs.
//!
//! The library pairs an expensive kinetic solver with a cheap surrogate of
//! the same parametric problem and reconstructs high-fidelity solutions at
//! new parameters from low-fidelity projection coefficients:
//!
//! - [`randomspace`]: z-affine random fields and uniform parameter sampling;
//! - [`bifi`]: Gramian, greedy point selection, projection, reconstruction,
//!   error-split and stability diagnostics, snapshot persistence;
//! - [`transport`]: 1-D linear transport via the micro-macro AP scheme, its
//!   diffusion limit, and fine/coarse grid transfer;
//! - [`perturbative`]: linearized BGK around the global Maxwellian, kernel
//!   projection, the acoustic system, moments and limit diagnostics.
//!
//! Model pairs shipped with the experiment harness: kinetic transport vs its
//! diffusion limit, fine-mesh vs coarse-mesh transport, and linearized BGK vs
//! the acoustic system.

pub mod bifi;
pub mod error;
pub mod perturbative;
pub mod randomspace;
pub mod transport;

pub use bifi::{BiFiSurrogate, GreedyBasis, Snapshot};
pub use error::{Error, Result};
pub use randomspace::{AffineField, ParameterVector, SpatialGrid};
