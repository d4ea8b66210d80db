//! Numerics for the weighted operator `div(x_n^a ∇u)` on the upper half space
//! `R^n_+ = {x : x_n > 0}`.
//!
//! The crate is organised by subsystem:
//!
//! * [`kernels`]: closed-form extension kernels, their normalisations and the
//!   algebraic identity tying the two-parameter kernel to the Dirichlet kernel.
//! * [`transform`]: the Möbius inversion through spheres centred on the
//!   boundary and the Kelvin-type transform it induces, with a numerical
//!   certificate of the conformal invariance of the operator.
//! * [`grid`] and [`operator`]: truncated vertex-centred grids and the
//!   flux-form discretisation of the operator.
//! * [`solver`]: conjugate-gradient solves of the discrete boundary-value
//!   problems, maximum-principle checks and fits to `C*·x_n^{1-a} + C₂`.
//! * [`extension`]: quadrature of the extension operators and the fractional
//!   Laplacian as a weighted boundary-flux limit, with a Fourier oracle.
//! * [`liouville`]: moving-sphere comparison scans and uniqueness experiments.

pub mod error;
pub mod extension;
pub mod field;
pub mod grid;
pub mod kernels;
pub mod liouville;
pub mod operator;
mod par;
pub mod point;
pub mod quadrature;
pub mod richardson;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use kernels::{KernelSpec, KernelVariant, WeightExponent};
pub use point::Point;

/// Normalisation convention recorded in every self-describing output.
pub const NORMALIZATION_CONVENTION: &str =
    "P_a divided by its boundary mass (mass-one); E_alpha unnormalised";

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
