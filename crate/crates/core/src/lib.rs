//! Numerical laboratory for blow-up solution families of the mean field
//! equation with Neumann boundary conditions on compact surfaces with
//! boundary.
//!
//! The crate builds the full pipeline from conformal geometry to a nonlinear
//! continuation solver:
//!
//! * [`geometry`] — catalog surfaces (disk, flat cylinder, spherical cap),
//!   refined isothermal charts and curvature data,
//! * [`quadrature`] — adaptive quadrature on disks/half-disks and the
//!   closed-form bubble moment expansions,
//! * [`fem`] — triangulated meshes and the constrained Neumann
//!   Laplace–Beltrami solver,
//! * [`green`] — Green functions `G`, regular parts `H` and Robin values
//!   with closed-form and FEM backends,
//! * [`ansatz`] — Liouville bubbles, mean-zero projections, kernel
//!   projections and the weighted residual norm,
//! * [`reduced`] — the Kirchhoff–Routh energy, the coefficients
//!   `A1`/`A2`/`B` and the scale selection used along a family,
//! * [`critical`] — critical-point search and classification on the
//!   configuration manifold,
//! * [`solver`] — the FEM Newton solver and the continuation in `lambda`
//!   with concentration diagnostics,
//! * [`verify`] — the oracle/property ledger that the CLI and the
//!   acceptance suite share.

pub mod ansatz;
pub mod critical;
pub mod cutoff;
mod error;
pub mod fem;
pub mod geometry;
pub mod green;
pub mod quadrature;
pub mod reduced;
pub mod solver;
pub mod verify;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
