//! Meshfree eigenvalue solver based on minimum-norm Hermite–Birkhoff
//! interpolation in a weighted Fourier-extension space.
//!
//! For a trial value `λ`, the interpolant `u_λ` of minimal norm satisfying
//! homogeneous collocation conditions plus a few nonzero anchor values is
//! found by solving `Φ(λ)β = g`. Its squared norm `N(λ) = g*β` stays bounded
//! under point refinement exactly when `λ` is an eigenvalue, so eigenvalues
//! appear as minima of `N`.

pub mod assembly;
pub mod error;
pub mod fourier_space;
pub mod geometry;
pub mod problems;
pub mod solver;
pub mod vec3;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
