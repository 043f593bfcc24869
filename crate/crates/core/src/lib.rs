//! Exact quench dynamics of a two-mode Bose Josephson junction under
//! one-axis twisting `χJ_z² − λ(t)J_z` with classical Gaussian phase noise.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod noise;
pub mod observables;
mod quadrature;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
