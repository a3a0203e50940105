//! Resonances, exceptional points and Jordan-chain spectral expansions for
//! radial Schrödinger problems with delta shells and piecewise constant steps.

pub mod config;
pub mod degeneracy;
pub mod error;
pub mod gamow;
pub mod grid;
pub mod output;
pub mod potential;
pub mod propagation;
pub mod quad;
pub mod regulated;
pub mod spectral;
pub mod riccati;
pub mod solver;
pub mod tail;
pub mod verify;
pub mod zeros;

pub use error::{Error, Result};
pub use potential::PotentialSpec;
