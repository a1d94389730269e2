//! Desk-scale simulator for the decoherence of a particle crossing a dilute
//! medium.
//!
//! The crate builds per-target scattering operators, assembles the one-step
//! map across a thin slab of matter, passes to a continuous-time Lindblad
//! generator with separate footprint and mixture jump families, evolves
//! density matrices, computes the medium's complex refraction index, and
//! predicts the loss of double-slit fringe visibility. An exact brute-force
//! tensor-product oracle validates every approximation.

pub mod collision;
pub mod error;
pub mod gas;
pub mod generator;
pub mod linalg;
pub mod oracle;
pub mod slabstep;
pub mod young;

pub use error::{Error, Result};
