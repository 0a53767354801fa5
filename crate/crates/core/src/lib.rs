//! Discretization of `−D_j(a^{ij} D_i f) + ρ 𝔇^α f` on intervals and rectangles, together with
//! the spectral machinery needed to check sector, eigenvalue-decay and trace-type estimates
//! for that operator family.

pub mod assembly;
pub mod config;
pub mod error;
pub mod frac;
pub mod geometry;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use faer::c64;
