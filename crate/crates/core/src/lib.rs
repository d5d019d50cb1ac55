//! Numerical laboratory for coupled Ricci / harmonic-map flow on
//! symmetry-reduced geometries.
//!
//! The crate integrates the coupled system
//!
//! ```text
//! d/dt g   = -2 Ric(g) + 2 alpha(t) grad(phi) ⊗ grad(phi)
//! d/dt phi = tension(phi)
//! ```
//!
//! on two reduced geometry classes (round spheres with constant or eigenmap
//! data, and warped products S^1 x S^(n-1) with a circle-valued map), runs the
//! trajectories into curvature blow-up, and provides the analysis toolkit
//! around the singularity: blow-up classification and rescaling, singular-set
//! masks, gradient-soliton residuals, and the backward reduced length / reduced
//! volume machinery based at regular or singular times.
//!
//! Everything is deterministic: fixed iteration orders, seeded probe placement,
//! and fixed float formatting in all emitted artifacts.

pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod reduced;
pub mod report;
pub mod runner;
pub mod singularity;
pub mod soliton;
pub mod util;

pub use error::{Error, Result};
