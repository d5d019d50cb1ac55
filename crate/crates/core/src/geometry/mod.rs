//! Symmetry-reduced geometry classes and their curvature data.
//!
//! Three state classes are supported:
//!
//! * [`HomogeneousState`] — round sphere `g = c * g_S` with a constant map or
//!   the identity eigenmap into the unit sphere; curvature is a closed form.
//! * [`WarpedState`] — warped product `S^1 x S^(n-1)` with metric
//!   `a(x)^2 dx^2 + w(x)^2 g_(S^(n-1))` and a circle-valued map of fixed
//!   winding; curvature comes from the two sectional curvatures `K1`, `K2` via
//!   second-order periodic central differences.
//! * [`FlatState`] — Euclidean space in a bounded radial chart, used by the
//!   exact flat fixtures; curvature vanishes identically.

mod distance;
mod flat;
mod homogeneous;
mod isoperimetric;
pub mod oracle;
mod warped;

pub use distance::{distance_flat, distance_homogeneous, distance_warped, WarpedPoint};
pub use flat::FlatState;
pub use homogeneous::HomogeneousState;
pub use isoperimetric::{euclidean_ball_ratio, isoperimetric_ratio};
pub use warped::WarpedState;

use serde::{Deserialize, Serialize};

/// Map ansatz carried by a homogeneous state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    /// Constant map; all map terms vanish.
    Constant,
    /// Identity of the sphere viewed into the unit round target;
    /// `|grad phi|^2 = n/c`, tension zero, pullback metric `g_S`.
    IdentityEigenmap,
}

/// One geometry slice of a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GeometryState {
    Homogeneous(HomogeneousState),
    Warped(WarpedState),
    Flat(FlatState),
}

impl GeometryState {
    pub fn dimension(&self) -> usize {
        match self {
            GeometryState::Homogeneous(s) => s.n,
            GeometryState::Warped(s) => s.n,
            GeometryState::Flat(s) => s.n,
        }
    }

    /// Curvature and map data at coupling value `alpha`.
    pub fn curvature(&self, alpha: f64) -> CurvaturePacket {
        match self {
            GeometryState::Homogeneous(s) => s.curvature(alpha),
            GeometryState::Warped(s) => s.curvature(alpha),
            GeometryState::Flat(s) => s.curvature(alpha),
        }
    }

    /// Total Riemannian volume of the slice (flat charts: window volume).
    pub fn total_volume(&self) -> f64 {
        match self {
            GeometryState::Homogeneous(s) => s.total_volume(),
            GeometryState::Warped(s) => s.total_volume(),
            GeometryState::Flat(s) => s.window_volume(),
        }
    }
}

/// Pointwise curvature and map quantities of a slice.
///
/// For warped states every vector has one entry per grid point; for
/// homogeneous and flat states the fields are spatially constant and the
/// vectors have length 1 (homogeneous) or one entry per radial sample (flat).
///
/// `ric_base`/`ric_fiber` are the two independent unit-direction Ricci
/// components (along the distinguished direction and along a fiber direction);
/// they coincide for isotropic states. `s_*` are the corresponding components
/// of `S = Ric - alpha * grad phi ⊗ grad phi`, and `sh = Sc - alpha |grad phi|^2`
/// is its trace.
#[derive(Debug, Clone)]
pub struct CurvaturePacket {
    pub n: usize,
    pub rm_norm: Vec<f64>,
    pub ric_base: Vec<f64>,
    pub ric_fiber: Vec<f64>,
    pub sc: Vec<f64>,
    pub s_base: Vec<f64>,
    pub s_fiber: Vec<f64>,
    pub sh: Vec<f64>,
    pub grad_phi_sq: Vec<f64>,
    pub tension: Vec<f64>,
    pub hess_phi_norm: Vec<f64>,
}

impl CurvaturePacket {
    pub fn sup_rm(&self) -> f64 {
        self.rm_norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_sh(&self) -> f64 {
        self.sh.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue of `S` w.r.t. `g` over all points and directions.
    pub fn s_max_eigen(&self) -> f64 {
        self.s_base
            .iter()
            .chain(self.s_fiber.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest eigenvalue of `S` w.r.t. `g` over all points and directions.
    pub fn s_min_eigen(&self) -> f64 {
        self.s_base
            .iter()
            .chain(self.s_fiber.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest Ricci eigenvalue over all points and directions.
    pub fn ric_max_eigen(&self) -> f64 {
        self.ric_base
            .iter()
            .chain(self.ric_fiber.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|S|^2` at point `i` (sum of squared unit eigenvalues with fiber
    /// multiplicity `n - 1`).
    pub fn s_norm_sq(&self, i: usize) -> f64 {
        let nf = self.n as f64;
        self.s_base[i] * self.s_base[i] + (nf - 1.0) * self.s_fiber[i] * self.s_fiber[i]
    }
}
