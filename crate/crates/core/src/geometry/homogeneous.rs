//! Round-sphere states `g = c * g_S` with constant-map or eigenmap data.

use serde::{Deserialize, Serialize};

use super::{CurvaturePacket, MapKind};
use crate::error::{Error, Result};
use crate::util::unit_sphere_area;

/// Homogeneous slice: round `S^n` scaled by `c`, plus the map ansatz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomogeneousState {
    pub n: usize,
    pub c: f64,
    pub map: MapKind,
}

impl HomogeneousState {
    pub fn new(n: usize, c: f64, map: MapKind) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("sphere dimension must be >= 2, got {n}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("sphere scale must be positive and finite, got {c}")));
        }
        Ok(HomogeneousState { n, c, map })
    }

    /// All curvature quantities are spatially constant closed forms:
    /// `Ric = (n-1) g_S`, `Sc = n(n-1)/c`, `|Rm| = sqrt(2n(n-1))/c`, with the
    /// eigenmap contributing `|grad phi|^2 = n/c` and pullback `g_S`.
    pub fn curvature(&self, alpha: f64) -> CurvaturePacket {
        let nf = self.n as f64;
        let c = self.c;
        let eig = matches!(self.map, MapKind::IdentityEigenmap);
        let e = if eig { 1.0 } else { 0.0 };

        let ric_unit = (nf - 1.0) / c;
        let sc = nf * (nf - 1.0) / c;
        let rm = (2.0 * nf * (nf - 1.0)).sqrt() / c;
        let s_unit = (nf - 1.0 - alpha * e) / c;
        let grad_sq = e * nf / c;
        let sh = sc - alpha * grad_sq;

        CurvaturePacket {
            n: self.n,
            rm_norm: vec![rm],
            ric_base: vec![ric_unit],
            ric_fiber: vec![ric_unit],
            sc: vec![sc],
            s_base: vec![s_unit],
            s_fiber: vec![s_unit],
            sh: vec![sh],
            grad_phi_sq: vec![grad_sq],
            tension: vec![0.0],
            hess_phi_norm: vec![0.0],
        }
    }

    /// `Vol(c * g_S) = c^(n/2) * Vol(S^n)`.
    pub fn total_volume(&self) -> f64 {
        self.c.powf(self.n as f64 / 2.0) * unit_sphere_area(self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_map_round_sphere_closed_forms() {
        let s = HomogeneousState::new(2, 2.0, MapKind::Constant).unwrap();
        let p = s.curvature(0.7);
        assert_relative_eq!(p.sc[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.rm_norm[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.sh[0], 1.0, max_relative = 1e-15);
        assert_eq!(p.grad_phi_sq[0], 0.0);
        assert_eq!(p.tension[0], 0.0);
    }

    #[test]
    fn eigenmap_contributions() {
        let s = HomogeneousState::new(2, 1.0, MapKind::IdentityEigenmap).unwrap();
        let p = s.curvature(0.5);
        assert_relative_eq!(p.grad_phi_sq[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.sh[0], 1.0, max_relative = 1e-15); // 2 - 0.5 * 2
        assert_relative_eq!(p.s_base[0], 0.5, max_relative = 1e-15); // (1 - 0.5)/1
        assert_relative_eq!(p.s_norm_sq(0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn volume_of_scaled_two_sphere() {
        let s = HomogeneousState::new(2, 2.0, MapKind::Constant).unwrap();
        assert_relative_eq!(s.total_volume(), 8.0 * std::f64::consts::PI, max_relative = 1e-13);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(HomogeneousState::new(1, 1.0, MapKind::Constant).is_err());
        assert!(HomogeneousState::new(2, 0.0, MapKind::Constant).is_err());
        assert!(HomogeneousState::new(2, -1.0, MapKind::Constant).is_err());
        assert!(HomogeneousState::new(2, f64::NAN, MapKind::Constant).is_err());
    }
}
