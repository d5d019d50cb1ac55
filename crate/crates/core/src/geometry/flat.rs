//! Euclidean space in a bounded radial chart.
//!
//! Used by the exact flat fixtures (static flow, quadratic potentials).
//! Curvature vanishes identically; volume integrals over the chart window are
//! radial, and the complement of the window is handled in closed form by the
//! reduced-volume code.

use serde::{Deserialize, Serialize};

use super::CurvaturePacket;
use crate::error::{Error, Result};
use crate::util::unit_sphere_area;

/// Flat slice: `R^n` restricted to the ball of radius `r_max`, sampled on a
/// uniform radial grid with `samples` points (including both ends).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatState {
    pub n: usize,
    pub r_max: f64,
    pub samples: usize,
}

impl FlatState {
    pub fn new(n: usize, r_max: f64, samples: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("flat chart dimension must be >= 1".into()));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Domain(format!("flat chart radius must be positive, got {r_max}")));
        }
        if samples < 8 {
            return Err(Error::Domain("flat chart needs at least 8 radial samples".into()));
        }
        Ok(FlatState { n, r_max, samples })
    }

    pub fn dr(&self) -> f64 {
        self.r_max / (self.samples - 1) as f64
    }

    pub fn r_of(&self, i: usize) -> f64 {
        i as f64 * self.dr()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.r_of(i)).collect()
    }

    pub fn curvature(&self, _alpha: f64) -> CurvaturePacket {
        let z = vec![0.0; self.samples];
        CurvaturePacket {
            n: self.n,
            rm_norm: z.clone(),
            ric_base: z.clone(),
            ric_fiber: z.clone(),
            sc: z.clone(),
            s_base: z.clone(),
            s_fiber: z.clone(),
            sh: z.clone(),
            grad_phi_sq: z.clone(),
            tension: z.clone(),
            hess_phi_norm: z,
        }
    }

    /// Radial derivative of a sampled radial field (central differences,
    /// one-sided at the ends).
    pub fn d_dr(&self, f: &[f64]) -> Vec<f64> {
        let m = f.len();
        let dr = self.dr();
        (0..m)
            .map(|i| {
                if i == 0 {
                    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dr)
                } else if i == m - 1 {
                    (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * dr)
                } else {
                    (f[i + 1] - f[i - 1]) / (2.0 * dr)
                }
            })
            .collect()
    }

    /// Second radial derivative (central, one-sided at the ends).
    pub fn d2_dr2(&self, f: &[f64]) -> Vec<f64> {
        let m = f.len();
        let dr2 = self.dr() * self.dr();
        (0..m)
            .map(|i| {
                if i == 0 {
                    (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dr2
                } else if i == m - 1 {
                    (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / dr2
                } else {
                    (f[i + 1] - 2.0 * f[i] + f[i - 1]) / dr2
                }
            })
            .collect()
    }

    /// Laplacian of a radial field: `f'' + (n-1) f'/r`, with the smooth-origin
    /// value `n f''(0)` at `r = 0`.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let fr = self.d_dr(f);
        let frr = self.d2_dr2(f);
        (0..f.len())
            .map(|i| {
                let r = self.r_of(i);
                if i == 0 {
                    self.n as f64 * frr[0]
                } else {
                    frr[i] + (self.n as f64 - 1.0) * fr[i] / r
                }
            })
            .collect()
    }

    /// Volume of the chart window (ball of radius `r_max`).
    pub fn window_volume(&self) -> f64 {
        crate::util::unit_ball_volume(self.n) * self.r_max.powi(self.n as i32)
    }

    /// Shell weight `Area(S^(n-1)) r^(n-1)` for radial volume integrals.
    pub fn shell_weight(&self, i: usize) -> f64 {
        unit_sphere_area(self.n - 1) * self.r_of(i).powi(self.n as i32 - 1)
    }
}
