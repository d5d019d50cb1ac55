//! Isoperimetric ratio of bands in a warped slice.
//!
//! For a band `x in [x0, x1]` the boundary is the two fiber spheres at the
//! ends and the ratio is `Area^n / (c_n Vol^(n-1))` with `c_n = n^n omega_n`
//! (`omega_n` the Euclidean unit-ball volume), normalized so a Euclidean ball
//! scores exactly 1.

use super::WarpedState;
use crate::error::{Error, Result};
use crate::util::{unit_ball_volume, unit_sphere_area};

/// Boundary area, enclosed volume, and normalized isoperimetric ratio of a
/// band of a warped slice.
#[derive(Debug, Clone)]
pub struct IsoperimetricReport {
    pub area: f64,
    pub volume: f64,
    pub ratio: f64,
}

/// Normalization constant `c_n = n^n omega_n`.
fn isoperimetric_constant(n: usize) -> f64 {
    (n as f64).powi(n as i32) * unit_ball_volume(n)
}

/// Ratio scored by a Euclidean ball of radius `r` in R^n; equals 1 for every
/// radius and dimension, kept as the analytic cross-check.
pub fn euclidean_ball_ratio(n: usize, r: f64) -> f64 {
    let area = unit_sphere_area(n - 1) * r.powi(n as i32 - 1);
    let volume = unit_ball_volume(n) * r.powi(n as i32);
    area.powi(n as i32) / (isoperimetric_constant(n) * volume.powi(n as i32 - 1))
}

/// Isoperimetric ratio of the band between grid columns `j0 < j1`.
pub fn isoperimetric_ratio(state: &WarpedState, j0: usize, j1: usize) -> Result<IsoperimetricReport> {
    let volume = state.band_volume(j0, j1)?;
    if volume <= 0.0 {
        return Err(Error::Domain("band has no interior volume".into()));
    }
    let n = state.n;
    let area = state.fiber_area(j0) + state.fiber_area(j1);
    let ratio = area.powi(n as i32) / (isoperimetric_constant(n) * volume.powi(n as i32 - 1));
    Ok(IsoperimetricReport { area, volume, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_ball_scores_one() {
        for n in 2..=6 {
            for r in [0.5, 1.0, 3.0] {
                assert_relative_eq!(euclidean_ball_ratio(n, r), 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cylinder_band_ratio_matches_closed_form() {
        let jn = 256;
        let s = WarpedState::new(3, vec![1.0; jn], vec![1.0; jn], vec![0.0; jn], 0).unwrap();
        // band of base length L: area = 2 * 4 pi, volume = 4 pi L
        let j0 = 0;
        let j1 = jn / 4;
        let l = std::f64::consts::FRAC_PI_2;
        let rep = isoperimetric_ratio(&s, j0, j1).unwrap();
        assert_relative_eq!(rep.area, 8.0 * std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(rep.volume, 4.0 * std::f64::consts::PI * l, max_relative = 1e-10);
        let n = 3.0f64;
        let c3 = 27.0 * unit_ball_volume(3);
        let expect = rep.area.powf(n) / (c3 * rep.volume.powf(n - 1.0));
        assert_relative_eq!(rep.ratio, expect, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_band_rejected() {
        let jn = 32;
        let s = WarpedState::new(3, vec![1.0; jn], vec![1.0; jn], vec![0.0; jn], 0).unwrap();
        assert!(isoperimetric_ratio(&s, 5, 5).is_err());
        assert!(isoperimetric_ratio(&s, 5, 4).is_err());
    }
}
