//! Warped-product states on `S^1 x S^(n-1)`.
//!
//! Metric `a(x)^2 dx^2 + w(x)^2 g_(S^(n-1))` on the periodic grid
//! `x_j = 2 pi j / J`, circle-valued map stored as an unwrapped lift with
//! integer winding `m` (the lift jumps by `2 pi m` across the seam). All
//! differential operators are second-order periodic central differences; the
//! seam jump enters only through the lift-aware stencils, so stepping the
//! fields can never change the winding.

use serde::{Deserialize, Serialize};

use super::CurvaturePacket;
use crate::error::{Error, Result};
use crate::util::unit_sphere_area;

pub const MIN_GRID: usize = 16;

/// Warped slice: profiles sampled on the periodic grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarpedState {
    /// Total dimension (base circle + (n-1)-sphere fibers), `n >= 3`.
    pub n: usize,
    /// Base metric factor per grid point, positive.
    pub a: Vec<f64>,
    /// Fiber radius per grid point, positive.
    pub w: Vec<f64>,
    /// Unwrapped lift of the circle-valued map at grid points.
    pub phi: Vec<f64>,
    /// Winding number of the map around the base circle.
    pub winding: i64,
}

impl WarpedState {
    pub fn new(n: usize, a: Vec<f64>, w: Vec<f64>, phi: Vec<f64>, winding: i64) -> Result<Self> {
        if n < 3 {
            // n = 2 would make the fiber a circle, for which the intrinsic
            // fiber curvature term in K2 is wrong; the class starts at n = 3.
            return Err(Error::Domain(format!(
                "warped products need total dimension >= 3, got {n}"
            )));
        }
        let j = a.len();
        if j < MIN_GRID {
            return Err(Error::Domain(format!(
                "warped grid needs at least {MIN_GRID} points, got {j}"
            )));
        }
        if w.len() != j || phi.len() != j {
            return Err(Error::Domain(format!(
                "profile lengths disagree: a={}, w={}, phi={}",
                a.len(),
                w.len(),
                phi.len()
            )));
        }
        for (name, f) in [("a", &a), ("w", &w)] {
            if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!("profile {name} must be positive and finite")));
            }
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("map profile must be finite".into()));
        }
        Ok(WarpedState { n, a, w, phi, winding })
    }

    pub fn grid_len(&self) -> usize {
        self.a.len()
    }

    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.grid_len() as f64
    }

    pub fn x_of(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Seam jump of the map lift.
    pub fn phi_jump(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.winding as f64
    }

    /// First periodic central difference; `jump` is the seam offset added to
    /// the field across the wrap (zero for plain periodic fields).
    pub fn d1_periodic(&self, f: &[f64], jump: f64) -> Vec<f64> {
        let j = f.len();
        let two_dx = 2.0 * self.dx();
        (0..j)
            .map(|i| {
                let fp = if i + 1 == j { f[0] + jump } else { f[i + 1] };
                let fm = if i == 0 { f[j - 1] - jump } else { f[i - 1] };
                (fp - fm) / two_dx
            })
            .collect()
    }

    /// Second periodic central difference with seam offset `jump`.
    pub fn d2_periodic(&self, f: &[f64], jump: f64) -> Vec<f64> {
        let j = f.len();
        let dx2 = self.dx() * self.dx();
        (0..j)
            .map(|i| {
                let fp = if i + 1 == j { f[0] + jump } else { f[i + 1] };
                let fm = if i == 0 { f[j - 1] - jump } else { f[i - 1] };
                (fp - 2.0 * f[i] + fm) / dx2
            })
            .collect()
    }

    /// Arclength derivative `f_s = f_x / a` of a plain periodic field.
    pub fn d_ds(&self, f: &[f64]) -> Vec<f64> {
        self.d1_periodic(f, 0.0)
            .into_iter()
            .zip(&self.a)
            .map(|(fx, a)| fx / a)
            .collect()
    }

    /// Second arclength derivative `f_ss = f_xx/a^2 - a_x f_x/a^3`.
    fn d_ss(&self, f: &[f64], jump: f64) -> Vec<f64> {
        let fx = self.d1_periodic(f, jump);
        let fxx = self.d2_periodic(f, jump);
        let ax = self.d1_periodic(&self.a, 0.0);
        (0..f.len())
            .map(|i| {
                let a = self.a[i];
                fxx[i] / (a * a) - ax[i] * fx[i] / (a * a * a)
            })
            .collect()
    }

    /// Scalar Laplacian `f_ss + (n-1) (w_s/w) f_s` of a plain periodic field.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let nf = self.n as f64;
        let fs: Vec<f64> = self
            .d1_periodic(f, 0.0)
            .into_iter()
            .zip(&self.a)
            .map(|(fx, a)| fx / a)
            .collect();
        let fss = self.d_ss(f, 0.0);
        let ws = self.d_ds(&self.w);
        (0..f.len())
            .map(|i| fss[i] + (nf - 1.0) * (ws[i] / self.w[i]) * fs[i])
            .collect()
    }

    /// Curvature and map data from the two sectional curvatures
    /// `K1 = -w_ss/w` (planes containing the base direction) and
    /// `K2 = (1 - w_s^2)/w^2` (fiber planes).
    pub fn curvature(&self, alpha: f64) -> CurvaturePacket {
        let j = self.grid_len();
        let nf = self.n as f64;
        let ws = self.d_ds(&self.w);
        let wss = self.d_ss(&self.w, 0.0);
        let jump = self.phi_jump();
        let phix = self.d1_periodic(&self.phi, jump);
        let phiss = self.d_ss(&self.phi, jump);

        let mut p = CurvaturePacket {
            n: self.n,
            rm_norm: Vec::with_capacity(j),
            ric_base: Vec::with_capacity(j),
            ric_fiber: Vec::with_capacity(j),
            sc: Vec::with_capacity(j),
            s_base: Vec::with_capacity(j),
            s_fiber: Vec::with_capacity(j),
            sh: Vec::with_capacity(j),
            grad_phi_sq: Vec::with_capacity(j),
            tension: Vec::with_capacity(j),
            hess_phi_norm: Vec::with_capacity(j),
        };
        for i in 0..j {
            let w = self.w[i];
            let k1 = -wss[i] / w;
            let k2 = (1.0 - ws[i] * ws[i]) / (w * w);
            let ric_base = (nf - 1.0) * k1;
            let ric_fiber = k1 + (nf - 2.0) * k2;
            let sc = 2.0 * (nf - 1.0) * k1 + (nf - 1.0) * (nf - 2.0) * k2;
            let rm2 =
                4.0 * (nf - 1.0) * k1 * k1 + 2.0 * (nf - 1.0) * (nf - 2.0) * k2 * k2;

            let phis = phix[i] / self.a[i];
            let grad_sq = phis * phis;
            let hss = phiss[i];
            let hff = (ws[i] / w) * phis;
            let tension = hss + (nf - 1.0) * hff;
            let hess_norm = (hss * hss + (nf - 1.0) * hff * hff).sqrt();

            p.rm_norm.push(rm2.sqrt());
            p.ric_base.push(ric_base);
            p.ric_fiber.push(ric_fiber);
            p.sc.push(sc);
            p.s_base.push(ric_base - alpha * grad_sq);
            p.s_fiber.push(ric_fiber);
            p.sh.push(sc - alpha * grad_sq);
            p.grad_phi_sq.push(grad_sq);
            p.tension.push(tension);
            p.hess_phi_norm.push(hess_norm);
        }
        p
    }

    /// Area of the fiber sphere over grid point `j`.
    pub fn fiber_area(&self, j: usize) -> f64 {
        unit_sphere_area(self.n - 1) * self.w[j].powi(self.n as i32 - 1)
    }

    /// Volume weight `a * Area(fiber)` at grid point `j`; integrating it in
    /// `dx` gives volumes.
    pub fn volume_weight(&self, j: usize) -> f64 {
        self.a[j] * self.fiber_area(j)
    }

    /// Total volume by the periodic midpoint rule (each point owns one cell).
    pub fn total_volume(&self) -> f64 {
        let dx = self.dx();
        (0..self.grid_len()).map(|j| self.volume_weight(j) * dx).sum()
    }

    /// Volume of the band `[x_(j0), x_(j1)]` (no wrap) by the trapezoid rule.
    pub fn band_volume(&self, j0: usize, j1: usize) -> Result<f64> {
        if j0 >= j1 || j1 >= self.grid_len() {
            return Err(Error::Domain(format!(
                "band [{j0}, {j1}] degenerate or outside grid of {} points",
                self.grid_len()
            )));
        }
        let dx = self.dx();
        let mut v = 0.0;
        for j in j0..j1 {
            v += 0.5 * (self.volume_weight(j) + self.volume_weight(j + 1)) * dx;
        }
        Ok(v)
    }

    /// Winding recomputed from the stored lift; stepping must preserve it.
    pub fn winding_from_samples(&self) -> i64 {
        let j = self.grid_len();
        let mut total = self.phi[0] + self.phi_jump() - self.phi[j - 1];
        for i in 0..j - 1 {
            total += self.phi[i + 1] - self.phi[i];
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    }
}
