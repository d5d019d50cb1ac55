//! Parabolic rescaling of a singular trajectory and the convergence
//! diagnostics comparing rescaled flows at different scales.
//!
//! Rescaling by `lambda` maps the metric to `lambda g(T + t / lambda)` and
//! re-centers time so the singularity sits at `t = 0`; lengths stretch by
//! `sqrt(lambda)`, curvature shrinks by `1 / lambda`, and the quantity
//! `(-t) |Rm|` is scale invariant, which is how the Type I bound transfers.

use crate::error::{Error, Result};
use crate::flow::{interpolate, FlowTrajectory};
use crate::geometry::{FlatState, GeometryState, HomogeneousState, WarpedState};
use crate::soliton::{canonical_residual_window, fit_potential, soliton_residual, SolitonSpec};

/// Half-width, in rescaled length units, of the window used for the
/// canonical-form fit on warped states. Rescaled flows are probed near
/// `t = -1` where their curvature scale is order one.
pub const WINDOW_RADIUS: f64 = 2.0;

/// A trajectory in rescaled time `t = lambda (s - T) < 0`, holding the
/// blown-up states, the transported coupling, and the margin by which the
/// transferred Type I bound `|Rm| <= C / (-t)` held.
#[derive(Debug, Clone)]
pub struct RescaledTrajectory {
    pub lambda: f64,
    /// Grid column the blow-up is centered on (warped states).
    pub base_index: Option<usize>,
    /// Rescaled snapshot times, strictly increasing and negative.
    pub times: Vec<f64>,
    pub states: Vec<GeometryState>,
    /// Coupling at each snapshot, `alpha_j(t) = alpha(T + t / lambda)`.
    pub alphas: Vec<f64>,
    /// `min over snapshots of (C - (-t) sup |Rm|)`; nonnegative when the
    /// source Type I bound transferred cleanly.
    pub type_i_margin: f64,
}

impl RescaledTrajectory {
    pub fn time_domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// State at rescaled time `t`, linearly interpolated between snapshots.
    pub fn state_at(&self, t: f64) -> Result<GeometryState> {
        let (lo, hi) = self.time_domain();
        let tol = 1e-9 * (hi - lo).abs();
        if t < lo - tol || t > hi + tol {
            return Err(Error::Domain(format!(
                "rescaled time {t} lies outside the stored window [{lo}, {hi}]"
            )));
        }
        let t = t.clamp(lo, hi);
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => Ok(self.states[i].clone()),
            Err(ins) => {
                let i = ins - 1;
                let theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                interpolate(&self.states[i], &self.states[i + 1], theta)
            }
        }
    }

    /// Coupling at rescaled time `t`, linearly interpolated.
    pub fn alpha_at(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.time_domain();
        let tol = 1e-9 * (hi - lo).abs();
        if t < lo - tol || t > hi + tol {
            return Err(Error::Domain(format!(
                "rescaled time {t} lies outside the stored window [{lo}, {hi}]"
            )));
        }
        let t = t.clamp(lo, hi);
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => Ok(self.alphas[i]),
            Err(ins) => {
                let i = ins - 1;
                let theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                Ok(self.alphas[i] * (1.0 - theta) + self.alphas[i + 1] * theta)
            }
        }
    }
}

fn scale_state(state: &GeometryState, lambda: f64) -> Result<GeometryState> {
    match state {
        GeometryState::Homogeneous(s) => Ok(GeometryState::Homogeneous(HomogeneousState::new(
            s.n,
            lambda * s.c,
            s.map,
        )?)),
        GeometryState::Warped(s) => {
            let k = lambda.sqrt();
            Ok(GeometryState::Warped(WarpedState::new(
                s.n,
                s.a.iter().map(|v| k * v).collect(),
                s.w.iter().map(|v| k * v).collect(),
                s.phi.clone(),
                s.winding,
            )?))
        }
        GeometryState::Flat(s) => Ok(GeometryState::Flat(FlatState::new(
            s.n,
            lambda.sqrt() * s.r_max,
            s.samples,
        )?)),
    }
}

/// Rescales a singular trajectory by `lambda` around `t_sing`.
///
/// `window`, when given, is the desired extent of the rescaled window in
/// rescaled time (so snapshots from `t = -window` up to the singularity are
/// kept); asking for more than the stored data covers is a domain error
/// that names the achievable extent.
pub fn rescale(
    tr: &FlowTrajectory,
    t_sing: f64,
    lambda: f64,
    base_index: Option<usize>,
    window: Option<f64>,
) -> Result<RescaledTrajectory> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("scale must be positive, got {lambda}")));
    }
    if tr.snapshot_count() < 2 {
        return Err(Error::Precondition("rescaling needs at least two snapshots".into()));
    }
    let t_first = tr.times[0];
    let t_last = *tr.times.last().unwrap();
    if !(t_sing > t_last) {
        return Err(Error::Precondition(format!(
            "singular time {t_sing} must lie beyond the last snapshot at {t_last}"
        )));
    }
    if let GeometryState::Warped(s) = &tr.states[0] {
        match base_index {
            None => {
                return Err(Error::Precondition(
                    "rescaling a warped state needs a base column".into(),
                ))
            }
            Some(b) if b >= s.grid_len() => {
                return Err(Error::Domain(format!(
                    "base column {b} outside the grid of {} columns",
                    s.grid_len()
                )))
            }
            _ => {}
        }
    }
    let achievable = lambda * (t_sing - t_first);
    let extent = match window {
        Some(w) => {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!("window must be positive, got {w}")));
            }
            if w > achievable * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "requested rescaled window {w:.6e} exceeds the achievable {achievable:.6e}"
                )));
            }
            w
        }
        None => achievable,
    };
    let s_min = t_sing - extent / lambda;
    let slack = 1e-9 * (t_sing - t_first);

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut alphas = Vec::new();
    for i in 0..tr.snapshot_count() {
        let (s, state) = tr.snapshot(i);
        if s >= s_min - slack && s < t_sing {
            times.push(lambda * (s - t_sing));
            states.push(scale_state(state, lambda)?);
            alphas.push(tr.alpha(s));
        }
    }
    if times.len() < 2 {
        return Err(Error::Domain(
            "rescaled window contains fewer than two snapshots".into(),
        ));
    }

    let (type_i_c, _) = super::type_i_constant(tr, t_sing)?;
    let mut margin = f64::INFINITY;
    for (k, state) in states.iter().enumerate() {
        let sup = state.curvature(alphas[k]).sup_rm();
        margin = margin.min(type_i_c - (-times[k]) * sup);
    }
    Ok(RescaledTrajectory { lambda, base_index, times, states, alphas, type_i_margin: margin })
}

/// Pairwise profile distances and canonical-form residuals of rescaled
/// flows probed at a shared rescaled time.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Symmetric matrix of distances at the probe time: scale-factor gaps
    /// for homogeneous states, arc-length-gauge profile gaps near the base
    /// point for warped ones.
    pub distances: Vec<Vec<f64>>,
    /// Canonical-form residual of each rescaled state, in input order.
    pub residuals: Vec<f64>,
    /// Whether the residuals decrease (with 5% slack) along the input
    /// order, which callers arrange by increasing scale.
    pub residual_nonincreasing: bool,
}

/// Rotates a warped state so `base` lands on the center column; the map
/// samples are rebased across the seam so the winding jump stays at the
/// array boundary.
fn center_warped(s: &WarpedState, base: usize) -> Result<WarpedState> {
    let j = s.grid_len();
    let off = (base + j - j / 2) % j;
    let jump = s.phi_jump();
    let mut a = Vec::with_capacity(j);
    let mut w = Vec::with_capacity(j);
    let mut phi = Vec::with_capacity(j);
    for k in 0..j {
        let idx = k + off;
        if idx < j {
            a.push(s.a[idx]);
            w.push(s.w[idx]);
            phi.push(s.phi[idx]);
        } else {
            a.push(s.a[idx - j]);
            w.push(s.w[idx - j]);
            phi.push(s.phi[idx - j] + jump);
        }
    }
    WarpedState::new(s.n, a, w, phi, s.winding)
}

/// Arc-length sample count per side of the base point for profile
/// comparison.
const PROFILE_SAMPLES: usize = 64;

/// Width and map slope resampled at uniform arc length from the center
/// column, out to `radius` on each side. The base coordinate density `a`
/// is chart gauge (it rescales with the parametrization, not the geometry),
/// so profiles are compared in the arc-length gauge where it drops out.
fn resample_profile(s: &WarpedState, radius: f64) -> (Vec<f64>, Vec<f64>) {
    let j = s.grid_len();
    let center = j / 2;
    let dx = s.dx();
    let phix = s.d1_periodic(&s.phi, s.phi_jump());
    let mut arc = vec![0.0; j];
    for k in center..j - 1 {
        arc[k + 1] = arc[k] + 0.5 * (s.a[k] + s.a[k + 1]) * dx;
    }
    for k in (0..center).rev() {
        arc[k] = arc[k + 1] - 0.5 * (s.a[k] + s.a[k + 1]) * dx;
    }
    let m = 2 * PROFILE_SAMPLES + 1;
    let mut w_out = Vec::with_capacity(m);
    let mut slope_out = Vec::with_capacity(m);
    for i in 0..m {
        let target = -radius + 2.0 * radius * i as f64 / (m - 1) as f64;
        let target = target.clamp(arc[0], arc[j - 1]);
        let k = match arc.binary_search_by(|v| v.total_cmp(&target)) {
            Ok(k) => k.min(j - 2),
            Err(ins) => ins.clamp(1, j - 1) - 1,
        };
        let theta = if arc[k + 1] > arc[k] {
            (target - arc[k]) / (arc[k + 1] - arc[k])
        } else {
            0.0
        };
        let lerp = |f0: f64, f1: f64| f0 * (1.0 - theta) + f1 * theta;
        w_out.push(lerp(s.w[k], s.w[k + 1]));
        slope_out.push(lerp(phix[k] / s.a[k], phix[k + 1] / s.a[k + 1]));
    }
    (w_out, slope_out)
}

/// Sup-norm distance between centered `(w, phi_s)` profiles in arc-length
/// parametrization, within [`WINDOW_RADIUS`] of the base point.
fn profile_distance(p: &WarpedState, q: &WarpedState) -> f64 {
    let (wp, sp) = resample_profile(p, WINDOW_RADIUS);
    let (wq, sq) = resample_profile(q, WINDOW_RADIUS);
    let mut d = 0.0f64;
    for i in 0..wp.len() {
        d = d.max((wp[i] - wq[i]).abs());
        d = d.max((sp[i] - sq[i]).abs());
    }
    d
}

/// Inclusive column window reaching [`WINDOW_RADIUS`] of arc length out of
/// the center column on each side.
fn arc_window(s: &WarpedState, center: usize, radius: f64) -> (usize, usize) {
    let j = s.grid_len();
    let dx = s.dx();
    let mut hi = center;
    let mut acc = 0.0;
    while hi + 1 < j && acc < radius {
        acc += 0.5 * (s.a[hi] + s.a[hi + 1]) * dx;
        hi += 1;
    }
    let mut lo = center;
    acc = 0.0;
    while lo > 0 && acc < radius {
        acc += 0.5 * (s.a[lo] + s.a[lo - 1]) * dx;
        lo -= 1;
    }
    // the potential fit needs at least 5 columns
    while hi - lo < 4 {
        lo = lo.saturating_sub(1);
        hi = (hi + 1).min(j - 1);
    }
    (lo, hi)
}

/// Compares rescaled flows at a shared probe time: profile distances after
/// base-point centering, plus the canonical-form residual of each state
/// against a freshly fitted potential.
pub fn convergence_diagnostic(
    rescaled: &[RescaledTrajectory],
    t_probe: f64,
) -> Result<ConvergenceReport> {
    if rescaled.len() < 2 {
        return Err(Error::Precondition(
            "convergence diagnostics need at least two rescaled trajectories".into(),
        ));
    }
    if !(t_probe < 0.0) {
        return Err(Error::Domain(format!(
            "probe time must precede the singular instant at 0, got {t_probe}"
        )));
    }
    let mut states = Vec::with_capacity(rescaled.len());
    let mut alphas = Vec::with_capacity(rescaled.len());
    for r in rescaled {
        states.push(r.state_at(t_probe)?);
        alphas.push(r.alpha_at(t_probe)?);
    }

    // compatibility and centering
    let mut centered: Vec<GeometryState> = Vec::with_capacity(states.len());
    for (i, state) in states.iter().enumerate() {
        match (state, &states[0]) {
            (GeometryState::Homogeneous(a), GeometryState::Homogeneous(b)) if a.n == b.n => {
                centered.push(state.clone());
            }
            (GeometryState::Warped(a), GeometryState::Warped(b))
                if a.n == b.n && a.grid_len() == b.grid_len() && a.winding == b.winding =>
            {
                let base = rescaled[i].base_index.ok_or_else(|| {
                    Error::Precondition("warped comparison needs base columns".into())
                })?;
                centered.push(GeometryState::Warped(center_warped(a, base)?));
            }
            _ => {
                return Err(Error::Domain(
                    "rescaled trajectories have incompatible ansatz classes".into(),
                ))
            }
        }
    }

    let m = centered.len();
    let mut distances = vec![vec![0.0; m]; m];
    for i in 0..m {
        for k in i + 1..m {
            let d = match (&centered[i], &centered[k]) {
                (GeometryState::Homogeneous(a), GeometryState::Homogeneous(b)) => {
                    (a.c - b.c).abs()
                }
                (GeometryState::Warped(a), GeometryState::Warped(b)) => profile_distance(a, b),
                _ => unreachable!("classes verified above"),
            };
            distances[i][k] = d;
            distances[k][i] = d;
        }
    }

    let sigma = 1.0 / (2.0 * t_probe);
    let mut residuals = Vec::with_capacity(m);
    for (state, &alpha) in centered.iter().zip(&alphas) {
        let r = match state {
            GeometryState::Homogeneous(_) => {
                let f = fit_potential(state, alpha, sigma, None)?;
                let spec = SolitonSpec::new(state.clone(), alpha, sigma, f)?;
                soliton_residual(&spec)?.canonical
            }
            GeometryState::Warped(s) => {
                let (lo, hi) = arc_window(s, s.grid_len() / 2, WINDOW_RADIUS);
                let f = fit_potential(state, alpha, sigma, Some((lo, hi)))?;
                let spec = SolitonSpec::new(state.clone(), alpha, sigma, f)?;
                canonical_residual_window(&spec, lo, hi)?.canonical
            }
            GeometryState::Flat(_) => {
                return Err(Error::Domain(
                    "convergence diagnostics are not defined for flat states".into(),
                ))
            }
        };
        residuals.push(r);
    }
    let residual_nonincreasing = residuals
        .windows(2)
        .all(|w| w[1] <= w[0] * 1.05 + 1e-9);

    Ok(ConvergenceReport { distances, residuals, residual_nonincreasing })
}
