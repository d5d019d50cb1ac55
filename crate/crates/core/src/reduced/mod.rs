//! Backward length functional on space-time curves, its direct minimization,
//! geodesic shooting, and the reduced length / volume built on top of them.
//!
//! Curves are parametrized by `sigma = sqrt(t0 - t)`, which absorbs the
//! endpoint singularity of the integrand: in that variable
//!
//! ```text
//! L = integral over [0, sigma_bar] of ( m/2 * u_sigma^2 + 2 sigma^2 Sh ) dsigma
//! ```
//!
//! with `m` the metric factor along the track (`c` on homogeneous slices,
//! `a^2` on warped slices, `1` on flat charts) and `u` the chart coordinate.
//! All quadrature is composite midpoint over a uniform sigma grid, so the
//! integrand is never evaluated at the base time itself.

mod harnack;
mod singular;
mod volume;
mod wres;

pub use harnack::{harnack_check, HarnackReport};
pub use singular::{reduced_length_singular, LimitMargins, SingularReducedLength};
pub use volume::{
    monotonicity_monitor, reduce_report, reduced_volume, MonotonicityReport, ReducedBase,
    ReducedGeometryReport, ReducedVolumeSample,
};
pub use wres::w_residual;

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::geometry::GeometryState;

/// Default number of sigma intervals for discretized curves.
pub const DEFAULT_CURVE_NODES: usize = 64;

/// Coordinate-descent sweep cap for the direct minimizer.
pub const MAX_SWEEPS: usize = 10_000;

/// Gradient sup-norm at which the minimizer declares convergence.
pub const GRAD_TOL: f64 = 1e-8;

/// A curve in space-time, stored on a uniform `sigma = sqrt(t0 - t)` grid.
///
/// `positions[k]` is the chart coordinate at `sigma_k = k * dsig`: an angle
/// along a fixed great circle for homogeneous slices, the (lifted) base
/// coordinate `x` for warped slices, a signed radial coordinate for flat
/// charts. `positions[0]` sits at the base time `t0`, the last entry at the
/// foot time `t_bar`.
#[derive(Debug, Clone)]
pub struct SpaceTimeCurve {
    pub t0: f64,
    pub t_bar: f64,
    pub positions: Vec<f64>,
}

impl SpaceTimeCurve {
    pub fn new(t0: f64, t_bar: f64, positions: Vec<f64>) -> Result<Self> {
        if !(t_bar.is_finite() && t0.is_finite() && t_bar < t0) {
            return Err(Error::Domain(format!(
                "curve needs foot time strictly before base time, got t0 = {t0}, t_bar = {t_bar}"
            )));
        }
        if positions.len() < 2 {
            return Err(Error::Domain("curve needs at least two nodes".into()));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("curve positions must be finite".into()));
        }
        Ok(SpaceTimeCurve { t0, t_bar, positions })
    }

    /// Total sigma span `sqrt(t0 - t_bar)`.
    pub fn sigma_bar(&self) -> f64 {
        (self.t0 - self.t_bar).sqrt()
    }

    /// Sigma spacing of the node grid.
    pub fn dsig(&self) -> f64 {
        self.sigma_bar() / (self.positions.len() - 1) as f64
    }

    /// Node times `t_k = t0 - sigma_k^2`, decreasing from base to foot.
    pub fn times(&self) -> Vec<f64> {
        let ds = self.dsig();
        (0..self.positions.len()).map(|k| self.t0 - (k as f64 * ds).powi(2)).collect()
    }

    /// Base point `(position, t0)`.
    pub fn base(&self) -> (f64, f64) {
        (self.positions[0], self.t0)
    }

    /// Foot point `(position, t_bar)`.
    pub fn foot(&self) -> (f64, f64) {
        (*self.positions.last().unwrap(), self.t_bar)
    }
}

/// Per-interval coefficients of the sigma-form integrand.
#[derive(Debug, Clone)]
pub(crate) enum MidCoefs {
    /// Position-independent slice: metric factor and trace are scalars.
    Uniform { m: f64, s: f64 },
    /// Warped slice: `a^2` and `Sh` profiles on the periodic grid.
    Profile { dx: f64, m: Vec<f64>, s: Vec<f64> },
}

impl MidCoefs {
    /// Metric factor and trace at (lifted) chart coordinate `x`.
    fn at(&self, x: f64) -> (f64, f64) {
        match self {
            MidCoefs::Uniform { m, s } => (*m, *s),
            MidCoefs::Profile { dx, m, s } => {
                let (j0, j1, frac) = wrap_cell(x, *dx, m.len());
                (
                    m[j0] + frac * (m[j1] - m[j0]),
                    s[j0] + frac * (s[j1] - s[j0]),
                )
            }
        }
    }

    /// Chart derivatives of the two coefficients at `x` (interpolant slopes).
    fn slope_at(&self, x: f64) -> (f64, f64) {
        match self {
            MidCoefs::Uniform { .. } => (0.0, 0.0),
            MidCoefs::Profile { dx, m, s } => {
                let (j0, j1, _) = wrap_cell(x, *dx, m.len());
                ((m[j1] - m[j0]) / dx, (s[j1] - s[j0]) / dx)
            }
        }
    }
}

/// Periodic cell lookup: wraps `x` into the grid and returns the bracketing
/// columns plus the in-cell fraction.
fn wrap_cell(x: f64, dx: f64, len: usize) -> (usize, usize, f64) {
    let period = dx * len as f64;
    let xw = x.rem_euclid(period);
    let u = xw / dx;
    let j0 = (u as usize).min(len - 1);
    (j0, (j0 + 1) % len, u - j0 as f64)
}

/// Interval midpoint data for a fixed `(t0, t_bar, intervals)` layout.
#[derive(Debug)]
pub(crate) struct MidCache {
    pub dsig: f64,
    /// Midpoint sigma and coefficients, one entry per interval.
    pub mids: Vec<(f64, MidCoefs)>,
    /// Flat charts only: radial bound for the window check.
    pub r_bound: Option<f64>,
}

impl MidCache {
    /// Builds the cache from trajectory slices at the interval midpoints.
    /// `sigma` runs over `[sigma_lo, sigma_lo + intervals * dsig]`.
    pub fn build(
        tr: &FlowTrajectory,
        t0: f64,
        t_bar: f64,
        sigma_lo: f64,
        intervals: usize,
    ) -> Result<Self> {
        if !(t_bar < t0) {
            return Err(Error::Domain(format!(
                "foot time {t_bar} must precede base time {t0}"
            )));
        }
        if t_bar < tr.t_start() - 1e-9 {
            return Err(Error::Domain(format!(
                "foot time {t_bar} precedes the stored trajectory start {}",
                tr.t_start()
            )));
        }
        let sigma_bar = (t0 - t_bar).sqrt();
        let dsig = (sigma_bar - sigma_lo) / intervals as f64;
        if !(dsig > 0.0) {
            return Err(Error::Domain("curve has no sigma extent".into()));
        }
        let mut mids = Vec::with_capacity(intervals);
        let mut r_bound = None;
        for k in 0..intervals {
            let sig = sigma_lo + (k as f64 + 0.5) * dsig;
            let t = t0 - sig * sig;
            let state = tr.state_at(t)?;
            let coefs = match &state {
                GeometryState::Homogeneous(s) => MidCoefs::Uniform {
                    m: s.c,
                    s: s.curvature(tr.alpha(t)).sh[0],
                },
                GeometryState::Flat(s) => {
                    r_bound = Some(s.r_max);
                    MidCoefs::Uniform { m: 1.0, s: 0.0 }
                }
                GeometryState::Warped(s) => {
                    let sh = s.curvature(tr.alpha(t)).sh;
                    let m = s.a.iter().map(|a| a * a).collect();
                    MidCoefs::Profile { dx: s.dx(), m, s: sh }
                }
            };
            mids.push((sig, coefs));
        }
        Ok(MidCache { dsig, mids, r_bound })
    }

    /// Energy of interval `k` with endpoint positions `(u0, u1)`.
    pub fn energy(&self, k: usize, u0: f64, u1: f64) -> f64 {
        let (sig, coefs) = &self.mids[k];
        let (m, s) = coefs.at(0.5 * (u0 + u1));
        let q = (u1 - u0) / self.dsig;
        (0.5 * m * q * q + 2.0 * sig * sig * s) * self.dsig
    }

    /// Total value over all intervals for the node vector `u`.
    pub fn total(&self, u: &[f64]) -> f64 {
        (0..self.mids.len()).map(|k| self.energy(k, u[k], u[k + 1])).sum()
    }

    /// Analytic partial derivative of the total with respect to node `i`
    /// (interior nodes touch two intervals).
    fn partial(&self, u: &[f64], i: usize) -> f64 {
        let mut g = 0.0;
        if i > 0 {
            g += self.edge_partial(i - 1, u[i - 1], u[i], true);
        }
        if i + 1 < u.len() {
            g += self.edge_partial(i, u[i], u[i + 1], false);
        }
        g
    }

    fn edge_partial(&self, k: usize, u0: f64, u1: f64, wrt_u1: bool) -> f64 {
        let (sig, coefs) = &self.mids[k];
        let xm = 0.5 * (u0 + u1);
        let (m, _) = coefs.at(xm);
        let (dm, ds) = coefs.slope_at(xm);
        let q = (u1 - u0) / self.dsig;
        let kinetic = if wrt_u1 { m * q } else { -m * q };
        // the midpoint moves with either endpoint at rate 1/2
        kinetic + (0.25 * dm * q * q + sig * sig * ds) * self.dsig
    }
}

/// Evaluates the length functional of `curve` over `tr` by composite midpoint
/// quadrature in sigma. Errors when the curve leaves the stored window.
pub fn l_length(curve: &SpaceTimeCurve, tr: &FlowTrajectory) -> Result<f64> {
    let cache = MidCache::build(tr, curve.t0, curve.t_bar, 0.0, curve.positions.len() - 1)?;
    if let Some(r_max) = cache.r_bound {
        if curve.positions.iter().any(|p| p.abs() > r_max + 1e-12) {
            return Err(Error::Domain(format!(
                "curve exits the stored window: |position| exceeds the chart radius {r_max}"
            )));
        }
    }
    Ok(cache.total(&curve.positions))
}

/// Result of a direct curve minimization.
#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub curve: SpaceTimeCurve,
    /// Minimal value of the length functional.
    pub big_l: f64,
    /// Reduced value `big_l / (2 sqrt(t0 - t_bar))`.
    pub l: f64,
    /// Gradient sup-norm reached the tolerance within the sweep cap.
    pub converged: bool,
    pub grad_norm: f64,
    pub sweeps: usize,
}

/// Minimizes the length functional over curves from base `(p, t0)` to foot
/// `(q, t_bar)` with the default node count.
///
/// Homogeneous and warped charts are periodic, so both lifts of the endpoint
/// displacement are minimized and the smaller value wins (for short arcs the
/// quadratic kinetic term makes the short lift optimal, but the comparison is
/// kept explicit).
pub fn minimize_l(
    tr: &FlowTrajectory,
    p: f64,
    t0: f64,
    q: f64,
    t_bar: f64,
) -> Result<MinimizeOutcome> {
    minimize_l_nodes(tr, p, t0, q, t_bar, DEFAULT_CURVE_NODES)
}

/// [`minimize_l`] with an explicit number of sigma intervals.
pub fn minimize_l_nodes(
    tr: &FlowTrajectory,
    p: f64,
    t0: f64,
    q: f64,
    t_bar: f64,
    intervals: usize,
) -> Result<MinimizeOutcome> {
    if intervals < 2 {
        return Err(Error::Domain("minimization needs at least two sigma intervals".into()));
    }
    let cache = MidCache::build(tr, t0, t_bar, 0.0, intervals)?;
    if let Some(r_max) = cache.r_bound {
        for r in [p, q] {
            if r.abs() > r_max {
                return Err(Error::Domain(format!(
                    "endpoint radius {r} lies outside the chart radius {r_max}"
                )));
            }
        }
    }
    let periodic = matches!(tr.states[0], GeometryState::Homogeneous(_) | GeometryState::Warped(_));
    let period = match &tr.states[0] {
        GeometryState::Warped(s) => s.dx() * s.grid_len() as f64,
        _ => 2.0 * std::f64::consts::PI,
    };
    let mut displacements = vec![q - p];
    if periodic {
        let short = wrap_signed(q - p, period);
        let long = short - period * short.signum();
        displacements = if short == 0.0 { vec![0.0] } else { vec![short, long] };
    }

    let mut best: Option<MinimizeOutcome> = None;
    for disp in displacements {
        let mut u = init_track(&cache, p, disp);
        let (sweeps, grad_norm, converged) = descend(&cache, &mut u);
        let big_l = cache.total(&u);
        let outcome = MinimizeOutcome {
            curve: SpaceTimeCurve::new(t0, t_bar, u)?,
            big_l,
            l: big_l / (2.0 * (t0 - t_bar).sqrt()),
            converged,
            grad_norm,
            sweeps,
        };
        if best.as_ref().is_none_or(|b| outcome.big_l < b.big_l) {
            best = Some(outcome);
        }
    }
    Ok(best.unwrap())
}

fn wrap_signed(d: f64, period: f64) -> f64 {
    let mut w = d.rem_euclid(period);
    if w > 0.5 * period {
        w -= period;
    }
    w
}

/// Initial track: node placement proportional to the accumulated inverse
/// metric factor, which is the stationarity condition when the coefficients
/// are position independent (and a straight line otherwise).
fn init_track(cache: &MidCache, p: f64, disp: f64) -> Vec<f64> {
    let k = cache.mids.len();
    let mut cum = Vec::with_capacity(k + 1);
    cum.push(0.0);
    for (_, coefs) in &cache.mids {
        let (m, _) = coefs.at(p);
        cum.push(cum.last().unwrap() + 1.0 / m.max(1e-300));
    }
    let total = *cum.last().unwrap();
    (0..=k).map(|i| p + disp * cum[i] / total).collect()
}

/// Coordinate-descent loop shared by the public minimizer and the slice
/// solvers: golden-section line search per interior node followed by one
/// finite-difference Newton polish, until the analytic gradient sup-norm
/// drops below [`GRAD_TOL`] or the sweep cap is hit.
pub(crate) fn descend(cache: &MidCache, u: &mut [f64]) -> (usize, f64, bool) {
    descend_capped(cache, u, MAX_SWEEPS)
}

pub(crate) fn descend_capped(
    cache: &MidCache,
    u: &mut [f64],
    max_sweeps: usize,
) -> (usize, f64, bool) {
    let n = u.len();
    let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut grad = grad_norm(cache, u);
    let mut sweeps = 0;
    while grad > GRAD_TOL && sweeps < max_sweeps {
        for i in 1..n - 1 {
            u[i] = line_min(cache, u, i, scale);
        }
        sweeps += 1;
        grad = grad_norm(cache, u);
    }
    (sweeps, grad, grad <= GRAD_TOL)
}

fn grad_norm(cache: &MidCache, u: &[f64]) -> f64 {
    (1..u.len() - 1).fold(0.0f64, |m, i| m.max(cache.partial(u, i).abs()))
}

/// One-dimensional minimization of the two intervals touching node `i`.
fn line_min(cache: &MidCache, u: &[f64], i: usize, scale: f64) -> f64 {
    let local = |x: f64| cache.energy(i - 1, u[i - 1], x) + cache.energy(i, x, u[i + 1]);
    let center = u[i];
    // bracket the minimum by doubling outward from the current value
    let mut h = 0.25 * (u[i + 1] - u[i - 1]).abs().max(1e-3 * (1.0 + scale));
    let mut fc = local(center);
    for _ in 0..60 {
        if local(center - h) > fc && local(center + h) > fc {
            break;
        }
        h *= 2.0;
        fc = fc.min(local(center - h).min(local(center + h)));
    }
    let m = crate::util::golden_min(local, center - h, center + h, 1e-10 * (1.0 + scale), 200);
    // one Newton step on a central stencil recovers the accuracy the
    // value-comparison search cannot resolve
    let d = 1e-6 * (1.0 + m.abs());
    let (fm, f0, fp) = (local(m - d), local(m), local(m + d));
    let curv = (fp - 2.0 * f0 + fm) / (d * d);
    if curv > 0.0 {
        let step = (fp - fm) / (2.0 * d) / curv;
        let cand = m - step;
        if local(cand) <= f0 {
            return cand;
        }
    }
    m
}

/// Outcome of shooting the stationarity system from the base.
#[derive(Debug, Clone)]
pub struct ShootOutcome {
    pub curve: SpaceTimeCurve,
    /// False when the integration left the stored window or the velocity
    /// blew up; the curve then stops early.
    pub complete: bool,
}

/// Integrates the stationarity system of the length functional from the base
/// `(p, t0)` down to `t_bar`, starting from the limit velocity
/// `v0 = lim sqrt(t0 - t) gamma_dot`.
///
/// In the sigma variable the system is first order in `(u, v)`:
/// `u' = -2 v` and `v' = 2 (a_x / a) v^2 - 4 sigma S_uu v - sigma^2 Sh_x / a^2`
/// (the last two terms drop on position-independent slices), integrated with
/// classical fourth-order Runge-Kutta.
pub fn l_geodesic_shoot(
    tr: &FlowTrajectory,
    p: f64,
    t0: f64,
    v0: f64,
    t_bar: f64,
    steps: usize,
) -> Result<ShootOutcome> {
    if steps < 2 {
        return Err(Error::Domain("shooting needs at least two sigma steps".into()));
    }
    if !(t_bar < t0) {
        return Err(Error::Domain(format!(
            "foot time {t_bar} must precede base time {t0}"
        )));
    }
    let sigma_bar = (t0 - t_bar).sqrt();
    let h = sigma_bar / steps as f64;
    // coefficients at whole and half steps; failure to evaluate a slice ends
    // the integration early with a partial curve
    let mut coefs = Vec::with_capacity(2 * steps + 1);
    let mut reachable = 2 * steps;
    for i in 0..=2 * steps {
        let sig = 0.5 * h * i as f64;
        match shoot_coefs(tr, t0 - sig * sig) {
            Ok(c) => coefs.push(c),
            Err(_) => {
                reachable = i.saturating_sub(1) & !1usize;
                break;
            }
        }
    }
    let full_steps = reachable / 2;

    let mut positions = vec![p];
    let mut u = p;
    let mut v = v0;
    let mut complete = full_steps == steps;
    let r_bound = match &tr.states[0] {
        GeometryState::Flat(s) => Some(s.r_max),
        _ => None,
    };
    for k in 0..full_steps {
        let sig = h * k as f64;
        let f = |i: usize, uu: f64, vv: f64, ss: f64| -> (f64, f64) {
            (-2.0 * vv, coefs[i].rhs(ss, uu, vv))
        };
        let (k1u, k1v) = f(2 * k, u, v, sig);
        let (k2u, k2v) = f(2 * k + 1, u + 0.5 * h * k1u, v + 0.5 * h * k1v, sig + 0.5 * h);
        let (k3u, k3v) = f(2 * k + 1, u + 0.5 * h * k2u, v + 0.5 * h * k2v, sig + 0.5 * h);
        let (k4u, k4v) = f(2 * k + 2, u + h * k3u, v + h * k3v, sig + h);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !u.is_finite() || v.abs() > 1e12 || r_bound.is_some_and(|r| u.abs() > r) {
            complete = false;
            break;
        }
        positions.push(u);
    }
    let reached = (positions.len() - 1) as f64 * h;
    let t_reached = if complete { t_bar } else { t0 - reached * reached };
    if positions.len() < 2 {
        return Err(Error::Domain(
            "shooting could not leave the base: no slice below t0 is available".into(),
        ));
    }
    Ok(ShootOutcome { curve: SpaceTimeCurve::new(t0, t_reached, positions)?, complete })
}

/// Slice coefficients needed by the shooting right-hand side.
enum ShootCoefs {
    Uniform { s_uu: f64 },
    Profile { dx: f64, gamma: Vec<f64>, s_uu: Vec<f64>, sh_x_over_m: Vec<f64> },
    Flat,
}

impl ShootCoefs {
    fn rhs(&self, sig: f64, u: f64, v: f64) -> f64 {
        match self {
            ShootCoefs::Flat => 0.0,
            ShootCoefs::Uniform { s_uu } => -4.0 * sig * s_uu * v,
            ShootCoefs::Profile { dx, gamma, s_uu, sh_x_over_m } => {
                let lerp = |f: &Vec<f64>| {
                    let (j0, j1, frac) = wrap_cell(u, *dx, f.len());
                    f[j0] + frac * (f[j1] - f[j0])
                };
                2.0 * lerp(gamma) * v * v - 4.0 * sig * lerp(s_uu) * v
                    - sig * sig * lerp(sh_x_over_m)
            }
        }
    }
}

fn shoot_coefs(tr: &FlowTrajectory, t: f64) -> Result<ShootCoefs> {
    let state = tr.state_at(t)?;
    Ok(match &state {
        GeometryState::Flat(_) => ShootCoefs::Flat,
        GeometryState::Homogeneous(s) => {
            ShootCoefs::Uniform { s_uu: s.curvature(tr.alpha(t)).s_base[0] }
        }
        GeometryState::Warped(s) => {
            let packet = s.curvature(tr.alpha(t));
            let ax = s.d1_periodic(&s.a, 0.0);
            let shx = s.d1_periodic(&packet.sh, 0.0);
            let gamma = ax.iter().zip(&s.a).map(|(ax, a)| ax / a).collect();
            let sh_x_over_m = shx.iter().zip(&s.a).map(|(sx, a)| sx / (a * a)).collect();
            ShootCoefs::Profile { dx: s.dx(), gamma, s_uu: packet.s_base, sh_x_over_m }
        }
    })
}

/// The two quadrature integrals of the closed-form kinetic reduction:
/// `I1 = integral of dt / (sqrt(t0 - t) c(t))` and
/// `I2 = integral of sqrt(t0 - t) Sh(t) dt`, both over `[t_bar, t0]` and
/// computed in sigma with panels graded geometrically toward the base time.
///
/// Only position-independent slices qualify (homogeneous and flat; warped
/// slices are rejected). For bases past the stored range the integration is
/// truncated at the last stored slice, and in every case at
/// `1e-10 * sigma_bar`: when the metric factor degenerates at the base the
/// first integral diverges there, which only drives the kinetic share of the
/// minimal length to zero, so the truncation does not affect working
/// precision.
pub fn homogeneous_integrals(tr: &FlowTrajectory, t0: f64, t_bar: f64) -> Result<(f64, f64)> {
    if !(t_bar < t0) {
        return Err(Error::Domain(format!(
            "foot time {t_bar} must precede base time {t0}"
        )));
    }
    if t_bar < tr.t_start() - 1e-9 {
        return Err(Error::Domain(format!(
            "foot time {t_bar} precedes the stored trajectory start {}",
            tr.t_start()
        )));
    }
    if matches!(tr.states[0], GeometryState::Warped(_)) {
        return Err(Error::Domain(
            "the quadrature reduction needs a position-independent slice".into(),
        ));
    }
    let sigma_bar = (t0 - t_bar).sqrt();
    let mut floor = 1e-10 * sigma_bar;
    if tr.analytic.is_none() && t0 > tr.t_final {
        floor = floor.max((t0 - tr.t_final).sqrt());
    }
    floor = usable_floor(tr, t0, floor);
    let (nodes, weights) = crate::util::gauss_legendre(16);
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    let mut hi = sigma_bar;
    while hi > floor {
        let lo = (0.5 * hi).max(floor);
        let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        for (x, w) in nodes.iter().zip(&weights) {
            let sig = mid + half * x;
            let t = t0 - sig * sig;
            let (c, sh) = match tr.state_at(t)? {
                GeometryState::Homogeneous(s) => (s.c, s.curvature(tr.alpha(t)).sh[0]),
                GeometryState::Flat(_) => (1.0, 0.0),
                GeometryState::Warped(_) => unreachable!("warped rejected above"),
            };
            i1 += w * half * 2.0 / c;
            i2 += w * half * 2.0 * sig * sig * sh;
        }
        hi = lo;
    }
    Ok((i1, i2))
}

/// Minimal length value and reduced length from the closed-form kinetic
/// reduction, for a foot at unit-chart displacement `theta` from the base.
///
/// The kinetic share of the minimum is `theta^2 / I1` (Cauchy-Schwarz
/// equality case: the optimal track has `c(t) theta_dot` constant), and the
/// trace share `I2` does not depend on the track. Homogeneous displacements
/// wrap to the short arc.
pub fn quadrature_reduced_length(
    tr: &FlowTrajectory,
    theta: f64,
    t0: f64,
    t_bar: f64,
) -> Result<(f64, f64)> {
    let (i1, i2) = homogeneous_integrals(tr, t0, t_bar)?;
    let d = effective_displacement(tr, theta);
    let big_l = d * d / i1 + i2;
    Ok((big_l, big_l / (2.0 * (t0 - t_bar).sqrt())))
}

fn effective_displacement(tr: &FlowTrajectory, theta: f64) -> f64 {
    chart_displacement(tr, 0.0, theta).abs()
}

/// Raises a sigma floor just far enough that the slice at `t0 - floor^2` is
/// evaluable. For a base at (or within roundoff of) the singular time the
/// requested floor collapses onto the singular slice itself in floating
/// point; the bump starts at the resolution limit and doubles until the
/// probe succeeds, leaving regular bases untouched.
pub(crate) fn usable_floor(tr: &FlowTrajectory, t0: f64, floor: f64) -> f64 {
    if tr.state_at(t0 - floor * floor).is_ok() {
        return floor;
    }
    let mut f = (4.0 * f64::EPSILON * t0.abs().max(1.0)).sqrt().max(floor);
    while tr.state_at(t0 - f * f).is_err() && f < 1e-3 {
        f *= 2.0;
    }
    f
}

/// Chart displacement from `p` to `q`, wrapped to the short arc on periodic
/// charts.
pub(crate) fn chart_displacement(tr: &FlowTrajectory, p: f64, q: f64) -> f64 {
    match &tr.states[0] {
        GeometryState::Homogeneous(_) => wrap_signed(q - p, 2.0 * std::f64::consts::PI),
        GeometryState::Warped(s) => wrap_signed(q - p, s.dx() * s.grid_len() as f64),
        GeometryState::Flat(_) => q - p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{AnalyticFamily, CouplingSchedule};
    use approx::assert_relative_eq;

    fn flat_trajectory() -> FlowTrajectory {
        FlowTrajectory::from_analytic(
            AnalyticFamily::StaticFlat { n: 2, r_max: 8.0, samples: 64 },
            CouplingSchedule::constant(0.5).unwrap(),
            vec![0.0, 10.0],
        )
        .unwrap()
    }

    fn round_sphere() -> FlowTrajectory {
        FlowTrajectory::from_analytic(
            AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false },
            CouplingSchedule::constant(0.5).unwrap(),
            vec![0.0, 0.5],
        )
        .unwrap()
    }

    fn coupled_sphere() -> FlowTrajectory {
        FlowTrajectory::from_analytic(
            AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true },
            CouplingSchedule::constant(0.5).unwrap(),
            vec![0.0, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn straight_flat_curve_has_closed_form_length() {
        let tr = flat_trajectory();
        // d = 2, tau = 1: constant sigma-speed straight line, L = d^2 / (2 sqrt(tau))
        let positions: Vec<f64> = (0..=64).map(|k| 2.0 * k as f64 / 64.0).collect();
        let curve = SpaceTimeCurve::new(1.0, 0.0, positions).unwrap();
        let l = l_length(&curve, &tr).unwrap();
        assert_relative_eq!(l, 2.0, epsilon = 1e-12);

        // stationary curve with Sh = 0 has zero length
        let rest = SpaceTimeCurve::new(1.0, 0.0, vec![1.5; 65]).unwrap();
        assert_relative_eq!(l_length(&rest, &tr).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stationary_curve_on_round_sphere_integrates_trace() {
        // c = 2 - 2t based at the degeneracy time: integrand is exactly 2
        let tr = round_sphere();
        let curve = SpaceTimeCurve::new(1.0, 0.0, vec![0.3; 65]).unwrap();
        assert_relative_eq!(l_length(&curve, &tr).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn curve_outside_flat_chart_is_rejected() {
        let tr = flat_trajectory();
        let curve = SpaceTimeCurve::new(1.0, 0.0, vec![0.0, 4.0, 9.0]).unwrap();
        assert!(matches!(l_length(&curve, &tr), Err(Error::Domain(_))));
        assert!(SpaceTimeCurve::new(0.0, 1.0, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn quadrature_reduction_reproduces_gaussian_closed_form() {
        // validation of the closed-form reduction against the static flat
        // background before it is used as an oracle anywhere else
        let tr = flat_trajectory();
        for d in [0.5, 1.0, 2.0, 3.5] {
            for tau in [0.25, 1.0, 4.0] {
                let (_, l) = quadrature_reduced_length(&tr, d, 5.0, 5.0 - tau).unwrap();
                assert_relative_eq!(l, d * d / (4.0 * tau), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn minimizer_reproduces_gaussian_reduced_length() {
        let tr = flat_trajectory();
        for (d, tau) in [(0.5, 0.25), (2.0, 1.0), (3.0, 2.0)] {
            let out = minimize_l(&tr, 0.0, 5.0, d, 5.0 - tau).unwrap();
            assert!(out.converged, "gradient stalled at {}", out.grad_norm);
            assert_relative_eq!(out.l, d * d / (4.0 * tau), max_relative = 1e-8);
            assert_relative_eq!(out.big_l, 2.0 * (tau).sqrt() * out.l, max_relative = 1e-14);
        }
    }

    #[test]
    fn minimizer_matches_quadrature_reduction_on_sphere_families() {
        for tr in [round_sphere(), coupled_sphere()] {
            let (t0, t_bar, theta) = (0.45, 0.1, 2.0);
            let (big_l, l) = quadrature_reduced_length(&tr, theta, t0, t_bar).unwrap();
            let out = minimize_l(&tr, 0.0, t0, theta, t_bar).unwrap();
            assert!(out.converged);
            assert_relative_eq!(out.big_l, big_l, max_relative = 1e-4);
            assert_relative_eq!(out.l, l, max_relative = 1e-4);
        }
    }

    #[test]
    fn long_arc_candidate_never_beats_short_arc() {
        let tr = round_sphere();
        let out = minimize_l(&tr, 0.0, 0.45, 2.8, 0.1).unwrap();
        let (_, l_short) = quadrature_reduced_length(&tr, 2.8, 0.45, 0.1).unwrap();
        assert_relative_eq!(out.l, l_short, max_relative = 1e-4);
    }

    #[test]
    fn coincident_endpoints_give_a_stationary_minimizer() {
        let tr = round_sphere();
        let out = minimize_l(&tr, 0.7, 0.45, 0.7, 0.1).unwrap();
        let spread = out
            .curve
            .positions
            .iter()
            .fold(0.0f64, |m, p| m.max((p - 0.7).abs()));
        assert!(spread <= 1e-6, "stationary track drifted by {spread}");
        // same discretization, explicit rest track
        let rest =
            SpaceTimeCurve::new(0.45, 0.1, vec![0.7; DEFAULT_CURVE_NODES + 1]).unwrap();
        let l_rest = l_length(&rest, &tr).unwrap();
        assert_relative_eq!(out.big_l, l_rest, max_relative = 1e-12);
    }

    #[test]
    fn shooting_is_straight_on_the_flat_background() {
        let tr = flat_trajectory();
        let (t0, t_bar, d) = (5.0, 4.0, 2.0);
        let sigma_bar = (t0 - t_bar as f64).sqrt();
        // v0 = -d / (2 sigma_bar) reaches the foot exactly
        let out = l_geodesic_shoot(&tr, 0.0, t0, -d / (2.0 * sigma_bar), t_bar, 128).unwrap();
        assert!(out.complete);
        let (foot, t_foot) = out.curve.foot();
        assert_relative_eq!(foot, d, max_relative = 1e-12);
        assert_relative_eq!(t_foot, t_bar, epsilon = 1e-12);
        for (k, pos) in out.curve.positions.iter().enumerate() {
            assert_relative_eq!(*pos, d * k as f64 / 128.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn shooting_matches_the_closed_form_on_the_round_sphere() {
        let tr = round_sphere();
        let (t0, t_bar, v0) = (0.45, 0.05, -0.8);
        let out = l_geodesic_shoot(&tr, 0.0, t0, v0, t_bar, 256).unwrap();
        assert!(out.complete);
        // c = 2(1 - t): the scaled velocity c v is conserved, so the angle is
        // an arctangent of sigma
        let root = (1.0 - t0 as f64).sqrt();
        let sigma_bar = (t0 - t_bar as f64).sqrt();
        let expected = -2.0 * v0 * root * (sigma_bar / root).atan();
        let (foot, _) = out.curve.foot();
        assert_relative_eq!(foot, expected, max_relative = 1e-8);
    }

    #[test]
    fn shooting_from_the_recovered_first_variation_closes_the_loop() {
        for tr in [round_sphere(), flat_trajectory()] {
            let homogeneous = matches!(tr.states[0], GeometryState::Homogeneous(_));
            let (t0, t_bar, q) = if homogeneous { (0.45, 0.1, 1.0) } else { (5.0, 4.0, 2.0) };
            let base = minimize_l(&tr, 0.0, t0, q, t_bar).unwrap();
            // foot gradient of L by central differences over foot positions
            let h = 1e-5;
            let lp = minimize_l(&tr, 0.0, t0, q + h, t_bar).unwrap().big_l;
            let lm = minimize_l(&tr, 0.0, t0, q - h, t_bar).unwrap().big_l;
            let grad_l = (lp - lm) / (2.0 * h);
            // the foot gradient equals the conserved scaled velocity
            // m du/dsigma, and the shoot speed is v0 = -u_sigma(0)/2, so
            // dividing by m at the base recovers the launch speed
            let m_base = if homogeneous {
                match tr.state_at(t0).unwrap() {
                    GeometryState::Homogeneous(s) => s.c,
                    _ => unreachable!(),
                }
            } else {
                1.0
            };
            let v0 = -grad_l / (2.0 * m_base);
            let shot = l_geodesic_shoot(&tr, 0.0, t0, v0, t_bar, 512).unwrap();
            assert!(shot.complete);
            let (foot, _) = shot.curve.foot();
            assert_relative_eq!(foot, q, max_relative = 1e-4);
            let l_shot = l_length(&shot.curve, &tr).unwrap();
            assert_relative_eq!(l_shot, base.big_l, max_relative = 1e-4);
        }
    }

    #[test]
    fn shooting_reports_a_partial_curve_when_the_window_ends() {
        // non-analytic trajectory stored only on [0.3, 0.5]: shooting from
        // t0 = 0.5 down to 0.05 must stop at the stored edge
        let analytic = round_sphere();
        let times: Vec<f64> = (0..=40).map(|k| 0.3 + 0.005 * k as f64).collect();
        let states = times.iter().map(|&t| analytic.state_at(t).unwrap()).collect();
        let tr = FlowTrajectory {
            schedule: CouplingSchedule::constant(0.5).unwrap(),
            times,
            states,
            status: crate::flow::FlowStatus::ReachedEnd,
            t_final: 0.5,
            counters: Default::default(),
            min_sh_violations: 0,
            worst_sh_drop: 0.0,
            analytic: None,
        };
        let out = l_geodesic_shoot(&tr, 0.0, 0.5, -0.5, 0.05, 64).unwrap();
        assert!(!out.complete);
        let (_, t_reached) = out.curve.foot();
        assert!(t_reached > 0.29 && t_reached < 0.36, "stopped at {t_reached}");
    }
}
