//! Reduced length based at (or arbitrarily near) the singular time.
//!
//! The backward integration cannot start at the singular slice itself, so
//! each base time is handled through the sigma substitution with the first
//! integration point truncated away from the base: position-independent
//! slices go through the closed-form kinetic reduction, warped slices through
//! a dynamic program over grid columns followed by a damped Newton polish of
//! the continuous track.

use super::{chart_displacement, homogeneous_integrals, wrap_signed, MidCache};
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::geometry::{GeometryState, WarpedState};
use crate::util::d_dt_3pt;

/// Sigma slices of the warped dynamic program (and of its polish grid).
pub const DP_SLICES: usize = 64;

/// Reduced-length probe tables for a family of base times approaching the
/// singular time, with the pointwise limit diagnostics evaluated on the
/// tightest base.
#[derive(Debug, Clone)]
pub struct SingularReducedLength {
    pub bases: Vec<f64>,
    pub points: Vec<f64>,
    pub times: Vec<f64>,
    /// `tables[i][ti][pj]`: reduced length from base `bases[i]` at the probe
    /// `(points[pj], times[ti])`.
    pub tables: Vec<Vec<Vec<f64>>>,
    /// Sup distance between consecutive tables.
    pub cauchy_steps: Vec<f64>,
    /// True when the steps are non-increasing, the expected signature of a
    /// pointwise limit as the bases tighten.
    pub cauchy_monotone: bool,
    /// Differential diagnostics of the limit table; present when the probe
    /// grid supports interior finite differences.
    pub margins: Option<LimitMargins>,
}

/// Finite-difference residuals of the three pointwise relations the limit
/// reduced length satisfies, normalized against `tau = t_sing - t_bar`:
/// the heat margin `-l_t - lap(l) + |grad l|^2 - Sh + n/(2 tau)` (nonnegative
/// for the limit, zero on exact shrinkers), the potential margin
/// `|grad l|^2 - Sh - (l - n)/tau - 2 lap(l)` (nonnegative), and the
/// transport defect `-2 l_t + |grad l|^2 - Sh + l/tau` (zero).
#[derive(Debug, Clone)]
pub struct LimitMargins {
    pub heat: Vec<Vec<f64>>,
    pub potential: Vec<Vec<f64>>,
    pub transport: Vec<Vec<f64>>,
    pub min_heat: f64,
    pub min_potential: f64,
    pub max_abs_transport: f64,
}

/// Evaluates reduced-length tables from each base time in `bases` (tightening
/// toward `t_sing`) at every probe `(q, t_bar)` in `points x times`, and
/// reports the Cauchy trend of the tables plus the limit margins.
///
/// `p` is the base position and `points` are absolute chart coordinates
/// (angles along the great circle through the base for homogeneous slices,
/// base-circle coordinates for warped slices, signed radii for flat charts).
pub fn reduced_length_singular(
    tr: &FlowTrajectory,
    t_sing: f64,
    bases: &[f64],
    p: f64,
    points: &[f64],
    times: &[f64],
) -> Result<SingularReducedLength> {
    if bases.is_empty() || points.is_empty() || times.is_empty() {
        return Err(Error::Domain(
            "singular reduced length needs at least one base, point, and time".into(),
        ));
    }
    if bases.windows(2).any(|w| w[1] <= w[0]) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "base and probe times must be strictly increasing".into(),
        ));
    }
    if *bases.last().unwrap() > t_sing + 1e-12 {
        return Err(Error::Domain(format!(
            "base time {} lies past the singular time {t_sing}",
            bases.last().unwrap()
        )));
    }
    if *times.last().unwrap() >= bases[0] {
        return Err(Error::Domain(format!(
            "probe time {} does not precede the earliest base {}",
            times.last().unwrap(),
            bases[0]
        )));
    }

    let mut tables = Vec::with_capacity(bases.len());
    for &t0 in bases {
        tables.push(l_table(tr, t0, p, points, times)?);
    }

    let mut cauchy_steps = Vec::with_capacity(bases.len().saturating_sub(1));
    for pair in tables.windows(2) {
        let mut step = 0.0f64;
        for (row_a, row_b) in pair[0].iter().zip(&pair[1]) {
            for (a, b) in row_a.iter().zip(row_b) {
                step = step.max((b - a).abs());
            }
        }
        cauchy_steps.push(step);
    }
    let cauchy_monotone = cauchy_steps
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);

    let margins = limit_margins(tr, t_sing, tables.last().unwrap(), p, points, times)?;

    Ok(SingularReducedLength {
        bases: bases.to_vec(),
        points: points.to_vec(),
        times: times.to_vec(),
        tables,
        cauchy_steps,
        cauchy_monotone,
        margins,
    })
}

/// One reduced-length table: rows over probe times, columns over points.
fn l_table(
    tr: &FlowTrajectory,
    t0: f64,
    p: f64,
    points: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let warped = matches!(tr.states[0], GeometryState::Warped(_));
    let mut table = Vec::with_capacity(times.len());
    for &t_bar in times {
        if warped {
            table.push(warped_l_at(tr, t0, t_bar, p, points)?);
        } else {
            let (i1, i2) = homogeneous_integrals(tr, t0, t_bar)?;
            let norm = 2.0 * (t0 - t_bar).sqrt();
            let row = points
                .iter()
                .map(|&q| {
                    let d = chart_displacement(tr, p, q);
                    (d * d / i1 + i2) / norm
                })
                .collect();
            table.push(row);
        }
    }
    Ok(table)
}

/// Finite-difference margins on the tightest table; `None` when the probe
/// grid is too small for interior stencils or the points are not uniform.
fn limit_margins(
    tr: &FlowTrajectory,
    t_sing: f64,
    table: &[Vec<f64>],
    p: f64,
    points: &[f64],
    times: &[f64],
) -> Result<Option<LimitMargins>> {
    if times.len() < 3 || points.len() < 3 {
        return Ok(None);
    }
    let dq = points[1] - points[0];
    if points
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dq).abs() > 1e-9 * (1.0 + dq.abs()))
    {
        return Ok(None);
    }

    let nf = tr.states[0].dimension() as f64;
    let mut heat = Vec::new();
    let mut potential = Vec::new();
    let mut transport = Vec::new();
    for ti in 1..times.len() - 1 {
        let mut h_row = Vec::new();
        let mut p_row = Vec::new();
        let mut t_row = Vec::new();
        for pj in 1..points.len() - 1 {
            let l0 = table[ti][pj];
            let l_t = d_dt_3pt(
                times[ti - 1],
                times[ti],
                times[ti + 1],
                table[ti - 1][pj],
                table[ti][pj],
                table[ti + 1][pj],
            );
            let l_q = (table[ti][pj + 1] - table[ti][pj - 1]) / (2.0 * dq);
            let l_qq = (table[ti][pj + 1] - 2.0 * l0 + table[ti][pj - 1]) / (dq * dq);
            let (grad2, lap, sh) = probe_operators(tr, p, points[pj], times[ti], l_q, l_qq)?;
            let tau = t_sing - times[ti];
            h_row.push(-l_t - lap + grad2 - sh + nf / (2.0 * tau));
            p_row.push(grad2 - sh - (l0 - nf) / tau - 2.0 * lap);
            t_row.push(-2.0 * l_t + grad2 - sh + l0 / tau);
        }
        heat.push(h_row);
        potential.push(p_row);
        transport.push(t_row);
    }

    let fold = |rows: &Vec<Vec<f64>>, f: &dyn Fn(f64, f64) -> f64, init: f64| {
        rows.iter().flatten().fold(init, |acc, &x| f(acc, x))
    };
    Ok(Some(LimitMargins {
        min_heat: fold(&heat, &f64::min, f64::INFINITY),
        min_potential: fold(&potential, &f64::min, f64::INFINITY),
        max_abs_transport: fold(&transport, &|a, x| a.max(x.abs()), 0.0),
        heat,
        potential,
        transport,
    }))
}

/// Converts chart-coordinate derivatives of the reduced length at the probe
/// `(q, t)` into `(|grad l|^2, lap l, Sh)` on the geometry at `t`.
fn probe_operators(
    tr: &FlowTrajectory,
    p: f64,
    q: f64,
    t: f64,
    l_q: f64,
    l_qq: f64,
) -> Result<(f64, f64, f64)> {
    let state = tr.state_at(t)?;
    let nf = state.dimension() as f64;
    Ok(match &state {
        GeometryState::Flat(_) => {
            let d = q - p;
            let lap = if d.abs() < 1e-9 {
                nf * l_qq
            } else {
                l_qq + (nf - 1.0) * l_q / d
            };
            (l_q * l_q, lap, 0.0)
        }
        GeometryState::Homogeneous(s) => {
            let theta = wrap_signed(q - p, 2.0 * std::f64::consts::PI);
            let lap = if theta.sin().abs() < 1e-9 {
                nf * l_qq / s.c
            } else {
                (l_qq + (nf - 1.0) * (theta.cos() / theta.sin()) * l_q) / s.c
            };
            (l_q * l_q / s.c, lap, s.curvature(tr.alpha(t)).sh[0])
        }
        GeometryState::Warped(s) => {
            let packet = s.curvature(tr.alpha(t));
            let ax = s.d1_periodic(&s.a, 0.0);
            let wx = s.d1_periodic(&s.w, 0.0);
            let a = interp(s, &s.a, q);
            let lap = l_qq / (a * a) - interp(s, &ax, q) * l_q / (a * a * a)
                + (nf - 1.0) * interp(s, &wx, q) * l_q / (interp(s, &s.w, q) * a * a);
            ((l_q / a).powi(2), lap, interp(s, &packet.sh, q))
        }
    })
}

/// Linear periodic interpolation of a grid field at chart coordinate `x`.
fn interp(s: &WarpedState, f: &[f64], x: f64) -> f64 {
    let dx = s.dx();
    let period = dx * f.len() as f64;
    let u = x.rem_euclid(period) / dx;
    let j0 = (u as usize).min(f.len() - 1);
    let frac = u - j0 as f64;
    f[j0] + frac * (f[(j0 + 1) % f.len()] - f[j0])
}

/// Reduced length on a warped background at each target coordinate, from the
/// base `(p, t0)` down to `t_bar`.
pub(super) fn warped_l_at(
    tr: &FlowTrajectory,
    t0: f64,
    t_bar: f64,
    p: f64,
    targets: &[f64],
) -> Result<Vec<f64>> {
    let dp = WarpedDp::solve(tr, t0, t_bar, p)?;
    Ok(targets.iter().map(|&q| dp.l_at(q)).collect())
}

/// Reduced length at every grid column (used by volume integrals).
pub(super) fn warped_l_columns(
    tr: &FlowTrajectory,
    t0: f64,
    t_bar: f64,
    p: f64,
) -> Result<Vec<f64>> {
    let dp = WarpedDp::solve(tr, t0, t_bar, p)?;
    let cols: Vec<f64> = (0..dp.xcols.len()).map(|j| dp.xcols[j]).collect();
    Ok(cols.into_iter().map(|q| dp.l_at(q)).collect())
}

/// Dynamic program over sigma slices and grid columns.
///
/// Transitions carry endpoint-averaged kinetic and trace costs, the forward
/// pass reaches every column in one sweep, and each extracted track is
/// re-minimized as a continuous curve before the length is read off. The
/// sigma range is truncated at the last stored slice when the base lies past
/// it, and always at a relative floor that keeps the first slice off the
/// base itself.
struct WarpedDp {
    t0: f64,
    t_bar: f64,
    period: f64,
    xcols: Vec<f64>,
    /// Best predecessor column, per slice transition and arrival column.
    parents: Vec<Vec<usize>>,
    src: usize,
    cache: MidCache,
}

impl WarpedDp {
    fn solve(tr: &FlowTrajectory, t0: f64, t_bar: f64, p: f64) -> Result<Self> {
        if !(t_bar < t0) {
            return Err(Error::Domain(format!(
                "foot time {t_bar} must precede base time {t0}"
            )));
        }
        let sigma_bar = (t0 - t_bar).sqrt();
        let mut floor = 1e-10 * sigma_bar;
        if tr.analytic.is_none() && t0 > tr.t_final {
            floor = floor.max((t0 - tr.t_final).sqrt());
        }
        floor = super::usable_floor(tr, t0, floor);
        if floor >= sigma_bar {
            return Err(Error::Domain(format!(
                "foot time {t_bar} is not below the last slice reachable from base {t0}"
            )));
        }
        let dsig = (sigma_bar - floor) / DP_SLICES as f64;

        // per-slice metric factor and trace on the columns
        let mut a2 = Vec::with_capacity(DP_SLICES + 1);
        let mut sh = Vec::with_capacity(DP_SLICES + 1);
        let mut sigs = Vec::with_capacity(DP_SLICES + 1);
        let mut geom: Option<(usize, f64)> = None;
        for k in 0..=DP_SLICES {
            let sig = floor + k as f64 * dsig;
            let t = t0 - sig * sig;
            let state = tr.state_at(t)?;
            let GeometryState::Warped(s) = &state else {
                return Err(Error::Domain(
                    "the slice solver needs a warped background".into(),
                ));
            };
            geom.get_or_insert((s.grid_len(), s.dx()));
            a2.push(s.a.iter().map(|a| a * a).collect::<Vec<f64>>());
            sh.push(s.curvature(tr.alpha(t)).sh.clone());
            sigs.push(sig);
        }
        let (cols, dx) = geom.unwrap();
        let period = dx * cols as f64;
        let xcols: Vec<f64> = (0..cols).map(|j| j as f64 * dx).collect();
        let src = (p.rem_euclid(period) / dx).round() as usize % cols;

        let mut cost = vec![f64::INFINITY; cols];
        cost[src] = 0.0;
        let mut parents = Vec::with_capacity(DP_SLICES);
        for k in 0..DP_SLICES {
            let mut next = vec![f64::INFINITY; cols];
            let mut parent = vec![0usize; cols];
            for jp in 0..cols {
                if !cost[jp].is_finite() {
                    continue;
                }
                let trace_from = sigs[k] * sigs[k] * sh[k][jp];
                for j in 0..cols {
                    let q = wrap_signed(xcols[j] - xcols[jp], period) / dsig;
                    let kinetic = 0.25 * (a2[k][jp] + a2[k + 1][j]) * q * q;
                    let trace = trace_from + sigs[k + 1] * sigs[k + 1] * sh[k + 1][j];
                    let e = cost[jp] + dsig * (kinetic + trace);
                    if e < next[j] {
                        next[j] = e;
                        parent[j] = jp;
                    }
                }
            }
            cost = next;
            parents.push(parent);
        }

        let cache = MidCache::build(tr, t0, t_bar, floor, DP_SLICES)?;
        debug_assert!((cache.dsig - dsig).abs() <= 1e-12 * dsig);
        Ok(WarpedDp { t0, t_bar, period, xcols, parents, src, cache })
    }

    /// Backtracked column track ending at `j_end`, unwrapped to a continuous
    /// lift starting from the source column coordinate.
    fn track_to(&self, j_end: usize) -> Vec<f64> {
        let mut cols = vec![j_end];
        for parent in self.parents.iter().rev() {
            cols.push(parent[*cols.last().unwrap()]);
        }
        cols.reverse();
        debug_assert_eq!(cols[0], self.src);
        let mut track = Vec::with_capacity(cols.len());
        track.push(self.xcols[self.src]);
        for pair in cols.windows(2) {
            let step = wrap_signed(self.xcols[pair[1]] - self.xcols[pair[0]], self.period);
            track.push(track.last().unwrap() + step);
        }
        track
    }

    /// Reduced length to the exact coordinate `q` (snapped track, foot moved
    /// to `q`, then polished).
    fn l_at(&self, q: f64) -> f64 {
        let j_near = (q.rem_euclid(self.period) / (self.period / self.xcols.len() as f64))
            .round() as usize
            % self.xcols.len();
        let mut track = self.track_to(j_near);
        let foot = *track.last().unwrap();
        *track.last_mut().unwrap() = foot + wrap_signed(q - self.xcols[j_near], self.period);
        newton_polish(&self.cache, &mut track);
        self.cache.total(&track) / (2.0 * (self.t0 - self.t_bar).sqrt())
    }

}

/// Damped Newton minimization of the interior nodes of a track: analytic
/// gradient, tridiagonal finite-difference Hessian, Thomas solve with a
/// Levenberg shift that grows until the step decreases the value.
fn newton_polish(cache: &MidCache, u: &mut [f64]) {
    let n = u.len();
    if n < 3 {
        return;
    }
    let m = n - 2;
    let scale = 1.0 + u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut value = cache.total(u);
    for _ in 0..60 {
        let g: Vec<f64> = (1..n - 1).map(|i| cache.partial(u, i)).collect();
        if g.iter().fold(0.0f64, |a, x| a.max(x.abs())) <= 1e-9 * scale {
            return;
        }
        // tridiagonal Hessian by differencing the gradient; symmetry gives
        // the lower band for free
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m.saturating_sub(1)];
        for i in 0..m {
            let node = i + 1;
            let h = 1e-6 * (1.0 + u[node].abs());
            let saved = u[node];
            u[node] = saved + h;
            let g_self = cache.partial(u, node);
            if i > 0 {
                off[i - 1] = (cache.partial(u, node - 1) - g[i - 1]) / h;
            }
            u[node] = saved;
            diag[i] = (g_self - g[i]) / h;
        }
        let base = diag.iter().fold(1e-12f64, |a, x| a.max(x.abs()));
        let mut lam = 0.0;
        let mut accepted = false;
        while lam <= 1e12 * base {
            if let Some(step) = thomas_solve(&diag, &off, &g, lam) {
                let mut trial = u.to_vec();
                for i in 0..m {
                    trial[i + 1] -= step[i];
                }
                let trial_value = cache.total(&trial);
                if trial_value <= value + 1e-12 * value.abs() {
                    u.copy_from_slice(&trial);
                    value = trial_value;
                    accepted = true;
                    break;
                }
            }
            lam = if lam == 0.0 { 1e-8 * base } else { lam * 10.0 };
        }
        if !accepted {
            return;
        }
    }
}

/// Solves `(T + lam I) x = b` for symmetric tridiagonal `T`; `None` when a
/// pivot degenerates.
fn thomas_solve(diag: &[f64], off: &[f64], b: &[f64], lam: f64) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut piv = diag[0] + lam;
    if piv <= 0.0 {
        return None;
    }
    if m > 1 {
        c[0] = off[0] / piv;
    }
    d[0] = b[0] / piv;
    for i in 1..m {
        piv = diag[i] + lam - off[i - 1] * c[i - 1];
        if piv <= 0.0 {
            return None;
        }
        if i < m - 1 {
            c[i] = off[i] / piv;
        }
        d[i] = (b[i] - off[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}
