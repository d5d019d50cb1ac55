//! Flow trajectories: snapshot storage, interpolation, and the closed-form
//! families used as exact references.

use serde::{Deserialize, Serialize};

use super::schedule::CouplingSchedule;
use super::stepper::{FlowStatus, WorkCounters};
use crate::error::{Error, Result};
use crate::geometry::{FlatState, GeometryState, HomogeneousState, MapKind, WarpedState};

/// Families whose flow is known in closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AnalyticFamily {
    /// Round sphere `c(t) g_S`; `c' = -2(n-1) + 2 alpha` with the identity
    /// eigenmap, `c' = -2(n-1)` with a constant map, so
    /// `c(t) = c0 - 2(n-1) t + 2 int_0^t alpha` (eigenmap case).
    HomogeneousLinear { n: usize, c0: f64, eigenmap: bool },
    /// Product cylinder `S^1 x S^(n-1)` with `a = 1`, constant map, and fiber
    /// radius `w(t) = sqrt(w0^2 - 2(n-2) t)`.
    Cylinder { n: usize, grid: usize, w0: f64 },
    /// Static flat chart (the coupled flow fixes it).
    StaticFlat { n: usize, r_max: f64, samples: usize },
}

impl AnalyticFamily {
    /// Exact state at time `t`; errors at or past the singular time.
    pub fn state_at(&self, schedule: &CouplingSchedule, t: f64) -> Result<GeometryState> {
        match *self {
            AnalyticFamily::HomogeneousLinear { n, c0: _, eigenmap } => {
                let c = self.homogeneous_c(schedule, t);
                if c <= 0.0 {
                    return Err(Error::Domain(format!(
                        "time {t} is at or past the singular time of the shrinking sphere"
                    )));
                }
                let map = if eigenmap { MapKind::IdentityEigenmap } else { MapKind::Constant };
                Ok(GeometryState::Homogeneous(HomogeneousState::new(n, c, map)?))
            }
            AnalyticFamily::Cylinder { n, grid, w0 } => {
                let wsq = w0 * w0 - 2.0 * (n as f64 - 2.0) * t;
                if wsq <= 0.0 {
                    return Err(Error::Domain(format!(
                        "time {t} is at or past the singular time of the shrinking cylinder"
                    )));
                }
                let w = wsq.sqrt();
                Ok(GeometryState::Warped(WarpedState::new(
                    n,
                    vec![1.0; grid],
                    vec![w; grid],
                    vec![0.0; grid],
                    0,
                )?))
            }
            AnalyticFamily::StaticFlat { n, r_max, samples } => {
                Ok(GeometryState::Flat(FlatState::new(n, r_max, samples)?))
            }
        }
    }

    fn homogeneous_c(&self, schedule: &CouplingSchedule, t: f64) -> f64 {
        match *self {
            AnalyticFamily::HomogeneousLinear { n, c0, eigenmap } => {
                let map_term =
                    if eigenmap { 2.0 * schedule.alpha_integral(t) } else { 0.0 };
                c0 - 2.0 * (n as f64 - 1.0) * t + map_term
            }
            _ => unreachable!("homogeneous_c is only called on the homogeneous family"),
        }
    }

    /// First time the family degenerates, when one exists.
    pub fn singular_time(&self, schedule: &CouplingSchedule) -> Option<f64> {
        match *self {
            AnalyticFamily::HomogeneousLinear { n, c0: _, eigenmap } => {
                let nf = n as f64;
                let shrink_rate = |t: f64| {
                    2.0 * (nf - 1.0) - if eigenmap { 2.0 * schedule.alpha(t) } else { 0.0 }
                };
                // Past the last breakpoint c is linear; a positive terminal
                // shrink rate guarantees a root, otherwise scan for one.
                let t_tail = match schedule {
                    CouplingSchedule::Constant(_) => 0.0,
                    CouplingSchedule::PiecewiseLinear { times, .. } => *times.last().unwrap(),
                };
                let tail_rate = shrink_rate(t_tail + 1.0);
                let c_tail = self.homogeneous_c(schedule, t_tail.max(0.0));
                if c_tail <= 0.0 {
                    // degenerates inside the breakpoint range; bisect below
                } else if tail_rate <= 0.0 {
                    return None;
                }
                let mut hi = t_tail.max(0.0);
                let mut c_hi = self.homogeneous_c(schedule, hi);
                if c_hi > 0.0 {
                    hi = t_tail.max(0.0) + c_tail / tail_rate + 1.0;
                    c_hi = self.homogeneous_c(schedule, hi);
                    debug_assert!(c_hi <= 0.0);
                }
                if c_hi > 0.0 {
                    return None;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.homogeneous_c(schedule, mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
            AnalyticFamily::Cylinder { n, w0, .. } => Some(w0 * w0 / (2.0 * (n as f64 - 2.0))),
            AnalyticFamily::StaticFlat { .. } => None,
        }
    }
}

/// A run of the flow: snapshot times, states, and how the run ended.
///
/// `analytic` marks trajectories sampled from a closed-form family; those
/// evaluate exactly at any time instead of interpolating.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub schedule: CouplingSchedule,
    pub times: Vec<f64>,
    pub states: Vec<GeometryState>,
    pub status: FlowStatus,
    pub t_final: f64,
    pub counters: WorkCounters,
    /// Steps where the spatial minimum of `Sh` dropped beyond tolerance.
    pub min_sh_violations: usize,
    /// Largest such drop observed (0 when none).
    pub worst_sh_drop: f64,
    pub analytic: Option<AnalyticFamily>,
}

impl FlowTrajectory {
    /// Trajectory sampled exactly from a closed-form family.
    pub fn from_analytic(
        family: AnalyticFamily,
        schedule: CouplingSchedule,
        times: Vec<f64>,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("trajectory needs at least one snapshot time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("snapshot times must increase strictly".into()));
        }
        let states = times
            .iter()
            .map(|&t| family.state_at(&schedule, t))
            .collect::<Result<Vec<_>>>()?;
        let t_final = *times.last().unwrap();
        Ok(FlowTrajectory {
            schedule,
            times,
            states,
            status: FlowStatus::ReachedEnd,
            t_final,
            counters: WorkCounters::default(),
            min_sh_violations: 0,
            worst_sh_drop: 0.0,
            analytic: Some(family),
        })
    }

    pub fn snapshot_count(&self) -> usize {
        self.times.len()
    }

    pub fn snapshot(&self, i: usize) -> (f64, &GeometryState) {
        (self.times[i], &self.states[i])
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.schedule.alpha(t)
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    /// State at time `t`: exact for analytic trajectories, linear snapshot
    /// interpolation otherwise. `t` may overshoot the stored range by 1e-9.
    pub fn state_at(&self, t: f64) -> Result<GeometryState> {
        if let Some(f) = &self.analytic {
            return f.state_at(&self.schedule, t);
        }
        let t0 = self.times[0];
        let t1 = *self.times.last().unwrap();
        if t < t0 - 1e-9 || t > t1 + 1e-9 {
            return Err(Error::Domain(format!(
                "time {t} outside the stored trajectory range [{t0}, {t1}]"
            )));
        }
        let t = t.clamp(t0, t1);
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Ok(self.states[i].clone()),
            Err(i) => i - 1, // t > t0 here, so i >= 1
        };
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let theta = (t - ta) / (tb - ta);
        interpolate(&self.states[i], &self.states[i + 1], theta)
    }

    /// `(t, sup |Rm|)` per snapshot.
    pub fn sup_rm_series(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (t, s.curvature(self.alpha(t)).sup_rm()))
            .collect()
    }

    /// `(t, min Sh)` per snapshot.
    pub fn min_sh_series(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (t, s.curvature(self.alpha(t)).min_sh()))
            .collect()
    }

    /// Index of the last snapshot with time <= t.
    pub fn index_at_or_before(&self, t: f64) -> Result<usize> {
        if t < self.times[0] {
            return Err(Error::Domain(format!("time {t} precedes the trajectory start")));
        }
        Ok(match self.times.binary_search_by(x_cmp(t)) {
            Ok(i) => i,
            Err(i) => i - 1,
        })
    }
}

fn x_cmp(t: f64) -> impl FnMut(&f64) -> std::cmp::Ordering {
    move |x: &f64| x.total_cmp(&t)
}

pub(crate) fn interpolate(a: &GeometryState, b: &GeometryState, theta: f64) -> Result<GeometryState> {
    let lerp = |x: f64, y: f64| x + theta * (y - x);
    match (a, b) {
        (GeometryState::Homogeneous(s), GeometryState::Homogeneous(u)) => {
            if s.map != u.map || s.n != u.n {
                return Err(Error::Invariant("snapshots disagree on ansatz data".into()));
            }
            Ok(GeometryState::Homogeneous(HomogeneousState::new(
                s.n,
                lerp(s.c, u.c),
                s.map,
            )?))
        }
        (GeometryState::Warped(s), GeometryState::Warped(u)) => {
            if s.n != u.n || s.grid_len() != u.grid_len() || s.winding != u.winding {
                return Err(Error::Invariant("snapshots disagree on ansatz data".into()));
            }
            let zip3 = |x: &[f64], y: &[f64]| -> Vec<f64> {
                x.iter().zip(y).map(|(&p, &q)| lerp(p, q)).collect()
            };
            Ok(GeometryState::Warped(WarpedState::new(
                s.n,
                zip3(&s.a, &u.a),
                zip3(&s.w, &u.w),
                zip3(&s.phi, &u.phi),
                s.winding,
            )?))
        }
        (GeometryState::Flat(s), GeometryState::Flat(_)) => Ok(GeometryState::Flat(s.clone())),
        _ => Err(Error::Invariant("snapshots disagree on geometry class".into())),
    }
}
