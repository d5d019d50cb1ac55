//! Explicit RK4 stepping of the coupled flow with adaptive step control.
//!
//! The metric shrinks by `-2 S` and the map relaxes by its tension, so the
//! right-hand sides come straight from the curvature packet:
//! base factor `a' = -a S_base`, fiber radius `w' = -w Ric_fiber`,
//! map `phi' = tension`, and round-sphere scale `c' = -2 S_base c`.

use serde::{Deserialize, Serialize};

use super::schedule::CouplingSchedule;
use super::trajectory::FlowTrajectory;
use crate::error::{Error, Result};
use crate::geometry::{GeometryState, HomogeneousState, WarpedState};

/// Snapshot curvature trigger: a snapshot is taken every time `sup |Rm|`
/// grows by this factor, about 13 snapshots per curvature decade.
const RM_SNAPSHOT_FACTOR: f64 = 1.189_207_115_002_721; // 2^(1/4)

/// Halvings per step beyond which the state counts as pinned at the profile
/// floor. Stability retries never need anywhere near this many (each halving
/// costs a factor 2 in dt); only a profile wedged against the floor does.
const FLOOR_HALVINGS: u32 = 30;

/// Step control and termination thresholds for [`run_flow`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Target end time (the run may stop earlier at a singularity).
    pub t_end: f64,
    /// Hard step budget.
    pub max_steps: u64,
    /// Parabolic step fraction for warped grids: `dt <= cfl (min a dx)^2 / 2`.
    pub cfl: f64,
    /// Curvature step cap: `dt <= cap / sup |Rm|`.
    pub curvature_dt_cap: f64,
    /// Base snapshot cadence in flow time (also an upper bound on dt).
    pub snapshot_dt: f64,
    /// Hard upper bound on any single step, independent of the cadence.
    pub dt_max: f64,
    /// Stop once `sup |Rm|` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    /// Floor for the metric profiles; a trial step below it is retried with
    /// half the step, and the run stops once retries are exhausted.
    pub w_floor: f64,
    /// Retry budget per step.
    pub max_retries: u32,
    /// Relative and absolute slack allowed in the `min Sh` monotonicity
    /// monitor before a step counts as a violation.
    pub sh_tol_rel: f64,
    pub sh_tol_abs: f64,
}

impl FlowOptions {
    /// Defaults with the given end time.
    pub fn to(t_end: f64) -> Self {
        FlowOptions {
            t_end,
            max_steps: 2_000_000,
            cfl: 0.25,
            curvature_dt_cap: 0.05,
            snapshot_dt: 0.01,
            dt_max: f64::INFINITY,
            blowup_factor: 1e10,
            w_floor: 1e-8,
            max_retries: 60,
            sh_tol_rel: 1e-8,
            sh_tol_abs: 1e-10,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive and finite, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.curvature_dt_cap > 0.0) {
            return bad("curvature_dt_cap must be positive".into());
        }
        if !(self.snapshot_dt > 0.0) {
            return bad("snapshot_dt must be positive".into());
        }
        if !(self.dt_max > 0.0) {
            return bad("dt_max must be positive".into());
        }
        if !(self.blowup_factor > 1.0) {
            return bad("blowup_factor must exceed 1".into());
        }
        if !(self.w_floor > 0.0) {
            return bad("w_floor must be positive".into());
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowStatus {
    /// Reached `t_end`.
    ReachedEnd,
    /// `sup |Rm|` exceeded the blow-up factor: singularity reached.
    CurvatureBlowup,
    /// A profile fell to the floor and step halving could not recover.
    WidthFloor,
    /// Step budget exhausted.
    StepLimit,
}

/// Deterministic work counters (no wall-clock anywhere, so reruns of the same
/// scenario emit identical manifests).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub steps: u64,
    pub rhs_evals: u64,
    pub retries: u64,
    pub snapshots: u64,
}

/// One RK4 step of the round-sphere scale; exact whenever the coupling is at
/// most cubic in `t` because the right-hand side depends on time alone.
pub fn step_homogeneous(
    state: &HomogeneousState,
    schedule: &CouplingSchedule,
    t: f64,
    dt: f64,
) -> HomogeneousState {
    let rate = |tt: f64| {
        let p = HomogeneousState { c: 1.0, ..state.clone() }.curvature(schedule.alpha(tt));
        // c' = -2 s_base(c) c and s_base scales as 1/c, so the product is
        // c-independent; evaluate at c = 1.
        -2.0 * p.s_base[0]
    };
    let k1 = rate(t);
    let k2 = rate(t + 0.5 * dt);
    let k3 = k2;
    let k4 = rate(t + dt);
    let c = state.c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    HomogeneousState { c, ..state.clone() }
}

struct WarpedRhs {
    da: Vec<f64>,
    dw: Vec<f64>,
    dphi: Vec<f64>,
}

fn warped_rhs(state: &WarpedState, alpha: f64) -> Result<WarpedRhs> {
    if state.a.iter().chain(&state.w).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Precondition("profiles left the positive cone".into()));
    }
    let p = state.curvature(alpha);
    let j = state.grid_len();
    let mut r = WarpedRhs {
        da: Vec::with_capacity(j),
        dw: Vec::with_capacity(j),
        dphi: Vec::with_capacity(j),
    };
    for i in 0..j {
        r.da.push(-state.a[i] * p.s_base[i]);
        r.dw.push(-state.w[i] * p.ric_fiber[i]);
        r.dphi.push(p.tension[i]);
    }
    Ok(r)
}

fn warped_advance(state: &WarpedState, r: &WarpedRhs, dt: f64) -> WarpedState {
    let add = |f: &[f64], d: &[f64]| -> Vec<f64> {
        f.iter().zip(d).map(|(&x, &dx)| x + dt * dx).collect()
    };
    WarpedState {
        n: state.n,
        a: add(&state.a, &r.da),
        w: add(&state.w, &r.dw),
        phi: add(&state.phi, &r.dphi),
        winding: state.winding,
    }
}

/// One RK4 step of a warped state. Errors when an intermediate stage leaves
/// the positive cone (the caller halves the step and retries).
pub fn step_warped(
    state: &WarpedState,
    schedule: &CouplingSchedule,
    t: f64,
    dt: f64,
) -> Result<WarpedState> {
    let k1 = warped_rhs(state, schedule.alpha(t))?;
    let s2 = warped_advance(state, &k1, 0.5 * dt);
    let k2 = warped_rhs(&s2, schedule.alpha(t + 0.5 * dt))?;
    let s3 = warped_advance(state, &k2, 0.5 * dt);
    let k3 = warped_rhs(&s3, schedule.alpha(t + 0.5 * dt))?;
    let s4 = warped_advance(state, &k3, dt);
    let k4 = warped_rhs(&s4, schedule.alpha(t + dt))?;
    let j = state.grid_len();
    let combine = |f: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..j)
            .map(|i| f[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    Ok(WarpedState {
        n: state.n,
        a: combine(&state.a, &k1.da, &k2.da, &k3.da, &k4.da),
        w: combine(&state.w, &k1.dw, &k2.dw, &k3.dw, &k4.dw),
        phi: combine(&state.phi, &k1.dphi, &k2.dphi, &k3.dphi, &k4.dphi),
        winding: state.winding,
    })
}

fn step_state(
    state: &GeometryState,
    schedule: &CouplingSchedule,
    t: f64,
    dt: f64,
) -> Result<GeometryState> {
    Ok(match state {
        GeometryState::Homogeneous(s) => {
            GeometryState::Homogeneous(step_homogeneous(s, schedule, t, dt))
        }
        GeometryState::Warped(s) => GeometryState::Warped(step_warped(s, schedule, t, dt)?),
        GeometryState::Flat(s) => GeometryState::Flat(s.clone()),
    })
}

fn state_is_admissible(state: &GeometryState, floor: f64) -> bool {
    match state {
        // c is a squared length; the floor is a length scale
        GeometryState::Homogeneous(s) => s.c.is_finite() && s.c > floor * floor,
        GeometryState::Warped(s) => {
            s.a.iter().chain(&s.w).all(|v| v.is_finite() && *v > floor)
                && s.phi.iter().all(|v| v.is_finite())
        }
        GeometryState::Flat(_) => true,
    }
}

/// Step proposal before the end-time and cadence caps.
fn propose_dt(state: &GeometryState, sup_rm: f64, s_base_max: f64, opts: &FlowOptions) -> f64 {
    let curvature_cap =
        if sup_rm > 0.0 { opts.curvature_dt_cap / sup_rm } else { f64::INFINITY };
    let class_cap = match state {
        GeometryState::Homogeneous(_) => {
            // |c'/c| = 2 |s_base|: keep the relative change of c near 10%
            if s_base_max > 0.0 { 0.05 / s_base_max } else { f64::INFINITY }
        }
        GeometryState::Warped(s) => {
            let dx = s.dx();
            let min_a = s.a.iter().cloned().fold(f64::INFINITY, f64::min);
            opts.cfl * (min_a * dx) * (min_a * dx) / 2.0
        }
        GeometryState::Flat(_) => f64::INFINITY,
    };
    curvature_cap.min(class_cap).min(opts.snapshot_dt).min(opts.dt_max)
}

/// Integrates the flow from `initial` at `t = 0` until `opts.t_end`, a
/// singularity, or a termination condition. Snapshots are taken on the base
/// cadence and additionally every time `sup |Rm|` grows by 2^(1/4).
pub fn run_flow(
    initial: &GeometryState,
    schedule: &CouplingSchedule,
    opts: &FlowOptions,
) -> Result<FlowTrajectory> {
    opts.validate()?;
    let mut counters = WorkCounters::default();
    let mut t = 0.0;
    let mut state = initial.clone();
    if !state_is_admissible(&state, opts.w_floor) {
        return Err(Error::Precondition("initial state is already at the profile floor".into()));
    }
    let mut packet = state.curvature(schedule.alpha(t));
    let rm0 = packet.sup_rm();
    let rm_cap = if rm0 > 0.0 { opts.blowup_factor * rm0 } else { f64::INFINITY };
    let mut min_sh_prev = packet.min_sh();
    let mut min_sh_violations = 0usize;
    let mut worst_sh_drop = 0.0f64;

    let mut times = vec![t];
    let mut states = vec![state.clone()];
    counters.snapshots = 1;
    let mut next_snap_t = opts.snapshot_dt;
    let mut next_snap_rm = packet.sup_rm() * RM_SNAPSHOT_FACTOR;

    let mut status = FlowStatus::StepLimit;
    while counters.steps < opts.max_steps {
        if t >= opts.t_end - 1e-15 {
            status = FlowStatus::ReachedEnd;
            break;
        }
        let s_base_max = packet.s_base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut dt = propose_dt(&state, packet.sup_rm(), s_base_max, opts).min(opts.t_end - t);

        // trial step with halving on floor hits / non-finite values
        let mut accepted = None;
        let mut halvings = 0u32;
        for _ in 0..=opts.max_retries {
            counters.rhs_evals += 4;
            match step_state(&state, schedule, t, dt) {
                Ok(trial) if state_is_admissible(&trial, opts.w_floor) => {
                    accepted = Some(trial);
                    break;
                }
                _ => {
                    counters.retries += 1;
                    halvings += 1;
                    dt *= 0.5;
                }
            }
        }
        // a step that survives only after extreme halving is wedged against
        // the floor; accepting it would stall the run in ever-smaller steps
        if halvings >= FLOOR_HALVINGS || accepted.is_none() {
            status = FlowStatus::WidthFloor;
            break;
        }
        let trial = accepted.unwrap();

        t += dt;
        state = trial;
        packet = state.curvature(schedule.alpha(t));
        counters.steps += 1;

        let min_sh = packet.min_sh();
        let tol = opts.sh_tol_rel * min_sh_prev.abs() + opts.sh_tol_abs;
        if min_sh < min_sh_prev - tol {
            min_sh_violations += 1;
            worst_sh_drop = worst_sh_drop.max(min_sh_prev - min_sh);
        }
        min_sh_prev = min_sh;

        let sup_rm = packet.sup_rm();
        if t >= next_snap_t - 1e-12 || sup_rm >= next_snap_rm {
            times.push(t);
            states.push(state.clone());
            counters.snapshots += 1;
            next_snap_t = t + opts.snapshot_dt;
            next_snap_rm = sup_rm * RM_SNAPSHOT_FACTOR;
        }
        if sup_rm >= rm_cap {
            status = FlowStatus::CurvatureBlowup;
            break;
        }
    }

    if *times.last().unwrap() < t - 1e-15 {
        times.push(t);
        states.push(state.clone());
        counters.snapshots += 1;
    }
    Ok(FlowTrajectory {
        schedule: schedule.clone(),
        times,
        states,
        status,
        t_final: t,
        counters,
        min_sh_violations,
        worst_sh_drop,
        analytic: None,
    })
}

/// Fixed-step RK4 from `t0` to `t1`; no adaptivity, no snapshots. Used by the
/// convergence-order measurements, where the step must be controlled exactly.
pub fn run_fixed(
    initial: &GeometryState,
    schedule: &CouplingSchedule,
    t0: f64,
    t1: f64,
    steps: u64,
) -> Result<GeometryState> {
    if !(t1 > t0) || steps == 0 {
        return Err(Error::Domain("fixed run needs t1 > t0 and at least one step".into()));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut state = initial.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        state = step_state(&state, schedule, t, dt)?;
        if !state_is_admissible(&state, 0.0) {
            return Err(Error::Precondition(format!(
                "state left the admissible cone at step {k} (t = {t})"
            )));
        }
    }
    Ok(state)
}
