//! Consistency monitors evaluated on trajectories: evolution-equation
//! residuals, the volume identity, distance distortion bounds, and the
//! singular-time estimate.

use super::trajectory::FlowTrajectory;
use crate::error::{Error, Result};
use crate::geometry::{
    distance_flat, distance_homogeneous, distance_warped, CurvaturePacket, GeometryState,
    MapKind, WarpedPoint,
};
use crate::util::{d_dt_3pt, linear_fit};

/// Max-norm residuals of the two evolution identities at a snapshot triple:
///
/// * metric: `d/dt Sh - Lap Sh - 2 |S|^2 - 2 alpha (tension)^2 + alpha' |grad phi|^2`
/// * map energy: `d/dt e - Lap e + 2 |Hess phi|^2 + 2 alpha |grad phi x grad phi|^2
///   - 2 (e^2 - |grad phi x grad phi|^2)_target`
///
/// where the target term is present only for sphere-valued eigenmaps (unit
/// target curvature) and `e = |grad phi|^2`.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionResidual {
    pub metric: f64,
    pub map_energy: f64,
}

/// Time derivative is the second-order stencil on snapshots i-1, i, i+1.
pub fn evolution_residual(tr: &FlowTrajectory, i: usize) -> Result<EvolutionResidual> {
    if i == 0 || i + 1 >= tr.snapshot_count() {
        return Err(Error::Domain(format!(
            "residual needs an interior snapshot index, got {i} of {}",
            tr.snapshot_count()
        )));
    }
    let (tm, t0, tp) = (tr.times[i - 1], tr.times[i], tr.times[i + 1]);
    let (am, a0, ap) = (tr.alpha(tm), tr.alpha(t0), tr.alpha(tp));
    let adot = tr.schedule.alpha_dot(t0);
    let pm = tr.states[i - 1].curvature(am);
    let p0 = tr.states[i].curvature(a0);
    let pp = tr.states[i + 1].curvature(ap);
    if pm.sh.len() != p0.sh.len() || pp.sh.len() != p0.sh.len() {
        return Err(Error::Invariant("snapshot grids disagree".into()));
    }

    // outer = |grad phi x grad phi|^2 and the unit-curvature target term,
    // both shaped by the ansatz
    let (outer_sq, target): (Vec<f64>, Vec<f64>) = match &tr.states[i] {
        GeometryState::Homogeneous(s) => {
            let e = p0.grad_phi_sq[0];
            let nf = s.n as f64;
            match s.map {
                MapKind::Constant => (vec![0.0], vec![0.0]),
                // pullback is g_S = (e/n) g: |.|^2 = e^2/n, target curvature 1
                MapKind::IdentityEigenmap => {
                    (vec![e * e / nf], vec![e * e - e * e / nf])
                }
            }
        }
        GeometryState::Warped(_) => {
            // rank-one pullback, flat circle target
            (p0.grad_phi_sq.iter().map(|e| e * e).collect(),
             vec![0.0; p0.grad_phi_sq.len()])
        }
        GeometryState::Flat(_) => {
            (vec![0.0; p0.grad_phi_sq.len()], vec![0.0; p0.grad_phi_sq.len()])
        }
    };

    let (lap_sh, lap_e): (Vec<f64>, Vec<f64>) = match &tr.states[i] {
        GeometryState::Warped(s) => (s.laplacian(&p0.sh), s.laplacian(&p0.grad_phi_sq)),
        _ => (vec![0.0; p0.sh.len()], vec![0.0; p0.sh.len()]),
    };

    let mut metric = 0.0f64;
    let mut map_energy = 0.0f64;
    for j in 0..p0.sh.len() {
        let dsh = d_dt_3pt(tm, t0, tp, pm.sh[j], p0.sh[j], pp.sh[j]);
        let r1 = dsh - lap_sh[j] - 2.0 * p0.s_norm_sq(j) - 2.0 * a0 * p0.tension[j].powi(2)
            + adot * p0.grad_phi_sq[j];
        metric = metric.max(r1.abs());

        let de = d_dt_3pt(tm, t0, tp, pm.grad_phi_sq[j], p0.grad_phi_sq[j], pp.grad_phi_sq[j]);
        let r2 = de - lap_e[j] + 2.0 * p0.hess_phi_norm[j].powi(2) + 2.0 * a0 * outer_sq[j]
            - 2.0 * target[j];
        map_energy = map_energy.max(r2.abs());
    }
    Ok(EvolutionResidual { metric, map_energy })
}

/// `integral of Sh dvol` over the slice.
fn weighted_sh_integral(state: &GeometryState, packet: &CurvaturePacket) -> f64 {
    match state {
        GeometryState::Homogeneous(s) => packet.sh[0] * s.total_volume(),
        GeometryState::Warped(s) => {
            let dx = s.dx();
            packet
                .sh
                .iter()
                .enumerate()
                .map(|(j, sh)| sh * s.volume_weight(j) * dx)
                .sum()
        }
        GeometryState::Flat(_) => 0.0,
    }
}

/// Residual of `d/dt Vol = - integral of Sh dvol` at snapshot `i`,
/// normalized by `max(1, |integral|)`.
pub fn volume_identity_residual(tr: &FlowTrajectory, i: usize) -> Result<f64> {
    if i == 0 || i + 1 >= tr.snapshot_count() {
        return Err(Error::Domain("volume residual needs an interior snapshot index".into()));
    }
    let (tm, t0, tp) = (tr.times[i - 1], tr.times[i], tr.times[i + 1]);
    let dv = d_dt_3pt(
        tm,
        t0,
        tp,
        tr.states[i - 1].total_volume(),
        tr.states[i].total_volume(),
        tr.states[i + 1].total_volume(),
    );
    let p0 = tr.states[i].curvature(tr.alpha(t0));
    let sh_int = weighted_sh_integral(&tr.states[i], &p0);
    Ok((dv + sh_int).abs() / sh_int.abs().max(1.0))
}

/// Singular-time estimate from the curvature history.
#[derive(Debug, Clone, Copy)]
pub struct SingularTimeEstimate {
    pub t_sing: f64,
    /// RMS residual of the line fit of `1 / sup |Rm|` against `t`.
    pub fit_rms: f64,
    pub samples_used: usize,
}

/// Fits `1 / sup |Rm|` linearly in `t` over the final curvature decade and
/// extrapolates to zero. Exact whenever `sup |Rm|` blows up like
/// `const / (T - t)`, which covers every shrinking closed-form family here.
pub fn estimate_singular_time(series: &[(f64, f64)]) -> Result<SingularTimeEstimate> {
    let rm_max = series.iter().map(|&(_, rm)| rm).fold(0.0f64, f64::max);
    if !(rm_max > 0.0) {
        return Err(Error::Precondition("curvature history is empty or zero".into()));
    }
    let kept: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(_, rm)| rm >= 0.1 * rm_max)
        .map(|&(t, rm)| (t, 1.0 / rm))
        .collect();
    if kept.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 samples in the final curvature decade, got {}",
            kept.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
    let (intercept, slope, rms) = linear_fit(&xs, &ys);
    if slope >= 0.0 {
        return Err(Error::Precondition(
            "curvature is not blowing up: inverse curvature does not decrease".into(),
        ));
    }
    let t_sing = -intercept / slope;
    let t_last = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !t_sing.is_finite() || t_sing < t_last - 1e-9 {
        return Err(Error::Precondition(format!(
            "singular-time extrapolation landed at {t_sing}, before the last sample {t_last}"
        )));
    }
    Ok(SingularTimeEstimate { t_sing, fit_rms: rms, samples_used: kept.len() })
}

/// A marked point of a slice, for distance monitoring.
#[derive(Debug, Clone)]
pub enum SlicePoint {
    /// Unit vector in R^(n+1) on a homogeneous slice.
    Sphere(Vec<f64>),
    /// Grid column and fiber position on a warped slice.
    Warped(WarpedPoint),
    /// Radial chart coordinate on a flat slice.
    Line(f64),
}

fn slice_distance(
    state: &GeometryState,
    p: &SlicePoint,
    q: &SlicePoint,
    fiber_steps: usize,
) -> Result<f64> {
    match (state, p, q) {
        (GeometryState::Homogeneous(s), SlicePoint::Sphere(a), SlicePoint::Sphere(b)) => {
            distance_homogeneous(s, a, b)
        }
        (GeometryState::Warped(s), SlicePoint::Warped(a), SlicePoint::Warped(b)) => {
            distance_warped(s, a, b, fiber_steps)
        }
        (GeometryState::Flat(_), SlicePoint::Line(a), SlicePoint::Line(b)) => {
            Ok(distance_flat(*a, *b))
        }
        _ => Err(Error::Domain("point kind does not match the geometry class".into())),
    }
}

/// Distance distortion between two times against the eigenvalue bounds of
/// `S` and the curvature-based lower bound on the contraction rate.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub d0: f64,
    pub d1: f64,
    /// `d0 * exp(-K_max (t1 - t0))` with `K_max` the largest eigenvalue of
    /// `S` seen in the window; `d1` must not fall below it.
    pub lower_bound: f64,
    /// `d0 * exp(-K_min (t1 - t0))`; `d1` must not exceed it.
    pub upper_bound: f64,
    /// Curvature lower bound on `d/dt d`: `-2((2/3) K r0 + (n-1)/r0)`.
    pub rate_bound: f64,
    pub observed_rate: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub rate_ok: bool,
}

pub fn distortion_monitor(
    tr: &FlowTrajectory,
    t0: f64,
    t1: f64,
    p: &SlicePoint,
    q: &SlicePoint,
    fiber_steps: usize,
) -> Result<DistortionReport> {
    if !(t1 > t0) {
        return Err(Error::Domain("distortion window needs t1 > t0".into()));
    }
    let s0 = tr.state_at(t0)?;
    let s1 = tr.state_at(t1)?;
    let d0 = slice_distance(&s0, p, q, fiber_steps)?;
    let d1 = slice_distance(&s1, p, q, fiber_steps)?;
    if d0 <= 0.0 {
        return Err(Error::Domain("distortion monitor needs distinct points".into()));
    }

    // eigenvalue ranges of S and Ric over the window: endpoints plus every
    // stored snapshot strictly inside
    let mut sample_times = vec![t0, t1];
    for &t in &tr.times {
        if t > t0 && t < t1 {
            sample_times.push(t);
        }
    }
    let mut k_max = f64::NEG_INFINITY;
    let mut k_min = f64::INFINITY;
    let mut ric_max = f64::NEG_INFINITY;
    for &t in &sample_times {
        let pkt = tr.state_at(t)?.curvature(tr.alpha(t));
        k_max = k_max.max(pkt.s_max_eigen());
        k_min = k_min.min(pkt.s_min_eigen());
        ric_max = ric_max.max(pkt.ric_max_eigen());
    }

    let dt = t1 - t0;
    let lower_bound = d0 * (-k_max * dt).exp();
    let upper_bound = d0 * (-k_min * dt).exp();
    let nf = s0.dimension() as f64;
    let r0 = 0.5 * d0.min(d1);
    let k_pos = ric_max.max(0.0);
    let rate_bound = -2.0 * ((2.0 / 3.0) * k_pos * r0 + (nf - 1.0) / r0);
    let observed_rate = (d1 - d0) / dt;
    let slack = 1e-9;
    Ok(DistortionReport {
        d0,
        d1,
        lower_bound,
        upper_bound,
        rate_bound,
        observed_rate,
        lower_ok: d1 >= lower_bound * (1.0 - slack),
        upper_ok: d1 <= upper_bound * (1.0 + slack),
        rate_ok: observed_rate >= rate_bound - slack * rate_bound.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::schedule::CouplingSchedule;
    use crate::flow::stepper::{run_flow, FlowOptions};
    use crate::flow::trajectory::AnalyticFamily;
    use crate::geometry::HomogeneousState;
    use approx::assert_relative_eq;

    fn analytic_triple(
        fam: AnalyticFamily,
        sched: CouplingSchedule,
        t: f64,
        h: f64,
    ) -> FlowTrajectory {
        FlowTrajectory::from_analytic(fam, sched, vec![t - h, t, t + h]).unwrap()
    }

    #[test]
    fn coupled_sphere_satisfies_both_evolution_identities() {
        let sched = CouplingSchedule::constant(0.5).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true };
        let tr = analytic_triple(fam, sched, 0.4, 1e-3);
        let r = evolution_residual(&tr, 1).unwrap();
        assert!(r.metric < 1e-4, "metric residual {}", r.metric);
        assert!(r.map_energy < 1e-4, "map residual {}", r.map_energy);
    }

    #[test]
    fn decaying_coupling_enters_through_the_alpha_rate_term() {
        // alpha(t) = 1 - t gives c(t) = 1 - t^2; without the alpha' term the
        // metric residual at t = 0.5 would be ~2.7, with it only stencil error
        let sched = CouplingSchedule::piecewise_linear(vec![0.0, 0.9], vec![1.0, 0.1]).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true };
        let tr = analytic_triple(fam, sched, 0.5, 1e-3);
        let r = evolution_residual(&tr, 1).unwrap();
        assert!(r.metric < 1e-4, "metric residual {}", r.metric);
        assert!(r.map_energy < 1e-4, "map residual {}", r.map_energy);
    }

    #[test]
    fn shrinking_cylinder_metric_identity_holds() {
        let sched = CouplingSchedule::constant(1.0).unwrap();
        let fam = AnalyticFamily::Cylinder { n: 3, grid: 64, w0: 1.0 };
        let tr = analytic_triple(fam, sched, 0.2, 1e-4);
        let r = evolution_residual(&tr, 1).unwrap();
        assert!(r.metric < 1e-5, "metric residual {}", r.metric);
        assert!(r.map_energy < 1e-12, "map residual {}", r.map_energy);
    }

    #[test]
    fn numeric_warped_run_keeps_residuals_small() {
        let sched = CouplingSchedule::constant(1.0).unwrap();
        let j = 128;
        let mut w = Vec::with_capacity(j);
        for i in 0..j {
            let x = 2.0 * std::f64::consts::PI * i as f64 / j as f64;
            w.push(1.0 + 0.1 * x.cos());
        }
        let init = GeometryState::Warped(
            crate::geometry::WarpedState::new(3, vec![1.0; j], w, vec![0.0; j], 0).unwrap(),
        );
        let mut opts = FlowOptions::to(0.05);
        opts.snapshot_dt = 1e-3;
        let tr = run_flow(&init, &sched, &opts).unwrap();
        let mid = tr.snapshot_count() / 2;
        let r = evolution_residual(&tr, mid).unwrap();
        // snapshot spacing 1e-3 and J = 128: stencil + grid error well under 1e-2
        assert!(r.metric < 1e-2, "metric residual {}", r.metric);
    }

    #[test]
    fn volume_identity_is_exact_on_closed_forms() {
        // the stencil is exact on these families (volume linear in t), so the
        // residual is pure float cancellation, ~eps * V / (2 h |sh integral|)
        let sched = CouplingSchedule::constant(0.5).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false };
        let tr = analytic_triple(fam, sched, 0.3, 1e-3);
        assert!(volume_identity_residual(&tr, 1).unwrap() < 1e-10);

        let sched = CouplingSchedule::constant(1.0).unwrap();
        let fam = AnalyticFamily::Cylinder { n: 3, grid: 64, w0: 1.0 };
        let tr = analytic_triple(fam, sched, 0.2, 1e-3);
        assert!(volume_identity_residual(&tr, 1).unwrap() < 1e-10);
    }

    #[test]
    fn singular_time_is_exact_for_the_shrinking_sphere() {
        let sched = CouplingSchedule::constant(0.5).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false };
        let times: Vec<f64> = (0..10).map(|k| 0.5 + 0.05 * k as f64).collect();
        let tr = FlowTrajectory::from_analytic(fam, sched, times).unwrap();
        let est = estimate_singular_time(&tr.sup_rm_series()).unwrap();
        assert_relative_eq!(est.t_sing, 1.0, max_relative = 1e-9);
        assert!(est.fit_rms < 1e-12);
    }

    #[test]
    fn singular_time_rejects_static_histories() {
        let series: Vec<(f64, f64)> = (0..10).map(|k| (0.1 * k as f64, 2.0)).collect();
        assert!(estimate_singular_time(&series).is_err());
    }

    #[test]
    fn sphere_distortion_respects_both_eigenvalue_bounds() {
        let sched = CouplingSchedule::constant(0.5).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false };
        let times: Vec<f64> = (0..11).map(|k| 0.05 * k as f64).collect();
        let tr = FlowTrajectory::from_analytic(fam, sched, times).unwrap();
        let p = SlicePoint::Sphere(vec![0.0, 0.0, 1.0]);
        let q = SlicePoint::Sphere(vec![0.0, 0.0, -1.0]);
        let rep = distortion_monitor(&tr, 0.0, 0.5, &p, &q, 8).unwrap();
        assert!(rep.lower_ok && rep.upper_ok && rep.rate_ok, "{rep:?}");
        assert_relative_eq!(rep.d1 / rep.d0, 0.5f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn distortion_monitor_rejects_coincident_points() {
        let sched = CouplingSchedule::constant(0.5).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false };
        let tr = FlowTrajectory::from_analytic(fam, sched, vec![0.0, 0.5]).unwrap();
        let p = SlicePoint::Sphere(vec![0.0, 0.0, 1.0]);
        assert!(distortion_monitor(&tr, 0.0, 0.5, &p, &p.clone(), 8).is_err());
    }

    #[test]
    fn homogeneous_sanity_for_schedule_alpha_consistency() {
        // run_flow and the analytic family agree on the coupled sphere
        let sched = CouplingSchedule::constant(0.5).unwrap();
        let init = GeometryState::Homogeneous(
            HomogeneousState::new(2, 1.0, crate::geometry::MapKind::IdentityEigenmap).unwrap(),
        );
        let tr = run_flow(&init, &sched, &FlowOptions::to(0.5)).unwrap();
        let fam = AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true };
        match (tr.states.last().unwrap(), fam.state_at(&sched, 0.5).unwrap()) {
            (GeometryState::Homogeneous(a), GeometryState::Homogeneous(b)) => {
                assert_relative_eq!(a.c, b.c, max_relative = 1e-12)
            }
            _ => panic!("wrong class"),
        }
    }
}
