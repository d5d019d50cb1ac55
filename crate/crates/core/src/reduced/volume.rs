//! Reduced volume, its monotonicity monitor, and the combined report.

use super::singular::{warped_l_at, warped_l_columns};
use super::{
    chart_displacement, homogeneous_integrals, minimize_l, w_residual, SpaceTimeCurve,
};
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::geometry::GeometryState;
use crate::util::{gauss_legendre, reg_upper_gamma, unit_sphere_area};

/// Base event of a reduced quantity: a regular space-time point, or the
/// singular time approached through truncated backward integration. Both
/// carry the base time; the distinction records intent and controls which
/// by-products (minimizer curves, defect series) a report can offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedBase {
    Regular(f64),
    Singular(f64),
}

impl ReducedBase {
    pub fn time(&self) -> f64 {
        match self {
            ReducedBase::Regular(t) | ReducedBase::Singular(t) => *t,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, ReducedBase::Singular(_))
    }
}

/// One point of a reduced-volume series.
#[derive(Debug, Clone, Copy)]
pub struct ReducedVolumeSample {
    pub t_bar: f64,
    pub value: f64,
}

/// Verdict of [`monotonicity_monitor`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityReport {
    pub samples: usize,
    /// Largest relative drop between consecutive samples (positive = drop).
    pub worst_drop: f64,
    pub max_value: f64,
    pub monotone_ok: bool,
    pub within_upper_bound: bool,
    pub all_positive: bool,
    pub pass: bool,
}

/// Reduced volume based at `base` over the slice at `t_bar`.
///
/// The integrand weight is `(4 pi tau)^(-n/2) e^(-l)` with
/// `tau = base time - t_bar`; the spatial integral runs over the whole slice
/// (closed classes) or the chart window plus the closed-form tail (flat
/// charts, which require the base on the axis).
pub fn reduced_volume(
    tr: &FlowTrajectory,
    base: ReducedBase,
    p: f64,
    t_bar: f64,
) -> Result<f64> {
    let t0 = base.time();
    let tau = t0 - t_bar;
    if !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "slice time {t_bar} must precede the base time {t0}"
        )));
    }
    let norm = 2.0 * tau.sqrt();
    let state = tr.state_at(t_bar)?;
    let n = state.dimension();
    let nf = n as f64;
    let prefactor = (4.0 * std::f64::consts::PI * tau).powf(-nf / 2.0);

    match &state {
        GeometryState::Homogeneous(s) => {
            let (i1, i2) = homogeneous_integrals(tr, t0, t_bar)?;
            let (nodes, weights) = gauss_legendre(128);
            let (mid, half) = (0.5 * std::f64::consts::PI, 0.5 * std::f64::consts::PI);
            let mut integral = 0.0;
            for (x, w) in nodes.iter().zip(&weights) {
                let theta = mid + half * x;
                let l = (theta * theta / i1 + i2) / norm;
                integral += w * half * (-l).exp() * theta.sin().powi(n as i32 - 1);
            }
            Ok(prefactor
                * s.c.powf(nf / 2.0)
                * unit_sphere_area(n - 1)
                * integral)
        }
        GeometryState::Flat(s) => {
            if p.abs() > 1e-9 {
                return Err(Error::Domain(
                    "flat reduced volume needs the base on the chart axis".into(),
                ));
            }
            let (i1, i2) = homogeneous_integrals(tr, t0, t_bar)?;
            let (nodes, weights) = gauss_legendre(64);
            let (mid, half) = (0.5 * s.r_max, 0.5 * s.r_max);
            let mut window = 0.0;
            for (x, w) in nodes.iter().zip(&weights) {
                let r = mid + half * x;
                let l = (r * r / i1 + i2) / norm;
                window += w * half * (-l).exp() * r.powi(n as i32 - 1);
            }
            window *= prefactor * unit_sphere_area(n - 1);
            // closed-form continuation of l = r^2/(i1 norm) + i2/norm past
            // the window edge
            let beta = 1.0 / (i1 * norm);
            let tail = (4.0 * tau * beta).powf(-nf / 2.0)
                * (-i2 / norm).exp()
                * reg_upper_gamma(nf / 2.0, beta * s.r_max * s.r_max);
            Ok(window + tail)
        }
        GeometryState::Warped(s) => {
            let ls = warped_l_columns(tr, t0, t_bar, p)?;
            let dx = s.dx();
            let sum: f64 = ls
                .iter()
                .enumerate()
                .map(|(j, l)| (-l).exp() * s.volume_weight(j) * dx)
                .sum();
            Ok(prefactor * sum)
        }
    }
}

/// Checks a reduced-volume series for the expected monotone behavior:
/// non-decreasing in slice time within a relative tolerance of `1e-3`, and
/// never above `1 + 1e-3`.
pub fn monotonicity_monitor(series: &[ReducedVolumeSample]) -> Result<MonotonicityReport> {
    if series.len() < 3 {
        return Err(Error::Precondition(format!(
            "monotonicity needs at least 3 samples, got {}",
            series.len()
        )));
    }
    if series.windows(2).any(|w| w[1].t_bar <= w[0].t_bar) {
        return Err(Error::Domain("volume samples must have increasing times".into()));
    }
    let mut worst_drop = f64::NEG_INFINITY;
    for w in series.windows(2) {
        worst_drop = worst_drop.max((w[0].value - w[1].value) / w[0].value);
    }
    let max_value = series.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.value));
    let all_positive = series.iter().all(|s| s.value > 0.0);
    let monotone_ok = worst_drop <= 1e-3;
    let within_upper_bound = max_value <= 1.0 + 1e-3;
    Ok(MonotonicityReport {
        samples: series.len(),
        worst_drop,
        max_value,
        monotone_ok,
        within_upper_bound,
        all_positive,
        pass: monotone_ok && within_upper_bound && all_positive,
    })
}

/// Reduced-geometry survey from one base: length samples, volume series,
/// adjoint-defect series, and (for regular bases) the minimizing curves.
#[derive(Debug, Clone)]
pub struct ReducedGeometryReport {
    pub based_at: ReducedBase,
    pub base_point: f64,
    pub points: Vec<f64>,
    pub times: Vec<f64>,
    /// `(q, t_bar, l)` for every probe pair, times outer, points inner.
    pub l_samples: Vec<(f64, f64, f64)>,
    /// Length values aligned with `l_samples`; always `l * 2 sqrt(tau)`.
    pub big_l_values: Vec<f64>,
    pub v_series: Vec<ReducedVolumeSample>,
    /// `(t_bar, defect)` where the three-slice stack fits the stored window.
    pub w_residual_series: Vec<(f64, f64)>,
    /// Direct minimizer tracks, only for regular bases, aligned with
    /// `l_samples`.
    pub minimizer_curves: Vec<SpaceTimeCurve>,
    pub monotonicity: MonotonicityReport,
}

/// Builds a [`ReducedGeometryReport`] over the probe grid `points x times`.
///
/// `w_dt` is the half-width of the time stack behind the defect series;
/// probe times whose stack leaves the stored window are skipped. On
/// homogeneous backgrounds the defect needs the spatially constant limit
/// field, so its series is only emitted for singular bases there.
pub fn reduce_report(
    tr: &FlowTrajectory,
    base: ReducedBase,
    p: f64,
    points: &[f64],
    times: &[f64],
    w_dt: f64,
) -> Result<ReducedGeometryReport> {
    if times.len() < 3 {
        return Err(Error::Precondition(format!(
            "the volume series needs at least 3 probe times, got {}",
            times.len()
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("probe times must be strictly increasing".into()));
    }
    if points.is_empty() {
        return Err(Error::Domain("at least one probe point is needed".into()));
    }
    if !(w_dt > 0.0) {
        return Err(Error::Domain("the defect stack width must be positive".into()));
    }
    let t0 = base.time();
    if *times.last().unwrap() >= t0 {
        return Err(Error::Domain(format!(
            "probe time {} does not precede the base {t0}",
            times.last().unwrap()
        )));
    }

    let warped = matches!(tr.states[0], GeometryState::Warped(_));

    let mut l_samples = Vec::with_capacity(points.len() * times.len());
    let mut big_l_values = Vec::with_capacity(points.len() * times.len());
    let mut minimizer_curves = Vec::new();
    for &t_bar in times {
        let norm = 2.0 * (t0 - t_bar).sqrt();
        let row = if warped {
            warped_l_at(tr, t0, t_bar, p, points)?
        } else {
            let (i1, i2) = homogeneous_integrals(tr, t0, t_bar)?;
            points
                .iter()
                .map(|&q| {
                    let d = chart_displacement(tr, p, q);
                    (d * d / i1 + i2) / norm
                })
                .collect()
        };
        for (&q, &l) in points.iter().zip(&row) {
            l_samples.push((q, t_bar, l));
            big_l_values.push(l * norm);
            if let ReducedBase::Regular(_) = base {
                minimizer_curves.push(minimize_l(tr, p, t0, q, t_bar)?.curve);
            }
        }
    }

    let mut v_series = Vec::with_capacity(times.len());
    for &t_bar in times {
        v_series.push(ReducedVolumeSample {
            t_bar,
            value: reduced_volume(tr, base, p, t_bar)?,
        });
    }

    let mut w_residual_series = Vec::new();
    for &t_bar in times {
        let field = match &tr.state_at(t_bar)? {
            GeometryState::Homogeneous(_) => {
                if !base.is_singular() {
                    continue;
                }
                let (_, i2) = homogeneous_integrals(tr, t0, t_bar)?;
                vec![i2 / (2.0 * (t0 - t_bar).sqrt())]
            }
            GeometryState::Flat(s) => {
                let (i1, i2) = homogeneous_integrals(tr, t0, t_bar)?;
                let norm = 2.0 * (t0 - t_bar).sqrt();
                s.radii().iter().map(|r| (r * r / i1 + i2) / norm).collect()
            }
            GeometryState::Warped(_) => warped_l_columns(tr, t0, t_bar, p)?,
        };
        if let Ok(defect) = w_residual(tr, &field, t_bar, w_dt, t0) {
            w_residual_series.push((t_bar, defect));
        }
    }

    let monotonicity = monotonicity_monitor(&v_series)?;
    Ok(ReducedGeometryReport {
        based_at: base,
        base_point: p,
        points: points.to_vec(),
        times: times.to_vec(),
        l_samples,
        big_l_values,
        v_series,
        w_residual_series,
        minimizer_curves,
        monotonicity,
    })
}
