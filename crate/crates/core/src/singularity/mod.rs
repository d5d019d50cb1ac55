//! Singularity classification for finite-time blow-ups.
//!
//! Given a trajectory that ended in curvature blow-up (or width collapse),
//! this module estimates the Type I constant `sup (T - t) |Rm|`, fits the
//! blow-up rate exponent, detects essential blow-up sequences, builds the
//! three nested singular-set masks, and runs the non-oscillation and
//! singular-volume monitors. Parabolic rescaling and the convergence
//! diagnostics live in the `rescale` submodule.

mod rescale;

pub use rescale::{
    convergence_diagnostic, rescale, ConvergenceReport, RescaledTrajectory, WINDOW_RADIUS,
};

use crate::error::{Error, Result};
use crate::flow::{estimate_singular_time, FlowStatus, FlowTrajectory, SingularTimeEstimate};
use crate::geometry::GeometryState;
use crate::util::linear_fit;

/// Default grid dilation radius (cells) used when testing whether a point
/// has a neighborhood of bounded curvature. One cell keeps the dilated set
/// within the expected agreement distance of the pointwise sets it must
/// match.
pub const SIGMA_RADIUS: usize = 1;
/// A point counts as singular when curvature near it exceeds this multiple
/// of the initial supremum.
pub const BOUND_CAP_FACTOR: f64 = 1e6;
/// Threshold for the special set, as a fraction of the Type I constant.
pub const SIGMA_S_FRACTION: f64 = 1e-2;
/// Argmax points this many cells apart (or closer) chain into one sequence.
pub const CHAIN_RADIUS: usize = 3;
/// A fitted blow-up exponent within this distance of 1 flags Type I.
pub const TYPE_A_TOLERANCE: f64 = 0.1;
/// Non-oscillation flags fire below this fraction of the Type I constant.
pub const NONOSC_FLAG_FRACTION: f64 = 1e-3;
/// Snapshots with `T - t` within this factor of the last stored gap form
/// the "final decade" used by the late-time fits and liminf estimates.
const LATE_DECADE: f64 = 10.0;

/// Power-law fit `sup |Rm| ~ C / (T - t)^r` over the final decade.
#[derive(Debug, Clone, Copy)]
pub struct TypeAFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual of the log-log line fit.
    pub rms: f64,
    pub is_type_i: bool,
    /// Fewer than 5 snapshots entered the fit.
    pub low_confidence: bool,
}

/// One argmax sample of an essential blow-up sequence.
#[derive(Debug, Clone, Copy)]
pub struct BlowupRecord {
    /// Grid column of the curvature argmax; `None` for homogeneous states,
    /// where every point is an argmax.
    pub x_index: Option<usize>,
    pub t: f64,
    /// `(T - t) |Rm|` at the argmax.
    pub rate: f64,
}

/// A chain of argmax records whose spatial positions stay within
/// [`CHAIN_RADIUS`] cells of each other from snapshot to snapshot.
#[derive(Debug, Clone)]
pub struct BlowupSequence {
    pub records: Vec<BlowupRecord>,
}

impl BlowupSequence {
    /// Spatial limit-point candidate: the last (latest-time) argmax.
    pub fn limit_index(&self) -> Option<usize> {
        self.records.last().and_then(|r| r.x_index)
    }

    pub fn max_rate(&self) -> f64 {
        self.records.iter().map(|r| r.rate).fold(0.0, f64::max)
    }
}

/// The nested singular-set masks, one flag per grid point.
#[derive(Debug, Clone)]
pub struct SingularMasks {
    /// Points with no neighborhood of bounded curvature.
    pub sigma: Vec<bool>,
    /// Limit points of essential blow-up sequences.
    pub sigma_i: Vec<bool>,
    /// Points where `liminf (T - t) |Sh|` stays above the special threshold.
    pub sigma_s: Vec<bool>,
    /// Curvature cap that defined `sigma`.
    pub cap: f64,
    /// Threshold that defined `sigma_s` (and the essential sequences).
    pub c_s: f64,
    pub inclusions_hold: bool,
}

/// Per-point `inf (T - t) |Rm|` over the final decade, on the essential set.
#[derive(Debug, Clone)]
pub struct NonoscillationReport {
    pub per_point: Vec<(usize, f64)>,
    /// Minimum over the essential set; the empirical non-oscillation constant.
    pub constant: Option<f64>,
    /// Points whose inf dropped below [`NONOSC_FLAG_FRACTION`] of the Type I
    /// constant, indicating oscillatory blow-up.
    pub flagged: Vec<usize>,
}

/// Full classification of a singular trajectory.
#[derive(Debug, Clone)]
pub struct SingularityReport {
    pub t_est: f64,
    pub type_i_constant: f64,
    pub type_a: TypeAFit,
    pub masks: SingularMasks,
    pub sequences: Vec<BlowupSequence>,
    pub nonoscillation: NonoscillationReport,
}

/// Outcome of analyzing a finished trajectory.
#[derive(Debug, Clone)]
pub enum SingularityOutcome {
    /// The run reached its configured end (or step limit) with bounded
    /// curvature; no singular time is certified.
    NonSingular { t_final: f64, sup_rm_final: f64 },
    Singular { estimate: SingularTimeEstimate, report: SingularityReport },
}

pub(crate) fn field_len(state: &GeometryState) -> usize {
    match state {
        GeometryState::Homogeneous(_) => 1,
        GeometryState::Warped(s) => s.grid_len(),
        GeometryState::Flat(s) => s.samples,
    }
}

/// Circular grid distance; the warped base circle is periodic and the other
/// classes never populate multi-point masks beyond trivial cases.
fn circ_dist(i: usize, j: usize, len: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(len - d)
}

fn dilate(mask: &[bool], radius: usize) -> Vec<bool> {
    let len = mask.len();
    (0..len)
        .map(|j| (0..len).any(|k| mask[k] && circ_dist(j, k, len) <= radius))
        .collect()
}

/// Indices of the stored snapshots inside the final decade before `t_sing`.
fn late_indices(tr: &FlowTrajectory, t_sing: f64) -> Result<Vec<usize>> {
    if tr.snapshot_count() < 2 {
        return Err(Error::Precondition(
            "singularity analysis needs at least two snapshots".into(),
        ));
    }
    let t_last = *tr.times.last().unwrap();
    if !(t_sing > t_last) {
        return Err(Error::Precondition(format!(
            "estimated singular time {t_sing} must lie beyond the last snapshot at {t_last}"
        )));
    }
    let cutoff = LATE_DECADE * (t_sing - t_last);
    Ok((0..tr.times.len()).filter(|&i| t_sing - tr.times[i] <= cutoff).collect())
}

/// Type I constant `max (T - t) sup |Rm|` over all stored data, plus the
/// power-law fit of the blow-up rate over the final decade.
pub fn type_i_constant(tr: &FlowTrajectory, t_sing: f64) -> Result<(f64, TypeAFit)> {
    let late = late_indices(tr, t_sing)?;
    let series = tr.sup_rm_series();
    let type_i = series
        .iter()
        .map(|&(t, rm)| (t_sing - t) * rm)
        .fold(0.0, f64::max);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &i in &late {
        let (t, rm) = series[i];
        if rm > 0.0 {
            xs.push((t_sing - t).ln());
            ys.push(rm.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::Domain(
            "too few positive-curvature snapshots in the final decade to fit a blow-up rate"
                .into(),
        ));
    }
    let (intercept, slope, rms) = linear_fit(&xs, &ys);
    let exponent = -slope;
    let fit = TypeAFit {
        exponent,
        amplitude: intercept.exp(),
        rms,
        is_type_i: (exponent - 1.0).abs() <= TYPE_A_TOLERANCE,
        low_confidence: xs.len() < 5,
    };
    Ok((type_i, fit))
}

/// Records, over the final decade, every curvature argmax whose rescaled
/// rate `(T - t) |Rm|` clears `c_threshold`, chained into sequences by
/// spatial proximity. Limit points of the chains are the Type I singular
/// point candidates.
pub fn detect_essential_blowup(
    tr: &FlowTrajectory,
    t_sing: f64,
    c_threshold: f64,
) -> Result<Vec<BlowupSequence>> {
    if !(c_threshold > 0.0) || !c_threshold.is_finite() {
        return Err(Error::Domain(format!(
            "essential blow-up threshold must be positive, got {c_threshold}"
        )));
    }
    let late = late_indices(tr, t_sing)?;
    let len = field_len(&tr.states[0]);
    let mut sequences: Vec<BlowupSequence> = Vec::new();
    for &i in &late {
        let (t, state) = tr.snapshot(i);
        let packet = state.curvature(tr.alpha(t));
        let mut jmax = 0;
        for (j, &v) in packet.rm_norm.iter().enumerate() {
            if v > packet.rm_norm[jmax] {
                jmax = j;
            }
        }
        let rate = (t_sing - t) * packet.rm_norm[jmax];
        if rate < c_threshold {
            continue;
        }
        let x_index = match state {
            GeometryState::Homogeneous(_) => None,
            _ => Some(jmax),
        };
        let rec = BlowupRecord { x_index, t, rate };
        let extends = sequences.last().is_some_and(|seq| {
            match (seq.records.last().unwrap().x_index, rec.x_index) {
                (None, None) => true,
                (Some(a), Some(b)) => circ_dist(a, b, len) <= CHAIN_RADIUS,
                _ => false,
            }
        });
        if extends {
            sequences.last_mut().unwrap().records.push(rec);
        } else {
            sequences.push(BlowupSequence { records: vec![rec] });
        }
    }
    Ok(sequences)
}

/// Builds the nested masks. The inclusions `sigma_s` ⊆ `sigma_i` ⊆ `sigma`
/// are enforced by intersecting each finer mask with the coarser one, then
/// re-verified.
pub fn classify_singular_sets(
    tr: &FlowTrajectory,
    t_sing: f64,
    type_i_c: f64,
    radius: usize,
) -> Result<SingularMasks> {
    let late = late_indices(tr, t_sing)?;
    let len = field_len(&tr.states[0]);

    let mut peak = vec![0.0f64; len];
    for i in 0..tr.snapshot_count() {
        let (t, state) = tr.snapshot(i);
        let packet = state.curvature(tr.alpha(t));
        for j in 0..len {
            peak[j] = peak[j].max(packet.rm_norm[j]);
        }
    }
    let cap = BOUND_CAP_FACTOR * tr.sup_rm_series()[0].1;
    let core: Vec<bool> = peak.iter().map(|&v| cap > 0.0 && v >= cap).collect();
    let sigma = dilate(&core, radius);

    // limit points of the essential sequences; neighbor columns of an
    // argmax are genuinely regular in the limit, so no dilation here
    let c_s = SIGMA_S_FRACTION * type_i_c;
    let sequences = detect_essential_blowup(tr, t_sing, c_s)?;
    let mut hits = vec![false; len];
    for seq in &sequences {
        for rec in &seq.records {
            hits[rec.x_index.unwrap_or(0)] = true;
        }
    }
    let sigma_i: Vec<bool> = hits.iter().zip(&sigma).map(|(&a, &b)| a && b).collect();

    let mut sh_low = vec![f64::INFINITY; len];
    for &i in &late {
        let (t, state) = tr.snapshot(i);
        let packet = state.curvature(tr.alpha(t));
        for j in 0..len {
            sh_low[j] = sh_low[j].min((t_sing - t) * packet.sh[j].abs());
        }
    }
    let sigma_s: Vec<bool> = sh_low
        .iter()
        .zip(&sigma_i)
        .map(|(&v, &inside)| inside && v >= c_s)
        .collect();

    let inclusions_hold = (0..len)
        .all(|j| (!sigma_s[j] || sigma_i[j]) && (!sigma_i[j] || sigma[j]));
    Ok(SingularMasks { sigma, sigma_i, sigma_s, cap, c_s, inclusions_hold })
}

/// Volume of the masked region at every stored snapshot.
pub fn singular_volume(tr: &FlowTrajectory, mask: &[bool]) -> Result<Vec<(f64, f64)>> {
    let len = field_len(&tr.states[0]);
    if mask.len() != len {
        return Err(Error::Domain(format!(
            "mask has {} entries but the grid has {len}",
            mask.len()
        )));
    }
    let mut series = Vec::with_capacity(tr.snapshot_count());
    for i in 0..tr.snapshot_count() {
        let (t, state) = tr.snapshot(i);
        let vol = match state {
            GeometryState::Homogeneous(s) => {
                if mask[0] {
                    s.total_volume()
                } else {
                    0.0
                }
            }
            GeometryState::Warped(s) => {
                let dx = s.dx();
                (0..len).filter(|&j| mask[j]).map(|j| s.volume_weight(j) * dx).sum()
            }
            GeometryState::Flat(s) => {
                let dr = s.dr();
                (0..len).filter(|&j| mask[j]).map(|j| s.shell_weight(j) * dr).sum()
            }
        };
        series.push((t, vol));
    }
    Ok(series)
}

/// For every point of the essential set, the inf of `(T - t) |Rm|` over the
/// final decade; blow-up at those points must not oscillate below the Type I
/// rate.
pub fn nonoscillation_check(
    tr: &FlowTrajectory,
    t_sing: f64,
    sigma_i: &[bool],
    type_i_c: f64,
) -> Result<NonoscillationReport> {
    let len = field_len(&tr.states[0]);
    if sigma_i.len() != len {
        return Err(Error::Domain(format!(
            "mask has {} entries but the grid has {len}",
            sigma_i.len()
        )));
    }
    let late = late_indices(tr, t_sing)?;
    let packets: Vec<(f64, Vec<f64>)> = late
        .iter()
        .map(|&i| {
            let (t, state) = tr.snapshot(i);
            (t, state.curvature(tr.alpha(t)).rm_norm)
        })
        .collect();
    let mut per_point = Vec::new();
    let mut flagged = Vec::new();
    for j in (0..len).filter(|&j| sigma_i[j]) {
        let inf = packets
            .iter()
            .map(|(t, rm)| (t_sing - t) * rm[j])
            .fold(f64::INFINITY, f64::min);
        if inf < NONOSC_FLAG_FRACTION * type_i_c {
            flagged.push(j);
        }
        per_point.push((j, inf));
    }
    let constant = if per_point.is_empty() {
        None
    } else {
        Some(per_point.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min))
    };
    Ok(NonoscillationReport { per_point, constant, flagged })
}

/// Full classification against a given singular time.
pub fn analyze_at(tr: &FlowTrajectory, t_sing: f64) -> Result<SingularityReport> {
    let (type_i, type_a) = type_i_constant(tr, t_sing)?;
    let masks = classify_singular_sets(tr, t_sing, type_i, SIGMA_RADIUS)?;
    let sequences = detect_essential_blowup(tr, t_sing, masks.c_s)?;
    let nonoscillation = nonoscillation_check(tr, t_sing, &masks.sigma_i, type_i)?;
    if !masks.inclusions_hold {
        return Err(Error::Invariant(
            "singular-set inclusions failed despite intersection construction".into(),
        ));
    }
    let max_rate = sequences.iter().map(|s| s.max_rate()).fold(0.0, f64::max);
    if max_rate > type_i * (1.0 + 1e-12) {
        return Err(Error::Invariant(format!(
            "blow-up sequence rate {max_rate} exceeds the Type I constant {type_i}"
        )));
    }
    Ok(SingularityReport { t_est: t_sing, type_i_constant: type_i, type_a, masks, sequences, nonoscillation })
}

/// Dispatches on how the run ended: terminated runs are reported as
/// non-singular, blow-up or width-collapse runs get the singular time
/// estimated from the curvature history and the full classification.
pub fn analyze(tr: &FlowTrajectory) -> Result<SingularityOutcome> {
    match tr.status {
        FlowStatus::ReachedEnd | FlowStatus::StepLimit => {
            let series = tr.sup_rm_series();
            let &(t_final, sup_rm_final) = series.last().ok_or_else(|| {
                Error::Precondition("trajectory holds no snapshots".into())
            })?;
            Ok(SingularityOutcome::NonSingular { t_final, sup_rm_final })
        }
        FlowStatus::CurvatureBlowup | FlowStatus::WidthFloor => {
            let estimate = estimate_singular_time(&tr.sup_rm_series())?;
            let report = analyze_at(tr, estimate.t_sing)?;
            Ok(SingularityOutcome::Singular { estimate, report })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_flow, CouplingSchedule, FlowOptions};
    use crate::geometry::{FlatState, HomogeneousState, MapKind, WarpedState};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sphere_run(n: usize, c0: f64, alpha: f64, map: MapKind) -> FlowTrajectory {
        let initial = GeometryState::Homogeneous(HomogeneousState::new(n, c0, map).unwrap());
        let schedule = CouplingSchedule::constant(alpha).unwrap();
        run_flow(&initial, &schedule, &FlowOptions::to(5.0)).unwrap()
    }

    #[test]
    fn round_sphere_classifies_as_type_i() {
        // c = 2 - 2t, so T = 1 and (T - t)|Rm| = 1 identically
        let tr = sphere_run(2, 2.0, 1.0, MapKind::Constant);
        let outcome = analyze(&tr).unwrap();
        let (estimate, report) = match outcome {
            SingularityOutcome::Singular { estimate, report } => (estimate, report),
            other => panic!("expected a singular outcome, got {other:?}"),
        };
        assert_relative_eq!(estimate.t_sing, 1.0, epsilon = 1e-7);
        assert_relative_eq!(report.type_i_constant, 1.0, epsilon = 1e-4);
        assert!(report.type_a.is_type_i);
        assert_relative_eq!(report.type_a.exponent, 1.0, epsilon = 1e-3);
        assert!(!report.type_a.low_confidence);
        assert_eq!(report.masks.sigma, vec![true]);
        assert_eq!(report.masks.sigma_i, vec![true]);
        assert_eq!(report.masks.sigma_s, vec![true]);
        assert!(report.masks.inclusions_hold);
        assert!(!report.sequences.is_empty());
        let c = report.nonoscillation.constant.unwrap();
        assert_relative_eq!(c, 1.0, epsilon = 1e-4);
        assert!(report.nonoscillation.flagged.is_empty());
    }

    #[test]
    fn coupled_sphere_type_i_constant_doubles() {
        // c = (2(n-1) - 2 alpha)(T - t) with n = 2, alpha = 1/2 gives
        // (T - t)|Rm| = 2
        let tr = sphere_run(2, 1.0, 0.5, MapKind::IdentityEigenmap);
        let est = estimate_singular_time(&tr.sup_rm_series()).unwrap();
        let (c, fit) = type_i_constant(&tr, est.t_sing).unwrap();
        assert_relative_eq!(c, 2.0, epsilon = 1e-4);
        assert!(fit.is_type_i);
    }

    #[test]
    fn terminated_run_reports_nonsingular() {
        let initial = GeometryState::Flat(FlatState::new(3, 4.0, 64).unwrap());
        let schedule = CouplingSchedule::constant(1.0).unwrap();
        let tr = run_flow(&initial, &schedule, &FlowOptions::to(0.05)).unwrap();
        match analyze(&tr).unwrap() {
            SingularityOutcome::NonSingular { sup_rm_final, .. } => {
                assert_eq!(sup_rm_final, 0.0);
            }
            other => panic!("expected non-singular, got {other:?}"),
        }
    }

    #[test]
    fn stale_singular_time_is_rejected() {
        let tr = sphere_run(2, 2.0, 1.0, MapKind::Constant);
        let mid = tr.times[tr.snapshot_count() / 2];
        let err = type_i_constant(&tr, mid).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err:?}");
    }

    #[test]
    fn singular_volume_tracks_the_round_sphere_closed_form() {
        let tr = sphere_run(2, 2.0, 1.0, MapKind::Constant);
        let series = singular_volume(&tr, &[true]).unwrap();
        for &(t, vol) in series.iter().step_by(7) {
            assert_relative_eq!(vol, 4.0 * PI * (2.0 - 2.0 * t), epsilon = 1e-12, max_relative = 1e-6);
        }
        let empty = singular_volume(&tr, &[false]).unwrap();
        assert!(empty.iter().all(|&(_, v)| v == 0.0));
        assert!(singular_volume(&tr, &[true, false]).is_err());
    }

    #[test]
    fn threshold_above_the_type_i_constant_gives_no_sequences() {
        let tr = sphere_run(2, 2.0, 1.0, MapKind::Constant);
        let est = estimate_singular_time(&tr.sup_rm_series()).unwrap();
        let seqs = detect_essential_blowup(&tr, est.t_sing, 50.0).unwrap();
        assert!(seqs.is_empty());
    }

    #[test]
    fn neckpinch_run_concentrates_all_masks_at_the_neck() {
        let j = 96;
        let x: Vec<f64> = (0..j).map(|i| 2.0 * PI * i as f64 / j as f64).collect();
        let w: Vec<f64> = x.iter().map(|&x| 1.0 + 0.3 * x.cos()).collect();
        let phi = x.clone();
        let state = GeometryState::Warped(
            WarpedState::new(3, vec![1.0; j], w, phi, 1).unwrap(),
        );
        let schedule = CouplingSchedule::constant(1.0).unwrap();
        let tr = run_flow(&state, &schedule, &FlowOptions::to(2.0)).unwrap();
        let outcome = analyze(&tr).unwrap();
        let report = match outcome {
            SingularityOutcome::Singular { report, .. } => report,
            other => panic!("expected a singular neckpinch, got {other:?}"),
        };
        // the pinch sits at x = pi where the initial width has its minimum
        let neck = j / 2;
        assert!(report.masks.sigma[neck], "neck column must be singular");
        assert!(report.masks.sigma_i[neck]);
        assert!(report.masks.sigma_s[neck]);
        assert!(!report.masks.sigma[0], "antipode must stay regular");
        assert!(report.masks.inclusions_hold);
        assert!(report.type_a.is_type_i, "exponent {}", report.type_a.exponent);
        let c = report.nonoscillation.constant.unwrap();
        assert!(c > 0.0 && report.nonoscillation.flagged.is_empty());
        // the singular region loses volume as the pinch tightens
        let vols = singular_volume(&tr, &report.masks.sigma).unwrap();
        let late = vols.len() - vols.len() / 10;
        assert!(vols.last().unwrap().1 < vols[late].1);
        assert!(vols.last().unwrap().1 < 0.1 * vols[0].1);
    }
}
