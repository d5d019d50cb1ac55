//! Run orchestration: simulate a scenario, persist its artifact tree, and
//! re-run analyses on an existing run directory.
//!
//! A run directory holds:
//!
//! * `config.cfg` - byte-exact copy of the input config
//! * `manifest.json` - config hash, version, deterministic work counters
//! * `trajectory.csv` - per-snapshot `t, sup_rm, min_sh, scale`
//! * per-analysis artifacts (`singularity_report.json`, `reduced_*.csv`,
//!   `soliton_residuals.json`, `rescale_report.json`, `harnack.json`, ...)
//! * `monitors.json` - invariant monitor verdicts and per-analysis errors
//!
//! Reruns of the same config and seed write byte-identical artifacts: all
//! counters are deterministic, floats are printed with 17 significant
//! digits, and JSON objects serialize with sorted keys. A directory that
//! already holds a manifest is refused; re-analysis of a finished run goes
//! through [`analyze_dir`], which re-simulates from the stored config copy.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, parse_config_file, BaseTimeSpec, ReducedConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::flow::{run_flow, FlowStatus, FlowTrajectory};
use crate::geometry::GeometryState;
use crate::reduced::{
    harnack_check, reduce_report, reduced_length_singular, ReducedBase, ReducedGeometryReport,
    SingularReducedLength,
};
use crate::singularity::{
    analyze, convergence_diagnostic, rescale, singular_volume, SingularityOutcome,
};
use crate::soliton::{fit_potential, normalization_defect, soliton_residual, SolitonSpec};
use crate::util::fmt_g17;

/// Base-time offsets of the singular reduced-length ladder; the final zero
/// bases at the estimated singular time itself.
const SINGULAR_BASE_OFFSETS: [f64; 3] = [1e-3, 1e-4, 0.0];
/// Rescaled time at which convergence diagnostics compare profiles.
const RESCALE_PROBE_TIME: f64 = -1.0;

/// All analysis names `analyze_dir` accepts for `--only`.
pub const ANALYSIS_NAMES: [&str; 5] = ["singularity", "reduced", "soliton", "rescale", "harnack"];

/// A run directory reloaded from disk: the config copy, its parse, and the
/// re-simulated trajectory (simulation is deterministic, so this recovers
/// exactly the state the original run saw).
pub struct LoadedRun {
    pub text: String,
    pub cfg: ScenarioConfig,
    pub tr: FlowTrajectory,
}

/// Simulates `config_path` and writes the full artifact tree.
///
/// The run directory comes from the config's `output_dir` unless
/// `out_override` is given. Analysis failures are recorded per-analysis in
/// `monitors.json` without aborting the others; failed invariant monitors
/// surface as an error after every artifact is written.
pub fn run_scenario(config_path: &Path, out_override: Option<&Path>) -> Result<PathBuf> {
    let (text, cfg) = parse_config_file(config_path)?;
    let run_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&cfg.output_dir),
    };
    if run_dir.join("manifest.json").exists() {
        return Err(Error::Precondition(format!(
            "{} already holds a manifest; refusing to overwrite a finished run",
            run_dir.display()
        )));
    }
    fs::create_dir_all(&run_dir)?;
    fs::write(run_dir.join("config.cfg"), &text)?;

    let tr = simulate(&cfg)?;
    write_trajectory_csv(&run_dir, &tr)?;
    write_json(
        &run_dir.join("manifest.json"),
        &json!({
            "name": cfg.name,
            "config_sha256": sha256_hex(&text),
            "version": env!("CARGO_PKG_VERSION"),
            "timings": {
                "steps": tr.counters.steps,
                "rhs_evals": tr.counters.rhs_evals,
                "retries": tr.counters.retries,
                "snapshots": tr.counters.snapshots,
            },
        }),
    )?;

    let verdict = run_analyses(&run_dir, &cfg, &tr, None)?;
    verdict.into_result(run_dir)
}

/// Re-runs analyses on a finished run directory.
///
/// `only` restricts to a single analysis name from [`ANALYSIS_NAMES`];
/// `None` re-runs everything the config enables. Artifacts are rewritten
/// in place; simulation artifacts (`trajectory.csv`, `manifest.json`) stay
/// untouched.
pub fn analyze_dir(run_dir: &Path, only: Option<&str>) -> Result<()> {
    if let Some(name) = only {
        if !ANALYSIS_NAMES.contains(&name) {
            return Err(Error::Usage(format!(
                "unknown analysis '{name}'; expected one of {}",
                ANALYSIS_NAMES.join(", ")
            )));
        }
    }
    let run = load_run(run_dir)?;
    let verdict = run_analyses(run_dir, &run.cfg, &run.tr, only)?;
    verdict.into_result(()).map(|_| ())
}

/// Reduced-geometry survey of a finished run from an explicit base.
///
/// `base` is `"<point>,<time>"` with `T` accepted for the estimated
/// singular time, e.g. `"0.4,T"` or `"3.14,0.2"`. Probe grids come from
/// the run config's `analyses.reduced` block.
pub fn reduce_run(run_dir: &Path, base: &str) -> Result<()> {
    let Some((point_str, time_str)) = base.split_once(',') else {
        return Err(Error::Usage(format!(
            "base must be '<point>,<time>' with 'T' for the singular time, got '{base}'"
        )));
    };
    let p: f64 = point_str
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("bad base point '{point_str}'")))?;
    let run = load_run(run_dir)?;
    let Some(rc) = run.cfg.analyses.reduced.clone() else {
        return Err(Error::Usage(
            "the run config has no analyses.reduced block to take probe grids from".into(),
        ));
    };
    let base = match time_str.trim() {
        "T" => ReducedBase::Singular(singular_estimate(&run.tr)?),
        s => ReducedBase::Regular(
            s.parse().map_err(|_| Error::Usage(format!("bad base time '{s}'")))?,
        ),
    };
    let report = reduce_report(&run.tr, base, p, &probe_points(&run.cfg, &rc), &rc.probe_times, rc.w_dt)?;
    write_reduced_artifacts(run_dir, &report)?;
    if base.is_singular() {
        let sl = singular_ladder(&run.tr, base.time(), p, &probe_points(&run.cfg, &rc), &rc.probe_times)?;
        write_json(&run_dir.join("singular_length.json"), &singular_length_json(&sl))?;
    }
    Ok(())
}

/// Blow-up rescaling of a finished singular run at explicit scales.
pub fn rescale_run(run_dir: &Path, lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 2 {
        return Err(Error::Usage("need at least two scales for a convergence trend".into()));
    }
    if lambdas.iter().any(|&l| !(l > 1.0) || !l.is_finite()) {
        return Err(Error::Usage("every scale must be a finite number above 1".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("scales must increase strictly".into()));
    }
    let run = load_run(run_dir)?;
    let t_sing = singular_estimate(&run.tr)?;
    let value = rescale_json(&run.tr, t_sing, lambdas)?;
    write_json(&run_dir.join("rescale_report.json"), &value)
}

/// Reloads a run directory: verifies the manifest hash against the stored
/// config copy, then re-simulates deterministically.
pub fn load_run(run_dir: &Path) -> Result<LoadedRun> {
    let manifest_path = run_dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::Precondition(format!(
            "{} is not a run directory (no manifest.json)",
            run_dir.display()
        )));
    }
    let text = fs::read_to_string(run_dir.join("config.cfg"))?;
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .map_err(|e| Error::Io(e.into()))?;
    let stored = manifest.get("config_sha256").and_then(Value::as_str).unwrap_or("");
    let actual = sha256_hex(&text);
    if stored != actual {
        return Err(Error::Invariant(format!(
            "manifest hash {stored} does not match the stored config copy ({actual})"
        )));
    }
    let cfg = parse_config(&text)?;
    let tr = simulate(&cfg)?;
    Ok(LoadedRun { text, cfg, tr })
}

fn simulate(cfg: &ScenarioConfig) -> Result<FlowTrajectory> {
    let initial = cfg.geometry.build()?;
    run_flow(&initial, &cfg.coupling, &cfg.integrator.flow_options())
}

/// Explicit probe coordinates, or seeded uniform placement over the chart.
fn probe_points(cfg: &ScenarioConfig, rc: &ReducedConfig) -> Vec<f64> {
    if !rc.probe_points.is_empty() {
        return rc.probe_points.clone();
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let period = 2.0 * std::f64::consts::PI;
    let mut pts: Vec<f64> = (0..rc.probe_count).map(|_| rng.gen_range(0.0..period)).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts
}

fn singular_estimate(tr: &FlowTrajectory) -> Result<f64> {
    match analyze(tr)? {
        SingularityOutcome::Singular { estimate, .. } => Ok(estimate.t_sing),
        SingularityOutcome::NonSingular { t_final, .. } => Err(Error::Precondition(format!(
            "the run stayed regular through t = {t_final}; no singular time to base at"
        ))),
    }
}

/// Collected monitor verdicts; analysis errors are informational, monitor
/// failures make the run exit nonzero.
struct Verdict {
    violations: Vec<String>,
}

impl Verdict {
    fn into_result<T>(self, ok: T) -> Result<T> {
        if self.violations.is_empty() {
            Ok(ok)
        } else {
            Err(Error::Invariant(format!(
                "invariant monitors failed: {}",
                self.violations.join("; ")
            )))
        }
    }
}

/// Runs every enabled analysis (or just `only`), writing artifacts and
/// `monitors.json`. Analysis errors are recorded without aborting others.
fn run_analyses(
    run_dir: &Path,
    cfg: &ScenarioConfig,
    tr: &FlowTrajectory,
    only: Option<&str>,
) -> Result<Verdict> {
    let wants = |name: &str| only.map_or(true, |o| o == name);
    let mut errors: Vec<(String, String)> = Vec::new();
    let mut monitors = serde_json::Map::new();
    let mut violations: Vec<String> = Vec::new();

    monitors.insert("status".into(), json!(status_name(&tr.status)));
    monitors.insert("t_final".into(), json!(tr.t_final));
    monitors.insert("min_sh_violations".into(), json!(tr.min_sh_violations));
    monitors.insert("worst_sh_drop".into(), json!(tr.worst_sh_drop));
    if tr.min_sh_violations > 0 {
        violations.push(format!(
            "min Sh dropped below tolerance on {} steps (worst {:e})",
            tr.min_sh_violations, tr.worst_sh_drop
        ));
    }

    // the singular-time estimate feeds reduced, soliton, and rescale
    let needs_outcome = cfg.analyses.singularity
        || cfg.analyses.reduced.is_some()
        || cfg.analyses.soliton
        || !cfg.analyses.rescale_lambdas.is_empty();
    let outcome = if needs_outcome {
        match analyze(tr) {
            Ok(o) => Some(o),
            Err(e) => {
                errors.push(("singularity".into(), e.to_string()));
                None
            }
        }
    } else {
        None
    };
    let t_sing = match &outcome {
        Some(SingularityOutcome::Singular { estimate, .. }) => Some(estimate.t_sing),
        _ => None,
    };

    if wants("singularity") && cfg.analyses.singularity {
        if let Some(o) = &outcome {
            write_json(&run_dir.join("singularity_report.json"), &singularity_json(o))?;
            if let SingularityOutcome::Singular { report, .. } = o {
                let series = singular_volume(tr, &report.masks.sigma)?;
                write_csv(
                    &run_dir.join("sigma_volume.csv"),
                    "t,volume",
                    series.iter().map(|&(t, v)| vec![t, v]),
                )?;
                if !report.masks.inclusions_hold {
                    violations.push("singular-set mask inclusions failed".into());
                }
                monitors.insert("mask_inclusions_hold".into(), json!(report.masks.inclusions_hold));
                if !report.nonoscillation.flagged.is_empty() {
                    violations.push(format!(
                        "{} essential points oscillate below the Type I rate",
                        report.nonoscillation.flagged.len()
                    ));
                }
                monitors.insert(
                    "nonoscillation_flagged".into(),
                    json!(report.nonoscillation.flagged.len()),
                );
            }
        }
    }

    if wants("reduced") {
        if let Some(rc) = &cfg.analyses.reduced {
            match reduced_base(rc, t_sing) {
                Ok(base) => {
                    let points = probe_points(cfg, rc);
                    match reduce_report(tr, base, rc.base_point, &points, &rc.probe_times, rc.w_dt) {
                        Ok(report) => {
                            write_reduced_artifacts(run_dir, &report)?;
                            monitors.insert(
                                "volume_monotonicity_pass".into(),
                                json!(report.monotonicity.pass),
                            );
                            if !report.monotonicity.pass {
                                violations.push(format!(
                                    "reduced volume monotonicity failed (worst drop {:e}, max {:.6})",
                                    report.monotonicity.worst_drop, report.monotonicity.max_value
                                ));
                            }
                        }
                        Err(e) => errors.push(("reduced".into(), e.to_string())),
                    }
                    if base.is_singular() {
                        match singular_ladder(tr, base.time(), rc.base_point, &points, &rc.probe_times)
                        {
                            Ok(sl) => write_json(
                                &run_dir.join("singular_length.json"),
                                &singular_length_json(&sl),
                            )?,
                            Err(e) => errors.push(("reduced".into(), e.to_string())),
                        }
                    }
                }
                Err(e) => errors.push(("reduced".into(), e.to_string())),
            }
        }
    }

    if wants("soliton") && cfg.analyses.soliton {
        match soliton_json(cfg, tr, t_sing) {
            Ok(value) => write_json(&run_dir.join("soliton_residuals.json"), &value)?,
            Err(e) => errors.push(("soliton".into(), e.to_string())),
        }
    }

    if wants("rescale") && !cfg.analyses.rescale_lambdas.is_empty() {
        let attempt = match t_sing {
            Some(t) => rescale_json(tr, t, &cfg.analyses.rescale_lambdas),
            None => Err(Error::Precondition(
                "rescaling needs a singular run with an estimated singular time".into(),
            )),
        };
        match attempt {
            Ok(value) => write_json(&run_dir.join("rescale_report.json"), &value)?,
            Err(e) => errors.push(("rescale".into(), e.to_string())),
        }
    }

    if wants("harnack") {
        if let Some(hc) = &cfg.analyses.harnack {
            match harnack_check(tr, hc.t_end, hc.eps0, hc.modes, &hc.slices) {
                Ok(report) => {
                    write_json(
                        &run_dir.join("harnack.json"),
                        &json!({
                            "t_end": hc.t_end,
                            "eps0": hc.eps0,
                            "modes": hc.modes,
                            "slice_times": report.slice_times,
                            "max_v": report.max_v,
                            "overall_max": report.overall_max,
                            "tail_fractions": report.tail_fractions,
                            "increase_k": report.increase_k,
                        }),
                    )?;
                }
                Err(e) => errors.push(("harnack".into(), e.to_string())),
            }
        }
    }

    let error_map: serde_json::Map<String, Value> = errors
        .iter()
        .map(|(name, msg)| (name.clone(), json!(msg)))
        .collect();
    monitors.insert("analysis_errors".into(), Value::Object(error_map));
    monitors.insert("violations".into(), json!(violations));
    write_json(&run_dir.join("monitors.json"), &Value::Object(monitors))?;

    Ok(Verdict { violations })
}

fn reduced_base(rc: &ReducedConfig, t_sing: Option<f64>) -> Result<ReducedBase> {
    match rc.base_time {
        BaseTimeSpec::At(t) => Ok(ReducedBase::Regular(t)),
        BaseTimeSpec::Singular => t_sing.map(ReducedBase::Singular).ok_or_else(|| {
            Error::Precondition(
                "base_time = singular needs a singular run with an estimated singular time".into(),
            )
        }),
    }
}

/// Reduced-length tables from a ladder of bases tightening to the singular
/// time; the final base sits at the estimate itself.
fn singular_ladder(
    tr: &FlowTrajectory,
    t_sing: f64,
    p: f64,
    points: &[f64],
    times: &[f64],
) -> Result<SingularReducedLength> {
    let bases: Vec<f64> = SINGULAR_BASE_OFFSETS.iter().map(|off| t_sing - off).collect();
    reduced_length_singular(tr, t_sing, &bases, p, points, times)
}

fn soliton_json(cfg: &ScenarioConfig, tr: &FlowTrajectory, t_sing: Option<f64>) -> Result<Value> {
    let t_sing = t_sing.ok_or_else(|| {
        Error::Precondition("soliton fits need a singular run (shrinker normalization)".into())
    })?;
    // fit at the reduced probe times when configured, else at quarter points
    let times: Vec<f64> = match &cfg.analyses.reduced {
        Some(rc) => rc.probe_times.clone(),
        None => {
            let span = tr.t_final - tr.t_start();
            [0.25, 0.5, 0.75].iter().map(|f| tr.t_start() + f * span).collect()
        }
    };
    let mut rows = Vec::new();
    for &t in &times {
        let state = tr.state_at(t)?;
        let alpha = tr.alpha(t);
        let tau = t_sing - t;
        if !(tau > 0.0) {
            continue;
        }
        let sigma = -1.0 / (2.0 * tau);
        let f = fit_potential(&state, alpha, sigma, None)?;
        let spec = SolitonSpec::new(state, alpha, sigma, f)?;
        let res = soliton_residual(&spec)?;
        rows.push(json!({
            "t": t,
            "tau": tau,
            "sigma": sigma,
            "canonical": res.canonical,
            "map": res.map,
            "trace": res.trace,
            "elliptic": res.elliptic,
            "max": res.max(),
            "normalization_defect": normalization_defect(&spec),
        }));
    }
    Ok(json!({ "t_sing": t_sing, "fits": rows }))
}

fn rescale_json(tr: &FlowTrajectory, t_sing: f64, lambdas: &[f64]) -> Result<Value> {
    // warped states rescale about the pinch column; closed classes have no
    // distinguished point
    let base_index = match &tr.states[tr.snapshot_count() - 1] {
        GeometryState::Warped(s) => {
            let (j, _) = s
                .w
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (j, &w)| if w < acc.1 { (j, w) } else { acc });
            Some(j)
        }
        _ => None,
    };
    let rescaled = lambdas
        .iter()
        .map(|&l| rescale(tr, t_sing, l, base_index, None))
        .collect::<Result<Vec<_>>>()?;
    let conv = convergence_diagnostic(&rescaled, RESCALE_PROBE_TIME)?;
    let margins: Vec<f64> = rescaled.iter().map(|r| r.type_i_margin).collect();
    Ok(json!({
        "lambdas": lambdas,
        "t_probe": RESCALE_PROBE_TIME,
        "residuals": conv.residuals,
        "residual_nonincreasing": conv.residual_nonincreasing,
        "distances": conv.distances,
        "type_i_margins": margins,
    }))
}

fn singularity_json(outcome: &SingularityOutcome) -> Value {
    match outcome {
        SingularityOutcome::NonSingular { t_final, sup_rm_final } => json!({
            "outcome": "nonsingular",
            "t_final": t_final,
            "sup_rm_final": sup_rm_final,
        }),
        SingularityOutcome::Singular { estimate, report } => {
            let sequences: Vec<Value> = report
                .sequences
                .iter()
                .map(|s| {
                    let records: Vec<Value> = s
                        .records
                        .iter()
                        .map(|r| json!({ "x_index": r.x_index, "t": r.t, "rate": r.rate }))
                        .collect();
                    json!({
                        "limit_index": s.limit_index(),
                        "max_rate": s.max_rate(),
                        "records": records,
                    })
                })
                .collect();
            let per_point: Vec<Value> = report
                .nonoscillation
                .per_point
                .iter()
                .map(|&(j, v)| json!([j, v]))
                .collect();
            json!({
                "outcome": "singular",
                "estimate": {
                    "t_sing": estimate.t_sing,
                    "fit_rms": estimate.fit_rms,
                    "samples_used": estimate.samples_used,
                },
                "t_est": report.t_est,
                "type_i_constant": report.type_i_constant,
                "type_a": {
                    "exponent": report.type_a.exponent,
                    "amplitude": report.type_a.amplitude,
                    "rms": report.type_a.rms,
                    "is_type_i": report.type_a.is_type_i,
                    "low_confidence": report.type_a.low_confidence,
                },
                "masks": {
                    "sigma": report.masks.sigma,
                    "sigma_i": report.masks.sigma_i,
                    "sigma_s": report.masks.sigma_s,
                    "cap": report.masks.cap,
                    "c_s": report.masks.c_s,
                    "inclusions_hold": report.masks.inclusions_hold,
                },
                "sequences": sequences,
                "nonoscillation": {
                    "per_point": per_point,
                    "constant": report.nonoscillation.constant,
                    "flagged": report.nonoscillation.flagged,
                },
            })
        }
    }
}

fn write_reduced_artifacts(run_dir: &Path, report: &ReducedGeometryReport) -> Result<()> {
    write_csv(
        &run_dir.join("reduced_volume.csv"),
        "t_bar,value",
        report.v_series.iter().map(|s| vec![s.t_bar, s.value]),
    )?;
    write_csv(
        &run_dir.join("reduced_length.csv"),
        "point,t_bar,l,big_l",
        report
            .l_samples
            .iter()
            .zip(&report.big_l_values)
            .map(|(&(q, t_bar, l), &big)| vec![q, t_bar, l, big]),
    )?;
    write_csv(
        &run_dir.join("w_residuals.csv"),
        "t_bar,defect",
        report.w_residual_series.iter().map(|&(t, d)| vec![t, d]),
    )?;
    let mut curve_rows = Vec::new();
    for (ci, curve) in report.minimizer_curves.iter().enumerate() {
        for (t, x) in curve.times().into_iter().zip(&curve.positions) {
            curve_rows.push(vec![ci as f64, t, *x]);
        }
    }
    write_csv(&run_dir.join("minimizer_curves.csv"), "curve,t,x", curve_rows.into_iter())?;
    let (kind, time) = match report.based_at {
        ReducedBase::Regular(t) => ("regular", t),
        ReducedBase::Singular(t) => ("singular", t),
    };
    write_json(
        &run_dir.join("reduced_report.json"),
        &json!({
            "based_at": { "kind": kind, "time": time },
            "base_point": report.base_point,
            "points": report.points,
            "times": report.times,
            "monotonicity": {
                "samples": report.monotonicity.samples,
                "worst_drop": report.monotonicity.worst_drop,
                "max_value": report.monotonicity.max_value,
                "monotone_ok": report.monotonicity.monotone_ok,
                "within_upper_bound": report.monotonicity.within_upper_bound,
                "all_positive": report.monotonicity.all_positive,
                "pass": report.monotonicity.pass,
            },
        }),
    )
}

fn singular_length_json(sl: &SingularReducedLength) -> Value {
    let margins = sl.margins.as_ref().map(|m| {
        json!({
            "heat": m.heat,
            "potential": m.potential,
            "transport": m.transport,
            "min_heat": m.min_heat,
            "min_potential": m.min_potential,
            "max_abs_transport": m.max_abs_transport,
        })
    });
    json!({
        "bases": sl.bases,
        "points": sl.points,
        "times": sl.times,
        "tables": sl.tables,
        "cauchy_steps": sl.cauchy_steps,
        "cauchy_monotone": sl.cauchy_monotone,
        "margins": margins,
    })
}

fn write_trajectory_csv(run_dir: &Path, tr: &FlowTrajectory) -> Result<()> {
    let rm = tr.sup_rm_series();
    let sh = tr.min_sh_series();
    let rows = (0..tr.snapshot_count()).map(|i| {
        let (t, state) = tr.snapshot(i);
        let scale = match state {
            GeometryState::Homogeneous(s) => s.c,
            GeometryState::Warped(s) => s.w.iter().copied().fold(f64::INFINITY, f64::min),
            GeometryState::Flat(_) => 1.0,
        };
        vec![t, rm[i].1, sh[i].1, scale]
    });
    write_csv(&run_dir.join("trajectory.csv"), "t,sup_rm,min_sh,scale", rows)
}

fn status_name(status: &FlowStatus) -> &'static str {
    match status {
        FlowStatus::ReachedEnd => "reached_end",
        FlowStatus::CurvatureBlowup => "curvature_blowup",
        FlowStatus::WidthFloor => "width_floor",
        FlowStatus::StepLimit => "step_limit",
    }
}

fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: Iterator<Item = Vec<f64>>,
{
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_g17(v));
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
