//! Human-readable run summaries and plot-ready series extracts.
//!
//! [`emit_report`] reads a finished run directory, checks that every
//! artifact the stored config promises is present (an analysis excused by a
//! recorded error in `monitors.json` is not required), writes two-column
//! `.dat` files for every time series into `<run_dir>/report/`, and returns
//! a one-page text summary (also stored as `report/summary.txt`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::parse_config;
use crate::error::{Error, Result};
use crate::util::fmt_g17;

/// Tolerance of the summary's constancy verdict on the reduced volume.
const VOLUME_SPREAD_TOL: f64 = 1e-3;

/// Summarizes a run directory; see the module docs.
pub fn emit_report(run_dir: &Path) -> Result<String> {
    if !run_dir.join("manifest.json").exists() {
        return Err(Error::Precondition(format!(
            "{} is not a run directory (no manifest.json)",
            run_dir.display()
        )));
    }
    let cfg_text = fs::read_to_string(run_dir.join("config.cfg"))?;
    let cfg = parse_config(&cfg_text)?;
    let monitors = read_json(run_dir, "monitors.json")?;
    let excused = |name: &str| monitors["analysis_errors"].get(name).is_some();

    // artifact completeness, derived from the config and the monitor record
    let mut expected: Vec<&str> = vec!["config.cfg", "manifest.json", "trajectory.csv", "monitors.json"];
    let singular_outcome = run_dir.join("singularity_report.json").exists()
        && read_json(run_dir, "singularity_report.json")?["outcome"] == "singular";
    if cfg.analyses.singularity && !excused("singularity") {
        expected.push("singularity_report.json");
        if singular_outcome {
            expected.push("sigma_volume.csv");
        }
    }
    if cfg.analyses.reduced.is_some() && !excused("reduced") {
        expected.extend([
            "reduced_volume.csv",
            "reduced_length.csv",
            "w_residuals.csv",
            "minimizer_curves.csv",
            "reduced_report.json",
        ]);
        if run_dir.join("reduced_report.json").exists()
            && read_json(run_dir, "reduced_report.json")?["based_at"]["kind"] == "singular"
        {
            expected.push("singular_length.json");
        }
    }
    if cfg.analyses.soliton && !excused("soliton") {
        expected.push("soliton_residuals.json");
    }
    if !cfg.analyses.rescale_lambdas.is_empty() && !excused("rescale") {
        expected.push("rescale_report.json");
    }
    if cfg.analyses.harnack.is_some() && !excused("harnack") {
        expected.push("harnack.json");
    }
    let missing: Vec<&str> = expected
        .iter()
        .copied()
        .filter(|name| !run_dir.join(name).exists())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Precondition(format!(
            "missing artifacts: {}",
            missing.join(", ")
        )));
    }

    let report_dir = run_dir.join("report");
    fs::create_dir_all(&report_dir)?;

    let manifest = read_json(run_dir, "manifest.json")?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "run {} ({})",
        cfg.name,
        monitors["status"].as_str().unwrap_or("?")
    );
    let _ = writeln!(
        out,
        "  t_final = {}, steps = {}, rhs evals = {}, retries = {}, snapshots = {}",
        monitors["t_final"],
        manifest["timings"]["steps"],
        manifest["timings"]["rhs_evals"],
        manifest["timings"]["retries"],
        manifest["timings"]["snapshots"],
    );
    let _ = writeln!(
        out,
        "  min Sh violations = {}, worst drop = {}",
        monitors["min_sh_violations"], monitors["worst_sh_drop"]
    );

    // trajectory series
    let (header, rows) = read_csv(run_dir, "trajectory.csv")?;
    for (col, stem) in header.iter().enumerate().skip(1) {
        write_dat(&report_dir, &format!("{stem}.dat"), &rows, 0, col)?;
    }

    if expected.contains(&"singularity_report.json") {
        let rep = read_json(run_dir, "singularity_report.json")?;
        if rep["outcome"] == "singular" {
            let _ = writeln!(out, "singularity:");
            let _ = writeln!(
                out,
                "  T_est = {} (fit rms {}, {} samples)",
                rep["estimate"]["t_sing"], rep["estimate"]["fit_rms"], rep["estimate"]["samples_used"]
            );
            let _ = writeln!(out, "  Type I constant = {}", rep["type_i_constant"]);
            let _ = writeln!(
                out,
                "  type A fit: exponent = {}, amplitude = {}, rms = {}, Type I: {}",
                rep["type_a"]["exponent"],
                rep["type_a"]["amplitude"],
                rep["type_a"]["rms"],
                yes_no(rep["type_a"]["is_type_i"].as_bool())
            );
            let count = |key: &str| {
                rep["masks"][key]
                    .as_array()
                    .map(|a| a.iter().filter(|v| v.as_bool() == Some(true)).count())
                    .unwrap_or(0)
            };
            let _ = writeln!(
                out,
                "  masks: |Sigma| = {}, |Sigma_I| = {}, |Sigma_S| = {} cells, inclusions hold: {}",
                count("sigma"),
                count("sigma_i"),
                count("sigma_s"),
                yes_no(rep["masks"]["inclusions_hold"].as_bool())
            );
            let _ = writeln!(
                out,
                "  nonoscillation constant = {}, flagged points = {}",
                rep["nonoscillation"]["constant"],
                rep["nonoscillation"]["flagged"].as_array().map_or(0, |a| a.len())
            );
            let (_, vr) = read_csv(run_dir, "sigma_volume.csv")?;
            write_dat(&report_dir, "sigma_volume.dat", &vr, 0, 1)?;
        } else {
            let _ = writeln!(
                out,
                "singularity: none (t_final = {}, sup |Rm| = {})",
                rep["t_final"], rep["sup_rm_final"]
            );
        }
    }

    if expected.contains(&"reduced_report.json") {
        let rep = read_json(run_dir, "reduced_report.json")?;
        let _ = writeln!(
            out,
            "reduced geometry (base: {} at t = {}, point {}):",
            rep["based_at"]["kind"].as_str().unwrap_or("?"),
            rep["based_at"]["time"],
            rep["base_point"]
        );
        let (_, vr) = read_csv(run_dir, "reduced_volume.csv")?;
        write_dat(&report_dir, "reduced_volume.dat", &vr, 0, 1)?;
        let values: Vec<f64> = vr.iter().map(|r| r[1]).collect();
        if !values.is_empty() {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let spread = if mean != 0.0 { (max - min) / mean.abs() } else { f64::INFINITY };
            let _ = writeln!(
                out,
                "  reduced volume: min = {:.6}, max = {:.6}, spread = {:.3e}",
                min, max, spread
            );
            let _ = writeln!(
                out,
                "  reduced volume constant within 1.0e-3: {}",
                if spread <= VOLUME_SPREAD_TOL { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "  monotonicity: {} (worst drop = {}, max value = {})",
            if rep["monotonicity"]["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
            rep["monotonicity"]["worst_drop"], rep["monotonicity"]["max_value"]
        );
        let (_, wr) = read_csv(run_dir, "w_residuals.csv")?;
        if !wr.is_empty() {
            write_dat(&report_dir, "w_residuals.dat", &wr, 0, 1)?;
            let worst = wr.iter().map(|r| r[1].abs()).fold(0.0f64, f64::max);
            let _ = writeln!(out, "  w-residual max = {:.3e}", worst);
        }
        if expected.contains(&"singular_length.json") {
            let sl = read_json(run_dir, "singular_length.json")?;
            let _ = writeln!(
                out,
                "  singular reduced length: cauchy steps = {}, monotone: {}",
                sl["cauchy_steps"],
                yes_no(sl["cauchy_monotone"].as_bool())
            );
            if !sl["margins"].is_null() {
                let _ = writeln!(
                    out,
                    "  limit margins: min heat = {}, min potential = {}, max |transport| = {}",
                    sl["margins"]["min_heat"], sl["margins"]["min_potential"], sl["margins"]["max_abs_transport"]
                );
            }
        }
    }

    if expected.contains(&"soliton_residuals.json") {
        let rep = read_json(run_dir, "soliton_residuals.json")?;
        let fits = rep["fits"].as_array().cloned().unwrap_or_default();
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        let mut worst_t = f64::NAN;
        for fit in &fits {
            let t = fit["t"].as_f64().unwrap_or(f64::NAN);
            let m = fit["max"].as_f64().unwrap_or(f64::NAN);
            rows.push(vec![t, m]);
            if m > worst {
                worst = m;
                worst_t = t;
            }
        }
        write_dat(&report_dir, "soliton_residual_max.dat", &rows, 0, 1)?;
        let _ = writeln!(
            out,
            "soliton fits: {} probes, max residual = {:.3e} at t = {}",
            fits.len(),
            worst,
            worst_t
        );
    }

    if expected.contains(&"rescale_report.json") {
        let rep = read_json(run_dir, "rescale_report.json")?;
        let lambdas = rep["lambdas"].as_array().cloned().unwrap_or_default();
        let residuals = rep["residuals"].as_array().cloned().unwrap_or_default();
        let rows: Vec<Vec<f64>> = lambdas
            .iter()
            .zip(&residuals)
            .map(|(l, r)| vec![l.as_f64().unwrap_or(f64::NAN), r.as_f64().unwrap_or(f64::NAN)])
            .collect();
        write_dat(&report_dir, "rescale_residuals.dat", &rows, 0, 1)?;
        let max_dist = rep["distances"]
            .as_array()
            .map(|m| {
                m.iter()
                    .flat_map(|row| row.as_array().cloned().unwrap_or_default())
                    .filter_map(|v| v.as_f64())
                    .fold(0.0f64, f64::max)
            })
            .unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "rescale: residuals {:?}, non-increasing: {}, max pairwise distance = {:.3e}",
            residuals.iter().filter_map(|v| v.as_f64()).collect::<Vec<_>>(),
            yes_no(rep["residual_nonincreasing"].as_bool()),
            max_dist
        );
    }

    if expected.contains(&"harnack.json") {
        let rep = read_json(run_dir, "harnack.json")?;
        let slices = rep["slice_times"].as_array().cloned().unwrap_or_default();
        let maxv = rep["max_v"].as_array().cloned().unwrap_or_default();
        let rows: Vec<Vec<f64>> = slices
            .iter()
            .zip(&maxv)
            .map(|(t, v)| vec![t.as_f64().unwrap_or(f64::NAN), v.as_f64().unwrap_or(f64::NAN)])
            .collect();
        write_dat(&report_dir, "harnack_max_v.dat", &rows, 0, 1)?;
        let _ = writeln!(
            out,
            "harnack: overall max v = {} over {} slices, raise mode budget: {}",
            rep["overall_max"],
            rows.len(),
            yes_no(rep["increase_k"].as_bool())
        );
    }

    let violations = monitors["violations"].as_array().cloned().unwrap_or_default();
    if violations.is_empty() {
        let _ = writeln!(out, "invariant monitors: all passed");
    } else {
        let _ = writeln!(out, "invariant monitors: {} FAILED", violations.len());
        for v in &violations {
            let _ = writeln!(out, "  - {}", v.as_str().unwrap_or("?"));
        }
    }
    let errors = monitors["analysis_errors"].as_object().cloned().unwrap_or_default();
    if !errors.is_empty() {
        let _ = writeln!(out, "analyses skipped with errors:");
        for (name, msg) in &errors {
            let _ = writeln!(out, "  - {name}: {}", msg.as_str().unwrap_or("?"));
        }
    }

    fs::write(report_dir.join("summary.txt"), &out)?;
    Ok(out)
}

fn yes_no(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "?",
    }
}

fn read_json(run_dir: &Path, name: &str) -> Result<Value> {
    let text = fs::read_to_string(run_dir.join(name))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(e.into()))
}

/// Reads a comma CSV with a header row into column names and float rows.
fn read_csv(run_dir: &Path, name: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(run_dir.join(name))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match row {
            Ok(r) if r.len() == header.len() => rows.push(r),
            _ => {
                return Err(Error::Precondition(format!(
                    "{name} row {} does not match its header",
                    i + 2
                )))
            }
        }
    }
    Ok((header, rows))
}

/// Two-column space-separated series file for plotting.
fn write_dat(
    report_dir: &Path,
    name: &str,
    rows: &[Vec<f64>],
    x_col: usize,
    y_col: usize,
) -> Result<PathBuf> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&fmt_g17(row[x_col]));
        out.push(' ');
        out.push_str(&fmt_g17(row[y_col]));
        out.push('\n');
    }
    let path = report_dir.join(name);
    fs::write(&path, out)?;
    Ok(path)
}
