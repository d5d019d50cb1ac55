//! Scenario configuration: parsing and validation.
//!
//! Configs are UTF-8 text in a small key-value tree format:
//!
//! ```text
//! # comment to end of line
//! name = coupled_sphere
//! seed = 42
//! output_dir = runs/coupled_sphere
//!
//! geometry {
//!     kind = homogeneous        # homogeneous | warped
//!     n = 2
//!     c0 = 1.0
//!     map = eigenmap            # constant | eigenmap
//! }
//! coupling {
//!     kind = constant           # constant | piecewise
//!     alpha = 0.5
//! }
//! integrator {
//!     t_end = 2.0
//!     dt0 = 0.01
//!     cfl = 0.25
//!     snapshot_dt = 0.005
//!     blowup_cap = 1e8
//!     w_floor = 1e-6
//! }
//! analyses {
//!     singularity = on
//!     reduced {
//!         base_time = singular  # singular | <time>
//!         base_point = 0.4
//!         probe_points = 0.7, 1.0, 1.3
//!         probe_times = 0.3, 0.45, 0.6, 0.75, 0.85, 0.9
//!     }
//!     rescale_lambdas = 10, 100, 1000
//!     soliton = on
//! }
//! ```
//!
//! A block is `name {` ... `}` on their own nesting level; entries are
//! `key = value` with scalars, `on`/`off` switches, or comma-separated
//! number lists. Parsing reports *every* violation (syntax and semantic)
//! with its line number, not just the first, and unknown keys are rejected.
//!
//! Documented ranges: dimensions `n >= 2` (homogeneous) or `>= 3` (warped),
//! scales and step parameters positive, `cfl` in (0, 1], `blowup_cap > 1`,
//! warped grids `>= 16` columns, perturbation amplitudes smaller than the
//! base profile values they perturb, probe times strictly increasing and
//! inside the integration window, rescale factors `> 1` and increasing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::{CouplingSchedule, FlowOptions};
use crate::geometry::{GeometryState, HomogeneousState, MapKind, WarpedState};

/// Geometry block: the initial state of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryConfig {
    Homogeneous {
        n: usize,
        c0: f64,
        map: MapKind,
    },
    /// Periodic warped product over `x in [0, 2 pi)` with cosine-profile
    /// seams: `a = a_base + a_amplitude cos(mode x)`,
    /// `w = w_base + w_amplitude cos(mode x)`,
    /// `phi = winding x + phi_amplitude sin(mode x)`.
    Warped {
        n: usize,
        grid: usize,
        a_base: f64,
        a_amplitude: f64,
        w_base: f64,
        w_amplitude: f64,
        mode: usize,
        winding: i64,
        phi_amplitude: f64,
    },
}

impl GeometryConfig {
    /// Initial state described by the block.
    pub fn build(&self) -> Result<GeometryState> {
        match *self {
            GeometryConfig::Homogeneous { n, c0, map } => {
                Ok(GeometryState::Homogeneous(HomogeneousState::new(n, c0, map)?))
            }
            GeometryConfig::Warped {
                n,
                grid,
                a_base,
                a_amplitude,
                w_base,
                w_amplitude,
                mode,
                winding,
                phi_amplitude,
            } => {
                let dx = 2.0 * std::f64::consts::PI / grid as f64;
                let mf = mode as f64;
                let mut a = Vec::with_capacity(grid);
                let mut w = Vec::with_capacity(grid);
                let mut phi = Vec::with_capacity(grid);
                for j in 0..grid {
                    let x = j as f64 * dx;
                    a.push(a_base + a_amplitude * (mf * x).cos());
                    w.push(w_base + w_amplitude * (mf * x).cos());
                    phi.push(winding as f64 * x + phi_amplitude * (mf * x).sin());
                }
                Ok(GeometryState::Warped(WarpedState::new(n, a, w, phi, winding)?))
            }
        }
    }
}

/// Step control block, mapped onto [`FlowOptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub t_end: f64,
    /// Hard cap on any single step.
    pub dt0: f64,
    pub cfl: f64,
    pub snapshot_dt: f64,
    pub blowup_cap: f64,
    pub w_floor: f64,
    pub curvature_dt_cap: f64,
    pub max_steps: u64,
}

impl IntegratorConfig {
    pub fn flow_options(&self) -> FlowOptions {
        let mut opts = FlowOptions::to(self.t_end);
        opts.dt_max = self.dt0;
        opts.cfl = self.cfl;
        opts.snapshot_dt = self.snapshot_dt;
        opts.blowup_factor = self.blowup_cap;
        opts.w_floor = self.w_floor;
        opts.curvature_dt_cap = self.curvature_dt_cap;
        opts.max_steps = self.max_steps;
        opts
    }
}

/// Where reduced-geometry quantities are based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseTimeSpec {
    /// Base at the estimated singular time of the run.
    Singular,
    /// Base at a fixed regular time.
    At(f64),
}

/// Reduced-geometry analysis block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedConfig {
    pub base_time: BaseTimeSpec,
    pub base_point: f64,
    /// Explicit probe coordinates; empty when `probe_count` places them
    /// from the scenario seed instead.
    pub probe_points: Vec<f64>,
    pub probe_count: usize,
    pub probe_times: Vec<f64>,
    /// Time half-step of the w-residual check.
    pub w_dt: f64,
}

/// Harnack-check analysis block.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnackConfig {
    pub t_end: f64,
    pub eps0: f64,
    pub modes: usize,
    pub slices: Vec<f64>,
}

/// Which analyses a run performs, with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysesConfig {
    pub singularity: bool,
    pub reduced: Option<ReducedConfig>,
    pub soliton: bool,
    pub soliton_tolerance: f64,
    pub rescale_lambdas: Vec<f64>,
    pub harnack: Option<HarnackConfig>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub geometry: GeometryConfig,
    pub coupling: CouplingSchedule,
    pub integrator: IntegratorConfig,
    pub analyses: AnalysesConfig,
    pub seed: u64,
    pub output_dir: String,
}

/// One parsed `key = value` occurrence.
struct RawEntry {
    value: String,
    line: usize,
    used: bool,
}

/// Flat path -> entry map plus the violation accumulator shared by the
/// structural and semantic passes.
struct Entries {
    map: BTreeMap<String, RawEntry>,
    violations: Vec<String>,
}

impl Entries {
    fn fail(&mut self, msg: String) {
        self.violations.push(msg);
    }

    fn take(&mut self, path: &str) -> Option<(String, usize)> {
        let e = self.map.get_mut(path)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn req_str(&mut self, path: &str) -> Option<String> {
        match self.take(path) {
            Some((v, _)) => Some(v),
            None => {
                self.fail(format!("missing key '{path}'"));
                None
            }
        }
    }

    fn f64_at(&mut self, path: &str, v: &str, line: usize) -> Option<f64> {
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.fail(format!("line {line}: '{path}' expects a finite number, got '{v}'"));
                None
            }
        }
    }

    fn req_f64(&mut self, path: &str) -> Option<(f64, usize)> {
        let (v, line) = match self.take(path) {
            Some(e) => e,
            None => {
                self.fail(format!("missing key '{path}'"));
                return None;
            }
        };
        self.f64_at(path, &v, line).map(|x| (x, line))
    }

    fn opt_f64(&mut self, path: &str, default: f64) -> (f64, usize) {
        match self.take(path) {
            Some((v, line)) => match self.f64_at(path, &v, line) {
                Some(x) => (x, line),
                None => (default, line),
            },
            None => (default, 0),
        }
    }

    fn req_usize(&mut self, path: &str) -> Option<(usize, usize)> {
        let (v, line) = match self.take(path) {
            Some(e) => e,
            None => {
                self.fail(format!("missing key '{path}'"));
                return None;
            }
        };
        match v.parse::<usize>() {
            Ok(x) => Some((x, line)),
            Err(_) => {
                self.fail(format!(
                    "line {line}: '{path}' expects a non-negative integer, got '{v}'"
                ));
                None
            }
        }
    }

    fn opt_u64(&mut self, path: &str, default: u64) -> u64 {
        match self.take(path) {
            Some((v, line)) => match v.parse::<u64>() {
                Ok(x) => x,
                Err(_) => {
                    self.fail(format!(
                        "line {line}: '{path}' expects a non-negative integer, got '{v}'"
                    ));
                    default
                }
            },
            None => default,
        }
    }

    fn opt_usize(&mut self, path: &str, default: usize) -> (usize, usize) {
        match self.take(path) {
            Some((v, line)) => match v.parse::<usize>() {
                Ok(x) => (x, line),
                Err(_) => {
                    self.fail(format!(
                        "line {line}: '{path}' expects a non-negative integer, got '{v}'"
                    ));
                    (default, line)
                }
            },
            None => (default, 0),
        }
    }

    fn opt_i64(&mut self, path: &str, default: i64) -> i64 {
        match self.take(path) {
            Some((v, line)) => match v.parse::<i64>() {
                Ok(x) => x,
                Err(_) => {
                    self.fail(format!("line {line}: '{path}' expects an integer, got '{v}'"));
                    default
                }
            },
            None => default,
        }
    }

    fn opt_switch(&mut self, path: &str, default: bool) -> bool {
        match self.take(path) {
            Some((v, line)) => match v.as_str() {
                "on" | "true" => true,
                "off" | "false" => false,
                other => {
                    self.fail(format!(
                        "line {line}: '{path}' expects on or off, got '{other}'"
                    ));
                    default
                }
            },
            None => default,
        }
    }

    fn list_f64(&mut self, path: &str) -> Option<(Vec<f64>, usize)> {
        let (v, line) = self.take(path)?;
        let mut out = Vec::new();
        let mut ok = true;
        for part in v.split(',') {
            let part = part.trim();
            match part.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    self.fail(format!(
                        "line {line}: '{path}' expects comma-separated numbers, got '{part}'"
                    ));
                    ok = false;
                }
            }
        }
        ok.then_some((out, line))
    }

    fn has_block(&self, prefix: &str) -> bool {
        let dotted = format!("{prefix}.");
        self.map.keys().any(|k| k.starts_with(&dotted))
    }
}

/// Structural pass: lines to a flat path map, collecting syntax violations.
fn tokenize(text: &str) -> Entries {
    let mut entries = Entries { map: BTreeMap::new(), violations: Vec::new() };
    let mut stack: Vec<String> = Vec::new();
    let mut open_lines: Vec<usize> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "}" {
            if stack.pop().is_none() {
                entries.fail(format!("line {line}: unmatched '}}'"));
            } else {
                open_lines.pop();
            }
            continue;
        }
        if let Some(name) = content.strip_suffix('{') {
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                entries.fail(format!("line {line}: bad block name '{name}'"));
            }
            stack.push(name.to_string());
            open_lines.push(line);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            entries.fail(format!(
                "line {line}: expected 'key = value', 'name {{', or '}}', got '{content}'"
            ));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            entries.fail(format!("line {line}: bad key '{key}'"));
            continue;
        }
        let path = if stack.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", stack.join("."))
        };
        if entries.map.contains_key(&path) {
            entries.fail(format!("line {line}: duplicate key '{path}'"));
            continue;
        }
        entries
            .map
            .insert(path, RawEntry { value: value.to_string(), line, used: false });
    }
    for (name, line) in stack.iter().zip(&open_lines) {
        entries.fail(format!("line {line}: block '{name}' is never closed"));
    }
    entries
}

fn parse_geometry(e: &mut Entries) -> Option<GeometryConfig> {
    let kind = e.req_str("geometry.kind")?;
    match kind.as_str() {
        "homogeneous" => {
            let n = e.req_usize("geometry.n");
            let c0 = e.req_f64("geometry.c0");
            let map = match e.req_str("geometry.map").as_deref() {
                Some("constant") => Some(MapKind::Constant),
                Some("eigenmap") => Some(MapKind::IdentityEigenmap),
                Some(other) => {
                    e.fail(format!("'geometry.map' expects constant or eigenmap, got '{other}'"));
                    None
                }
                None => None,
            };
            if let Some((n, line)) = n {
                if n < 2 {
                    e.fail(format!("line {line}: 'geometry.n' must be >= 2, got {n}"));
                }
            }
            if let Some((c0, line)) = c0 {
                if c0 <= 0.0 {
                    e.fail(format!("line {line}: 'geometry.c0' must be positive, got {c0}"));
                }
            }
            Some(GeometryConfig::Homogeneous {
                n: n?.0,
                c0: c0?.0,
                map: map?,
            })
        }
        "warped" => {
            let n = e.req_usize("geometry.n");
            let grid = e.req_usize("geometry.grid");
            let (a_base, a_base_line) = e.opt_f64("geometry.a_base", 1.0);
            let (a_amplitude, a_amp_line) = e.opt_f64("geometry.a_amplitude", 0.0);
            let w_base = e.req_f64("geometry.w_base");
            let (w_amplitude, w_amp_line) = e.opt_f64("geometry.w_amplitude", 0.0);
            let (mode, mode_line) = e.opt_usize("geometry.mode", 1);
            let winding = e.opt_i64("geometry.winding", 0);
            let (phi_amplitude, _) = e.opt_f64("geometry.phi_amplitude", 0.0);
            if let Some((n, line)) = n {
                if n < 3 {
                    e.fail(format!("line {line}: 'geometry.n' must be >= 3 for warped, got {n}"));
                }
            }
            if let Some((grid, line)) = grid {
                if grid < 16 {
                    e.fail(format!("line {line}: 'geometry.grid' must be >= 16, got {grid}"));
                }
            }
            if a_base <= 0.0 {
                e.fail(format!("line {a_base_line}: 'geometry.a_base' must be positive, got {a_base}"));
            }
            if a_amplitude.abs() >= a_base && a_base > 0.0 {
                e.fail(format!(
                    "line {a_amp_line}: 'geometry.a_amplitude' must stay below a_base = {a_base} in magnitude"
                ));
            }
            if let Some((w_base, line)) = w_base {
                if w_base <= 0.0 {
                    e.fail(format!("line {line}: 'geometry.w_base' must be positive, got {w_base}"));
                }
                if w_amplitude.abs() >= w_base && w_base > 0.0 {
                    e.fail(format!(
                        "line {w_amp_line}: 'geometry.w_amplitude' must stay below w_base = {w_base} in magnitude"
                    ));
                }
            }
            if mode == 0 {
                e.fail(format!("line {mode_line}: 'geometry.mode' must be >= 1"));
            }
            Some(GeometryConfig::Warped {
                n: n?.0,
                grid: grid?.0,
                a_base,
                a_amplitude,
                w_base: w_base?.0,
                w_amplitude,
                mode,
                winding,
                phi_amplitude,
            })
        }
        other => {
            e.fail(format!("'geometry.kind' expects homogeneous or warped, got '{other}'"));
            None
        }
    }
}

fn parse_coupling(e: &mut Entries) -> Option<CouplingSchedule> {
    let kind = e.req_str("coupling.kind")?;
    match kind.as_str() {
        "constant" => {
            let (alpha, line) = e.req_f64("coupling.alpha")?;
            match CouplingSchedule::constant(alpha) {
                Ok(s) => Some(s),
                Err(err) => {
                    e.fail(format!("line {line}: 'coupling.alpha': {err}"));
                    None
                }
            }
        }
        "piecewise" => {
            let times = e.list_f64("coupling.times");
            let values = e.list_f64("coupling.values");
            if times.is_none() {
                e.fail("missing key 'coupling.times'".into());
            }
            if values.is_none() {
                e.fail("missing key 'coupling.values'".into());
            }
            let (times, line) = times?;
            let (values, _) = values?;
            match CouplingSchedule::piecewise_linear(times, values) {
                Ok(s) => Some(s),
                Err(err) => {
                    e.fail(format!("line {line}: 'coupling': {err}"));
                    None
                }
            }
        }
        other => {
            e.fail(format!("'coupling.kind' expects constant or piecewise, got '{other}'"));
            None
        }
    }
}

fn parse_integrator(e: &mut Entries) -> Option<IntegratorConfig> {
    let t_end = e.req_f64("integrator.t_end");
    let dt0 = e.req_f64("integrator.dt0");
    let (cfl, cfl_line) = e.opt_f64("integrator.cfl", 0.25);
    let snapshot_dt = e.req_f64("integrator.snapshot_dt");
    let (blowup_cap, cap_line) = e.opt_f64("integrator.blowup_cap", 1e10);
    let (w_floor, floor_line) = e.opt_f64("integrator.w_floor", 1e-8);
    let (curvature_dt_cap, curv_line) = e.opt_f64("integrator.curvature_dt_cap", 0.05);
    let max_steps = e.opt_u64("integrator.max_steps", 2_000_000);

    let checked = |cond: bool, msg: String, e: &mut Entries| {
        if !cond {
            e.fail(msg);
        }
    };
    if let Some((t_end, line)) = t_end {
        checked(t_end > 0.0, format!("line {line}: 'integrator.t_end' must be positive, got {t_end}"), e);
    }
    if let Some((dt0, line)) = dt0 {
        checked(dt0 > 0.0, format!("line {line}: 'integrator.dt0' must be positive, got {dt0}"), e);
    }
    checked(cfl > 0.0 && cfl <= 1.0, format!("line {cfl_line}: 'integrator.cfl' must lie in (0, 1], got {cfl}"), e);
    if let Some((sdt, line)) = snapshot_dt {
        checked(sdt > 0.0, format!("line {line}: 'integrator.snapshot_dt' must be positive, got {sdt}"), e);
    }
    checked(blowup_cap > 1.0, format!("line {cap_line}: 'integrator.blowup_cap' must exceed 1, got {blowup_cap}"), e);
    checked(w_floor > 0.0, format!("line {floor_line}: 'integrator.w_floor' must be positive, got {w_floor}"), e);
    checked(curvature_dt_cap > 0.0, format!("line {curv_line}: 'integrator.curvature_dt_cap' must be positive, got {curvature_dt_cap}"), e);
    if max_steps == 0 {
        e.fail("'integrator.max_steps' must be at least 1".into());
    }

    Some(IntegratorConfig {
        t_end: t_end?.0,
        dt0: dt0?.0,
        cfl,
        snapshot_dt: snapshot_dt?.0,
        blowup_cap,
        w_floor,
        curvature_dt_cap,
        max_steps,
    })
}

fn parse_reduced(e: &mut Entries, t_end: Option<f64>) -> Option<ReducedConfig> {
    let base_time = match e.req_str("analyses.reduced.base_time") {
        Some(v) if v == "singular" => Some(BaseTimeSpec::Singular),
        Some(v) => match v.parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Some(BaseTimeSpec::At(x)),
            _ => {
                e.fail(format!(
                    "'analyses.reduced.base_time' expects 'singular' or a positive time, got '{v}'"
                ));
                None
            }
        },
        None => None,
    };
    let (base_point, _) = e.opt_f64("analyses.reduced.base_point", 0.0);
    let probe_points = e.list_f64("analyses.reduced.probe_points");
    let (probe_count, count_line) = e.opt_usize("analyses.reduced.probe_count", 0);
    let probe_times = e.list_f64("analyses.reduced.probe_times");
    let (w_dt, w_dt_line) = e.opt_f64("analyses.reduced.w_dt", 1e-3);

    match (&probe_points, probe_count) {
        (Some(_), c) if c > 0 => {
            e.fail(format!(
                "line {count_line}: give either 'analyses.reduced.probe_points' or 'probe_count', not both"
            ));
        }
        (None, 0) => {
            e.fail("missing key 'analyses.reduced.probe_points' (or 'probe_count')".into());
        }
        _ => {}
    }
    if probe_count > 64 {
        e.fail(format!(
            "line {count_line}: 'analyses.reduced.probe_count' must be at most 64, got {probe_count}"
        ));
    }
    if probe_times.is_none() {
        e.fail("missing key 'analyses.reduced.probe_times'".into());
    }
    if let Some((times, line)) = &probe_times {
        if times.len() < 3 {
            e.fail(format!(
                "line {line}: 'analyses.reduced.probe_times' needs at least 3 entries for the monotonicity monitor"
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            e.fail(format!(
                "line {line}: 'analyses.reduced.probe_times' must increase strictly"
            ));
        }
        if let Some(t_end) = t_end {
            if times.iter().any(|&t| t < 0.0 || t >= t_end) {
                e.fail(format!(
                    "line {line}: 'analyses.reduced.probe_times' must lie inside [0, t_end = {t_end})"
                ));
            }
        }
        if let Some(BaseTimeSpec::At(t0)) = base_time {
            if let Some(&last) = times.last() {
                if last >= t0 {
                    e.fail(format!(
                        "line {line}: probe times must precede the reduced base time {t0}"
                    ));
                }
            }
        }
    }
    if w_dt <= 0.0 {
        e.fail(format!("line {w_dt_line}: 'analyses.reduced.w_dt' must be positive, got {w_dt}"));
    }

    Some(ReducedConfig {
        base_time: base_time?,
        base_point,
        probe_points: probe_points.map(|(v, _)| v).unwrap_or_default(),
        probe_count,
        probe_times: probe_times?.0,
        w_dt,
    })
}

fn parse_harnack(e: &mut Entries, run_t_end: Option<f64>) -> Option<HarnackConfig> {
    let t_end = e.req_f64("analyses.harnack.t_end");
    let (eps0, eps_line) = e.opt_f64("analyses.harnack.eps0", 1e-4);
    let (modes, modes_line) = e.opt_usize("analyses.harnack.modes", 48);
    let slices = e.list_f64("analyses.harnack.slices");
    if slices.is_none() {
        e.fail("missing key 'analyses.harnack.slices'".into());
    }

    if let Some((t, line)) = t_end {
        if t <= 0.0 {
            e.fail(format!("line {line}: 'analyses.harnack.t_end' must be positive, got {t}"));
        }
        if let Some(run_end) = run_t_end {
            if t > run_end {
                e.fail(format!(
                    "line {line}: 'analyses.harnack.t_end' must not exceed integrator.t_end = {run_end}"
                ));
            }
        }
        if eps0 <= 0.0 || eps0 >= t {
            e.fail(format!(
                "line {eps_line}: 'analyses.harnack.eps0' must lie in (0, t_end), got {eps0}"
            ));
        }
        if let Some((s, line)) = &slices {
            if s.is_empty() || s.windows(2).any(|w| w[1] <= w[0]) {
                e.fail(format!(
                    "line {line}: 'analyses.harnack.slices' must be a non-empty increasing list"
                ));
            }
            if s.iter().any(|&x| x < 0.0 || x > t - eps0) {
                e.fail(format!(
                    "line {line}: 'analyses.harnack.slices' must lie in [0, t_end - eps0]"
                ));
            }
        }
    }
    if modes == 0 {
        e.fail(format!("line {modes_line}: 'analyses.harnack.modes' must be >= 1"));
    }

    Some(HarnackConfig { t_end: t_end?.0, eps0, modes, slices: slices?.0 })
}

/// Parses and validates a config, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut e = tokenize(text);

    let name = e.req_str("name");
    if let Some(name) = &name {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            e.fail(format!("'name' must be a non-empty identifier, got '{name}'"));
        }
    }
    let seed = e.opt_u64("seed", 0);
    let output_dir = e.req_str("output_dir");
    if let Some(dir) = &output_dir {
        if dir.is_empty() {
            e.fail("'output_dir' must not be empty".into());
        }
    }

    let geometry = parse_geometry(&mut e);
    let coupling = parse_coupling(&mut e);
    let integrator = parse_integrator(&mut e);
    let t_end = integrator.as_ref().map(|i| i.t_end);

    let singularity = e.opt_switch("analyses.singularity", true);
    let reduced = if e.has_block("analyses.reduced") {
        parse_reduced(&mut e, t_end)
    } else {
        None
    };
    let soliton = e.opt_switch("analyses.soliton", false);
    let (soliton_tolerance, tol_line) = e.opt_f64("analyses.soliton_tolerance", 1e-8);
    if soliton_tolerance <= 0.0 {
        e.fail(format!(
            "line {tol_line}: 'analyses.soliton_tolerance' must be positive, got {soliton_tolerance}"
        ));
    }
    let rescale_lambdas = match e.list_f64("analyses.rescale_lambdas") {
        Some((l, line)) => {
            if l.iter().any(|&x| x <= 1.0) {
                e.fail(format!(
                    "line {line}: 'analyses.rescale_lambdas' must all exceed 1"
                ));
            }
            if l.windows(2).any(|w| w[1] <= w[0]) {
                e.fail(format!(
                    "line {line}: 'analyses.rescale_lambdas' must increase strictly"
                ));
            }
            l
        }
        None => Vec::new(),
    };
    let harnack = if e.has_block("analyses.harnack") {
        parse_harnack(&mut e, t_end)
    } else {
        None
    };
    if let (Some(HarnackConfig { .. }), Some(GeometryConfig::Warped { .. })) =
        (&harnack, &geometry)
    {
        e.fail("'analyses.harnack' needs a position-independent (homogeneous) geometry".into());
    }

    // reduced probes must fit the chart
    if let (Some(r), Some(g)) = (&reduced, &geometry) {
        let period = match g {
            GeometryConfig::Homogeneous { .. } => 2.0 * std::f64::consts::PI,
            GeometryConfig::Warped { .. } => 2.0 * std::f64::consts::PI,
        };
        for &q in &r.probe_points {
            if !(-period..=2.0 * period).contains(&q) {
                e.fail(format!(
                    "'analyses.reduced.probe_points' entry {q} is far outside the periodic chart [0, {period:.6})"
                ));
            }
        }
    }

    // every leftover key is unknown
    let unknown: Vec<(String, usize)> = e
        .map
        .iter()
        .filter(|(_, entry)| !entry.used)
        .map(|(path, entry)| (path.clone(), entry.line))
        .collect();
    for (path, line) in unknown {
        e.fail(format!("line {line}: unknown key '{path}'"));
    }

    if !e.violations.is_empty() {
        e.violations.sort();
        e.violations.dedup();
        return Err(Error::Config(e.violations));
    }

    Ok(ScenarioConfig {
        name: name.unwrap(),
        geometry: geometry.unwrap(),
        coupling: coupling.unwrap(),
        integrator: integrator.unwrap(),
        analyses: AnalysesConfig {
            singularity,
            reduced,
            soliton,
            soliton_tolerance,
            rescale_lambdas,
            harnack,
        },
        seed,
        output_dir: output_dir.unwrap(),
    })
}

/// Reads and parses a config file; returns the raw text alongside the
/// parsed scenario so callers can persist and hash the exact bytes.
pub fn parse_config_file(path: &std::path::Path) -> Result<(String, ScenarioConfig)> {
    let text = std::fs::read_to_string(path)?;
    let cfg = parse_config(&text)?;
    Ok((text, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUPLED: &str = "\
# coupled round two-sphere with the identity eigenmap
name = coupled_sphere
seed = 42
output_dir = runs/coupled_sphere

geometry {
    kind = homogeneous
    n = 2
    c0 = 1.0
    map = eigenmap
}
coupling {
    kind = constant
    alpha = 0.5
}
integrator {
    t_end = 2.0
    dt0 = 0.01
    cfl = 0.25
    snapshot_dt = 0.005
    blowup_cap = 1e8
    w_floor = 1e-6
}
analyses {
    singularity = on
    reduced {
        base_time = singular
        base_point = 0.4
        probe_points = 0.7, 1.0, 1.3
        probe_times = 0.3, 0.45, 0.6, 0.75, 0.85, 0.9
    }
    rescale_lambdas = 10, 100, 1000
    soliton = on
}
";

    #[test]
    fn coupled_sphere_fixture_parses() {
        let cfg = parse_config(COUPLED).unwrap();
        assert_eq!(cfg.name, "coupled_sphere");
        assert_eq!(cfg.seed, 42);
        assert_eq!(
            cfg.geometry,
            GeometryConfig::Homogeneous { n: 2, c0: 1.0, map: MapKind::IdentityEigenmap }
        );
        assert_eq!(cfg.coupling.alpha(0.3), 0.5);
        assert_eq!(cfg.integrator.t_end, 2.0);
        assert_eq!(cfg.analyses.rescale_lambdas, vec![10.0, 100.0, 1000.0]);
        let reduced = cfg.analyses.reduced.unwrap();
        assert_eq!(reduced.base_time, BaseTimeSpec::Singular);
        assert_eq!(reduced.probe_times.len(), 6);
        assert!(cfg.analyses.soliton);
        assert!(cfg.analyses.harnack.is_none());
    }

    #[test]
    fn warped_geometry_builds_the_cosine_profiles() {
        let text = "\
name = pinch
output_dir = out
geometry {
    kind = warped
    n = 3
    grid = 64
    w_base = 1.0
    w_amplitude = 0.3
    winding = 1
}
coupling {
    kind = constant
    alpha = 1.0
}
integrator {
    t_end = 0.5
    dt0 = 0.01
    snapshot_dt = 0.01
}
";
        let cfg = parse_config(text).unwrap();
        let state = cfg.geometry.build().unwrap();
        let s = match state {
            GeometryState::Warped(s) => s,
            _ => panic!("expected warped"),
        };
        assert_eq!(s.grid_len(), 64);
        assert!((s.w[0] - 1.3).abs() < 1e-15);
        assert!((s.w[32] - 0.7).abs() < 1e-15);
        assert!((s.a[7] - 1.0).abs() < 1e-15);
        assert_eq!(s.winding, 1);
        let dx = 2.0 * std::f64::consts::PI / 64.0;
        assert!((s.phi[5] - 5.0 * dx).abs() < 1e-15);
    }

    #[test]
    fn semantic_violations_are_all_reported() {
        let text = COUPLED
            .replace("c0 = 1.0", "c0 = -1.0")
            .replace("cfl = 0.25", "cfl = 1.5")
            .replace("alpha = 0.5", "alpha = 0.5\n    nonsense_key = 7");
        let err = parse_config(&text).unwrap_err();
        let Error::Config(violations) = err else { panic!("expected Config error") };
        let joined = violations.join("\n");
        assert!(joined.contains("geometry.c0"), "{joined}");
        assert!(joined.contains("integrator.cfl"), "{joined}");
        assert!(joined.contains("unknown key 'coupling.nonsense_key'"), "{joined}");
        assert_eq!(violations.len(), 3, "{joined}");
    }

    #[test]
    fn syntax_violations_carry_line_numbers() {
        let text = "\
name = x
output_dir = out
geometry {
    kind = homogeneous
    broken line without equals
";
        let err = parse_config(text).unwrap_err();
        let Error::Config(v) = err else { panic!("expected Config error") };
        let joined = v.join("\n");
        assert!(joined.contains("line 5"), "{joined}");
        assert!(joined.contains("line 3: block 'geometry' is never closed"), "{joined}");
    }

    #[test]
    fn duplicate_and_misplaced_probes_are_rejected() {
        let text = COUPLED.replace(
            "probe_points = 0.7, 1.0, 1.3",
            "probe_points = 0.7, 1.0, 1.3\n        probe_count = 4",
        );
        let err = parse_config(&text).unwrap_err();
        let Error::Config(v) = err else { panic!("expected Config error") };
        assert!(v.join("\n").contains("not both"));

        let text = COUPLED.replace("seed = 42", "seed = 42\nseed = 43");
        let err = parse_config(&text).unwrap_err();
        let Error::Config(v) = err else { panic!("expected Config error") };
        assert!(v.join("\n").contains("duplicate key 'seed'"));
    }

    #[test]
    fn piecewise_coupling_and_probe_time_windows() {
        let text = COUPLED
            .replace(
                "coupling {\n    kind = constant\n    alpha = 0.5\n}",
                "coupling {\n    kind = piecewise\n    times = 0.0, 1.0, 2.0\n    values = 0.5, 0.3, 0.3\n}",
            )
            .replace("probe_times = 0.3, 0.45, 0.6, 0.75, 0.85, 0.9", "probe_times = 0.3, 0.45, 0.6");
        let cfg = parse_config(&text).unwrap();
        assert!((cfg.coupling.alpha(0.5) - 0.4).abs() < 1e-12);

        let bad = text.replace("probe_times = 0.3, 0.45, 0.6", "probe_times = 0.3, 2.5, 3.0");
        let err = parse_config(&bad).unwrap_err();
        let Error::Config(v) = err else { panic!("expected Config error") };
        assert!(v.join("\n").contains("probe_times"), "{v:?}");
    }

    #[test]
    fn harnack_block_is_validated_and_restricted() {
        let with = COUPLED.replace(
            "    soliton = on\n",
            "    soliton = on\n    harnack {\n        t_end = 0.5\n        slices = 0.1, 0.2, 0.4\n    }\n",
        );
        let cfg = parse_config(&with).unwrap();
        let h = cfg.analyses.harnack.unwrap();
        assert_eq!(h.modes, 48);
        assert_eq!(h.slices.len(), 3);

        let bad = with.replace("slices = 0.1, 0.2, 0.4", "slices = 0.1, 0.6");
        let err = parse_config(&bad).unwrap_err();
        let Error::Config(v) = err else { panic!("expected Config error") };
        assert!(v.join("\n").contains("harnack.slices"), "{v:?}");
    }
}
