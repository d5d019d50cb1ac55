//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line with its pinned tolerances (run with `--nocapture` to see
//! the lines on success).

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrflab::flow::{run_flow, AnalyticFamily, CouplingSchedule, FlowOptions, FlowTrajectory};
use hrflab::geometry::oracle::{fd_curvature_oracle, sphere_chart, warped_chart};
use hrflab::geometry::{GeometryState, HomogeneousState, MapKind, WarpedState};
use hrflab::reduced::{
    minimize_l, quadrature_reduced_length, reduced_length_singular, reduced_volume, w_residual,
    ReducedBase,
};
use hrflab::singularity::{
    analyze, convergence_diagnostic, rescale, singular_volume, SingularityOutcome,
    SingularityReport,
};
use hrflab::soliton::{
    construct_exact, normalization_defect, rigidity_check, soliton_residual, ExactSoliton,
};

fn verdict(num: u32, name: &str, problems: Vec<String>) {
    if problems.is_empty() {
        println!("criterion {num} ({name}): PASS");
    } else {
        println!("criterion {num} ({name}): FAIL");
        for p in &problems {
            println!("  - {p}");
        }
        panic!("criterion {num} failed:\n{}", problems.join("\n"));
    }
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn shipped_scenarios() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .expect("scenarios directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no shipped scenarios found");
    paths
}

/// Simulated coupled-sphere run into blow-up (n = 2, alpha = 1/2, c0 = 1).
fn coupled_sphere_run() -> &'static FlowTrajectory {
    static RUN: OnceLock<FlowTrajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let state = GeometryState::Homogeneous(
            HomogeneousState::new(2, 1.0, MapKind::IdentityEigenmap).unwrap(),
        );
        let schedule = CouplingSchedule::constant(0.5).unwrap();
        let mut opts = FlowOptions::to(2.0);
        opts.snapshot_dt = 0.005;
        opts.blowup_factor = 1e8;
        run_flow(&state, &schedule, &opts).unwrap()
    })
}

/// Simulated round-sphere run into blow-up (n = 2, constant map, c0 = 2).
fn round_sphere_run() -> &'static FlowTrajectory {
    static RUN: OnceLock<FlowTrajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let state =
            GeometryState::Homogeneous(HomogeneousState::new(2, 2.0, MapKind::Constant).unwrap());
        let schedule = CouplingSchedule::constant(1.0).unwrap();
        let mut opts = FlowOptions::to(2.0);
        opts.snapshot_dt = 0.005;
        opts.blowup_factor = 1e8;
        run_flow(&state, &schedule, &opts).unwrap()
    })
}

/// The criterion-9 neckpinch: n = 3, J = 256, w = 1 + 0.3 cos x, unit
/// winding, alpha = 1; shared with criterion 10's trend assertion.
fn neckpinch_run() -> &'static (FlowTrajectory, SingularityReport) {
    static RUN: OnceLock<(FlowTrajectory, SingularityReport)> = OnceLock::new();
    RUN.get_or_init(|| {
        let grid = 256;
        let dx = 2.0 * std::f64::consts::PI / grid as f64;
        let mut a = Vec::with_capacity(grid);
        let mut w = Vec::with_capacity(grid);
        let mut phi = Vec::with_capacity(grid);
        for j in 0..grid {
            let x = j as f64 * dx;
            a.push(1.0);
            w.push(1.0 + 0.3 * x.cos());
            phi.push(x);
        }
        let state = GeometryState::Warped(WarpedState::new(3, a, w, phi, 1).unwrap());
        let schedule = CouplingSchedule::constant(1.0).unwrap();
        let mut opts = FlowOptions::to(1.0);
        opts.snapshot_dt = 0.002;
        opts.blowup_factor = 1e8;
        opts.w_floor = 1e-4;
        let tr = run_flow(&state, &schedule, &opts).unwrap();
        let report = match analyze(&tr).unwrap() {
            SingularityOutcome::Singular { report, .. } => report,
            SingularityOutcome::NonSingular { .. } => panic!("neckpinch failed to pinch"),
        };
        (tr, report)
    })
}

fn homog_c(state: &GeometryState) -> f64 {
    match state {
        GeometryState::Homogeneous(s) => s.c,
        _ => panic!("expected homogeneous state"),
    }
}

#[test]
fn criterion_1_exact_solution_reproduction() {
    let mut problems = Vec::new();
    for (name, tr, c_of_t) in [
        ("round sphere", round_sphere_run(), (|t: f64| 2.0 - 2.0 * t) as fn(f64) -> f64),
        ("coupled sphere", coupled_sphere_run(), (|t: f64| 1.0 - t) as fn(f64) -> f64),
    ] {
        let mut worst = 0.0f64;
        for (i, &t) in tr.times.iter().enumerate() {
            let expect = c_of_t(t);
            let got = homog_c(&tr.states[i]);
            worst = worst.max(((got - expect) / expect).abs());
        }
        if worst > 1e-6 {
            problems.push(format!("{name}: worst relative c error {worst:e} > 1e-6"));
        }
        match analyze(tr).unwrap() {
            SingularityOutcome::Singular { estimate, .. } => {
                if (estimate.t_sing - 1.0).abs() > 1e-4 {
                    problems.push(format!(
                        "{name}: T_est = {} misses 1.0 by more than 1e-4",
                        estimate.t_sing
                    ));
                }
            }
            SingularityOutcome::NonSingular { .. } => {
                problems.push(format!("{name}: no singularity detected"))
            }
        }
    }
    verdict(1, "exact solutions: c(t) rel 1e-6, T_est within 1e-4", problems);
}

#[test]
fn criterion_2_type_i_certification() {
    let mut problems = Vec::new();
    for (name, tr, constant) in [
        ("round sphere", round_sphere_run(), 1.0),
        ("coupled sphere", coupled_sphere_run(), 2.0),
    ] {
        let report = match analyze(tr).unwrap() {
            SingularityOutcome::Singular { report, .. } => report,
            SingularityOutcome::NonSingular { .. } => {
                problems.push(format!("{name}: no singularity detected"));
                continue;
            }
        };
        let rel = (report.type_i_constant - constant).abs() / constant;
        if rel > 0.02 {
            problems.push(format!(
                "{name}: Type I constant {} misses {constant} by {:.2}% > 2%",
                report.type_i_constant,
                100.0 * rel
            ));
        }
        if (report.type_a.exponent - 1.0).abs() > 0.05 {
            problems.push(format!(
                "{name}: blow-up exponent {} outside 1 +- 0.05",
                report.type_a.exponent
            ));
        }
        if !report.type_a.is_type_i {
            problems.push(format!("{name}: fit not classified Type I"));
        }
    }
    verdict(2, "Type I constants within 2%, exponent within 0.05", problems);
}

#[test]
fn criterion_3_gaussian_reduced_length() {
    let mut problems = Vec::new();

    // direct minimizer on the static flat chart: l = d^2 / (4 tau)
    let schedule = CouplingSchedule::constant(1.0).unwrap();
    let flat = FlowTrajectory::from_analytic(
        AnalyticFamily::StaticFlat { n: 3, r_max: 8.0, samples: 257 },
        schedule.clone(),
        vec![0.0, 3.0, 6.0],
    )
    .unwrap();
    let t0 = 5.5;
    let mut worst_flat = 0.0f64;
    for d in [0.4, 0.8, 1.2, 1.6, 2.0] {
        for tau in [0.3, 0.6, 1.0, 1.5, 2.2] {
            let out = minimize_l(&flat, 0.0, t0, d, t0 - tau).unwrap();
            worst_flat = worst_flat.max((out.l - d * d / (4.0 * tau)).abs());
        }
    }
    if worst_flat > 1e-4 {
        problems.push(format!(
            "gaussian grid: worst |l - d^2/(4 tau)| = {worst_flat:e} > 1e-4"
        ));
    }

    // quadrature oracle vs direct minimizer on both sphere families
    for (name, family, alpha) in [
        ("round sphere", AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false }, 1.0),
        ("coupled sphere", AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true }, 0.5),
    ] {
        let schedule = CouplingSchedule::constant(alpha).unwrap();
        let tr =
            FlowTrajectory::from_analytic(family, schedule, vec![0.0, 0.5, 0.95]).unwrap();
        let t0 = 0.9;
        let mut worst = 0.0f64;
        for theta in [0.5, 1.5, 2.8] {
            for t_bar in [0.2, 0.45, 0.7] {
                let (_, l_quad) = quadrature_reduced_length(&tr, theta, t0, t_bar).unwrap();
                let l_min = minimize_l(&tr, 0.0, t0, theta, t_bar).unwrap().l;
                worst = worst.max((l_quad - l_min).abs());
            }
        }
        if worst > 1e-4 {
            problems.push(format!(
                "{name}: quadrature vs minimizer gap {worst:e} > 1e-4"
            ));
        }
    }
    verdict(3, "reduced length: Gaussian 5x5 grid and quadrature oracle within 1e-4", problems);
}

#[test]
fn criterion_4_singular_base_theorems() {
    let mut problems = Vec::new();
    let schedule = CouplingSchedule::constant(0.5).unwrap();
    let tr = FlowTrajectory::from_analytic(
        AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true },
        schedule,
        vec![0.0, 0.5, 0.99],
    )
    .unwrap();
    let t_sing = 1.0;
    let p = 0.4;
    let points = [0.7, 1.0, 1.5, 2.5];
    let times = [0.3, 0.45, 0.6, 0.75, 0.85, 0.9];

    // bases tightening geometrically to tau = 1e-8
    let bases: Vec<f64> = (0..7).map(|k| t_sing - 1e-2 * 10f64.powi(-(k as i32))).collect();
    let sl = reduced_length_singular(&tr, t_sing, &bases, p, &points, &times).unwrap();
    let limit = sl.tables.last().unwrap();
    let mut worst_l = 0.0f64;
    for row in limit {
        for &l in row {
            worst_l = worst_l.max((l - 1.0).abs());
        }
    }
    if worst_l > 1e-3 {
        problems.push(format!(
            "singular reduced length misses n/2 = 1 by {worst_l:e} > 1e-3"
        ));
    }
    if !sl.cauchy_monotone {
        problems.push("base ladder is not Cauchy-monotone".into());
    }

    let expect = (-1.0f64).exp();
    let mut worst_v = 0.0f64;
    for &t_bar in &times {
        let v = reduced_volume(&tr, ReducedBase::Singular(t_sing), p, t_bar).unwrap();
        worst_v = worst_v.max((v - expect).abs());
    }
    if worst_v > 1e-3 {
        problems.push(format!(
            "reduced volume drifts from 1/e by {worst_v:e} > 1e-3 across 6 times"
        ));
    }
    verdict(4, "singular base: l = n/2 within 1e-3, V = 1/e within 1e-3", problems);
}

#[test]
fn criterion_5_monotone_volume_on_shipped_scenarios() {
    let mut problems = Vec::new();
    for path in shipped_scenarios() {
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        let tmp = tempfile::tempdir().unwrap();
        let run_dir = match hrflab::runner::run_scenario(&path, Some(&tmp.path().join("run"))) {
            Ok(d) => d,
            Err(e) => {
                problems.push(format!("{name}: run failed: {e}"));
                continue;
            }
        };
        let body = std::fs::read_to_string(run_dir.join("reduced_volume.csv")).unwrap();
        let values: Vec<f64> = body
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        if values.len() < 3 {
            problems.push(format!("{name}: volume series too short"));
            continue;
        }
        for pair in values.windows(2) {
            if pair[1] < pair[0] - 1e-3 * pair[0].abs() {
                problems.push(format!(
                    "{name}: V drops from {} to {} beyond 1e-3 V",
                    pair[0], pair[1]
                ));
            }
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > 1.0 + 1e-3 {
            problems.push(format!("{name}: V = {max} exceeds 1 + 1e-3"));
        }
    }
    verdict(5, "V(t_bar) non-decreasing within 1e-3 V and <= 1 + 1e-3 on all scenarios", problems);
}

#[test]
fn criterion_6_curvature_oracle_equivalence() {
    let mut problems = Vec::new();
    let steps = [4e-3, 2e-3, 1e-3];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);

    // five random smooth warped profiles, ansatz sampled on a reference grid
    // so its own discretization error sits far below the oracle's
    let j_ref: usize = 65536;
    let dx = 2.0 * std::f64::consts::PI / j_ref as f64;
    for profile in 0..5 {
        let mut coef = [[0.0f64; 4]; 4];
        for row in coef.iter_mut() {
            for c in row.iter_mut() {
                *c = rng.gen_range(-0.08..0.08);
            }
        }
        let a_fn = move |x: f64| {
            1.0 + coef[0][1] * x.cos() + coef[0][2] * (2.0 * x).cos() + coef[0][3] * (2.0 * x).sin()
        };
        let w_fn = move |x: f64| {
            1.2 + coef[1][1] * x.cos() + coef[1][2] * (3.0 * x).sin() + coef[1][3] * (2.0 * x).cos()
        };
        let n = 3;
        let (a, w, phi): (Vec<f64>, Vec<f64>, Vec<f64>) = {
            let mut a = Vec::with_capacity(j_ref);
            let mut w = Vec::with_capacity(j_ref);
            for j in 0..j_ref {
                let x = j as f64 * dx;
                a.push(a_fn(x));
                w.push(w_fn(x));
            }
            (a, w, vec![0.0; j_ref])
        };
        let state = WarpedState::new(n, a, w, phi, 0).unwrap();
        let pack = state.curvature(0.0);
        let col = 11111 + 701 * profile;
        let x = col as f64 * dx;
        let chart = warped_chart(n, a_fn, w_fn);
        let point = [x, 1.1, 0.7];
        let errs: Vec<f64> = steps
            .iter()
            .map(|&h| {
                let oracle = fd_curvature_oracle(&chart, &point, h).unwrap();
                let e_sc = (oracle.sc - pack.sc[col]).abs();
                let e_rm = (oracle.rm_norm - pack.rm_norm[col]).abs();
                e_sc.max(e_rm)
            })
            .collect();
        for k in 0..steps.len() - 1 {
            let order = (errs[k] / errs[k + 1]).log2();
            if !(order >= 1.9) {
                problems.push(format!(
                    "warped profile {profile}: order {order:.3} < 1.9 between h = {} and {} (errors {:e}, {:e})",
                    steps[k], steps[k + 1], errs[k], errs[k + 1]
                ));
            }
        }
    }

    // homogeneous spheres at random scales against the sphere chart
    for _ in 0..5 {
        let c0 = rng.gen_range(0.5..3.0);
        let state = HomogeneousState::new(3, c0, MapKind::Constant).unwrap();
        let pack = state.curvature(0.0);
        let chart = sphere_chart(3, c0);
        let point = [1.0, 1.2, 0.5];
        let errs: Vec<f64> = steps
            .iter()
            .map(|&h| {
                let oracle = fd_curvature_oracle(&chart, &point, h).unwrap();
                (oracle.sc - pack.sc[0]).abs().max((oracle.rm_norm - pack.rm_norm[0]).abs())
            })
            .collect();
        for k in 0..steps.len() - 1 {
            let order = (errs[k] / errs[k + 1]).log2();
            if !(order >= 1.9) {
                problems.push(format!(
                    "sphere c0 = {c0:.3}: order {order:.3} < 1.9 (errors {:e}, {:e})",
                    errs[k], errs[k + 1]
                ));
            }
        }
    }
    verdict(6, "curvature ops vs FD oracle, order >= 1.9 over h in {4e-3, 2e-3, 1e-3}", problems);
}

#[test]
fn criterion_7_soliton_residual_suite() {
    let mut problems = Vec::new();

    // canonical, map, trace, elliptic residuals on the exact fixtures; the
    // flat fixture gets the discretized escape hatch (order >= 1.9 under
    // sample doubling) although it lands below the analytic bound anyway
    let fixtures = [
        ("gaussian", ExactSoliton::Gaussian { n: 3, r_max: 8.0, samples: 257, tau: 1.0 }),
        ("round sphere n=2", ExactSoliton::RoundSphere { n: 2, tau: 1.0 }),
        ("round sphere n=3", ExactSoliton::RoundSphere { n: 3, tau: 0.7 }),
        ("coupled sphere", ExactSoliton::CoupledSphere { n: 2, alpha: 0.5, tau: 1.0 }),
    ];
    for (name, kind) in &fixtures {
        let spec = construct_exact(kind).unwrap();
        let res = soliton_residual(&spec).unwrap();
        let defect = normalization_defect(&spec);
        if res.max() > 1e-8 || defect.abs() > 1e-8 {
            let converges = match kind {
                ExactSoliton::Gaussian { n, r_max, tau, .. } => {
                    let errs: Vec<f64> = [129usize, 257, 513]
                        .iter()
                        .map(|&m| {
                            let s = construct_exact(&ExactSoliton::Gaussian {
                                n: *n,
                                r_max: *r_max,
                                samples: m,
                                tau: *tau,
                            })
                            .unwrap();
                            soliton_residual(&s).unwrap().max()
                        })
                        .collect();
                    (0..2).all(|k| (errs[k] / errs[k + 1]).log2() >= 1.9)
                }
                _ => false,
            };
            if !converges {
                problems.push(format!(
                    "{name}: residual {:e} / defect {:e} above 1e-8 without order-2 convergence",
                    res.max(),
                    defect
                ));
            }
        }
    }

    // w-residuals of the monotone-quantity identity on the same families
    let schedule = CouplingSchedule::constant(1.0).unwrap();
    let flat = FlowTrajectory::from_analytic(
        AnalyticFamily::StaticFlat { n: 3, r_max: 8.0, samples: 257 },
        schedule.clone(),
        vec![0.0, 1.0, 2.0],
    )
    .unwrap();
    let radii: Vec<f64> = match flat.state_at(1.0).unwrap() {
        GeometryState::Flat(s) => s.radii(),
        _ => unreachable!(),
    };
    let l_gauss: Vec<f64> = radii.iter().map(|r| r * r / 4.0).collect();
    check_w(&mut problems, "gaussian", &flat, &l_gauss, 1.0, 2.0);

    for (name, family, alpha, t_sing, n) in [
        ("round sphere n=2", AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false }, 1.0, 1.0, 2),
        ("round sphere n=3", AnalyticFamily::HomogeneousLinear { n: 3, c0: 4.0, eigenmap: false }, 1.0, 1.0, 3),
        ("coupled sphere", AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true }, 0.5, 1.0, 2),
    ] {
        let schedule = CouplingSchedule::constant(alpha).unwrap();
        let tr = FlowTrajectory::from_analytic(family, schedule, vec![0.0, 0.5, 0.95]).unwrap();
        let l_field = [n as f64 / 2.0];
        check_w(&mut problems, name, &tr, &l_field, 0.5, t_sing);
    }

    // the self-similar non-canonical fixture must FAIL the canonical check
    let odd = construct_exact(&ExactSoliton::NonCanonicalSphere { t: 0.5 }).unwrap();
    let res = soliton_residual(&odd).unwrap();
    if res.canonical < 0.1 {
        problems.push(format!(
            "non-canonical fixture unexpectedly near canonical form ({:e})",
            res.canonical
        ));
    }
    verdict(7, "soliton residuals <= 1e-8 (or order >= 2), non-canonical fixture fails", problems);
}

/// w-residual at dt = 1e-3 must sit below 1e-8, or show order >= 1.9 in dt.
fn check_w(
    problems: &mut Vec<String>,
    name: &str,
    tr: &FlowTrajectory,
    l_field: &[f64],
    t: f64,
    t_sing: f64,
) {
    let dts = [4e-3, 2e-3, 1e-3];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| w_residual(tr, l_field, t, dt, t_sing).unwrap())
        .collect();
    let analytic_ok = errs[2] <= 1e-8;
    let order_ok = (0..2).all(|k| (errs[k] / errs[k + 1]).log2() >= 1.9);
    if !analytic_ok && !order_ok {
        problems.push(format!(
            "{name}: w-residuals {errs:?} neither below 1e-8 nor order 2 in dt"
        ));
    }
}

#[test]
fn criterion_8_rigidity_property() {
    let mut problems = Vec::new();
    let fixtures = [
        ("gaussian", ExactSoliton::Gaussian { n: 3, r_max: 8.0, samples: 257, tau: 1.0 }),
        ("round sphere n=2", ExactSoliton::RoundSphere { n: 2, tau: 1.0 }),
        ("round sphere n=3", ExactSoliton::RoundSphere { n: 3, tau: 0.7 }),
        ("coupled sphere", ExactSoliton::CoupledSphere { n: 2, alpha: 0.5, tau: 1.0 }),
    ];
    for (name, kind) in &fixtures {
        let spec = construct_exact(kind).unwrap();
        let rig = rigidity_check(&spec, 1e-9);
        if rig.min_sh < -1e-8 {
            problems.push(format!("{name}: min Sh = {:e} < -1e-8", rig.min_sh));
        }
        match kind {
            ExactSoliton::Gaussian { .. } => {
                if !rig.gaussian_case {
                    problems.push(format!("{name}: equality case not detected"));
                } else if rig.gaussian_verified != Some(true) {
                    problems.push(format!(
                        "{name}: flat-and-constant-map implication not verified"
                    ));
                }
            }
            _ => {
                if rig.gaussian_case {
                    problems.push(format!("{name}: spuriously flagged as the equality case"));
                }
            }
        }
    }
    verdict(8, "min Sh >= -1e-8 on shrinkers; Gaussian equality implies flat + constant", problems);
}

#[test]
fn criterion_9_singular_set_coherence() {
    let mut problems = Vec::new();
    let (tr, report) = neckpinch_run();
    let grid = report.masks.sigma.len();
    let cells = |mask: &[bool]| -> Vec<usize> {
        mask.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect()
    };
    let circ = |i: usize, j: usize| {
        let d = i.abs_diff(j);
        d.min(grid - d)
    };
    let hausdorff = |a: &[usize], b: &[usize]| -> usize {
        let one_way = |from: &[usize], to: &[usize]| {
            from.iter()
                .map(|&i| to.iter().map(|&j| circ(i, j)).min().unwrap_or(grid))
                .max()
                .unwrap_or(grid)
        };
        one_way(a, b).max(one_way(b, a))
    };
    let sigma = cells(&report.masks.sigma);
    let sigma_i = cells(&report.masks.sigma_i);
    let sigma_s = cells(&report.masks.sigma_s);
    if sigma.is_empty() || sigma_i.is_empty() || sigma_s.is_empty() {
        problems.push("a singular-set mask is empty".into());
    } else {
        for (pair, d) in [
            ("Sigma vs Sigma_I", hausdorff(&sigma, &sigma_i)),
            ("Sigma vs Sigma_S", hausdorff(&sigma, &sigma_s)),
            ("Sigma_I vs Sigma_S", hausdorff(&sigma_i, &sigma_s)),
        ] {
            if d > 2 {
                problems.push(format!("{pair}: masks disagree by {d} > 2 grid cells"));
            }
        }
    }
    if !report.masks.inclusions_hold {
        problems.push("mask inclusions Sigma_S <= Sigma_I <= Sigma failed".into());
    }

    let floor = 1e-3 * report.type_i_constant;
    for &(j, v) in &report.nonoscillation.per_point {
        if v < floor {
            problems.push(format!(
                "nonoscillation constant {v:e} at cell {j} below 1e-3 x Type I constant"
            ));
        }
    }

    // volume of the singular set over the final decade of (T_est - t)
    let series = singular_volume(tr, &report.masks.sigma).unwrap();
    let t_last = series.last().unwrap().0;
    let cutoff = 10.0 * (report.t_est - t_last);
    let late: Vec<f64> = series
        .iter()
        .filter(|(t, _)| report.t_est - t <= cutoff)
        .map(|&(_, v)| v)
        .collect();
    if late.len() < 3 {
        problems.push("too few snapshots in the final decade".into());
    }
    for pair in late.windows(2) {
        if !(pair[1] < pair[0] + 1e-12) {
            problems.push(format!(
                "Vol(Sigma) fails to decrease: {} -> {}",
                pair[0], pair[1]
            ));
            break;
        }
    }
    verdict(9, "neckpinch masks within 2 cells, nonoscillation >= 1e-3 C, Vol(Sigma) decreasing", problems);
}

#[test]
fn criterion_10_blowup_self_similarity() {
    let mut problems = Vec::new();

    let tr = coupled_sphere_run();
    let t_sing = match analyze(tr).unwrap() {
        SingularityOutcome::Singular { estimate, .. } => estimate.t_sing,
        SingularityOutcome::NonSingular { .. } => panic!("coupled sphere failed to blow up"),
    };
    let rescaled: Vec<_> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&l| rescale(tr, t_sing, l, None, None).unwrap())
        .collect();
    let conv = convergence_diagnostic(&rescaled, -1.0).unwrap();
    for (i, &r) in conv.residuals.iter().enumerate() {
        if r > 1e-3 {
            problems.push(format!(
                "coupled sphere at lambda = {}: canonical residual {r:e} > 1e-3",
                [10.0, 100.0, 1000.0][i]
            ));
        }
    }
    for (i, row) in conv.distances.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if i != j && d > 1e-6 {
                problems.push(format!(
                    "coupled sphere: profile distance [{i}][{j}] = {d:e} > 1e-6"
                ));
            }
        }
    }

    // neckpinch: trend assertion only
    let (tr, report) = neckpinch_run();
    let base = match &tr.states[tr.snapshot_count() - 1] {
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
    let rescaled: Vec<_> = [10.0, 100.0]
        .iter()
        .map(|&l| rescale(tr, report.t_est, l, base, None).unwrap())
        .collect();
    let conv = convergence_diagnostic(&rescaled, -1.0).unwrap();
    if !conv.residual_nonincreasing {
        problems.push(format!(
            "neckpinch residuals increase along lambda: {:?}",
            conv.residuals
        ));
    }
    verdict(10, "rescaled residuals <= 1e-3, distances <= 1e-6; neckpinch trend non-increasing", problems);
}

#[test]
fn criterion_11_determinism() {
    let mut problems = Vec::new();
    for path in shipped_scenarios() {
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        let tmp = tempfile::tempdir().unwrap();
        let a = hrflab::runner::run_scenario(&path, Some(&tmp.path().join("a"))).unwrap();
        let b = hrflab::runner::run_scenario(&path, Some(&tmp.path().join("b"))).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        for file in &names {
            let bytes_a = std::fs::read(a.join(file)).unwrap();
            let bytes_b = std::fs::read(b.join(file)).unwrap();
            if bytes_a != bytes_b {
                problems.push(format!("{name}/{file}: reruns differ"));
            }
        }
        if names.len() < 4 {
            problems.push(format!("{name}: suspiciously few artifacts ({})", names.len()));
        }
    }
    verdict(11, "two runs of every shipped scenario byte-identical", problems);
}
