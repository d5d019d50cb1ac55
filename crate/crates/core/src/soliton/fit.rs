//! Least-squares reconstruction of a soliton potential from a geometry.
//!
//! The canonical equations are linear in `grad f`, so we fit `v = f_x`
//! (coordinate derivative) by least squares and integrate. Base-direction
//! rows are discretized at cell midpoints with a compact two-point stencil;
//! wide centered stencils would split the unknowns into decoupled even/odd
//! chains and let a sawtooth mode through.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{GeometryState, WarpedState};
use crate::soliton::SolitonSpec;

/// Weight of the soft gauge row that pins the constant mode of `v` on a
/// window fit. Small enough not to perturb the physical rows.
const GAUGE_WEIGHT: f64 = 1e-6;
/// Weight of the integrability row `sum v = 0` on a periodic fit; a
/// potential with tilted derivative would not close up around the circle.
const PERIODIC_WEIGHT: f64 = 1e3;

/// Canonical-form residuals evaluated strictly inside a window, using
/// non-wrapping stencils, so a window-fitted potential can be judged
/// without inventing values outside the window.
#[derive(Debug, Clone, Copy)]
pub struct WindowResiduals {
    pub canonical: f64,
    pub map: f64,
}

/// Fits a potential making the state as close to canonical form as the
/// geometry allows.
///
/// * homogeneous: the constant `f = -Sh / (2 sigma)` (no window).
/// * flat: radial least squares over the whole sample range (no window).
/// * warped: least squares for `v = f_x`; `window = Some((j_lo, j_hi))`
///   fits on the inclusive column range only (entries outside come back
///   as zero and carry no meaning), `None` fits periodically around the
///   circle.
///
/// The returned potential is normalized so `Sh + |grad f|^2 + 2 sigma f`
/// has volume-weighted mean zero over the fitted region.
pub fn fit_potential(
    state: &GeometryState,
    alpha: f64,
    sigma: f64,
    window: Option<(usize, usize)>,
) -> Result<Vec<f64>> {
    if !(sigma < 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!(
            "shrinking solitons need sigma < 0, got {sigma}"
        )));
    }
    match state {
        GeometryState::Homogeneous(_) => {
            if window.is_some() {
                return Err(Error::Domain(
                    "window fits only apply to warped states".into(),
                ));
            }
            let p = state.curvature(alpha);
            Ok(vec![-p.sh[0] / (2.0 * sigma)])
        }
        GeometryState::Flat(s) => {
            if window.is_some() {
                return Err(Error::Domain(
                    "window fits only apply to warped states".into(),
                ));
            }
            let m = s.samples;
            let n = s.n as f64;
            let dr = s.dr();
            // rows: v(0) = 0, radial midpoints, tangential nodes
            let rows = 1 + (m - 1) + (m - 1);
            let mut a = DMatrix::zeros(rows, m);
            let mut b = DVector::zeros(rows);
            a[(0, 0)] = 1.0;
            for i in 0..m - 1 {
                let r = 1 + i;
                a[(r, i + 1)] = 1.0 / dr;
                a[(r, i)] = -1.0 / dr;
                b[r] = -sigma;
            }
            let wt = (n - 1.0).sqrt();
            for i in 1..m {
                let r = m + i - 1;
                a[(r, i)] = wt / s.r_of(i);
                b[r] = -wt * sigma;
            }
            let v = solve_least_squares(a, b)?;
            let mut f = integrate_trapezoid(&v, dr);
            // normalize: Sh = 0 on flat space
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..m {
                let mut wgt = s.shell_weight(i) * dr;
                if i == 0 || i + 1 == m {
                    wgt *= 0.5;
                }
                num += wgt * (v[i] * v[i] + 2.0 * sigma * f[i]);
                den += wgt;
            }
            let shift = num / den / (2.0 * sigma);
            for x in &mut f {
                *x -= shift;
            }
            Ok(f)
        }
        GeometryState::Warped(s) => fit_warped(s, alpha, sigma, window),
    }
}

fn fit_warped(
    s: &WarpedState,
    alpha: f64,
    sigma: f64,
    window: Option<(usize, usize)>,
) -> Result<Vec<f64>> {
    let j_total = s.grid_len();
    let dx = s.dx();
    let n = s.n as f64;
    let p = GeometryState::Warped(s.clone()).curvature(alpha);
    let ws = s.d_ds(&s.w);
    let fiber_wt = (n - 1.0).sqrt();

    // column range being fitted and whether the last pair wraps around
    let (j_lo, cols, wraps) = match window {
        Some((lo, hi)) => {
            if hi >= j_total || lo + 4 > hi {
                return Err(Error::Domain(format!(
                    "window ({lo}, {hi}) needs at least 5 columns inside 0..{j_total}"
                )));
            }
            (lo, hi - lo + 1, false)
        }
        None => (0, j_total, true),
    };

    let pair_count = if wraps { cols } else { cols - 1 };
    let rows = pair_count + cols + 1;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);

    // base rows at cell midpoints: (1/a) d/dx (v/a) + s_base + sigma = 0
    for k in 0..pair_count {
        let j = j_lo + k;
        let jn = if wraps { (j + 1) % j_total } else { j + 1 };
        let a_mid = 0.5 * (s.a[j] + s.a[jn]);
        let s_mid = 0.5 * (p.s_base[j] + p.s_base[jn]);
        a[(k, (k + 1) % cols)] = 1.0 / (s.a[jn] * dx * a_mid);
        a[(k, k)] += -1.0 / (s.a[j] * dx * a_mid);
        b[k] = -(s_mid + sigma);
    }
    // fiber rows at nodes: (w_s / w) (v / a) + s_fiber + sigma = 0
    for k in 0..cols {
        let j = j_lo + k;
        let r = pair_count + k;
        a[(r, k)] = fiber_wt * (ws[j] / s.w[j]) / s.a[j];
        b[r] = -fiber_wt * (p.s_fiber[j] + sigma);
    }
    // gauge or integrability row on the mean of v
    let mean_wt = if wraps { PERIODIC_WEIGHT } else { GAUGE_WEIGHT };
    let r = pair_count + cols;
    for k in 0..cols {
        a[(r, k)] = mean_wt;
    }

    let v = solve_least_squares(a, b)?;
    let f_local = integrate_trapezoid(&v, dx);

    // normalization shift over the fitted nodes
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..cols {
        let j = j_lo + k;
        let fs = v[k] / s.a[j];
        let wgt = s.volume_weight(j) * dx;
        num += wgt * (p.sh[j] + fs * fs + 2.0 * sigma * f_local[k]);
        den += wgt;
    }
    let shift = num / den / (2.0 * sigma);

    let mut f = vec![0.0; j_total];
    for k in 0..cols {
        f[j_lo + k] = f_local[k] - shift;
    }
    Ok(f)
}

/// Canonical and map residuals of a warped spec evaluated at the interior
/// nodes of the inclusive window `(j_lo, j_hi)`, using one-sided knowledge
/// only (the potential outside the window is never touched).
pub fn canonical_residual_window(
    spec: &SolitonSpec,
    j_lo: usize,
    j_hi: usize,
) -> Result<WindowResiduals> {
    let s = match &spec.state {
        GeometryState::Warped(s) => s,
        _ => {
            return Err(Error::Domain(
                "window residuals only apply to warped states".into(),
            ))
        }
    };
    let j_total = s.grid_len();
    if j_hi >= j_total || j_lo + 2 > j_hi {
        return Err(Error::Domain(format!(
            "window ({j_lo}, {j_hi}) needs interior nodes inside 0..{j_total}"
        )));
    }
    let dx = s.dx();
    let p = spec.state.curvature(spec.alpha);
    let ws = s.d_ds(&s.w);
    let ax = s.d1_periodic(&s.a, 0.0);
    let phis: Vec<f64> = s
        .d1_periodic(&s.phi, s.phi_jump())
        .into_iter()
        .zip(&s.a)
        .map(|(px, a)| px / a)
        .collect();
    let f = &spec.f;
    let sigma = spec.sigma;
    let mut out = WindowResiduals { canonical: 0.0, map: 0.0 };
    for j in j_lo + 1..j_hi {
        let fx = (f[j + 1] - f[j - 1]) / (2.0 * dx);
        let fxx = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / (dx * dx);
        let aj = s.a[j];
        let fs = fx / aj;
        let fss = fxx / (aj * aj) - fx * ax[j] / (aj * aj * aj);
        let hess_ff = (ws[j] / s.w[j]) * fs;
        let base = (p.s_base[j] + fss + sigma).abs();
        let fiber = (p.s_fiber[j] + hess_ff + sigma).abs();
        out.canonical = out.canonical.max(base).max(fiber);
        out.map = out.map.max((p.tension[j] - phis[j] * fs).abs());
    }
    Ok(out)
}

fn solve_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Invariant(format!("least-squares solve failed: {e}")))?;
    Ok(x.iter().cloned().collect())
}

/// Cumulative trapezoid integral of `v` on a uniform grid, starting at 0.
fn integrate_trapezoid(v: &[f64], dx: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    f.push(0.0);
    for k in 1..v.len() {
        acc += 0.5 * dx * (v[k - 1] + v[k]);
        f.push(acc);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FlatState, HomogeneousState, MapKind};
    use crate::soliton::{construct_exact, soliton_residual, ExactSoliton};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn homogeneous_fit_recovers_the_constant_potential() {
        let spec =
            construct_exact(&ExactSoliton::CoupledSphere { n: 3, alpha: 1.0, tau: 0.8 }).unwrap();
        let f = fit_potential(&spec.state, spec.alpha, spec.sigma, None).unwrap();
        assert_relative_eq!(f[0], 1.5, max_relative = 1e-12);
        assert!(fit_potential(&spec.state, spec.alpha, spec.sigma, Some((0, 8))).is_err());
    }

    #[test]
    fn flat_fit_recovers_the_gaussian_potential() {
        let tau = 0.7;
        let state = GeometryState::Flat(FlatState::new(3, 4.0, 96).unwrap());
        let f = fit_potential(&state, 1.0, -0.5 / tau, None).unwrap();
        let exact = construct_exact(&ExactSoliton::Gaussian {
            n: 3,
            r_max: 4.0,
            samples: 96,
            tau,
        })
        .unwrap();
        let diff = f
            .iter()
            .zip(&exact.f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-8, "max potential error {diff}");
    }

    fn cylinder_state(j: usize) -> WarpedState {
        WarpedState::new(3, vec![1.0; j], vec![1.0; j], vec![0.0; j], 0).unwrap()
    }

    #[test]
    fn windowed_fit_reconstructs_the_cylinder_potential() {
        // round cylinder of width 1 in dimension 3 shrinks with tau = 1/2,
        // and on a window admits the potential (x - x*)^2 / (4 tau) + 1
        let j = 128;
        let s = cylinder_state(j);
        let state = GeometryState::Warped(s.clone());
        let sigma = -1.0;
        let (lo, hi) = (j / 4, 3 * j / 4);
        let f = fit_potential(&state, 1.0, sigma, Some((lo, hi))).unwrap();
        let spec = SolitonSpec::new(state, 1.0, sigma, f.clone()).unwrap();
        let r = canonical_residual_window(&spec, lo, hi).unwrap();
        assert!(r.canonical < 1e-9, "windowed canonical residual {}", r.canonical);
        assert!(r.map < 1e-12, "windowed map residual {}", r.map);
        for k in lo..=hi {
            let x = s.x_of(k);
            let expect = (x - PI) * (x - PI) / 2.0 + 1.0;
            assert!((f[k] - expect).abs() < 1e-8, "node {k}: {} vs {expect}", f[k]);
        }
    }

    #[test]
    fn periodic_fit_cannot_make_the_cylinder_canonical() {
        // a periodic potential cannot supply the constant Hessian the base
        // direction needs, so the best global fit still misses by |sigma|
        let j = 128;
        let state = GeometryState::Warped(cylinder_state(j));
        let sigma = -1.0;
        let f = fit_potential(&state, 1.0, sigma, None).unwrap();
        let spec = SolitonSpec::new(state, 1.0, sigma, f).unwrap();
        let r = soliton_residual(&spec).unwrap();
        assert!(r.canonical > 0.5, "periodic canonical residual {}", r.canonical);
    }

    #[test]
    fn window_bounds_are_validated() {
        let state = GeometryState::Warped(cylinder_state(32));
        assert!(fit_potential(&state, 1.0, -1.0, Some((10, 12))).is_err());
        assert!(fit_potential(&state, 1.0, -1.0, Some((0, 40))).is_err());
        let flat = GeometryState::Homogeneous(
            HomogeneousState::new(2, 1.0, MapKind::Constant).unwrap(),
        );
        let spec = SolitonSpec::new(flat, 1.0, -1.0, vec![1.0]).unwrap();
        assert!(canonical_residual_window(&spec, 0, 8).is_err());
    }
}
