//! Gradient shrinking solitons: exact fixtures, canonical-form residuals,
//! normalization, and the rigidity check.
//!
//! A shrinking soliton in canonical form satisfies, with `sigma = -1/(2 tau)`
//! and `tau` the remaining time,
//!
//! * tensor:  `S + Hess f + sigma g = 0`
//! * map:     `tension(phi) - <grad phi, grad f> = 0`
//!
//! which force the trace identity `Sh + Lap f + sigma n = 0`, the
//! normalization invariant `Sh + |grad f|^2 + 2 sigma f = const`, and the
//! elliptic identity
//! `Lap Sh - <grad Sh, grad f> + 2 sigma Sh + 2 |S|^2 + 2 alpha tension^2 = 0`.
//! All five are evaluated pointwise as residuals.

mod fit;

pub use fit::{canonical_residual_window, fit_potential, WindowResiduals};

use crate::error::{Error, Result};
use crate::geometry::{FlatState, GeometryState, HomogeneousState, MapKind};

/// A candidate soliton: geometry, coupling, soliton constant, and the
/// potential sampled like the state's scalar fields (length 1 for
/// homogeneous states, one entry per grid point otherwise).
#[derive(Debug, Clone)]
pub struct SolitonSpec {
    pub state: GeometryState,
    pub alpha: f64,
    /// `sigma = -1/(2 tau)`, negative for shrinking solitons.
    pub sigma: f64,
    pub f: Vec<f64>,
}

impl SolitonSpec {
    pub fn new(state: GeometryState, alpha: f64, sigma: f64, f: Vec<f64>) -> Result<Self> {
        if !(sigma < 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "shrinking solitons need sigma < 0, got {sigma}"
            )));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("coupling must be positive, got {alpha}")));
        }
        let want = scalar_len(&state);
        if f.len() != want {
            return Err(Error::Domain(format!(
                "potential has {} samples but the state's scalar fields have {want}",
                f.len()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("potential must be finite".into()));
        }
        Ok(SolitonSpec { state, alpha, sigma, f })
    }

    /// Remaining time `tau = -1/(2 sigma)`.
    pub fn tau(&self) -> f64 {
        -1.0 / (2.0 * self.sigma)
    }
}

fn scalar_len(state: &GeometryState) -> usize {
    match state {
        GeometryState::Homogeneous(_) => 1,
        GeometryState::Warped(s) => s.grid_len(),
        GeometryState::Flat(s) => s.samples,
    }
}

/// Max-norm residuals of the soliton identities (see the module docs).
#[derive(Debug, Clone, Copy)]
pub struct SolitonResiduals {
    pub canonical: f64,
    pub map: f64,
    pub trace: f64,
    pub elliptic: f64,
}

impl SolitonResiduals {
    pub fn max(&self) -> f64 {
        self.canonical.max(self.map).max(self.trace).max(self.elliptic)
    }
}

/// Pointwise residuals of all four soliton identities over the whole slice.
///
/// Warped potentials are treated as periodic fields; a potential fitted on a
/// window is meaningful only through [`canonical_residual_window`].
pub fn soliton_residual(spec: &SolitonSpec) -> Result<SolitonResiduals> {
    let n = spec.state.dimension() as f64;
    let sigma = spec.sigma;
    let p = spec.state.curvature(spec.alpha);
    match &spec.state {
        GeometryState::Homogeneous(_) => {
            // constant potential: Hess f = 0, grad f = 0
            let canonical = (p.s_base[0] + sigma).abs();
            let trace = (p.sh[0] + sigma * n).abs();
            let elliptic = (2.0 * sigma * p.sh[0]
                + 2.0 * p.s_norm_sq(0)
                + 2.0 * spec.alpha * p.tension[0] * p.tension[0])
                .abs();
            Ok(SolitonResiduals { canonical, map: 0.0, trace, elliptic })
        }
        GeometryState::Warped(s) => {
            let fs = s.d_ds(&spec.f);
            let lap_f = s.laplacian(&spec.f);
            let ws = s.d_ds(&s.w);
            let phis: Vec<f64> = s
                .d1_periodic(&s.phi, s.phi_jump())
                .into_iter()
                .zip(&s.a)
                .map(|(px, a)| px / a)
                .collect();
            let lap_sh = s.laplacian(&p.sh);
            let sh_s = s.d_ds(&p.sh);
            let mut r = SolitonResiduals { canonical: 0.0, map: 0.0, trace: 0.0, elliptic: 0.0 };
            for j in 0..s.grid_len() {
                let hess_ff = (ws[j] / s.w[j]) * fs[j];
                let hess_bb = lap_f[j] - (n - 1.0) * hess_ff;
                let base = (p.s_base[j] + hess_bb + sigma).abs();
                let fiber = (p.s_fiber[j] + hess_ff + sigma).abs();
                r.canonical = r.canonical.max(base).max(fiber);
                r.map = r.map.max((p.tension[j] - phis[j] * fs[j]).abs());
                r.trace = r.trace.max((p.sh[j] + lap_f[j] + sigma * n).abs());
                let ell = lap_sh[j] - sh_s[j] * fs[j]
                    + 2.0 * sigma * p.sh[j]
                    + 2.0 * p.s_norm_sq(j)
                    + 2.0 * spec.alpha * p.tension[j] * p.tension[j];
                r.elliptic = r.elliptic.max(ell.abs());
            }
            Ok(r)
        }
        GeometryState::Flat(s) => {
            let fr = s.d_dr(&spec.f);
            let frr = s.d2_dr2(&spec.f);
            let lap_f = s.laplacian(&spec.f);
            let mut r = SolitonResiduals { canonical: 0.0, map: 0.0, trace: 0.0, elliptic: 0.0 };
            for i in 0..s.samples {
                let radial = (frr[i] + sigma).abs();
                // tangential Hess component is f_r / r, limiting to f_rr at 0
                let tang = if i == 0 { radial } else { (fr[i] / s.r_of(i) + sigma).abs() };
                r.canonical = r.canonical.max(radial).max(tang);
                r.trace = r.trace.max((lap_f[i] + sigma * n).abs());
            }
            Ok(r)
        }
    }
}

/// Max-norm defect of `Sh + |grad f|^2 + 2 sigma f` against zero; constant
/// on a genuine soliton, zero exactly when the potential is normalized.
pub fn normalization_defect(spec: &SolitonSpec) -> f64 {
    invariant_samples(spec).into_iter().fold(0.0f64, |m, (v, _)| m.max(v.abs()))
}

/// `(Sh + |grad f|^2 + 2 sigma f, volume weight)` per sample point.
fn invariant_samples(spec: &SolitonSpec) -> Vec<(f64, f64)> {
    let p = spec.state.curvature(spec.alpha);
    match &spec.state {
        GeometryState::Homogeneous(s) => {
            vec![(p.sh[0] + 2.0 * spec.sigma * spec.f[0], s.total_volume())]
        }
        GeometryState::Warped(s) => {
            let fs = s.d_ds(&spec.f);
            let dx = s.dx();
            (0..s.grid_len())
                .map(|j| {
                    let v = p.sh[j] + fs[j] * fs[j] + 2.0 * spec.sigma * spec.f[j];
                    (v, s.volume_weight(j) * dx)
                })
                .collect()
        }
        GeometryState::Flat(s) => {
            let fr = s.d_dr(&spec.f);
            let dr = s.dr();
            (0..s.samples)
                .map(|i| {
                    let v = fr[i] * fr[i] + 2.0 * spec.sigma * spec.f[i];
                    let mut wgt = s.shell_weight(i) * dr;
                    if i == 0 || i + 1 == s.samples {
                        wgt *= 0.5;
                    }
                    (v, wgt)
                })
                .collect()
        }
    }
}

/// Shifts the potential so the normalization invariant vanishes (in the
/// volume-weighted mean; it is constant on a genuine soliton, so the
/// weighting is immaterial there).
pub fn normalize(spec: &SolitonSpec) -> Result<SolitonSpec> {
    let samples = invariant_samples(spec);
    let total: f64 = samples.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::Invariant("slice has no volume to average over".into()));
    }
    let k: f64 = samples.iter().map(|(v, w)| v * w).sum::<f64>() / total;
    let f = spec.f.iter().map(|x| x - k / (2.0 * spec.sigma)).collect();
    SolitonSpec::new(spec.state.clone(), spec.alpha, spec.sigma, f)
}

/// Rigidity data: shrinking solitons have `Sh >= 0`, and `Sh = 0` anywhere
/// forces the Gaussian (flat metric, constant map).
#[derive(Debug, Clone, Copy)]
pub struct RigidityReport {
    pub min_sh: f64,
    pub sh_nonnegative: bool,
    /// `Sh` vanishes somewhere (within tolerance).
    pub gaussian_case: bool,
    /// When `gaussian_case`: whether `|Rm|` and `|grad phi|` vanish too.
    pub gaussian_verified: Option<bool>,
}

pub fn rigidity_check(spec: &SolitonSpec, tol: f64) -> RigidityReport {
    let p = spec.state.curvature(spec.alpha);
    let min_sh = p.min_sh();
    let sh_nonnegative = min_sh >= -tol;
    let gaussian_case = sh_nonnegative && min_sh <= tol;
    let gaussian_verified = gaussian_case.then(|| {
        let grad_max = p.grad_phi_sq.iter().cloned().fold(0.0f64, f64::max);
        p.sup_rm() <= tol && grad_max <= tol
    });
    RigidityReport { min_sh, sh_nonnegative, gaussian_case, gaussian_verified }
}

/// The exactly solvable shrinking solitons.
#[derive(Debug, Clone)]
pub enum ExactSoliton {
    /// Flat `R^n`, constant map, `f = r^2 / (4 tau)`.
    Gaussian { n: usize, r_max: f64, samples: usize, tau: f64 },
    /// Round sphere `c = 2(n-1) tau`, constant map, `f = n/2`.
    RoundSphere { n: usize, tau: f64 },
    /// Round sphere with the identity eigenmap, `c = 2(n-1-alpha) tau`,
    /// `f = n/2`; needs `alpha < n-1` to shrink.
    CoupledSphere { n: usize, alpha: f64, tau: f64 },
    /// Self-similar two-sphere under the decaying coupling `alpha = 1 - t`:
    /// `c = 1 - t^2` with the identity eigenmap. A genuine flow solution,
    /// but not in canonical gradient form (its residual is the fixture for
    /// the expected-failure path); time is restricted to [0, 0.9] to keep
    /// the coupling positive.
    NonCanonicalSphere { t: f64 },
}

/// Builds the spec (state, coupling, sigma, normalized potential) of an
/// exact fixture.
pub fn construct_exact(kind: &ExactSoliton) -> Result<SolitonSpec> {
    match *kind {
        ExactSoliton::Gaussian { n, r_max, samples, tau } => {
            require_tau(tau)?;
            let state = FlatState::new(n, r_max, samples)?;
            let f = state.radii().iter().map(|r| r * r / (4.0 * tau)).collect();
            SolitonSpec::new(GeometryState::Flat(state), 1.0, -0.5 / tau, f)
        }
        ExactSoliton::RoundSphere { n, tau } => {
            require_tau(tau)?;
            let c = 2.0 * (n as f64 - 1.0) * tau;
            let state = HomogeneousState::new(n, c, MapKind::Constant)?;
            SolitonSpec::new(GeometryState::Homogeneous(state), 1.0, -0.5 / tau, vec![
                n as f64 / 2.0,
            ])
        }
        ExactSoliton::CoupledSphere { n, alpha, tau } => {
            require_tau(tau)?;
            if !(alpha > 0.0 && alpha < n as f64 - 1.0) {
                return Err(Error::Domain(format!(
                    "coupled sphere needs 0 < alpha < n-1, got alpha = {alpha}"
                )));
            }
            let c = 2.0 * (n as f64 - 1.0 - alpha) * tau;
            let state = HomogeneousState::new(n, c, MapKind::IdentityEigenmap)?;
            SolitonSpec::new(GeometryState::Homogeneous(state), alpha, -0.5 / tau, vec![
                n as f64 / 2.0,
            ])
        }
        ExactSoliton::NonCanonicalSphere { t } => {
            if !(0.0..=0.9).contains(&t) {
                return Err(Error::Domain(format!(
                    "fixture time must lie in [0, 0.9], got {t}"
                )));
            }
            let alpha = 1.0 - t;
            let c = 1.0 - t * t;
            let tau = 1.0 - t;
            let state = HomogeneousState::new(2, c, MapKind::IdentityEigenmap)?;
            let spec = SolitonSpec::new(
                GeometryState::Homogeneous(state),
                alpha,
                -0.5 / tau,
                vec![0.0],
            )?;
            normalize(&spec)
        }
    }
}

fn require_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("remaining time must be positive, got {tau}")));
    }
    Ok(())
}
