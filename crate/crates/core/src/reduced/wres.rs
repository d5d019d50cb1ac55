//! Pointwise defect of the monotone-quantity identity
//!
//! ```text
//! (-d/dt - lap + Sh) w
//!   = -2 tau ( |S + Hess l - g/(2 tau)|^2
//!              + alpha |tension(phi) - <grad phi, grad l>|^2
//!              - alpha_dot |grad phi|^2 ) v
//! ```
//!
//! with `v = (4 pi tau)^(-n/2) e^(-l)`, `w = (tau (2 lap l - |grad l|^2 + Sh)
//! + l - n) v`, and `tau` the distance to the reference time. The identity
//! presumes `v` solves the adjoint heat equation, so the field at the probe
//! slice is extended to the neighboring slices by one explicit step of
//! exactly that equation; the extension is first order, but its truncation
//! error is symmetric across the two slices and cancels in the centered time
//! difference, leaving a second-order residual on genuine flow backgrounds.

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::geometry::GeometryState;

/// Sup-norm of the identity defect for the field `l_field` on the slice at
/// `t`, using the time stack `t - dt, t, t + dt` and reference time `t_sing`.
///
/// The field must be sampled on the slice's own grid (a single value on
/// homogeneous slices, one value per radial sample or per column otherwise).
/// Flat charts exclude the two samples nearest each window edge, where the
/// one-sided stencils lose an order.
pub fn w_residual(
    tr: &FlowTrajectory,
    l_field: &[f64],
    t: f64,
    dt: f64,
    t_sing: f64,
) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("stack half-width must be positive, got {dt}")));
    }
    if t + dt >= t_sing {
        return Err(Error::Domain(format!(
            "stack top {} reaches the reference time {t_sing}",
            t + dt
        )));
    }
    if t - dt < tr.t_start() - 1e-9 {
        return Err(Error::Domain(format!(
            "stack bottom {} precedes the stored window start {}",
            t - dt,
            tr.t_start()
        )));
    }
    let state = tr.state_at(t)?;
    let expected = match &state {
        GeometryState::Homogeneous(_) => 1,
        GeometryState::Flat(s) => s.samples,
        GeometryState::Warped(s) => s.grid_len(),
    };
    if l_field.len() != expected {
        return Err(Error::Domain(format!(
            "field carries {} samples, the slice carries {expected}",
            l_field.len()
        )));
    }

    let nf = state.dimension() as f64;
    let tau = t_sing - t;

    // adjoint-heat extension of the field to the neighbor slices
    let (lap0, grad20, sh0) = field_operators(tr, &state, l_field, t);
    let l_t: Vec<f64> = (0..l_field.len())
        .map(|i| -lap0[i] + grad20[i] - sh0[i] + nf / (2.0 * tau))
        .collect();
    let l_plus: Vec<f64> = l_field.iter().zip(&l_t).map(|(l, lt)| l + dt * lt).collect();
    let l_minus: Vec<f64> = l_field.iter().zip(&l_t).map(|(l, lt)| l - dt * lt).collect();

    let w0 = w_field(tr, l_field, t, t_sing)?;
    let w_plus = w_field(tr, &l_plus, t + dt, t_sing)?;
    let w_minus = w_field(tr, &l_minus, t - dt, t_sing)?;

    let lap_w = match &state {
        GeometryState::Homogeneous(_) => vec![0.0],
        GeometryState::Flat(s) => s.laplacian(&w0),
        GeometryState::Warped(s) => s.laplacian(&w0),
    };
    let rhs = identity_rhs(tr, &state, l_field, t, tau, nf);

    let interior: Box<dyn Iterator<Item = usize>> = match &state {
        GeometryState::Flat(s) => Box::new(2..s.samples.saturating_sub(2)),
        _ => Box::new(0..l_field.len()),
    };
    let mut sup: f64 = 0.0;
    for i in interior {
        let dw_dt = (w_plus[i] - w_minus[i]) / (2.0 * dt);
        let defect = -dw_dt - lap_w[i] + sh0[i] * w0[i] - rhs[i];
        sup = sup.max(defect.abs());
    }
    Ok(sup)
}

/// `(lap l, |grad l|^2, Sh)` on the slice at `ts`.
fn field_operators(
    tr: &FlowTrajectory,
    state: &GeometryState,
    field: &[f64],
    ts: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match state {
        GeometryState::Homogeneous(s) => (
            vec![0.0],
            vec![0.0],
            vec![s.curvature(tr.alpha(ts)).sh[0]],
        ),
        GeometryState::Flat(s) => {
            let lap = s.laplacian(field);
            let grad2 = s.d_dr(field).into_iter().map(|g| g * g).collect();
            (lap, grad2, vec![0.0; field.len()])
        }
        GeometryState::Warped(s) => {
            let lap = s.laplacian(field);
            let grad2 = s.d_ds(field).into_iter().map(|g| g * g).collect();
            (lap, grad2, s.curvature(tr.alpha(ts)).sh)
        }
    }
}

/// The localized monotone integrand `w` for the field on the slice at `ts`.
fn w_field(tr: &FlowTrajectory, field: &[f64], ts: f64, t_sing: f64) -> Result<Vec<f64>> {
    let state = tr.state_at(ts)?;
    let nf = state.dimension() as f64;
    let tau = t_sing - ts;
    let (lap, grad2, sh) = field_operators(tr, &state, field, ts);
    let prefactor = (4.0 * std::f64::consts::PI * tau).powf(-nf / 2.0);
    Ok((0..field.len())
        .map(|i| {
            let v = prefactor * (-field[i]).exp();
            (tau * (2.0 * lap[i] - grad2[i] + sh[i]) + field[i] - nf) * v
        })
        .collect())
}

/// Right-hand side of the identity at the probe slice.
fn identity_rhs(
    tr: &FlowTrajectory,
    state: &GeometryState,
    field: &[f64],
    t: f64,
    tau: f64,
    nf: f64,
) -> Vec<f64> {
    let alpha = tr.alpha(t);
    let alpha_dot = tr.schedule.alpha_dot(t);
    let half_inv_tau = 1.0 / (2.0 * tau);
    let prefactor = (4.0 * std::f64::consts::PI * tau).powf(-nf / 2.0);

    let terms: Vec<(f64, f64, f64)> = match state {
        // constant field: the Hessian drops and the trace-free part of S is
        // isotropic
        GeometryState::Homogeneous(s) => {
            let p = s.curvature(alpha);
            let quad = nf * (p.s_base[0] - half_inv_tau).powi(2);
            vec![(quad, p.tension[0], p.grad_phi_sq[0])]
        }
        GeometryState::Flat(s) => {
            let fr = s.d_dr(field);
            let frr = s.d2_dr2(field);
            (0..field.len())
                .map(|i| {
                    let r = s.r_of(i);
                    let tangential = if i == 0 { frr[0] } else { fr[i] / r };
                    let quad = (frr[i] - half_inv_tau).powi(2)
                        + (nf - 1.0) * (tangential - half_inv_tau).powi(2);
                    (quad, 0.0, 0.0)
                })
                .collect()
        }
        GeometryState::Warped(s) => {
            let p = s.curvature(alpha);
            let lx = s.d1_periodic(field, 0.0);
            let lxx = s.d2_periodic(field, 0.0);
            let ax = s.d1_periodic(&s.a, 0.0);
            let ws = s.d_ds(&s.w);
            let phix = s.d1_periodic(&s.phi, s.phi_jump());
            (0..field.len())
                .map(|i| {
                    let a = s.a[i];
                    let l_s = lx[i] / a;
                    let l_ss = lxx[i] / (a * a) - ax[i] * lx[i] / (a * a * a);
                    let hess_ff = (ws[i] / s.w[i]) * l_s;
                    let quad = (p.s_base[i] + l_ss - half_inv_tau).powi(2)
                        + (nf - 1.0) * (p.s_fiber[i] + hess_ff - half_inv_tau).powi(2);
                    let map = p.tension[i] - (phix[i] / a) * l_s;
                    (quad, map, p.grad_phi_sq[i])
                })
                .collect()
        }
    };

    field
        .iter()
        .zip(&terms)
        .map(|(l, &(quad, map, grad_phi_sq))| {
            let v = prefactor * (-l).exp();
            -2.0 * tau * (quad + alpha * map * map - alpha_dot * grad_phi_sq) * v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{AnalyticFamily, CouplingSchedule};

    fn analytic(family: AnalyticFamily, alpha: f64, t_end: f64) -> FlowTrajectory {
        FlowTrajectory::from_analytic(
            family,
            CouplingSchedule::constant(alpha).unwrap(),
            vec![0.0, t_end],
        )
        .unwrap()
    }

    #[test]
    fn gaussian_field_is_a_fixed_point() {
        let tr = analytic(AnalyticFamily::StaticFlat { n: 2, r_max: 8.0, samples: 512 }, 0.5, 10.0);
        let GeometryState::Flat(s) = &tr.states[0] else { unreachable!() };
        let tau = 0.5;
        let field: Vec<f64> = s.radii().iter().map(|r| r * r / (4.0 * tau)).collect();
        let defect = w_residual(&tr, &field, 0.5, 3e-5, 1.0).unwrap();
        assert!(defect <= 1e-8, "defect {defect}");
    }

    #[test]
    fn sphere_limits_are_machine_zero() {
        let round =
            analytic(AnalyticFamily::HomogeneousLinear { n: 2, c0: 2.0, eigenmap: false }, 0.5, 0.9);
        let coupled =
            analytic(AnalyticFamily::HomogeneousLinear { n: 2, c0: 1.0, eigenmap: true }, 0.5, 0.9);
        for tr in [round, coupled] {
            let defect = w_residual(&tr, &[1.0], 0.4, 1e-3, 1.0).unwrap();
            assert!(defect <= 1e-12, "defect {defect}");
        }
    }

    #[test]
    fn defect_converges_at_second_order_on_a_flow_background() {
        // arbitrary smooth field over the shrinking cylinder; halving both
        // grid spacing and stack width must quarter the defect
        let residual = |grid: usize, dt: f64| {
            let tr = analytic(AnalyticFamily::Cylinder { n: 3, grid, w0: 1.0 }, 1.0, 0.45);
            let GeometryState::Warped(s) = &tr.states[0] else { unreachable!() };
            let field: Vec<f64> = (0..grid)
                .map(|j| {
                    let x = s.x_of(j);
                    1.0 + 0.3 * x.sin() + 0.2 * (2.0 * x).cos()
                })
                .collect();
            w_residual(&tr, &field, 0.3, dt, 0.5).unwrap()
        };
        let coarse = residual(64, 1e-3);
        let fine = residual(128, 5e-4);
        let order = (coarse / fine).log2();
        assert!(order >= 1.9, "order {order} (coarse {coarse}, fine {fine})");
    }

    #[test]
    fn stacks_outside_the_window_are_rejected() {
        let tr = analytic(AnalyticFamily::StaticFlat { n: 2, r_max: 8.0, samples: 64 }, 0.5, 10.0);
        let field = vec![0.0; 64];
        assert!(w_residual(&tr, &field, 5e-4, 1e-3, 1.0).is_err());
        assert!(w_residual(&tr, &field, 0.9995, 1e-3, 1.0).is_err());
        assert!(w_residual(&tr, &field[..10], 0.5, 1e-3, 1.0).is_err());
        assert!(w_residual(&tr, &field, 0.5, -1.0, 1.0).is_err());
    }
}
