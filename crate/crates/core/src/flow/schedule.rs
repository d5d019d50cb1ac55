//! Coupling schedule `alpha(t)`.
//!
//! The coupling must stay positive and never increase; both constraints are
//! enforced at construction so the stepper can assume them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-dependent coupling, constant or piecewise linear in `t`.
///
/// Outside the breakpoint range a piecewise schedule extends by its boundary
/// values (and zero slope).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CouplingSchedule {
    Constant(f64),
    PiecewiseLinear { times: Vec<f64>, values: Vec<f64> },
}

impl CouplingSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::Domain(format!("coupling must be positive and finite, got {alpha}")));
        }
        Ok(CouplingSchedule::Constant(alpha))
    }

    pub fn piecewise_linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Domain(format!(
                "schedule needs matching breakpoint lists, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Domain("piecewise schedule needs at least two breakpoints".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("schedule breakpoint times must be finite".into()));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain(format!(
                    "schedule times must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for v in &values {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::Domain(format!("coupling values must be positive, got {v}")));
            }
        }
        for w in values.windows(2) {
            if w[1] > w[0] + 1e-15 {
                return Err(Error::Domain(format!(
                    "coupling must be non-increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(CouplingSchedule::PiecewiseLinear { times, values })
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match self {
            CouplingSchedule::Constant(a) => *a,
            CouplingSchedule::PiecewiseLinear { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                let i = segment_index(times, t);
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + s * (values[i + 1] - values[i])
            }
        }
    }

    /// Slope of the active segment; zero outside the breakpoint range, and
    /// the boundary segments own their endpoints.
    pub fn alpha_dot(&self, t: f64) -> f64 {
        match self {
            CouplingSchedule::Constant(_) => 0.0,
            CouplingSchedule::PiecewiseLinear { times, values } => {
                if t < times[0] || t > *times.last().unwrap() {
                    return 0.0;
                }
                let i = segment_index(times, t).min(times.len() - 2);
                (values[i + 1] - values[i]) / (times[i + 1] - times[i])
            }
        }
    }

    /// Exact `integral of alpha(s) ds` from 0 to `t` (t may be negative).
    pub fn alpha_integral(&self, t: f64) -> f64 {
        match self {
            CouplingSchedule::Constant(a) => a * t,
            CouplingSchedule::PiecewiseLinear { .. } => {
                if t >= 0.0 {
                    self.integral_over(0.0, t)
                } else {
                    -self.integral_over(t, 0.0)
                }
            }
        }
    }

    /// Integral over [u, v] with u <= v; exact because the integrand is
    /// piecewise linear (trapezoid per clipped segment).
    fn integral_over(&self, u: f64, v: f64) -> f64 {
        let (times, _) = match self {
            CouplingSchedule::Constant(a) => return a * (v - u),
            CouplingSchedule::PiecewiseLinear { times, values } => (times, values),
        };
        let mut cuts = vec![u];
        for &t in times {
            if t > u && t < v {
                cuts.push(t);
            }
        }
        cuts.push(v);
        cuts.windows(2)
            .map(|w| 0.5 * (self.alpha(w[0]) + self.alpha(w[1])) * (w[1] - w[0]))
            .sum()
    }

    pub fn alpha_min(&self) -> f64 {
        match self {
            CouplingSchedule::Constant(a) => *a,
            CouplingSchedule::PiecewiseLinear { values, .. } => *values.last().unwrap(),
        }
    }

    pub fn alpha_max(&self) -> f64 {
        match self {
            CouplingSchedule::Constant(a) => *a,
            CouplingSchedule::PiecewiseLinear { values, .. } => values[0],
        }
    }
}

/// Index i with times[i] <= t < times[i+1] (t strictly inside the range).
fn segment_index(times: &[f64], t: f64) -> usize {
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => i.min(times.len() - 2),
        Err(i) => i - 1,
    }
}
