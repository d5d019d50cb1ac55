//! Distances inside the symmetry-reduced slices.
//!
//! Homogeneous and flat slices have closed forms. Warped slices use a 1-D
//! graph shortest path: nodes are (grid point, fraction of the fiber
//! great-circle between the endpoint fiber positions), edges move either along
//! the base (cost `integral of a dx`, trapezoid per cell) or along the fiber
//! (cost `w * d_angle`). Paths that move in both directions at once are not
//! represented; this is the documented grid approximation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{HomogeneousState, WarpedState};
use crate::error::{Error, Result};

/// Point of a warped slice: a grid column plus a unit fiber vector in R^n
/// (the fiber sphere S^(n-1) sits in R^n).
#[derive(Debug, Clone)]
pub struct WarpedPoint {
    pub x_index: usize,
    pub fiber: Vec<f64>,
}

impl WarpedPoint {
    /// Point with an arbitrary fixed fiber position (north pole).
    pub fn on_axis(x_index: usize, n: usize) -> Self {
        let mut fiber = vec![0.0; n - 1 + 1];
        fiber[0] = 1.0;
        WarpedPoint { x_index, fiber }
    }
}

/// Great-circle angle between unit vectors.
pub fn great_circle_angle(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Domain("points live in different ambient dimensions".into()));
    }
    for v in [p, q] {
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("sphere points must be unit vectors, |v| = {norm}")));
        }
    }
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0).acos())
}

/// Distance on the round sphere `c * g_S`: `sqrt(c) * angle`.
pub fn distance_homogeneous(state: &HomogeneousState, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != state.n + 1 {
        return Err(Error::Domain(format!(
            "sphere point must have {} components, got {}",
            state.n + 1,
            p.len()
        )));
    }
    Ok(state.c.sqrt() * great_circle_angle(p, q)?)
}

/// Distance between two 1-D chart coordinates of a flat slice.
pub fn distance_flat(x1: f64, x2: f64) -> f64 {
    (x1 - x2).abs()
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance; node index breaks ties deterministically
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grid shortest-path distance on a warped slice.
///
/// `fiber_steps` discretizes the fiber great-circle between the endpoint
/// positions (ignored when the endpoints share a fiber position).
pub fn distance_warped(
    state: &WarpedState,
    p: &WarpedPoint,
    q: &WarpedPoint,
    fiber_steps: usize,
) -> Result<f64> {
    let jn = state.grid_len();
    if p.x_index >= jn || q.x_index >= jn {
        return Err(Error::Domain("warped point grid index out of range".into()));
    }
    let psi = great_circle_angle(&p.fiber, &q.fiber)?;
    let m = if psi > 1e-14 { fiber_steps.max(1) } else { 0 };
    let rows = m + 1;
    let dx = state.dx();

    let node = |j: usize, s: usize| j * rows + s;
    let mut dist = vec![f64::INFINITY; jn * rows];
    let mut heap = BinaryHeap::new();
    dist[node(p.x_index, 0)] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: node(p.x_index, 0) });
    let goal = node(q.x_index, m);

    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == goal {
            break;
        }
        let j = u / rows;
        let s = u % rows;
        let mut push = |v: usize, cost: f64| {
            let nd = d + cost;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        };
        // base moves (periodic)
        let jp = (j + 1) % jn;
        let jm = (j + jn - 1) % jn;
        push(node(jp, s), 0.5 * (state.a[j] + state.a[jp]) * dx);
        push(node(jm, s), 0.5 * (state.a[j] + state.a[jm]) * dx);
        // fiber moves
        if m > 0 {
            let step = state.w[j] * psi / m as f64;
            if s + 1 < rows {
                push(node(j, s + 1), step);
            }
            if s > 0 {
                push(node(j, s - 1), step);
            }
        }
    }
    Ok(dist[goal])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MapKind;
    use approx::assert_relative_eq;

    fn cylinder(jn: usize) -> WarpedState {
        WarpedState::new(3, vec![1.0; jn], vec![1.0; jn], vec![0.0; jn], 0).unwrap()
    }

    #[test]
    fn homogeneous_antipodal() {
        let s = HomogeneousState::new(2, 2.0, MapKind::Constant).unwrap();
        let d = distance_homogeneous(&s, &[0.0, 0.0, 1.0], &[0.0, 0.0, -1.0]).unwrap();
        assert_relative_eq!(d, 2.0f64.sqrt() * std::f64::consts::PI, max_relative = 1e-14);
        let z = distance_homogeneous(&s, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn homogeneous_rejects_non_unit_points() {
        let s = HomogeneousState::new(2, 1.0, MapKind::Constant).unwrap();
        assert!(distance_homogeneous(&s, &[0.5, 0.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
        assert!(distance_homogeneous(&s, &[1.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn warped_same_axis_half_turn() {
        let s = cylinder(64);
        let p = WarpedPoint::on_axis(0, 3);
        let q = WarpedPoint::on_axis(32, 3);
        let d = distance_warped(&s, &p, &q, 16).unwrap();
        assert_relative_eq!(d, std::f64::consts::PI, max_relative = 1e-12);
        let zero = distance_warped(&s, &p, &p, 16).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn warped_fiber_move_costs_w_times_angle() {
        let s = cylinder(64);
        let p = WarpedPoint { x_index: 0, fiber: vec![1.0, 0.0, 0.0] };
        let q = WarpedPoint { x_index: 0, fiber: vec![-1.0, 0.0, 0.0] };
        let d = distance_warped(&s, &p, &q, 32).unwrap();
        assert_relative_eq!(d, std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn warped_detour_through_thin_neck_wins() {
        // w dips to 0.2 near x = pi; antipodal fiber positions at x = 3 pi/4
        // and 5 pi/4 are cheapest to connect by moving into the neck first.
        let jn = 128;
        let w: Vec<f64> = (0..jn)
            .map(|j| {
                let x = 2.0 * std::f64::consts::PI * j as f64 / jn as f64;
                1.0 - 0.8 * (-4.0 * (x - std::f64::consts::PI).powi(2)).exp()
            })
            .collect();
        let s = WarpedState::new(3, vec![1.0; jn], w.clone(), vec![0.0; jn], 0).unwrap();
        let j0 = 3 * jn / 8;
        let p = WarpedPoint { x_index: j0, fiber: vec![1.0, 0.0, 0.0] };
        let q = WarpedPoint { x_index: j0, fiber: vec![-1.0, 0.0, 0.0] };
        let direct = w[j0] * std::f64::consts::PI;
        let d = distance_warped(&s, &p, &q, 32).unwrap();
        assert!(d < direct, "shortest path {d} should beat the direct fiber turn {direct}");
    }
}
