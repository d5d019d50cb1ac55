//! Finite-difference curvature oracle on coordinate charts.
//!
//! Independent route to curvature: Christoffel symbols by central differences
//! of a sampled coordinate metric, the Riemann tensor by central differences
//! of the Christoffels, both O(h^2). The oracle never sees the ansatz
//! formulas, so agreement with the closed-form curvature operators validates
//! them (and pins the `|Rm|` tensor-norm convention).

use crate::error::{Error, Result};

/// Full curvature data at one chart point.
#[derive(Debug, Clone)]
pub struct FdCurvature {
    pub n: usize,
    /// `R_(ijkl)`, flattened row-major over (i, j, k, l).
    pub riemann_lower: Vec<f64>,
    /// Ricci `R_(ij)`, flattened row-major.
    pub ric: Vec<f64>,
    pub sc: f64,
    /// Tensor norm `sqrt(R_(ijkl) R^(ijkl))`.
    pub rm_norm: f64,
    /// Largest violation of the index symmetries and the first Bianchi
    /// identity; should be O(h^2).
    pub sym_defect: f64,
}

impl FdCurvature {
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.riemann_lower[((i * n + j) * n + k) * n + l]
    }

    /// Sectional curvature of the coordinate plane (i, j) (requires the
    /// sampled metric at the same point).
    pub fn sectional(&self, g: &[Vec<f64>], i: usize, j: usize) -> f64 {
        let denom = g[i][i] * g[j][j] - g[i][j] * g[i][j];
        self.riemann(i, j, i, j) / denom
    }
}

/// Computes curvature of the metric `sampler` at chart point `x` with
/// finite-difference step `h`. The sampler must return the full coordinate
/// metric; it is evaluated on a nested stencil of radius `2h`.
pub fn fd_curvature_oracle<F>(sampler: &F, x: &[f64], h: f64) -> Result<FdCurvature>
where
    F: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let n = x.len();
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("oracle step must be positive, got {h}")));
    }
    let g = sampler(x);
    check_metric(&g, n)?;
    let ginv = invert(&g)?;

    // Christoffels at the point and on the +-h stencil of each coordinate.
    let gamma0 = christoffel(sampler, x, h)?;
    let mut dgamma = vec![vec![0.0; n * n * n]; n];
    for m in 0..n {
        let mut xp = x.to_vec();
        xp[m] += h;
        let mut xm = x.to_vec();
        xm[m] -= h;
        let gp = christoffel(sampler, &xp, h)?;
        let gm = christoffel(sampler, &xm, h)?;
        for idx in 0..n * n * n {
            dgamma[m][idx] = (gp[idx] - gm[idx]) / (2.0 * h);
        }
    }

    let gat = |v: &[f64], l: usize, i: usize, j: usize| v[(l * n + i) * n + j];

    // R^l_(s i j) = d_i Gam^l_(j s) - d_j Gam^l_(i s)
    //              + Gam^l_(i m) Gam^m_(j s) - Gam^l_(j m) Gam^m_(i s)
    let mut upper = vec![0.0; n * n * n * n];
    for l in 0..n {
        for s in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = gat(&dgamma[i], l, j, s) - gat(&dgamma[j], l, i, s);
                    for m in 0..n {
                        v += gat(&gamma0, l, i, m) * gat(&gamma0, m, j, s)
                            - gat(&gamma0, l, j, m) * gat(&gamma0, m, i, s);
                    }
                    upper[((l * n + s) * n + i) * n + j] = v;
                }
            }
        }
    }

    // lower index: R_(r s i j) = g_(r l) R^l_(s i j)
    let mut lower = vec![0.0; n * n * n * n];
    for r in 0..n {
        for s in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        v += g[r][l] * upper[((l * n + s) * n + i) * n + j];
                    }
                    lower[((r * n + s) * n + i) * n + j] = v;
                }
            }
        }
    }

    // Ricci and scalar.
    let mut ric = vec![0.0; n * n];
    for s in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for m in 0..n {
                v += upper[((m * n + s) * n + m) * n + j];
            }
            ric[s * n + j] = v;
        }
    }
    let mut sc = 0.0;
    for s in 0..n {
        for j in 0..n {
            sc += ginv[s][j] * ric[s * n + j];
        }
    }

    // |Rm|^2 = R_(abcd) R_(efgh) g^(ae) g^(bf) g^(cg) g^(dh).
    // Raise one index at a time to keep the contraction O(n^5).
    let raised1 = raise_index(&lower, &ginv, n, 0);
    let raised2 = raise_index(&raised1, &ginv, n, 1);
    let raised3 = raise_index(&raised2, &ginv, n, 2);
    let raised4 = raise_index(&raised3, &ginv, n, 3);
    let rm2: f64 = lower.iter().zip(&raised4).map(|(a, b)| a * b).sum();

    // symmetry and first-Bianchi defects
    let rat = |i: usize, j: usize, k: usize, l: usize| lower[((i * n + j) * n + k) * n + l];
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    defect = defect
                        .max((rat(i, j, k, l) + rat(j, i, k, l)).abs())
                        .max((rat(i, j, k, l) + rat(i, j, l, k)).abs())
                        .max((rat(i, j, k, l) - rat(k, l, i, j)).abs())
                        .max((rat(i, j, k, l) + rat(i, k, l, j) + rat(i, l, j, k)).abs());
                }
            }
        }
    }

    Ok(FdCurvature {
        n,
        riemann_lower: lower,
        ric,
        sc,
        rm_norm: rm2.max(0.0).sqrt(),
        sym_defect: defect,
    })
}

fn raise_index(t: &[f64], ginv: &[Vec<f64>], n: usize, pos: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n * n];
    let stride = [n * n * n, n * n, n, 1];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let idx = [a, b, c, d];
                    let mut v = 0.0;
                    for m in 0..n {
                        let mut src = idx;
                        src[pos] = m;
                        let flat = src[0] * stride[0] + src[1] * stride[1] + src[2] * stride[2] + src[3];
                        v += ginv[idx[pos]][m] * t[flat];
                    }
                    out[a * stride[0] + b * stride[1] + c * stride[2] + d] = v;
                }
            }
        }
    }
    out
}

/// Christoffels `Gam^l_(ij)` at `x`, flattened over (l, i, j).
fn christoffel<F>(sampler: &F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let n = x.len();
    let g = sampler(x);
    check_metric(&g, n)?;
    let ginv = invert(&g)?;
    // dg[k][i][j] = d_k g_(ij)
    let mut dg = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        let mut xp = x.to_vec();
        xp[k] += h;
        let mut xm = x.to_vec();
        xm[k] -= h;
        let gp = sampler(&xp);
        let gm = sampler(&xm);
        check_metric(&gp, n)?;
        check_metric(&gm, n)?;
        for i in 0..n {
            for j in 0..n {
                dg[k][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for m in 0..n {
                    v += ginv[l][m] * (dg[i][j][m] + dg[j][i][m] - dg[m][i][j]);
                }
                gamma[(l * n + i) * n + j] = 0.5 * v;
            }
        }
    }
    Ok(gamma)
}

fn check_metric(g: &[Vec<f64>], n: usize) -> Result<()> {
    if g.len() != n || g.iter().any(|row| row.len() != n) {
        return Err(Error::Domain("metric sampler returned a non-square matrix".into()));
    }
    if g.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("metric sampler returned non-finite entries".into()));
    }
    Ok(())
}

/// Gauss-Jordan inverse with partial pivoting; errors on (near-)singular
/// sampled metrics.
fn invert(g: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = g.len();
    let mut aug: Vec<Vec<f64>> = g.iter().cloned().collect();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = g
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, aug[r][col]))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        if pivot.abs() < 1e-12 * scale {
            return Err(Error::Domain(
                "sampled metric is numerically singular; oracle chart degenerate here".into(),
            ));
        }
        aug.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p = aug[col][col];
        for j in 0..n {
            aug[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        aug[r][j] -= f * aug[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Chart sampler for the round sphere `c * g_S` in hyperspherical
/// coordinates; supports n in 2..=4.
pub fn sphere_chart(n: usize, c: f64) -> impl Fn(&[f64]) -> Vec<Vec<f64>> {
    move |x: &[f64]| {
        let mut g = vec![vec![0.0; n]; n];
        let mut factor = c;
        for i in 0..n {
            g[i][i] = factor;
            if i + 1 < n {
                factor *= x[i].sin() * x[i].sin();
            }
        }
        g
    }
}

/// Chart sampler for the warped product `a(x)^2 dx^2 + w(x)^2 g_(S^(n-1))`,
/// coordinates (x, theta_1, ..., theta_(n-1)).
pub fn warped_chart<A, W>(n: usize, a: A, w: W) -> impl Fn(&[f64]) -> Vec<Vec<f64>>
where
    A: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    move |x: &[f64]| {
        let av = a(x[0]);
        let wv = w(x[0]);
        let mut g = vec![vec![0.0; n]; n];
        g[0][0] = av * av;
        let mut factor = wv * wv;
        for i in 1..n {
            g[i][i] = factor;
            if i + 1 < n {
                factor *= x[i].sin() * x[i].sin();
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_chart_is_flat() {
        let flat = |_: &[f64]| vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = fd_curvature_oracle(&flat, &[0.3, -0.2], 1e-3).unwrap();
        assert!(out.rm_norm < 1e-10);
        assert!(out.sc.abs() < 1e-10);
        assert!(out.sym_defect < 1e-10);
    }

    #[test]
    fn round_two_sphere_sectional_and_norm() {
        let c = 2.0;
        let chart = sphere_chart(2, c);
        let x = [1.0, 0.7];
        let out = fd_curvature_oracle(&chart, &x, 1e-3).unwrap();
        let g = chart(&x);
        assert_relative_eq!(out.sectional(&g, 0, 1), 1.0 / c, epsilon = 1e-5);
        // pins the tensor-norm convention sqrt(2n(n-1))/c = 1 for n=2, c=2
        assert_relative_eq!(out.rm_norm, 1.0, epsilon = 1e-5);
        assert_relative_eq!(out.sc, 1.0, epsilon = 1e-5);
        assert!(out.sym_defect < 10.0 * 1e-6);
    }

    #[test]
    fn round_three_sphere_norm() {
        let c = 1.5;
        let chart = sphere_chart(3, c);
        let out = fd_curvature_oracle(&chart, &[1.0, 1.2, 0.5], 1e-3).unwrap();
        let expect = (2.0 * 3.0 * 2.0f64).sqrt() / c;
        assert_relative_eq!(out.rm_norm, expect, epsilon = 1e-4);
        assert_relative_eq!(out.sc, 6.0 / c, epsilon = 1e-4);
    }

    #[test]
    fn unit_cylinder_norm() {
        let chart = warped_chart(3, |_| 1.0, |_| 1.0);
        let out = fd_curvature_oracle(&chart, &[0.5, 1.1, 0.7], 1e-3).unwrap();
        assert_relative_eq!(out.rm_norm * out.rm_norm, 4.0, epsilon = 1e-5);
        assert_relative_eq!(out.sc, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn degenerate_chart_is_rejected() {
        let chart = sphere_chart(2, 1.0);
        // theta = 0 pole: g_(phi phi) = 0
        assert!(fd_curvature_oracle(&chart, &[0.0, 0.3], 1e-3).is_err());
    }
}
