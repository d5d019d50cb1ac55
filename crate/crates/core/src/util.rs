//! Shared numerics: quadrature nodes, 1-D searches, fits, special functions,
//! and the fixed float formatting used by every emitted artifact.

/// Formats with 17 significant digits (1 leading + 16 fractional), the fixed
/// format used in CSV/report output so reruns are byte-identical.
pub fn fmt_g17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; k <= a few hundred is exact to
/// machine precision. Nodes are returned in increasing order.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let m = k.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root of P_k.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre P_k(x) and its derivative.
fn legendre_pd(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Golden-section minimisation of a unimodal function on [a, b].
///
/// Returns the abscissa of the bracket midpoint once the bracket is shorter
/// than `tol` (or after `max_iter` shrinks). Values of `f` near a smooth
/// minimum agree to machine precision once the bracket is ~sqrt(eps) wide,
/// so position accuracy better than ~1e-8 * scale is not attainable.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// First derivative at the middle node of three unequally spaced samples
/// (second-order accurate, exact on quadratics).
pub fn d_dt_3pt(tm: f64, t0: f64, tp: f64, fm: f64, f0: f64, fp: f64) -> f64 {
    let hm = t0 - tm;
    let hp = tp - t0;
    (hm * hm * fp + (hp * hp - hm * hm) * f0 - hp * hp * fm) / (hp * hm * (hp + hm))
}

/// Least-squares line y = intercept + slope * x. Returns
/// (intercept, slope, rms residual).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two samples for a line fit");
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        ss += r * r;
    }
    (intercept, slope, (ss / nf).sqrt())
}

/// ln Gamma(x) for x > 0 (Lanczos, g = 7, 9 coefficients; ~1e-14 relative).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0);
    if x < 0.5 {
        // Reflection keeps the Lanczos argument in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma Q(s, x) = Gamma(s, x) / Gamma(s).
///
/// Series for x < s + 1, Lentz continued fraction otherwise; the usual split
/// keeps both branches fast-converging.
pub fn reg_upper_gamma(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let lg = ln_gamma(s);
    if x < s + 1.0 {
        // P(s,x) by series, Q = 1 - P.
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut a = s;
        for _ in 0..500 {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * (-x + s * x.ln() - lg).exp()
    } else {
        // Q(s,x) by modified Lentz on the standard continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + s * x.ln() - lg).exp() * h
    }
}

/// Surface area of the unit sphere S^m in R^(m+1).
pub fn unit_sphere_area(m: usize) -> f64 {
    let mf = m as f64;
    2.0 * std::f64::consts::PI.powf((mf + 1.0) / 2.0) / (ln_gamma((mf + 1.0) / 2.0)).exp()
}

/// Volume of the unit ball B^n in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    let nf = n as f64;
    std::f64::consts::PI.powf(nf / 2.0) / (ln_gamma(nf / 2.0 + 1.0)).exp()
}
