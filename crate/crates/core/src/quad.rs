//! One-dimensional numerical helpers: cumulative quadrature, local
//! polynomial interpolation and differentiation, splines, power-law fits and
//! a restarted GMRES for real vectors.

use crate::error::{Error, Result};

/// Cumulative integrals I_k = ∫_{x_k}^{x_last} f on a uniform grid of step h,
/// using the fourth-order four-point rule on interior cells.
pub fn cumulative_from_right(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for k in (0..n - 1).rev() {
        let cell = if n < 4 {
            0.5 * h * (f[k] + f[k + 1])
        } else if k == 0 {
            h * (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0
        } else if k + 2 >= n {
            h * (-f[k - 1] + 8.0 * f[k] + 5.0 * f[k + 1]) / 12.0
        } else {
            h * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]) / 24.0
        };
        out[k] = out[k + 1] + cell;
    }
    out
}

/// Cumulative integrals from the left: I_k = ∫_{x_0}^{x_k} f.
pub fn cumulative_from_left(f: &[f64], h: f64) -> Vec<f64> {
    let right = cumulative_from_right(f, h);
    right.iter().map(|r| right[0] - r).collect()
}

fn bracket(xs: &[f64], x: f64, width: usize) -> usize {
    let n = xs.len();
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    let half = width / 2;
    let start = i.saturating_sub(half - 1);
    start.min(n.saturating_sub(width))
}

/// Local Lagrange interpolation on sorted nodes (four points).
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    let w = n.min(4);
    let s = bracket(xs, x, w);
    let mut acc = 0.0;
    for i in s..s + w {
        let mut l = 1.0;
        for j in s..s + w {
            if j != i {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += l * ys[i];
    }
    acc
}

/// Derivative of the local five-point interpolant at every node.
pub fn derivative(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    derivative_with_width(xs, ys, 5)
}

/// Derivative of the local interpolant through `width` neighbouring nodes.
pub fn derivative_with_width(xs: &[f64], ys: &[f64], width: usize) -> Vec<f64> {
    let n = xs.len();
    let w = n.min(width);
    (0..n)
        .map(|k| {
            let s = (k.saturating_sub(w / 2)).min(n - w);
            let x = xs[k];
            let mut acc = 0.0;
            for i in s..s + w {
                // d/dx of the i-th Lagrange basis polynomial at x
                let mut sum = 0.0;
                for m in s..s + w {
                    if m == i {
                        continue;
                    }
                    let mut prod = 1.0 / (xs[i] - xs[m]);
                    for j in s..s + w {
                        if j != i && j != m {
                            prod *= (x - xs[j]) / (xs[i] - xs[j]);
                        }
                    }
                    sum += prod;
                }
                acc += sum * ys[i];
            }
            acc
        })
        .collect()
}

/// Least-squares slope of ln|y| against ln x, skipping zero samples.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Natural cubic spline through (x_i, y_i); constant extension outside.
#[derive(Clone, Debug)]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Spline> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::InvalidArgument("spline needs at least 3 matching samples".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline abscissae must increase".into()));
        }
        // tridiagonal system for second derivatives, natural ends
        let mut a = vec![0.0; n];
        let mut b = vec![1.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            c[i] = h1 / 6.0;
            d[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = d[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
        }
        Ok(Spline { x, y, m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Restarted GMRES for A x = b with a left preconditioner folded into `apply`.
pub fn gmres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    restart: usize,
    max_restarts: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut x = x0;
    let mut rel = f64::INFINITY;
    for _ in 0..max_restarts {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = dot(&r, &r).sqrt();
        rel = beta / bnorm;
        if rel < tol {
            return Ok((x, rel));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = apply(&v[k]);
            for j in 0..=k {
                h[j][k] = dot(&w, &v[j]);
                for i in 0..n {
                    w[i] -= h[j][k] * v[j][i];
                }
            }
            // second pass for orthogonality
            for j in 0..=k {
                let c = dot(&w, &v[j]);
                h[j][k] += c;
                for i in 0..n {
                    w[i] -= c * v[j][i];
                }
            }
            h[k + 1][k] = dot(&w, &w).sqrt();
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if (g[k + 1].abs() / bnorm) < tol * 0.1 || den == 0.0 {
                break;
            }
            let norm_w = dot(&w, &w).sqrt();
            v.push(w.iter().map(|wi| wi / norm_w.max(1e-300)).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i];
            }
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = dot(&r, &r).sqrt() / bnorm;
    if final_rel < tol {
        Ok((x, final_rel))
    } else {
        Err(Error::NoConvergence { what: "gmres", iterations: max_restarts * restart, residual: final_rel.min(rel) })
    }
}
