//! Ground state ΔQ + Q^{1+4/d} = Q, the auxiliary profile L₊Q̃ = −|y|²Q and
//! the normalization constants of the secular basis.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{cplx, re, Grid};
use crate::quad::gmres;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateOptions {
    /// Target L² residual of the profile equation.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative residual of the linear solve for Q̃.
    pub linear_tol: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { tol: 1e-10, max_iter: 500, linear_tol: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundState {
    pub d: usize,
    pub q: Vec<f64>,
    pub qtilde: Vec<f64>,
    pub mass: f64,
    pub gn_constant: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma0: f64,
    pub residual: f64,
    pub iterations: usize,
    pub qtilde_residual: f64,
    /// |∫QQ̃ + ½∫|y|²Q²| / (½∫|y|²Q²)
    pub identity_rel_error: f64,
    /// Pohozaev-type identity ∫|∇Q|² + ∫Q² − ∫Q^{2+4/d}, relative.
    pub pohozaev_rel_error: f64,
    /// Exponential decay rate of Q fitted on the tail.
    pub decay_rate: f64,
    pub min_value: f64,
}

/// Exponent 4/d of the nonlinearity.
pub fn sigma(d: usize) -> f64 {
    4.0 / d as f64
}

/// 3^{1/4} sech^{1/2}(2x): the one-dimensional ground state.
pub fn closed_form_1d(x: f64) -> f64 {
    3f64.powf(0.25) / (2.0 * x).cosh().sqrt()
}

fn profile_residual(grid: &Grid, q: &[f64], p: f64) -> f64 {
    let lap = grid.laplacian_real(q);
    let r: Vec<f64> = q
        .iter()
        .zip(&lap)
        .map(|(qi, li)| li - qi + qi.abs().powf(p - 1.0) * qi)
        .collect();
    grid.integrate(&r.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
}

/// Petviashvili iteration from a seed (a Gaussian by default).
pub fn solve_q(grid: &Grid, opts: &GroundStateOptions, seed: Option<&[f64]>) -> Result<(Vec<f64>, f64, usize)> {
    let d = grid.dim();
    let p = 1.0 + sigma(d);
    let gamma = p / (p - 1.0);
    let mut q: Vec<f64> = match seed {
        Some(s) if s.len() == grid.len() => s.to_vec(),
        Some(_) => return invalid("seed length does not match the grid"),
        None => grid.radius().iter().map(|r| 2.0 * (-r * r).exp()).collect(),
    };
    let mut res = profile_residual(grid, &q, p);
    if res < opts.tol {
        return Ok((q, res, 0));
    }
    for it in 1..=opts.max_iter {
        let qp: Vec<f64> = q.iter().map(|v| v.abs().powf(p - 1.0) * v).collect();
        let qh = grid.forward(&cplx(&q));
        let nh = grid.forward(&cplx(&qp));
        let lam = grid.lambda();
        let num: f64 = qh.iter().zip(lam).map(|(c, l)| (1.0 + l) * c.norm_sqr()).sum();
        let den: f64 = qh.iter().zip(&nh).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
        if den <= 0.0 {
            return Err(Error::NoConvergence { what: "ground state", iterations: it, residual: res });
        }
        let m = (num / den).powf(gamma);
        let next: Vec<f64> = re(&grid.symmetrize(&grid.resolvent(&cplx(&qp))))
            .into_iter()
            .map(|v| m * v)
            .collect();
        q = next;
        res = profile_residual(grid, &q, p);
        if !res.is_finite() {
            break;
        }
        if res < opts.tol {
            return Ok((q, res, it));
        }
    }
    Err(Error::NoConvergence { what: "ground state", iterations: opts.max_iter, residual: res })
}

/// L₊f = −Δf + f − (4/d+1)Q^{4/d}f for real f.
pub fn apply_lplus_real(grid: &Grid, q: &[f64], f: &[f64]) -> Vec<f64> {
    let s = sigma(grid.dim());
    let lap = grid.laplacian_real(f);
    (0..f.len())
        .map(|i| -lap[i] + f[i] - (s + 1.0) * q[i].powf(s) * f[i])
        .collect()
}

/// Solve L₊Q̃ = −|y|²Q on the symmetric sector.
pub fn solve_qtilde(grid: &Grid, q: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let s = sigma(grid.dim());
    let pot: Vec<f64> = q.iter().map(|v| (s + 1.0) * v.powf(s)).collect();
    let rhs: Vec<f64> = q.iter().zip(grid.radius()).map(|(v, r)| -r * r * v).collect();
    let sym = |f: &[f64]| re(&grid.symmetrize(&cplx(f)));
    let precond = |f: &[f64]| re(&grid.resolvent(&cplx(f)));
    // (1 − Δ)^{-1} L₊ = I − (1 − Δ)^{-1} W
    let apply = |x: &[f64]| {
        let x = sym(x);
        let wx: Vec<f64> = x.iter().zip(&pot).map(|(a, b)| a * b).collect();
        let r = sym(&precond(&wx));
        x.iter().zip(&r).map(|(a, b)| a - b).collect::<Vec<f64>>()
    };
    let b = sym(&precond(&rhs));
    let (x, _) = gmres(&apply, &b, vec![0.0; q.len()], tol, 80, 20)?;
    let x = sym(&x);
    let lx = apply_lplus_real(grid, q, &x);
    let r: Vec<f64> = lx.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).collect();
    Ok((x, grid.integrate(&r).sqrt()))
}

/// (α₀, β₀, γ₀) from the biorthogonality conditions:
/// β₀ = ½∫Q², α₀ = ½∫|y|²Q², γ₀ = −∫|y|²QQ̃ / (2∫QQ̃).
pub fn normalization_constants(grid: &Grid, q: &[f64], qtilde: &[f64]) -> Result<(f64, f64, f64)> {
    let r2 = grid.radius().iter().map(|r| r * r);
    let beta0 = 0.5 * grid.integrate(&q.iter().map(|v| v * v).collect::<Vec<_>>());
    let alpha0 = 0.5 * grid.integrate(&q.iter().zip(r2.clone()).map(|(v, r)| r * v * v).collect::<Vec<_>>());
    let qqt = grid.integrate(&q.iter().zip(qtilde).map(|(a, b)| a * b).collect::<Vec<_>>());
    let r2qqt = grid.integrate(
        &q.iter().zip(qtilde).zip(r2).map(|((a, b), r)| r * a * b).collect::<Vec<_>>(),
    );
    if !(alpha0 > 0.0 && beta0 > 0.0) {
        return invalid(format!("normalization constants must be positive: alpha0 = {alpha0}, beta0 = {beta0}"));
    }
    if qqt == 0.0 {
        return invalid("∫QQ̃ vanishes");
    }
    Ok((alpha0, beta0, -r2qqt / (2.0 * qqt)))
}

fn lp_norm_pow(grid: &Grid, f: &[f64], p: f64) -> f64 {
    grid.integrate(&f.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>())
}

/// Ratio ‖f‖^{2+4/d}_{L^{2+4/d}} / (‖∇f‖²‖f‖^{4/d}); maximal at Q.
pub fn gn_ratio(grid: &Grid, f: &[crate::C64]) -> f64 {
    let s = sigma(grid.dim());
    let abs: Vec<f64> = f.iter().map(|c| c.norm()).collect();
    let num = lp_norm_pow(grid, &abs, 2.0 + s);
    let grad = grid.grad_norm(f);
    let l2 = grid.l2_norm(f);
    num / (grad * grad * l2.powf(s))
}

impl GroundState {
    pub fn solve(grid: &Grid, opts: &GroundStateOptions) -> Result<GroundState> {
        let d = grid.dim();
        let s = sigma(d);
        let (q, residual, iterations) = solve_q(grid, opts, None)?;
        let (qtilde, qtilde_residual) = solve_qtilde(grid, &q, opts.linear_tol)?;
        let (alpha0, beta0, gamma0) = normalization_constants(grid, &q, &qtilde)?;
        let mass = 2.0 * beta0;
        let qqt = grid.integrate(&q.iter().zip(&qtilde).map(|(a, b)| a * b).collect::<Vec<_>>());
        let identity_rel_error = (qqt + alpha0).abs() / alpha0;
        let grad2 = grid.grad_norm(&cplx(&q)).powi(2);
        let lp = lp_norm_pow(grid, &q, 2.0 + s);
        let pohozaev_rel_error = (grad2 + mass - lp).abs() / lp;
        let gn_constant = gn_ratio(grid, &cplx(&q));
        let (rs, ls): (Vec<f64>, Vec<f64>) = grid
            .radius()
            .iter()
            .zip(&q)
            .filter(|(r, v)| **r > 4.0 && **r < 12.0 && **v > 0.0)
            .map(|(r, v)| (*r, v.ln()))
            .unzip();
        let decay_rate = if rs.len() > 2 {
            // slope of ln Q against r, sign flipped
            let n = rs.len() as f64;
            let mr = rs.iter().sum::<f64>() / n;
            let ml = ls.iter().sum::<f64>() / n;
            let sxy: f64 = rs.iter().zip(&ls).map(|(r, l)| (r - mr) * (l - ml)).sum();
            let sxx: f64 = rs.iter().map(|r| (r - mr).powi(2)).sum();
            -sxy / sxx
        } else {
            f64::NAN
        };
        let min_value = q.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(GroundState {
            d,
            q,
            qtilde,
            mass,
            gn_constant,
            alpha0,
            beta0,
            gamma0,
            residual,
            iterations,
            qtilde_residual,
            identity_rel_error,
            pohozaev_rel_error,
            decay_rate,
            min_value,
        })
    }

    /// κ = (‖∇Q‖² + ¼‖yQ‖²)^{1/2}.
    pub fn kappa(&self, grid: &Grid) -> f64 {
        let qc = cplx(&self.q);
        (grid.grad_norm(&qc).powi(2) + 0.25 * grid.position_norm(&qc).powi(2)).sqrt()
    }

    /// Q^{4/d} sampled on the grid.
    pub fn q_pow_sigma(&self) -> Vec<f64> {
        let s = sigma(self.d);
        self.q.iter().map(|v| v.abs().powf(s)).collect()
    }
}
