//! The linearized operator L around Q, its real-system form 𝓛 = −iL, the
//! secular basis with its biorthogonal family, the projectors P_S, P_M, and
//! the group e^{itL}.
//!
//! Conventions: Lf = L₊(Re f) + iL₋(Im f), ⟨f,g⟩ = Re∫f ḡ, and the relations
//! 𝓛n₄ = −2n₁, 𝓛n₃ = 2n₂, 𝓛n₅ = 2n₄, 𝓛n₆ = −2n₅ + 2γ₀n₁ hold for 𝓛 = −iL.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cplx, sub, Geometry, Grid};
use crate::ground_state::{sigma, GroundState};
use crate::split::{self, Order, SplitProblem};
use crate::C64;

pub struct LinearizedOperator<'g> {
    pub grid: &'g Grid,
    pub q: Vec<f64>,
    /// Q^{4/d}
    pub qs: Vec<f64>,
    pub sigma: f64,
}

impl<'g> LinearizedOperator<'g> {
    pub fn new(grid: &'g Grid, gs: &GroundState) -> Self {
        LinearizedOperator { grid, q: gs.q.clone(), qs: gs.q_pow_sigma(), sigma: sigma(grid.dim()) }
    }

    fn with_potential(&self, f: &[C64], coef: f64) -> Vec<C64> {
        let lap = self.grid.laplacian(f);
        (0..f.len()).map(|i| -lap[i] + f[i] - coef * self.qs[i] * f[i]).collect()
    }

    /// −Δ + 1 − (4/d + 1)Q^{4/d}, applied to real and imaginary parts alike.
    pub fn apply_lplus(&self, f: &[C64]) -> Vec<C64> {
        self.with_potential(f, self.sigma + 1.0)
    }

    /// −Δ + 1 − Q^{4/d}
    pub fn apply_lminus(&self, f: &[C64]) -> Vec<C64> {
        self.with_potential(f, 1.0)
    }

    /// Lf = −Δf + f − (2/d + 1)Q^{4/d}f − (2/d)Q^{4/d}f̄
    pub fn apply_l(&self, f: &[C64]) -> Vec<C64> {
        let lap = self.grid.laplacian(f);
        let a = self.sigma / 2.0 + 1.0;
        let b = self.sigma / 2.0;
        (0..f.len())
            .map(|i| -lap[i] + f[i] - self.qs[i] * (a * f[i] + b * f[i].conj()))
            .collect()
    }

    /// 𝓛f = −iLf
    pub fn apply_script_l(&self, f: &[C64]) -> Vec<C64> {
        self.apply_l(f).into_iter().map(|v| C64::new(v.im, -v.re)).collect()
    }

    /// Re⟨Lf, f⟩
    pub fn quadratic_form(&self, f: &[C64]) -> f64 {
        self.grid.pairing(&self.apply_l(f), f)
    }

    /// Split flow of ∂f = sign·iLf.
    pub fn flow(&self, sign: f64) -> LinearFlow<'_, 'g> {
        LinearFlow { op: self, sign }
    }

    /// e^{i·sign·tL}f by direct time stepping with at most `dt` per step.
    /// The sixth-order composition is accurate but needs dt ≲ 0.005 for stability.
    pub fn evolve_direct(&self, f: &[C64], t: f64, sign: f64, dt: f64, order: Order) -> Result<Vec<C64>> {
        let n = (t.abs() / dt).ceil().max(1.0) as usize;
        let mut g = f.to_vec();
        split::integrate(&self.flow(sign), &mut g, 0.0, t, n, order)?;
        Ok(g)
    }
}

/// ∂f = sign·iLf split into the free part and the pointwise Q^{4/d} part.
pub struct LinearFlow<'a, 'g> {
    op: &'a LinearizedOperator<'g>,
    sign: f64,
}

impl SplitProblem for LinearFlow<'_, '_> {
    fn linear(&self, f: &mut Vec<C64>, h: f64) {
        let s = self.sign * h;
        *f = self.op.grid.multiplier_c(f, |l| C64::from_polar(1.0, s * (l + 1.0)));
    }

    fn local(&self, f: &mut Vec<C64>, _t: f64, h: f64) -> Result<()> {
        rotate_potential(f, &self.op.qs, self.op.sigma, self.sign * h);
        Ok(())
    }
}

/// Exact flow of f₁′ = qf₂, f₂′ = −(σ+1)qf₁ over time h (q = Q^σ).
pub(crate) fn rotate_potential(f: &mut [C64], qs: &[f64], sigma: f64, h: f64) {
    let s = (sigma + 1.0).sqrt();
    for (v, q) in f.iter_mut().zip(qs) {
        let (sn, cs) = (s * q * h).sin_cos();
        let (a, b) = (v.re, v.im);
        *v = C64::new(a * cs + b / s * sn, -s * a * sn + b * cs);
    }
}

/// Label of a secular direction; ℓ is the axis for the translation and
/// Galilean families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    N1,
    N2(usize),
    N3(usize),
    N4,
    N5,
    N6,
}

impl Mode {
    pub fn family(self) -> usize {
        match self {
            Mode::N1 => 1,
            Mode::N2(_) => 2,
            Mode::N3(_) => 3,
            Mode::N4 => 4,
            Mode::N5 => 5,
            Mode::N6 => 6,
        }
    }

    pub fn label(self) -> String {
        match self {
            Mode::N2(l) => format!("2_{}", l + 1),
            Mode::N3(l) => format!("3_{}", l + 1),
            m => m.family().to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GramReport {
    pub labels: Vec<String>,
    /// ⟨n_k, m_j⟩ with the analytic m_j (row k, column j).
    pub raw: Vec<Vec<f64>>,
    pub raw_max_deviation: f64,
    /// Deviation after the biorthogonalization sweep.
    pub swept_max_deviation: f64,
    /// ⟨n₆, m₄⟩ before the sweep: vanishes iff γ₀ is consistent.
    pub gamma0_cross_check: f64,
}

pub struct SecularBasis {
    pub modes: Vec<Mode>,
    pub n: Vec<Vec<C64>>,
    pub m: Vec<Vec<C64>>,
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma0: f64,
    pub gram: GramReport,
}

/// Building blocks shared by the basis and the source terms.
pub struct Profiles {
    pub q: Vec<C64>,
    pub qtilde: Vec<C64>,
    /// ∂_ℓQ for each Cartesian axis (empty on radial grids).
    pub dq: Vec<Vec<C64>>,
    /// y_ℓQ for each Cartesian axis.
    pub xq: Vec<Vec<C64>>,
    /// ΛQ = d/2·Q + y·∇Q
    pub lambda_q: Vec<C64>,
    /// |y|²Q
    pub r2q: Vec<C64>,
}

impl Profiles {
    pub fn new(grid: &Grid, gs: &GroundState) -> Result<Profiles> {
        let q = cplx(&gs.q);
        let axes = match grid.geometry() {
            Geometry::Line => 1,
            Geometry::Plane => 2,
            Geometry::Radial => 0,
        };
        let mut dq = Vec::new();
        let mut xq = Vec::new();
        for l in 0..axes {
            dq.push(grid.derivative(&q, l)?);
            xq.push(grid.coords().iter().zip(&q).map(|(c, v)| c[l] * v).collect());
        }
        let dil = grid.dilation(&q);
        let half_d = grid.dim() as f64 / 2.0;
        let lambda_q = q.iter().zip(&dil).map(|(a, b)| half_d * a + b).collect();
        let r2q = q.iter().zip(grid.radius()).map(|(a, r)| r * r * a).collect();
        Ok(Profiles { q, qtilde: cplx(&gs.qtilde), dq, xq, lambda_q, r2q })
    }
}

fn lin(terms: &[(C64, &[C64])]) -> Vec<C64> {
    let n = terms[0].1.len();
    (0..n).map(|i| terms.iter().map(|(c, f)| c * f[i]).sum()).collect()
}

/// Solve the small dense system A x = b by Gaussian elimination with pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        if a[p][c].abs() < 1e-14 {
            return Err(Error::LinearSolve("singular Gram matrix".into()));
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in 0..n {
                    a[r][k] -= f * a[c][k];
                }
                for k in 0..b[r].len() {
                    b[r][k] -= f * b[c][k];
                }
            }
        }
    }
    for r in 0..n {
        let d = a[r][r];
        for v in b[r].iter_mut() {
            *v /= d;
        }
    }
    Ok(b)
}

impl SecularBasis {
    /// Builds n_j, m_j; aborts if the analytic Gram matrix deviates from the
    /// identity by more than 1e−4.
    pub fn build(grid: &Grid, gs: &GroundState) -> Result<SecularBasis> {
        let pr = Profiles::new(grid, gs)?;
        let (a0, b0, g0) = (gs.alpha0, gs.beta0, gs.gamma0);
        let i = C64::i();
        let one = C64::new(1.0, 0.0);
        let mut modes = vec![Mode::N1];
        let mut n = vec![lin(&[(-i / a0, &pr.q)])];
        let mut m = vec![lin(&[(i, &pr.qtilde)])];
        for l in 0..pr.dq.len() {
            modes.push(Mode::N2(l));
            n.push(lin(&[(-one / b0, &pr.dq[l])]));
            m.push(pr.xq[l].clone());
        }
        for l in 0..pr.dq.len() {
            modes.push(Mode::N3(l));
            n.push(lin(&[(i / b0, &pr.xq[l])]));
            m.push(lin(&[(-i, &pr.dq[l])]));
        }
        modes.push(Mode::N4);
        n.push(lin(&[(one / a0, &pr.lambda_q)]));
        m.push(lin(&[(-0.5 * one, &pr.r2q), (-g0 * one, &pr.q)]));
        modes.push(Mode::N5);
        n.push(lin(&[(-0.5 * i / a0, &pr.r2q), (-g0 * i / a0, &pr.q)]));
        m.push(lin(&[(i, &pr.lambda_q)]));
        modes.push(Mode::N6);
        n.push(lin(&[(one / a0, &pr.qtilde)]));
        m.push(lin(&[(-one, &pr.q)]));

        let k = modes.len();
        let raw: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|c| grid.pairing(&n[r], &m[c])).collect()).collect();
        let dev = |g: &Vec<Vec<f64>>| {
            let mut e: f64 = 0.0;
            for r in 0..k {
                for c in 0..k {
                    e = e.max((g[r][c] - if r == c { 1.0 } else { 0.0 }).abs());
                }
            }
            e
        };
        let raw_dev = dev(&raw);
        if raw_dev > 1e-4 {
            return Err(Error::Hypothesis(format!("Gram matrix deviates from identity by {raw_dev:.3e}")));
        }
        let i6 = modes.iter().position(|x| *x == Mode::N6).unwrap();
        let i4 = modes.iter().position(|x| *x == Mode::N4).unwrap();
        let cross = raw[i6][i4];
        // m'_j = Σ_i C_{ji} m_i with C = G^{-T}
        let gt: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|c| raw[c][r]).collect()).collect();
        let ident: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
        let inv_gt = solve_dense(gt, ident)?;
        let swept: Vec<Vec<C64>> = (0..k)
            .map(|j| {
                let terms: Vec<(C64, &[C64])> = (0..k).map(|r| (C64::new(inv_gt[j][r], 0.0), m[r].as_slice())).collect();
                lin(&terms)
            })
            .collect();
        let after: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|c| grid.pairing(&n[r], &swept[c])).collect()).collect();
        let gram = GramReport {
            labels: modes.iter().map(|x| x.label()).collect(),
            raw,
            raw_max_deviation: raw_dev,
            swept_max_deviation: dev(&after),
            gamma0_cross_check: cross,
        };
        Ok(SecularBasis { modes, n, m: swept, alpha0: a0, beta0: b0, gamma0: g0, gram })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index(&self, mode: Mode) -> Option<usize> {
        self.modes.iter().position(|m| *m == mode)
    }

    pub fn n_of(&self, mode: Mode) -> &[C64] {
        &self.n[self.index(mode).expect("mode present in basis")]
    }

    pub fn m_of(&self, mode: Mode) -> &[C64] {
        &self.m[self.index(mode).expect("mode present in basis")]
    }

    /// ν_j = ⟨w, m_j⟩
    pub fn coefficients(&self, grid: &Grid, w: &[C64]) -> Vec<f64> {
        self.m.iter().map(|m| grid.pairing(w, m)).collect()
    }

    /// Σ ν_j n_j
    pub fn reconstruct(&self, nu: &[f64]) -> Vec<C64> {
        let len = self.n[0].len();
        let mut out = vec![C64::new(0.0, 0.0); len];
        for (c, f) in nu.iter().zip(&self.n) {
            if *c != 0.0 {
                for i in 0..len {
                    out[i] += c * f[i];
                }
            }
        }
        out
    }

    pub fn project_s(&self, grid: &Grid, w: &[C64]) -> Vec<C64> {
        self.reconstruct(&self.coefficients(grid, w))
    }

    pub fn project_m(&self, grid: &Grid, w: &[C64]) -> Vec<C64> {
        sub(w, &self.project_s(grid, w))
    }

    /// Coefficients of e^{itL}(Σν_j n_j): the exact polynomial flow
    /// ν₁′ = 2ν₄ − 2γ₀ν₆, ν₂′ = −2ν₃, ν₄′ = −2ν₅, ν₅′ = 2ν₆, ν₃′ = ν₆′ = 0.
    pub fn secular_flow(&self, nu: &[f64], t: f64) -> Vec<f64> {
        let get = |m: Mode| self.index(m).map(|i| nu[i]).unwrap_or(0.0);
        let (n4, n5, n6) = (get(Mode::N4), get(Mode::N5), get(Mode::N6));
        let mut out = nu.to_vec();
        for (i, mode) in self.modes.iter().enumerate() {
            out[i] = match *mode {
                Mode::N1 => {
                    nu[i] + 2.0 * n4 * t - 2.0 * n5 * t * t - 4.0 / 3.0 * n6 * t.powi(3) - 2.0 * self.gamma0 * n6 * t
                }
                Mode::N2(l) => nu[i] - 2.0 * get(Mode::N3(l)) * t,
                Mode::N3(_) => nu[i],
                Mode::N4 => n4 - 2.0 * n5 * t - 2.0 * n6 * t * t,
                Mode::N5 => n5 + 2.0 * n6 * t,
                Mode::N6 => n6,
            };
        }
        out
    }
}

/// Result of the split evolution e^{itL}f = e^{itL}P_S f + e^{itL}P_M f.
pub struct SplitEvolution {
    pub field: Vec<C64>,
    /// max_j |⟨stepped M part, m_j⟩| before re-projection.
    pub leakage: f64,
}

/// e^{i·sign·tL}: secular part exactly, M part by time stepping followed by
/// re-projection onto M.
pub fn evolve_semigroup(
    op: &LinearizedOperator,
    basis: &SecularBasis,
    f: &[C64],
    t: f64,
    sign: f64,
    dt: f64,
    order: Order,
) -> Result<SplitEvolution> {
    let grid = op.grid;
    let nu = basis.coefficients(grid, f);
    let mpart = sub(f, &basis.reconstruct(&nu));
    let stepped = op.evolve_direct(&mpart, t, sign, dt, order)?;
    let leak_nu = basis.coefficients(grid, &stepped);
    let leakage = leak_nu.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mfinal = sub(&stepped, &basis.reconstruct(&leak_nu));
    let s = basis.reconstruct(&basis.secular_flow(&nu, sign * t));
    Ok(SplitEvolution { field: mfinal.iter().zip(&s).map(|(a, b)| a + b).collect(), leakage })
}

/// H¹ norms of e^{i·sign·tL}f sampled at uniformly spaced times in [0, t_end].
pub fn growth_curve(
    op: &LinearizedOperator,
    f: &[C64],
    t_end: f64,
    samples: usize,
    sign: f64,
    dt: f64,
    order: Order,
) -> Result<Vec<(f64, f64)>> {
    let mut g = f.to_vec();
    let mut out = vec![(0.0, op.grid.hs_norm(&g, 1.0))];
    let dt_sample = t_end / samples as f64;
    let sub_steps = (dt_sample / dt).ceil().max(1.0) as usize;
    for k in 0..samples {
        let t0 = k as f64 * dt_sample;
        split::integrate(&op.flow(sign), &mut g, t0, t0 + dt_sample, sub_steps, order)?;
        out.push((t0 + dt_sample, op.grid.hs_norm(&g, 1.0)));
    }
    Ok(out)
}

/// A smooth, exponentially decaying random field: a few complex Gaussian
/// bumps with random centers, widths and carrier waves (radial on radial grids).
pub fn random_field<R: Rng>(grid: &Grid, rng: &mut R, bumps: usize) -> Vec<C64> {
    let radial = grid.geometry() == Geometry::Radial;
    let plane = grid.geometry() == Geometry::Plane;
    let params: Vec<(C64, [f64; 2], f64, [f64; 2])> = (0..bumps)
        .map(|_| {
            let amp = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let w = rng.gen_range(0.6..2.0);
            let mut c = [0.0; 2];
            let mut k = [0.0; 2];
            if !radial {
                c[0] = rng.gen_range(-2.5..2.5);
                k[0] = rng.gen_range(-1.5..1.5);
                if plane {
                    c[1] = rng.gen_range(-2.5..2.5);
                    k[1] = rng.gen_range(-1.5..1.5);
                }
            }
            (amp, c, w, k)
        })
        .collect();
    grid.from_fn(|x| {
        params
            .iter()
            .map(|(a, c, w, k)| {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                a * (-d2 / (w * w)).exp() * C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1])
            })
            .sum()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub samples: usize,
    /// min over samples of Re⟨Lf,f⟩/‖f‖²_{H¹}
    pub c_lower: f64,
    pub c_upper: f64,
}

/// Fitted coercivity constants of L on M over the given fields (projected onto M).
pub fn coercivity(op: &LinearizedOperator, basis: &SecularBasis, fields: &[Vec<C64>]) -> CoercivityReport {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for f in fields {
        let g = basis.project_m(op.grid, f);
        let h1 = op.grid.hs_norm(&g, 1.0).powi(2);
        if h1 == 0.0 {
            continue;
        }
        let r = op.quadratic_form(&g) / h1;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    CoercivityReport { samples: fields.len(), c_lower: lo, c_upper: hi }
}
