//! Fixed-point construction of the remainder w on [τ₀, τ_max].
//!
//! One application of Φ = Φ₁ + Φ₂ to a remainder history w:
//!
//! ```text
//! Ψ:   p₄ = −D₄/α₀,  p₂,₃ = D₂,₃/β₀,  p₅ = (−D₅ − 2∫_τ^∞D₆)/(2α₀),  p₁ = (−D₁ − γ₀D₅)/α₀
//! Φ₁:  ν₆(τ) = −∫_τ^∞ D₆,  Φ₁(w) = ν₆n₆
//! Φ₂:  ∂_τφ = −iLφ + P_M Z_p(φ) + χ(τ)P_M[R_p(w) + Z_p(P_S w)],  φ(τ_max) = 0
//! ```
//!
//! where D_j = ⟨R_p(w) + Z_p(w), m_j⟩ depends on p through Z_p and through
//! the modulation path q(p). The outer iteration is damped Picard,
//! w ← (1 − θ)w + θΦ(w); non-convergence is reported, not raised.
//!
//! `simple_m` is the unmodulated operator 𝓜(h)(t) = ∫_t^∞ e^{i(τ−t)L}iR(h)(τ)dτ
//! used when V and g are flat to high order at the origin.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{sub, Grid};
use crate::ground_state::GroundState;
use crate::linops::{Mode, SecularBasis};
use crate::modulation::{measure_decay, DecayClass, ModulationPath, PPath, SolveOptions, TauGrid};
use crate::sources::{Frame, ProblemSpec, Secular, Sources};
use crate::C64;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneOptions {
    pub damping: f64,
    /// Sup-norm change of p at which the Ψ iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { damping: 0.8, tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructOptions {
    pub epsilon: f64,
    pub delta: f64,
    pub tau_max: f64,
    /// Spacing of the τ nodes at which w is stored.
    pub node_spacing: f64,
    /// Largest step of the backward M solve.
    pub dt: f64,
    /// Picard relaxation θ.
    pub damping: f64,
    /// Stop when ‖Φ(w) − w‖_Y falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// ‖w‖_Y above which the iteration is declared divergent.
    pub divergence_bound: f64,
    /// Largest |⟨φ, m_j⟩| tolerated before re-projection onto M.
    pub leakage_tol: f64,
    pub tune: TuneOptions,
    pub modulation: SolveOptions,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            epsilon: 0.1,
            delta: 1.6,
            tau_max: 200.0,
            node_spacing: 0.5,
            dt: 0.25,
            damping: 0.5,
            tol: 1e-8,
            max_iter: 60,
            divergence_bound: 1e3,
            leakage_tol: 1e-8,
            tune: TuneOptions::default(),
            modulation: SolveOptions::default(),
        }
    }
}

impl ConstructOptions {
    /// 1 < δ < 2, 0 < ε < 1/4 and ε < 1 − δ/2.
    pub fn validate(&self, tau0: f64) -> Result<()> {
        let (e, d) = (self.epsilon, self.delta);
        if !(d > 1.0 && d < 2.0 && e > 0.0 && e < 0.25 && e < 1.0 - d / 2.0) {
            return invalid(format!("need 1 < delta < 2, 0 < epsilon < 1/4, epsilon < 1 - delta/2; got epsilon = {e}, delta = {d}"));
        }
        if !(self.tau_max > tau0 + 2.0) {
            return invalid(format!("tau_max = {} must exceed tau0 + 2 = {}", self.tau_max, tau0 + 2.0));
        }
        if !(self.node_spacing > 0.0 && self.dt > 0.0 && self.dt <= self.node_spacing) {
            return invalid("need 0 < dt <= node_spacing");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0 && self.tune.damping > 0.0 && self.tune.damping <= 1.0) {
            return invalid("damping factors must lie in (0, 1]");
        }
        Ok(())
    }

    /// Decay class |p| ≲ τ^{−(3−3ε)} of the tuned modulation.
    pub fn class(&self) -> DecayClass {
        DecayClass::uniform(3.0 - 3.0 * self.epsilon)
    }
}

/// The three weighted sups defining ‖·‖_Y on [τ₀, τ_max].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct YNorm {
    /// sup τ^{2−ε}‖P_M w‖_{H^δ}
    pub hdelta: f64,
    /// sup τ^{2−2ε−δ}‖⟨y⟩^δ P_M w‖
    pub moment: f64,
    /// sup τ^{3−3ε}|⟨w, m₆⟩|
    pub secular: f64,
}

impl YNorm {
    pub fn max(&self) -> f64 {
        self.hdelta.max(self.moment).max(self.secular)
    }

    fn is_finite(&self) -> bool {
        self.max().is_finite()
    }
}

/// Outcome of the Ψ iteration for a fixed w.
#[derive(Clone, Debug)]
pub struct Tuned {
    pub path: ModulationPath,
    /// D_j at every node, evaluated at the returned p.
    pub big_d: Vec<Secular>,
    pub iterations: usize,
    pub last_change: f64,
    /// Largest ‖Ψ(p_k) − Ψ(p_{k−1})‖ / ‖p_k − p_{k−1}‖ seen (weighted norm).
    pub contraction: f64,
    /// sup τ^{3−3ε}|p|
    pub weighted_norm: f64,
}

/// Φ₁ with the tuned p: the secular coefficients of ∫_τ^∞ e^{(τ−σ)𝓛}P_S(…)dσ.
#[derive(Clone, Debug)]
pub struct SecularPart {
    /// ν_j(τ) at every node, in basis order.
    pub nu: Vec<Vec<f64>>,
    /// ν₆(τ) = −∫_τ^∞ D₆
    pub nu6: Vec<f64>,
    /// max over j ≤ 5 and τ of |ν_j|
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct MPart {
    pub phi: Vec<Vec<C64>>,
    /// Largest |⟨φ, m_j⟩| before each re-projection.
    pub leakage: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// ‖w‖_Y after the update.
    pub y: YNorm,
    /// ‖Φ(w) − w‖_Y before the update.
    pub residual: f64,
    pub tune_iterations: usize,
    pub contraction: f64,
    pub leakage: f64,
    pub secular_residual: f64,
}

impl IterationRecord {
    pub const COLUMNS: [&'static str; 9] = [
        "iter",
        "y_hdelta",
        "y_moment",
        "y_secular",
        "residual",
        "tune_iterations",
        "contraction",
        "leakage",
        "secular_residual",
    ];

    pub fn row(&self) -> [f64; 9] {
        [
            self.iter as f64,
            self.y.hdelta,
            self.y.moment,
            self.y.secular,
            self.residual,
            self.tune_iterations as f64,
            self.contraction,
            self.leakage,
            self.secular_residual,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged(String),
}

/// The iterate and its history.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub taus: Vec<f64>,
    pub w: Vec<Vec<C64>>,
    pub path: Option<ModulationPath>,
    /// ⟨w(τ), m_j⟩ at every node.
    pub nu: Vec<Vec<f64>>,
    /// The Φ₁ series of the last application.
    pub nu6: Vec<f64>,
    pub iteration: usize,
    pub y: YNorm,
    pub residual: f64,
    pub history: Vec<IterationRecord>,
    pub status: Status,
}

/// Decay exponents and bounds of a converged remainder.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RemainderSummary {
    /// sup τ^{2−ε}‖w‖_{H¹}
    pub h1_weighted_sup: f64,
    /// −d ln‖w‖_{H¹}/d ln τ over [τ₀, τ_max/2]
    pub h1_decay: Option<f64>,
    /// −d ln‖⟨y⟩w‖/d ln τ over [τ₀, τ_max/2]
    pub moment_decay: Option<f64>,
    pub max_secular_non_conformal: f64,
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Fields sampled on uniform τ nodes, with four-point Lagrange interpolation.
struct NodeField<'a> {
    tau0: f64,
    h: f64,
    values: &'a [Vec<C64>],
}

impl NodeField<'_> {
    fn at(&self, tau: f64) -> Vec<C64> {
        let n = self.values.len();
        let s = (tau - self.tau0) / self.h;
        if n < 4 {
            let k = (s.round().max(0.0) as usize).min(n - 1);
            return self.values[k].clone();
        }
        let start = ((s.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
        let mut out = vec![C64::new(0.0, 0.0); self.values[0].len()];
        for i in start..start + 4 {
            let mut l = 1.0;
            for j in start..start + 4 {
                if j != i {
                    l *= (s - j as f64) / (i as f64 - j as f64);
                }
            }
            if l != 0.0 {
                for (o, v) in out.iter_mut().zip(&self.values[i]) {
                    *o += l * v;
                }
            }
        }
        out
    }
}

/// e^{h𝓛} for 𝓛 = −iL on the grid, as a dense real matrix acting on
/// (Re f, Im f). Exact for the stiff part, so the backward sweeps have no
/// step-size restriction from the free frequencies.
pub struct LinearPropagator {
    n: usize,
    half: DMatrix<f64>,
    full: DMatrix<f64>,
    pub h: f64,
}

/// Largest real system size (2 × grid points) accepted for the dense propagator.
pub const MAX_DENSE: usize = 4096;

impl LinearPropagator {
    pub fn new(grid: &Grid, qs: &[f64], sigma: f64, h: f64) -> Result<Self> {
        let n = grid.len();
        if 2 * n > MAX_DENSE {
            return Err(Error::Unsupported(format!("dense propagator needs 2N <= {MAX_DENSE}, got N = {n}")));
        }
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let lap = grid.laplacian_real(&e);
            e[j] = 0.0;
            for i in 0..n {
                // Re' = L₋ Im, Im' = −L₊ Re
                a[(i, n + j)] = -lap[i];
                a[(n + i, j)] = lap[i];
            }
        }
        for i in 0..n {
            a[(i, n + i)] += 1.0 - qs[i];
            a[(n + i, i)] += -1.0 + (sigma + 1.0) * qs[i];
        }
        let half = (a * (0.5 * h)).exp();
        let full = &half * &half;
        if full.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "linear propagator", time: h });
        }
        Ok(LinearPropagator { n, half, full, h })
    }

    fn apply(&self, m: &DMatrix<f64>, f: &[C64]) -> Vec<C64> {
        let n = self.n;
        let x = DVector::from_iterator(2 * n, f.iter().map(|v| v.re).chain(f.iter().map(|v| v.im)));
        let y = m * x;
        (0..n).map(|i| C64::new(y[i], y[n + i])).collect()
    }

    /// e^{(h/2)𝓛}f
    pub fn half_step(&self, f: &[C64]) -> Vec<C64> {
        self.apply(&self.half, f)
    }

    /// e^{h𝓛}f
    pub fn full_step(&self, f: &[C64]) -> Vec<C64> {
        self.apply(&self.full, f)
    }
}

/// ∂φ = −iLφ + [P_M Z_p(φ)] + χ(τ)F(τ), with F interpolated between nodes.
struct BackwardFlow<'a> {
    src: &'a Sources<'a>,
    prop: &'a LinearPropagator,
    path: Option<&'a ModulationPath>,
    project: bool,
    forcing: NodeField<'a>,
    cutoff_end: f64,
}

fn lin_comb(terms: &[(f64, &[C64])]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); terms[0].1.len()];
    for (c, f) in terms {
        for (o, v) in out.iter_mut().zip(f.iter()) {
            *o += c * v;
        }
    }
    out
}

impl BackwardFlow<'_> {
    fn rest(&self, tau: f64, f: &[C64]) -> Result<Vec<C64>> {
        let chi = 1.0 - smoothstep(tau - (self.cutoff_end - 1.0));
        let mut out = match self.path {
            Some(path) => {
                let z = self.src.z_p(f, &path.p.at(tau))?;
                if self.project {
                    self.src.basis.project_m(self.src.grid, &z)
                } else {
                    z
                }
            }
            None => vec![C64::new(0.0, 0.0); f.len()],
        };
        if chi > 0.0 {
            for (o, v) in out.iter_mut().zip(self.forcing.at(tau)) {
                *o += chi * v;
            }
        }
        Ok(out)
    }

    /// Integrating-factor RK4 step from τ to τ + h, h = prop.h.
    fn step(&self, f: &[C64], tau: f64) -> Result<Vec<C64>> {
        let p = self.prop;
        let h = p.h;
        let k1 = self.rest(tau, f)?;
        let k2 = self.rest(tau + 0.5 * h, &p.half_step(&lin_comb(&[(1.0, f), (0.5 * h, &k1)])))?;
        let ef_half = p.half_step(f);
        let k3 = self.rest(tau + 0.5 * h, &lin_comb(&[(1.0, &ef_half), (0.5 * h, &k2)]))?;
        let ef = p.half_step(&ef_half);
        let ek3 = p.half_step(&k3);
        let k4 = self.rest(tau + h, &lin_comb(&[(1.0, &ef), (h, &ek3)]))?;
        let ek1 = p.full_step(&k1);
        let ek23 = p.half_step(&lin_comb(&[(1.0, &k2), (1.0, &k3)]));
        Ok(lin_comb(&[(1.0, &ef), (h / 6.0, &ek1), (h / 3.0, &ek23), (h / 6.0, &k4)]))
    }
}

/// Integrates a backward flow from the last node to the first with zero
/// terminal data, recording the state at every node. With `project`, each
/// node state is re-projected onto M and the removed secular part is reported.
fn sweep_backward(flow: &BackwardFlow, nodes: &TauGrid, len: usize, project: bool) -> Result<(Vec<Vec<C64>>, f64)> {
    let n = nodes.len();
    let spacing = nodes.tau[1] - nodes.tau[0];
    let steps = (spacing / -flow.prop.h).round() as usize;
    if steps == 0 || ((steps as f64) * flow.prop.h + spacing).abs() > 1e-9 * spacing {
        return invalid("propagator step must divide the node spacing");
    }
    let mut out = vec![Vec::new(); n];
    let mut f = vec![C64::new(0.0, 0.0); len];
    out[n - 1] = f.clone();
    let mut leak: f64 = 0.0;
    let grid = flow.src.grid;
    let basis = flow.src.basis;
    for k in (0..n - 1).rev() {
        for j in 0..steps {
            f = flow.step(&f, nodes.tau[k + 1] + j as f64 * flow.prop.h)?;
        }
        if f.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { what: "backward sweep", time: nodes.tau[k] });
        }
        if project {
            let nu = basis.coefficients(grid, &f);
            leak = leak.max(nu.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            f = sub(&f, &basis.reconstruct(&nu));
        }
        out[k] = f.clone();
    }
    Ok((out, leak))
}

/// Backward step that divides the node spacing and does not exceed `dt`.
fn backward_step(spacing: f64, dt: f64) -> f64 {
    -spacing / (spacing / dt).ceil().max(1.0)
}

pub struct Constructor<'a> {
    pub grid: &'a Grid,
    pub gs: &'a GroundState,
    pub basis: &'a SecularBasis,
    pub src: Sources<'a>,
    pub opts: ConstructOptions,
    pub nodes: TauGrid,
    prop: LinearPropagator,
}

impl<'a> Constructor<'a> {
    pub fn new(
        grid: &'a Grid,
        gs: &'a GroundState,
        basis: &'a SecularBasis,
        spec: &'a ProblemSpec,
        opts: ConstructOptions,
    ) -> Result<Self> {
        opts.validate(spec.tau0)?;
        let src = Sources::new(grid, gs, basis, spec)?;
        let n = ((opts.tau_max - spec.tau0) / opts.node_spacing).round() as usize + 1;
        let nodes = TauGrid::uniform(spec.tau0, opts.tau_max, n.max(5))?;
        let h = backward_step(nodes.tau[1] - nodes.tau[0], opts.dt);
        let prop = LinearPropagator::new(grid, &gs.q_pow_sigma(), src.sigma(), h)?;
        Ok(Constructor { grid, gs, basis, src, opts, nodes, prop })
    }

    pub fn spacing(&self) -> f64 {
        self.nodes.tau[1] - self.nodes.tau[0]
    }

    pub fn zero_history(&self) -> Vec<Vec<C64>> {
        vec![self.grid.zeros(); self.nodes.len()]
    }

    fn frame(&self, path: &ModulationPath, k: usize) -> Frame {
        Frame { tau: self.nodes.tau[k], t: path.time.t[k], q: path.q.at_node(k), p: path.p.at_node(k) }
    }

    /// D_j(τ_k) for the given w and p, with the path q(p).
    fn projections(&self, w: &[Vec<C64>], p: &PPath) -> Result<(ModulationPath, Vec<Secular>)> {
        let (path, _) = ModulationPath::solve(p.clone(), &self.opts.class(), &self.opts.modulation)?;
        let d = (0..self.nodes.len())
            .map(|k| self.src.project(&w[k], &self.frame(&path, k)).map(|pr| pr.big_d))
            .collect::<Result<Vec<_>>>()?;
        Ok((path, d))
    }

    fn nu6_from(&self, d: &[Secular]) -> Result<Vec<f64>> {
        let d6: Vec<f64> = d.iter().map(|s| s.s6).collect();
        let tail = 4.0 - 2.0 * self.opts.epsilon;
        Ok(self.nodes.integral_to_infinity(&d6, tail)?.into_iter().map(|v| -v).collect())
    }

    /// Ψ(p) from the projections D at p.
    fn psi_from(&self, d: &[Secular]) -> Result<PPath> {
        let (a0, b0, g0) = (self.basis.alpha0, self.basis.beta0, self.basis.gamma0);
        let nu6 = self.nu6_from(d)?;
        let mut p = PPath::zero(self.nodes.clone());
        for (k, s) in d.iter().enumerate() {
            p.p4[k] = -s.s4 / a0;
            p.p5[k] = (-s.s5 + 2.0 * nu6[k]) / (2.0 * a0);
            p.p1[k] = (-s.s1 - g0 * s.s5) / a0;
            for l in 0..2 {
                p.p2[l][k] = s.s2[l] / b0;
                p.p3[l][k] = s.s3[l] / b0;
            }
        }
        Ok(p)
    }

    /// Ψ(p) for a given remainder history.
    pub fn psi(&self, w: &[Vec<C64>], p: &PPath) -> Result<PPath> {
        let (_, d) = self.projections(w, p)?;
        self.psi_from(&d)
    }

    /// ‖Ψ(p) − Ψ(p̃)‖ / ‖p − p̃‖ in the weighted sup norm.
    pub fn psi_contraction(&self, w: &[Vec<C64>], p: &PPath, pt: &PPath) -> Result<f64> {
        let class = self.opts.class();
        let den = p.sub(pt).weighted_norm(&class);
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok(self.psi(w, p)?.sub(&self.psi(w, pt)?).weighted_norm(&class) / den)
    }

    /// Damped fixed-point iteration of Ψ starting from `start`.
    pub fn tune_p(&self, w: &[Vec<C64>], start: Option<&PPath>) -> Result<Tuned> {
        let class = self.opts.class();
        let t = self.opts.tune;
        let mut p = start.cloned().unwrap_or_else(|| PPath::zero(self.nodes.clone()));
        let mut prev: Option<(PPath, PPath)> = None;
        let mut contraction: f64 = 0.0;
        for it in 1..=t.max_iter {
            let (_, d) = self.projections(w, &p)?;
            let target = self.psi_from(&d)?;
            let change = sup_change(&target, &p);
            if let Some((pp, psi_pp)) = &prev {
                let den = p.sub(pp).weighted_norm(&class);
                if den > 1e-12 {
                    contraction = contraction.max(target.sub(psi_pp).weighted_norm(&class) / den);
                }
            }
            if !change.is_finite() {
                return Err(Error::NonFinite { what: "tuning map", time: it as f64 });
            }
            if change < t.tol {
                // D at the final Ψ output, so the secular relations hold to the contraction times the tolerance
                let weighted = target.weighted_norm(&class);
                let (path, d) = self.projections(w, &target)?;
                return Ok(Tuned { path, big_d: d, iterations: it, last_change: change, contraction, weighted_norm: weighted });
            }
            let next = relax(&p, &target, t.damping);
            prev = Some((p, target));
            p = next;
        }
        let last = prev.map(|(pp, psi)| sup_change(&psi, &pp)).unwrap_or(f64::NAN);
        Err(Error::NoConvergence { what: "tuning map", iterations: t.max_iter, residual: last })
    }

    /// Φ₁: integrates the secular system ν′ = 𝓛ν + d backward from
    /// ν(τ_max) = ν₆(τ_max)e₆, with d = D + Z_p(Q) at the tuned p.
    pub fn phi1(&self, tuned: &Tuned) -> Result<SecularPart> {
        let b = self.basis;
        let nu6 = self.nu6_from(&tuned.big_d)?;
        let d: Vec<Vec<f64>> = (0..self.nodes.len())
            .map(|k| {
                let z = self.src.zpq_secular(&tuned.path.p.at_node(k));
                let s = tuned.big_d[k];
                Secular {
                    s1: s.s1 + z.s1,
                    s2: [s.s2[0] + z.s2[0], s.s2[1] + z.s2[1]],
                    s3: [s.s3[0] + z.s3[0], s.s3[1] + z.s3[1]],
                    s4: s.s4 + z.s4,
                    s5: s.s5 + z.s5,
                    s6: s.s6 + z.s6,
                }
                .to_basis(b)
            })
            .collect();
        let idx = |m: Mode| b.index(m);
        let rhs = |nu: &[f64], dk: &[f64]| -> Vec<f64> {
            let get = |m: Mode| idx(m).map(|i| nu[i]).unwrap_or(0.0);
            b.modes
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    dk[i]
                        + match *m {
                            Mode::N1 => -2.0 * get(Mode::N4) + 2.0 * b.gamma0 * get(Mode::N6),
                            Mode::N2(l) => 2.0 * get(Mode::N3(l)),
                            Mode::N3(_) | Mode::N6 => 0.0,
                            Mode::N4 => 2.0 * get(Mode::N5),
                            Mode::N5 => -2.0 * get(Mode::N6),
                        }
                })
                .collect()
        };
        let n = self.nodes.len();
        let k6 = idx(Mode::N6).expect("n6 is always present");
        let mut nu = vec![vec![0.0; b.len()]; n];
        nu[n - 1][k6] = nu6[n - 1];
        let h = -self.spacing();
        for k in (0..n - 1).rev() {
            // RK4 from τ_{k+1} to τ_k; midpoint data by cubic interpolation
            let mid: Vec<f64> = (0..b.len())
                .map(|i| {
                    let col: Vec<f64> = d.iter().map(|v| v[i]).collect();
                    self.nodes.interp(&col, 0.5 * (self.nodes.tau[k] + self.nodes.tau[k + 1]))
                })
                .collect();
            let y = &nu[k + 1];
            let axpy = |a: &[f64], c: f64, x: &[f64]| a.iter().zip(x).map(|(u, v)| u + c * v).collect::<Vec<_>>();
            let k1 = rhs(y, &d[k + 1]);
            let k2 = rhs(&axpy(y, 0.5 * h, &k1), &mid);
            let k3 = rhs(&axpy(y, 0.5 * h, &k2), &mid);
            let k4 = rhs(&axpy(y, h, &k3), &d[k]);
            nu[k] = (0..b.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        }
        let residual = nu
            .iter()
            .flat_map(|v| v.iter().enumerate().filter(|(i, _)| *i != k6).map(|(_, x)| x.abs()))
            .fold(0.0, f64::max);
        Ok(SecularPart { nu, nu6, residual })
    }

    /// F(τ_k) = P_M[R_p(w) + Z_p(P_S w)] along the tuned path.
    pub fn m_forcing(&self, w: &[Vec<C64>], path: &ModulationPath) -> Result<Vec<Vec<C64>>> {
        (0..self.nodes.len())
            .map(|k| {
                let fr = self.frame(path, k);
                let c = self.src.coefficients(&fr);
                let r = self.src.r_unsplit(&w[k], &c);
                let ps = self.basis.project_s(self.grid, &w[k]);
                let z = self.src.z_p(&ps, &fr.p)?;
                let total: Vec<C64> = r.iter().zip(&z).map(|(a, b)| a + b).collect();
                Ok(self.basis.project_m(self.grid, &total))
            })
            .collect()
    }

    /// Φ₂: the truncated backward M problem with source cut off over the last unit.
    pub fn phi2(&self, forcing: &[Vec<C64>], path: &ModulationPath) -> Result<MPart> {
        let flow = BackwardFlow {
            src: &self.src,
            prop: &self.prop,
            path: Some(path),
            project: true,
            forcing: NodeField { tau0: self.nodes.tau0(), h: self.spacing(), values: forcing },
            cutoff_end: self.nodes.tau_max(),
        };
        let (phi, leakage) = sweep_backward(&flow, &self.nodes, self.grid.len(), true)?;
        if leakage > self.opts.leakage_tol {
            return Err(Error::SecularLeakage { leak: leakage, tol: self.opts.leakage_tol, tau: self.nodes.tau0() });
        }
        Ok(MPart { phi, leakage })
    }

    pub fn y_norm(&self, w: &[Vec<C64>]) -> YNorm {
        let (e, d) = (self.opts.epsilon, self.opts.delta);
        let m6 = self.basis.m_of(Mode::N6);
        let mut y = YNorm::default();
        for (tau, wk) in self.nodes.tau.iter().zip(w) {
            let pm = self.basis.project_m(self.grid, wk);
            y.hdelta = y.hdelta.max(tau.powf(2.0 - e) * self.grid.hs_norm(&pm, d));
            y.moment = y.moment.max(tau.powf(2.0 - 2.0 * e - d) * self.grid.moment_norm(&pm, d));
            y.secular = y.secular.max(tau.powf(3.0 - 3.0 * e) * self.grid.pairing(wk, m6).abs());
        }
        y
    }

    /// One application of Φ, with p tuned starting from `p_start`.
    pub fn apply(&self, w: &[Vec<C64>], p_start: Option<&PPath>) -> Result<(Vec<Vec<C64>>, Tuned, SecularPart, MPart)> {
        let tuned = self.tune_p(w, p_start)?;
        let sec = self.phi1(&tuned)?;
        let forcing = self.m_forcing(w, &tuned.path)?;
        let m = self.phi2(&forcing, &tuned.path)?;
        let n6 = self.basis.n_of(Mode::N6);
        let out = m
            .phi
            .iter()
            .zip(&sec.nu6)
            .map(|(phi, c)| phi.iter().zip(n6).map(|(a, b)| a + c * b).collect())
            .collect();
        Ok((out, tuned, sec, m))
    }

    /// Damped Picard iteration w ← (1 − θ)w + θΦ(w) from w = 0.
    pub fn picard(&self) -> IterationState {
        let theta = self.opts.damping;
        let mut state = IterationState {
            taus: self.nodes.tau.clone(),
            w: self.zero_history(),
            path: None,
            nu: vec![vec![0.0; self.basis.len()]; self.nodes.len()],
            nu6: vec![0.0; self.nodes.len()],
            iteration: 0,
            y: YNorm::default(),
            residual: f64::INFINITY,
            history: Vec::new(),
            status: Status::MaxIterations,
        };
        for it in 1..=self.opts.max_iter {
            let start = state.path.as_ref().map(|p| p.p.clone());
            let (phi_w, tuned, sec, m) = match self.apply(&state.w, start.as_ref()) {
                Ok(v) => v,
                Err(e) => {
                    state.status = Status::Diverged(format!("iteration {it}: {e}"));
                    return state;
                }
            };
            let diff: Vec<Vec<C64>> = phi_w.iter().zip(&state.w).map(|(a, b)| sub(a, b)).collect();
            let residual = self.y_norm(&diff).max();
            for (wk, dk) in state.w.iter_mut().zip(&diff) {
                for (a, b) in wk.iter_mut().zip(dk) {
                    *a += theta * b;
                }
            }
            state.y = self.y_norm(&state.w);
            state.residual = residual;
            state.iteration = it;
            state.nu6 = sec.nu6.clone();
            state.history.push(IterationRecord {
                iter: it,
                y: state.y,
                residual,
                tune_iterations: tuned.iterations,
                contraction: tuned.contraction,
                leakage: m.leakage,
                secular_residual: sec.residual,
            });
            state.path = Some(tuned.path);
            if !state.y.is_finite() || !residual.is_finite() || state.y.max() > self.opts.divergence_bound {
                state.status = Status::Diverged(format!("iteration {it}: Y-norm {:.3e}", state.y.max()));
                break;
            }
            if residual < self.opts.tol {
                state.status = Status::Converged;
                break;
            }
        }
        state.nu = state.w.iter().map(|wk| self.basis.coefficients(self.grid, wk)).collect();
        state
    }

    pub fn summary(&self, state: &IterationState) -> RemainderSummary {
        let e = self.opts.epsilon;
        let h1: Vec<f64> = state.w.iter().map(|w| self.grid.hs_norm(w, 1.0)).collect();
        let mo: Vec<f64> = state.w.iter().map(|w| self.grid.moment_norm(w, 1.0)).collect();
        let sup = state.taus.iter().zip(&h1).map(|(t, v)| t.powf(2.0 - e) * v).fold(0.0, f64::max);
        let hi = 0.5 * self.nodes.tau_max();
        let k6 = self.basis.index(Mode::N6);
        let sec = state
            .nu
            .iter()
            .flat_map(|v| v.iter().enumerate().filter(|(i, _)| Some(*i) != k6).map(|(_, x)| x.abs()))
            .fold(0.0, f64::max);
        RemainderSummary {
            h1_weighted_sup: sup,
            h1_decay: measure_decay(&state.taus, &h1, self.nodes.tau0(), hi),
            moment_decay: measure_decay(&state.taus, &mo, self.nodes.tau0(), hi),
            max_secular_non_conformal: sec,
        }
    }
}

fn sup_change(a: &PPath, b: &PPath) -> f64 {
    a.components()
        .iter()
        .zip(b.components().iter())
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn relax(p: &PPath, target: &PPath, theta: f64) -> PPath {
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + theta * (y - x)).collect::<Vec<_>>();
    PPath {
        grid: p.grid.clone(),
        p1: mix(&p.p1, &target.p1),
        p2: [mix(&p.p2[0], &target.p2[0]), mix(&p.p2[1], &target.p2[1])],
        p3: [mix(&p.p3[0], &target.p3[0]), mix(&p.p3[1], &target.p3[1])],
        p4: mix(&p.p4, &target.p4),
        p5: mix(&p.p5, &target.p5),
    }
}

/// Exponents of T in the contraction factor of 𝓜 on E_{a,b,T}:
/// a − 4, m_g − 4, m_V − 2, 1, a − b, m_g − a − 4, m_V − 2 − a.
pub fn simple_m_exponents(m_v: f64, m_g: f64, a: f64, b: f64) -> [f64; 7] {
    [a - 4.0, m_g - 4.0, m_v - 2.0, 1.0, a - b, m_g - a - 4.0, m_v - 2.0 - a]
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimpleOptions {
    pub a: f64,
    pub b: f64,
    /// Sobolev index of E_{a,b,T}; must exceed d/2.
    pub s: f64,
    /// Truncation horizon as a multiple of T.
    pub horizon: f64,
    pub node_spacing: f64,
    pub dt: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SimpleOptions {
    fn default() -> Self {
        SimpleOptions { a: 4.5, b: 4.2, s: 1.5, horizon: 4.0, node_spacing: 0.5, dt: 0.25, max_iter: 20, tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct SimpleResult {
    pub taus: Vec<f64>,
    pub h: Vec<Vec<C64>>,
    /// ‖h_{k+1} − h_k‖_E per iteration.
    pub steps: Vec<f64>,
    /// Largest ratio of successive steps.
    pub contraction: f64,
    pub norm: f64,
    pub exponents: [f64; 7],
}

/// Relative size of an 𝓜 step below which the iteration is at its roundoff floor.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// sup t^a‖h‖_{H^s} + sup t^b‖|x|h‖
pub fn e_norm(grid: &Grid, taus: &[f64], h: &[Vec<C64>], a: f64, b: f64, s: f64) -> f64 {
    let mut hs: f64 = 0.0;
    let mut mo: f64 = 0.0;
    for (t, f) in taus.iter().zip(h) {
        hs = hs.max(t.powf(a) * grid.hs_norm(f, s));
        mo = mo.max(t.powf(b) * grid.position_norm(f));
    }
    hs + mo
}

/// Iterates 𝓜 from h = 0 on [T, horizon·T] with the frame t = τ and no modulation.
/// `m_v`, `m_g` are the vanishing orders used for the exponent report.
pub fn simple_m(
    grid: &Grid,
    gs: &GroundState,
    basis: &SecularBasis,
    spec: &ProblemSpec,
    m_v: f64,
    m_g: f64,
    opts: &SimpleOptions,
) -> Result<SimpleResult> {
    if !(opts.s > grid.dim() as f64 / 2.0 - 1e-12 && opts.s >= 1.0) {
        return invalid(format!("E-norm index s = {} must satisfy s >= 1 and s > d/2", opts.s));
    }
    if !(opts.b > 4.0 && opts.a > opts.b) {
        return invalid(format!("need 4 < b < a, got a = {}, b = {}", opts.a, opts.b));
    }
    let exponents = simple_m_exponents(m_v, m_g, opts.a, opts.b);
    let src = Sources::new(grid, gs, basis, spec)?;
    let t0 = spec.tau0;
    let t1 = opts.horizon * t0;
    let n = ((t1 - t0) / opts.node_spacing).round() as usize + 1;
    let nodes = TauGrid::uniform(t0, t1, n.max(5))?;
    let spacing = nodes.tau[1] - nodes.tau[0];
    let prop = LinearPropagator::new(grid, &gs.q_pow_sigma(), src.sigma(), backward_step(spacing, opts.dt))?;
    let mut h = vec![grid.zeros(); nodes.len()];
    let mut steps = Vec::new();
    let mut contraction: f64 = 0.0;
    for _ in 0..opts.max_iter {
        let forcing: Vec<Vec<C64>> = nodes
            .tau
            .iter()
            .zip(&h)
            .map(|(t, hk)| src.r_unsplit(hk, &src.coefficients(&Frame::trivial(*t))))
            .collect();
        let flow = BackwardFlow {
            src: &src,
            prop: &prop,
            path: None,
            project: false,
            forcing: NodeField { tau0: t0, h: spacing, values: &forcing },
            cutoff_end: f64::INFINITY,
        };
        let (next, _) = sweep_backward(&flow, &nodes, grid.len(), false)?;
        let diff: Vec<Vec<C64>> = next.iter().zip(&h).map(|(a, b)| sub(a, b)).collect();
        let step = e_norm(grid, &nodes.tau, &diff, opts.a, opts.b, opts.s);
        if !step.is_finite() {
            return Err(Error::NonFinite { what: "simple fixed point", time: t0 });
        }
        // steps this far below the first are roundoff amplified by the t^a weight
        let floor = steps.first().map(|s0: &f64| ROUNDOFF_FLOOR * s0).unwrap_or(0.0);
        if let Some(prev) = steps.last() {
            if *prev > 0.0 && step > floor {
                contraction = contraction.max(step / prev);
            }
        }
        steps.push(step);
        h = next;
        if step <= opts.tol || step <= floor {
            break;
        }
    }
    let norm = e_norm(grid, &nodes.tau, &h, opts.a, opts.b, opts.s);
    Ok(SimpleResult { taus: nodes.tau, h, steps, contraction, norm, exponents })
}
