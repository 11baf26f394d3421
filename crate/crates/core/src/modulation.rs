//! The parameter system between the forcing p = (p₁..p₅) and the modulation
//! parameters q = (q₁..q₅), the time change γ and the Lipschitz comparison of
//! two solved paths.
//!
//! With q₄ = 1 + q₄r and ′ = d/dτ the relations are
//!
//! ```text
//! p₄ = q₄′/q₄ − 4q₅q₄²          p₅ = q₄²q₅′ + 4q₄⁴q₅²
//! p₂ = q₂′ − 2q₄q₃ + p₄q₂       p₃ = q₄q₃′ + 4q₄³q₃q₅ + 2q₂p₅
//! p₁ = p₃·q₂ − p₅|q₂|² + q₁′ + q₄²|q₃|²
//! ```
//!
//! Solving for q with q → (0, 0, 0, 1, 0) at τ = ∞ uses the nilpotent
//! structure: (q₄r, q₅) and (q₂, q₃) are driven by a Jordan block whose square
//! is zero, so each sweep is a pair of integrals from the right.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;

/// Samples τ_k on [τ₀, τ_max], uniform in τ or in ln τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub tau: Vec<f64>,
    log: bool,
    h: f64,
}

impl TauGrid {
    pub fn log(tau0: f64, tau_max: f64, n: usize) -> Result<TauGrid> {
        Self::check(tau0, tau_max, n)?;
        let h = (tau_max / tau0).ln() / (n - 1) as f64;
        let mut tau: Vec<f64> = (0..n).map(|k| tau0 * (k as f64 * h).exp()).collect();
        tau[n - 1] = tau_max;
        Ok(TauGrid { tau, log: true, h })
    }

    pub fn uniform(tau0: f64, tau_max: f64, n: usize) -> Result<TauGrid> {
        Self::check(tau0, tau_max, n)?;
        let h = (tau_max - tau0) / (n - 1) as f64;
        let mut tau: Vec<f64> = (0..n).map(|k| tau0 + k as f64 * h).collect();
        tau[n - 1] = tau_max;
        Ok(TauGrid { tau, log: false, h })
    }

    fn check(tau0: f64, tau_max: f64, n: usize) -> Result<()> {
        if !(tau0 > 0.0 && tau_max > tau0) || n < 5 {
            return invalid(format!("tau grid needs 0 < tau0 < tau_max and n >= 5, got {tau0}, {tau_max}, {n}"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn tau0(&self) -> f64 {
        self.tau[0]
    }

    pub fn tau_max(&self) -> f64 {
        *self.tau.last().unwrap()
    }

    fn jac(&self, k: usize) -> f64 {
        if self.log {
            self.tau[k]
        } else {
            1.0
        }
    }

    /// ∫_{τ₀}^{τ_k} f dτ
    pub fn integral_from_left(&self, f: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = (0..f.len()).map(|k| f[k] * self.jac(k)).collect();
        quad::cumulative_from_left(&g, self.h)
    }

    /// ∫_{τ_k}^{∞} f dτ, with the part beyond τ_max modelled as the power law
    /// f(T)·(T/τ)^{c}: tail f(T)·T/(c − 1).
    pub fn integral_to_infinity(&self, f: &[f64], decay: f64) -> Result<Vec<f64>> {
        if !(decay > 1.0) {
            return invalid(format!("tail exponent {decay} is not integrable"));
        }
        let g: Vec<f64> = (0..f.len()).map(|k| f[k] * self.jac(k)).collect();
        let n = f.len();
        let tail = f[n - 1] * self.tau[n - 1] / (decay - 1.0);
        Ok(quad::cumulative_from_right(&g, self.h).into_iter().map(|v| v + tail).collect())
    }

    /// df/dτ at every node, from nine-point stencils.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = (0..f.len()).map(|k| k as f64 * self.h).collect();
        quad::derivative_with_width(&s, f, 9).into_iter().enumerate().map(|(k, v)| v / self.jac(k)).collect()
    }

    pub fn interp(&self, f: &[f64], tau: f64) -> f64 {
        quad::interp(&self.tau, f, tau)
    }
}

/// A forcing path p(τ); p₂ and p₃ carry two components (the second is zero in d = 1).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PPath {
    pub grid: TauGrid,
    pub p1: Vec<f64>,
    pub p2: [Vec<f64>; 2],
    pub p3: [Vec<f64>; 2],
    pub p4: Vec<f64>,
    pub p5: Vec<f64>,
}

impl PPath {
    pub fn zero(grid: TauGrid) -> PPath {
        let z = vec![0.0; grid.len()];
        PPath {
            p1: z.clone(),
            p2: [z.clone(), z.clone()],
            p3: [z.clone(), z.clone()],
            p4: z.clone(),
            p5: z,
            grid,
        }
    }

    /// Components in the order p₁, p₂ₓ, p₂ᵧ, p₃ₓ, p₃ᵧ, p₄, p₅.
    pub fn components(&self) -> [&[f64]; 7] {
        [&self.p1, &self.p2[0], &self.p2[1], &self.p3[0], &self.p3[1], &self.p4, &self.p5]
    }

    /// max over components of sup_τ τ^{c_k}|p_k(τ)|
    pub fn weighted_norm(&self, class: &DecayClass) -> f64 {
        let c = class.component_exponents();
        self.components()
            .iter()
            .zip(c)
            .map(|(f, ck)| weighted_sup(&self.grid.tau, f, ck))
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &PPath) -> PPath {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
        PPath {
            grid: self.grid.clone(),
            p1: d(&self.p1, &other.p1),
            p2: [d(&self.p2[0], &other.p2[0]), d(&self.p2[1], &other.p2[1])],
            p3: [d(&self.p3[0], &other.p3[0]), d(&self.p3[1], &other.p3[1])],
            p4: d(&self.p4, &other.p4),
            p5: d(&self.p5, &other.p5),
        }
    }
}

/// Values of q at one τ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QValues {
    pub q1: f64,
    pub q2: [f64; 2],
    pub q3: [f64; 2],
    pub q4: f64,
    pub q5: f64,
}

impl QValues {
    pub fn trivial() -> QValues {
        QValues { q4: 1.0, ..Default::default() }
    }
}

/// Values of p at one τ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub p1: f64,
    pub p2: [f64; 2],
    pub p3: [f64; 2],
    pub p4: f64,
    pub p5: f64,
}

impl PPath {
    pub fn at(&self, tau: f64) -> PValues {
        let g = &self.grid;
        PValues {
            p1: g.interp(&self.p1, tau),
            p2: [g.interp(&self.p2[0], tau), g.interp(&self.p2[1], tau)],
            p3: [g.interp(&self.p3[0], tau), g.interp(&self.p3[1], tau)],
            p4: g.interp(&self.p4, tau),
            p5: g.interp(&self.p5, tau),
        }
    }

    pub fn at_node(&self, k: usize) -> PValues {
        PValues {
            p1: self.p1[k],
            p2: [self.p2[0][k], self.p2[1][k]],
            p3: [self.p3[0][k], self.p3[1][k]],
            p4: self.p4[k],
            p5: self.p5[k],
        }
    }
}

/// A modulation path q(τ), stored with q₄r = q₄ − 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QPath {
    pub grid: TauGrid,
    pub q1: Vec<f64>,
    pub q2: [Vec<f64>; 2],
    pub q3: [Vec<f64>; 2],
    pub q4r: Vec<f64>,
    pub q5: Vec<f64>,
}

impl QPath {
    pub fn trivial(grid: TauGrid) -> QPath {
        let z = vec![0.0; grid.len()];
        QPath {
            q1: z.clone(),
            q2: [z.clone(), z.clone()],
            q3: [z.clone(), z.clone()],
            q4r: z.clone(),
            q5: z,
            grid,
        }
    }

    pub fn q4(&self, k: usize) -> f64 {
        1.0 + self.q4r[k]
    }

    pub fn at_node(&self, k: usize) -> QValues {
        QValues {
            q1: self.q1[k],
            q2: [self.q2[0][k], self.q2[1][k]],
            q3: [self.q3[0][k], self.q3[1][k]],
            q4: self.q4(k),
            q5: self.q5[k],
        }
    }

    pub fn at(&self, tau: f64) -> QValues {
        let g = &self.grid;
        QValues {
            q1: g.interp(&self.q1, tau),
            q2: [g.interp(&self.q2[0], tau), g.interp(&self.q2[1], tau)],
            q3: [g.interp(&self.q3[0], tau), g.interp(&self.q3[1], tau)],
            q4: 1.0 + g.interp(&self.q4r, tau),
            q5: g.interp(&self.q5, tau),
        }
    }

    /// Components in the order q₁, q₂ₓ, q₂ᵧ, q₃ₓ, q₃ᵧ, q₄r, q₅.
    pub fn components(&self) -> [&[f64]; 7] {
        [&self.q1, &self.q2[0], &self.q2[1], &self.q3[0], &self.q3[1], &self.q4r, &self.q5]
    }

    pub fn max_difference(&self, other: &QPath) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn weighted_sup(tau: &[f64], f: &[f64], c: f64) -> f64 {
    tau.iter().zip(f).map(|(t, v)| t.powf(c) * v.abs()).fold(0.0, f64::max)
}

/// Decay exponents c(p_k) of a forcing path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayClass {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p5: f64,
}

/// Lower bounds on the decay exponents of q implied by a decay class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QDecay {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4r: f64,
    pub q5: f64,
}

impl DecayClass {
    pub fn uniform(c: f64) -> DecayClass {
        DecayClass { p1: c, p2: c, p3: c, p4: c, p5: c }
    }

    fn component_exponents(&self) -> [f64; 7] {
        [self.p1, self.p2, self.p2, self.p3, self.p3, self.p4, self.p5]
    }

    /// c(p₃) = c(p₅) > 2, c(p₂) = c(p₄) > 1, c(p₁) > 1.
    pub fn admissible(&self) -> bool {
        self.p3 > 2.0 && self.p5 > 2.0 && self.p2 > 1.0 && self.p4 > 1.0 && self.p1 > 1.0
    }

    /// The decay table: c(q₂) = c(q₄r) = min(c(p₅) − 2, c(p₄) − 1) (up to an
    /// arbitrarily small loss), c(q₃) = c(q₅) = c(p₃)/2,
    /// c(q₁) = min(c(p₁) − 1, c(p₃) − 1).
    pub fn table(&self) -> QDecay {
        let c24 = (self.p5 - 2.0).min(self.p4 - 1.0);
        QDecay {
            q1: (self.p1 - 1.0).min(self.p3 - 1.0),
            q2: c24,
            q3: self.p3 / 2.0,
            q4r: c24,
            q5: self.p3 / 2.0,
        }
    }

    /// Tail exponents of the Duhamel integrands, split by source so that
    /// each piece is a single power law: q₅ (forcing), q₄r (forcing, q₅
    /// feed), q₃ (forcing), q₂ (forcing, q₃ feed), q₁ (forcing, quadratic terms).
    fn tails(&self) -> Tails {
        let t = self.table();
        Tails {
            q5: self.p5,
            q4_forcing: self.p4,
            q4_feed: self.p5 - 1.0,
            q3: self.p3,
            q2_forcing: self.p2,
            q2_feed: self.p3 - 1.0,
            q1_forcing: self.p1,
            q1_quadratic: (self.p3 + t.q2).min(2.0 * self.p3 - 2.0),
        }
    }
}

struct Tails {
    q5: f64,
    q4_forcing: f64,
    q4_feed: f64,
    q3: f64,
    q2_forcing: f64,
    q2_feed: f64,
    q1_forcing: f64,
    q1_quadratic: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation on the (q₄r, q₅) update.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 2000, damping: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub last_change: f64,
}

fn neg(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

/// Fixed-point solve of the Duhamel system for q given p, with q trivial at τ = ∞.
pub fn solve_q_from_p(p: &PPath, class: &DecayClass, opts: &SolveOptions) -> Result<(QPath, SolveReport)> {
    let g = &p.grid;
    let n = g.len();
    let tl = class.tails();
    let minus_integral = |f: &[f64], c: f64| g.integral_to_infinity(f, c).map(neg);
    let plus = |a: Vec<f64>, b: Vec<f64>| a.into_iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
    let mut q = QPath::trivial(g.clone());
    for it in 1..=opts.max_iter {
        let x = &q.q4r;
        let y = &q.q5;
        let f5: Vec<f64> = (0..n)
            .map(|k| p.p5[k] / (1.0 + x[k]).powi(2) - 4.0 * (1.0 + x[k]).powi(2) * y[k] * y[k])
            .collect();
        let feed4: Vec<f64> = (0..n).map(|k| 4.0 * y[k] * (1.0 + x[k]).powi(3)).collect();
        let f4: Vec<f64> = (0..n).map(|k| p.p4[k] * (1.0 + x[k])).collect();
        let y_new = minus_integral(&f5, tl.q5)?;
        let x_new = plus(minus_integral(&feed4, tl.q4_feed)?, minus_integral(&f4, tl.q4_forcing)?);
        let mut q3_new: [Vec<f64>; 2] = [vec![0.0; n], vec![0.0; n]];
        let mut q2_new: [Vec<f64>; 2] = [vec![0.0; n], vec![0.0; n]];
        for c in 0..2 {
            let f3: Vec<f64> = (0..n)
                .map(|k| {
                    (p.p3[c][k] - 2.0 * q.q2[c][k] * p.p5[k]) / (1.0 + x[k])
                        - 4.0 * (1.0 + x[k]).powi(2) * q.q3[c][k] * y[k]
                })
                .collect();
            let feed2: Vec<f64> = (0..n).map(|k| 2.0 * q.q3[c][k] * (1.0 + x[k])).collect();
            let f2: Vec<f64> = (0..n).map(|k| p.p2[c][k] - p.p4[k] * q.q2[c][k]).collect();
            q3_new[c] = minus_integral(&f3, tl.q3)?;
            q2_new[c] = plus(minus_integral(&feed2, tl.q2_feed)?, minus_integral(&f2, tl.q2_forcing)?);
        }
        let f1: Vec<f64> = (0..n)
            .map(|k| {
                let (q2, q3) = ([q.q2[0][k], q.q2[1][k]], [q.q3[0][k], q.q3[1][k]]);
                let dot = p.p3[0][k] * q2[0] + p.p3[1][k] * q2[1];
                -dot + p.p5[k] * (q2[0] * q2[0] + q2[1] * q2[1])
                    - (1.0 + x[k]).powi(2) * (q3[0] * q3[0] + q3[1] * q3[1])
            })
            .collect();
        let q1_new = plus(minus_integral(&p.p1, tl.q1_forcing)?, minus_integral(&f1, tl.q1_quadratic)?);

        let w = opts.damping;
        let next = QPath {
            grid: g.clone(),
            q1: q1_new,
            q2: q2_new,
            q3: q3_new,
            q4r: x.iter().zip(&x_new).map(|(a, b)| (1.0 - w) * a + w * b).collect(),
            q5: y.iter().zip(&y_new).map(|(a, b)| (1.0 - w) * a + w * b).collect(),
        };
        if next.q4r.iter().any(|v| !(1.0 + v > 0.0)) {
            return Err(Error::Hypothesis(format!(
                "q4 left (0, inf) at iteration {it}; tau0 = {} is too small for this forcing",
                g.tau0()
            )));
        }
        let change = next.max_difference(&q);
        q = next;
        if !change.is_finite() {
            return Err(Error::NonFinite { what: "modulation fixed point", time: g.tau0() });
        }
        if change < opts.tol {
            return Ok((q, SolveReport { iterations: it, last_change: change }));
        }
        if it == opts.max_iter {
            return Err(Error::NoConvergence { what: "modulation fixed point", iterations: it, residual: change });
        }
    }
    unreachable!()
}

/// Forward map q → p by differentiation on the τ grid.
pub fn q_to_p(q: &QPath) -> Result<PPath> {
    let g = &q.grid;
    let n = g.len();
    if let Some(k) = (0..n).find(|&k| !(q.q4(k) > 0.0)) {
        return invalid(format!("q4 <= 0 at tau = {}", g.tau[k]));
    }
    let d4 = g.derivative(&q.q4r);
    let d5 = g.derivative(&q.q5);
    let d1 = g.derivative(&q.q1);
    let d2 = [g.derivative(&q.q2[0]), g.derivative(&q.q2[1])];
    let d3 = [g.derivative(&q.q3[0]), g.derivative(&q.q3[1])];
    let mut p = PPath::zero(g.clone());
    for k in 0..n {
        let q4 = q.q4(k);
        let q5 = q.q5[k];
        p.p4[k] = d4[k] / q4 - 4.0 * q5 * q4 * q4;
        p.p5[k] = q4 * q4 * d5[k] + 4.0 * q4.powi(4) * q5 * q5;
        for c in 0..2 {
            p.p2[c][k] = d2[c][k] - 2.0 * q4 * q.q3[c][k] + p.p4[k] * q.q2[c][k];
            p.p3[c][k] = q4 * d3[c][k] + 4.0 * q4.powi(3) * q.q3[c][k] * q5 + 2.0 * q.q2[c][k] * p.p5[k];
        }
        let (q2, q3) = ([q.q2[0][k], q.q2[1][k]], [q.q3[0][k], q.q3[1][k]]);
        p.p1[k] = p.p3[0][k] * q2[0] + p.p3[1][k] * q2[1] - p.p5[k] * (q2[0] * q2[0] + q2[1] * q2[1])
            + d1[k]
            + q4 * q4 * (q3[0] * q3[0] + q3[1] * q3[1]);
    }
    Ok(p)
}

/// Monotone correspondence between the large-time variable t and τ, with
/// dτ/dt = 1/q₄² and γ(τ₀) = τ₀.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeMap {
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
}

impl TimeMap {
    fn checked(t: Vec<f64>, tau: Vec<f64>) -> Result<TimeMap> {
        for k in 1..t.len() {
            let slope = (tau[k] - tau[k - 1]) / (t[k] - t[k - 1]);
            if !(0.5..=2.0).contains(&slope) {
                return Err(Error::Hypothesis(format!(
                    "dtau/dt = {slope} outside [1/2, 2] near tau = {}",
                    tau[k]
                )));
            }
        }
        Ok(TimeMap { t, tau })
    }

    /// From q₄ sampled along τ: t(τ) = τ₀ + ∫_{τ₀}^τ q₄².
    pub fn from_tau_path(q: &QPath) -> Result<TimeMap> {
        let g = &q.grid;
        let f: Vec<f64> = (0..g.len()).map(|k| q.q4(k).powi(2)).collect();
        let t: Vec<f64> = g.integral_from_left(&f).into_iter().map(|v| g.tau0() + v).collect();
        Self::checked(t, g.tau.clone())
    }

    /// From q₄ sampled along t: γ(t) = t₀ + ∫_{t₀}^t q₄⁻².
    pub fn from_t_samples(t: &TauGrid, q4: &[f64]) -> Result<TimeMap> {
        let f: Vec<f64> = q4.iter().map(|v| 1.0 / (v * v)).collect();
        let tau: Vec<f64> = t.integral_from_left(&f).into_iter().map(|v| t.tau0() + v).collect();
        Self::checked(t.tau.clone(), tau)
    }

    /// γ(t)
    pub fn gamma(&self, t: f64) -> f64 {
        quad::interp(&self.t, &self.tau, t)
    }

    /// γ⁻¹(τ)
    pub fn gamma_inv(&self, tau: f64) -> f64 {
        quad::interp(&self.tau, &self.t, tau)
    }
}

/// −slope of ln|f| against ln τ over the samples with τ in [lo, hi].
pub fn measure_decay(tau: &[f64], f: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        tau.iter().zip(f).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, v)| (*t, *v)).unzip();
    quad::loglog_slope(&xs, &ys).map(|s| -s)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasuredDecay {
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub q4r: Option<f64>,
    pub q5: Option<f64>,
}

pub fn measure_q_decay(q: &QPath, lo: f64, hi: f64) -> MeasuredDecay {
    let tau = &q.grid.tau;
    let norm = |v: &[Vec<f64>; 2]| v[0].iter().zip(&v[1]).map(|(a, b)| a.hypot(*b)).collect::<Vec<f64>>();
    MeasuredDecay {
        q1: measure_decay(tau, &q.q1, lo, hi),
        q2: measure_decay(tau, &norm(&q.q2), lo, hi),
        q3: measure_decay(tau, &norm(&q.q3), lo, hi),
        q4r: measure_decay(tau, &q.q4r, lo, hi),
        q5: measure_decay(tau, &q.q5, lo, hi),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipschitzReport {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

/// sup_τ τ^{c−2}(|q₄ − q̃₄| + |q₂ − q̃₂|) / ‖p − p̃‖ for the solved paths.
pub fn compare_paths(p: &PPath, pt: &PPath, class: &DecayClass, opts: &SolveOptions) -> Result<LipschitzReport> {
    let denominator = p.sub(pt).weighted_norm(class);
    if denominator == 0.0 {
        return Ok(LipschitzReport { numerator: 0.0, denominator: 0.0, ratio: 0.0 });
    }
    let (q, _) = solve_q_from_p(p, class, opts)?;
    let (qt, _) = solve_q_from_p(pt, class, opts)?;
    let c = class.p3.min(class.p5);
    let numerator = (0..q.grid.len())
        .map(|k| {
            let d4 = (q.q4r[k] - qt.q4r[k]).abs();
            let d2 = (q.q2[0][k] - qt.q2[0][k]).hypot(q.q2[1][k] - qt.q2[1][k]);
            q.grid.tau[k].powf(c - 2.0) * (d4 + d2)
        })
        .fold(0.0, f64::max);
    Ok(LipschitzReport { numerator, denominator, ratio: numerator / denominator })
}

/// sup over the path of max(⟨x⟩/⟨y⟩, ⟨y⟩/⟨x⟩) with x = q₄(y + q₂), sampled
/// for |y| ≤ y_max; the variables are uniformly equivalent when this is ≤ 2.
pub fn variable_equivalence(q: &QPath, y_max: f64) -> f64 {
    let bracket = |v: [f64; 2]| (1.0 + v[0] * v[0] + v[1] * v[1]).sqrt();
    let mut worst: f64 = 1.0;
    for k in 0..q.grid.len() {
        let qv = q.at_node(k);
        for i in 0..=40 {
            for dir in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
                let s = y_max * i as f64 / 40.0;
                let y = [s * dir[0], s * dir[1]];
                let x = [qv.q4 * (y[0] + qv.q2[0]), qv.q4 * (y[1] + qv.q2[1])];
                let r = bracket(x) / bracket(y);
                worst = worst.max(r).max(1.0 / r);
            }
        }
    }
    worst
}

/// A solved path together with its time map, in the column layout used for CSV.
#[derive(Clone, Debug)]
pub struct ModulationPath {
    pub p: PPath,
    pub q: QPath,
    pub time: TimeMap,
}

impl ModulationPath {
    pub fn solve(p: PPath, class: &DecayClass, opts: &SolveOptions) -> Result<(ModulationPath, SolveReport)> {
        let (q, rep) = solve_q_from_p(&p, class, opts)?;
        let time = TimeMap::from_tau_path(&q)?;
        Ok((ModulationPath { p, q, time }, rep))
    }

    pub const COLUMNS: [&'static str; 16] = [
        "tau", "p1", "p2_x", "p2_y", "p3_x", "p3_y", "p4", "p5", "q1", "q2_x", "q2_y", "q3_x", "q3_y", "q4", "q5",
        "t",
    ];

    pub fn rows(&self) -> Vec<[f64; 16]> {
        (0..self.q.grid.len())
            .map(|k| {
                let (p, q) = (self.p.at_node(k), self.q.at_node(k));
                [
                    self.q.grid.tau[k],
                    p.p1,
                    p.p2[0],
                    p.p2[1],
                    p.p3[0],
                    p.p3[1],
                    p.p4,
                    p.p5,
                    q.q1,
                    q.q2[0],
                    q.q2[1],
                    q.q3[0],
                    q.q3[1],
                    q.q4,
                    q.q5,
                    self.time.t[k],
                ]
            })
            .collect()
    }
}
