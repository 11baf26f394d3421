//! Source and coefficient terms of the remainder equation
//!
//! ```text
//! ∂_τ w = −iLw + Z_p(w) + R_p(w) + Z_p(Q),
//! iZ_p(v) = (p₁ + p₃·y + p₅|y|²)v + ip₂·∇v + ip₄(d/2 + y·∇)v,
//! iR_NL = −g_p(F(Q+w) − F(Q) − ℓ(w)),  iR_L = (1 − g_p)ℓ(w) + V_p w,
//! iR₀ = (1 − g_p)F(Q) + V_p Q,
//! ```
//!
//! with g_p(τ,y) = g(x/t), V_p(τ,y) = (q₄/t)²(V(x/t) − V(0)), x = q₄(y + q₂)
//! and t = γ⁻¹(τ).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Geometry, Grid};
use crate::ground_state::{sigma, GroundState};
use crate::linops::{Mode, SecularBasis};
use crate::modulation::{PValues, QValues};
use crate::profiles::Profile;
use crate::C64;

/// The inhomogeneous problem: profiles V and g, dimension and initial time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub d: usize,
    pub v: Profile,
    pub g: Profile,
    pub tau0: f64,
}

impl ProblemSpec {
    pub fn flat(d: usize, tau0: f64) -> ProblemSpec {
        ProblemSpec { d, v: Profile::zero(), g: Profile::one(), tau0 }
    }

    /// Structural checks; the flatness hypotheses are screened by `checks`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.d != grid.dim() {
            return invalid(format!("problem dimension {} differs from grid dimension {}", self.d, grid.dim()));
        }
        if !(self.tau0 > 0.0) {
            return invalid("tau0 must be positive");
        }
        self.v.validate()?;
        self.g.validate()?;
        if (self.g.origin() - 1.0).abs() > 1e-6 {
            return invalid(format!("g(0) = {} must equal 1", self.g.origin()));
        }
        Ok(())
    }

    /// V(0), removed by the gauge factor e^{−itV(0)}.
    pub fn v0(&self) -> f64 {
        self.v.origin()
    }
}

/// τ, t = γ⁻¹(τ) and the modulation at that time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Frame {
    pub tau: f64,
    pub t: f64,
    pub q: QValues,
    pub p: PValues,
}

impl Frame {
    /// q trivial and t = τ.
    pub fn trivial(tau: f64) -> Frame {
        Frame { tau, t: tau, q: QValues::trivial(), p: PValues::default() }
    }
}

/// Sampled coefficient fields at one τ.
#[derive(Clone, Debug)]
pub struct Coefficients {
    /// g_p − 1
    pub g_minus_one: Vec<f64>,
    pub v_p: Vec<f64>,
}

/// Secular coordinates (one per mode family; families 2 and 3 carry an axis).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Secular {
    pub s1: f64,
    pub s2: [f64; 2],
    pub s3: [f64; 2],
    pub s4: f64,
    pub s5: f64,
    pub s6: f64,
}

impl Secular {
    pub fn from_basis(basis: &SecularBasis, nu: &[f64]) -> Secular {
        let mut s = Secular::default();
        for (mode, v) in basis.modes.iter().zip(nu) {
            match *mode {
                Mode::N1 => s.s1 = *v,
                Mode::N2(l) => s.s2[l] = *v,
                Mode::N3(l) => s.s3[l] = *v,
                Mode::N4 => s.s4 = *v,
                Mode::N5 => s.s5 = *v,
                Mode::N6 => s.s6 = *v,
            }
        }
        s
    }

    pub fn to_basis(&self, basis: &SecularBasis) -> Vec<f64> {
        basis
            .modes
            .iter()
            .map(|m| match *m {
                Mode::N1 => self.s1,
                Mode::N2(l) => self.s2[l],
                Mode::N3(l) => self.s3[l],
                Mode::N4 => self.s4,
                Mode::N5 => self.s5,
                Mode::N6 => self.s6,
            })
            .collect()
    }

    /// max over families 1..5
    pub fn max_abs_non_conformal(&self) -> f64 {
        [self.s1, self.s2[0], self.s2[1], self.s3[0], self.s3[1], self.s4, self.s5]
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

/// The three pieces of R_p(w).
#[derive(Clone, Debug)]
pub struct RTerms {
    pub nl: Vec<C64>,
    pub l: Vec<C64>,
    pub zero: Vec<C64>,
}

impl RTerms {
    pub fn sum(&self) -> Vec<C64> {
        (0..self.nl.len()).map(|i| self.nl[i] + self.l[i] + self.zero[i]).collect()
    }
}

/// D_j = ⟨R_p(w) + Z_p(w), m_j⟩ and d_j = D_j + ⟨Z_p(Q), m_j⟩.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Projected {
    pub big_d: Secular,
    pub small_d: Secular,
}

pub struct Sources<'a> {
    pub grid: &'a Grid,
    pub basis: &'a SecularBasis,
    pub spec: &'a ProblemSpec,
    q: Vec<C64>,
    qs: Vec<f64>,
    fq: Vec<C64>,
    sigma: f64,
}

fn nonlinearity(z: C64, sigma: f64) -> C64 {
    let m = z.norm_sqr();
    // |z|^σ z with σ = 4 or 2
    if sigma == 2.0 {
        z * m
    } else if sigma == 4.0 {
        z * (m * m)
    } else {
        z * m.powf(sigma / 2.0)
    }
}

/// F(q + w) − F(q) − ℓ(w) for real q, expanded so that every term is at
/// least quadratic in w. For even σ, |q + w|^σ = (q² + s)^{σ/2} with
/// s = 2q Re w + |w|², and the linear part cancels symbolically.
fn nonlinear_remainder(q: f64, w: C64, sigma: f64) -> C64 {
    let w2 = w.norm_sqr();
    let s = 2.0 * q * w.re + w2;
    if sigma == 2.0 {
        w * s + q * w2
    } else if sigma == 4.0 {
        let q2 = q * q;
        w * (2.0 * q2 * s + s * s) + q * (2.0 * q2 * w2 + s * s)
    } else {
        let qs = q.abs().powf(sigma);
        let lin = qs * (w * (sigma / 2.0 + 1.0) + w.conj() * (sigma / 2.0));
        nonlinearity(C64::new(q, 0.0) + w, sigma) - nonlinearity(C64::new(q, 0.0), sigma) - lin
    }
}

impl<'a> Sources<'a> {
    pub fn new(grid: &'a Grid, gs: &GroundState, basis: &'a SecularBasis, spec: &'a ProblemSpec) -> Result<Self> {
        spec.validate(grid)?;
        let s = sigma(grid.dim());
        let q: Vec<C64> = gs.q.iter().map(|v| C64::new(*v, 0.0)).collect();
        let fq = q.iter().map(|z| nonlinearity(*z, s)).collect();
        Ok(Sources { grid, basis, spec, q, qs: gs.q_pow_sigma(), fq, sigma: s })
    }

    pub fn q(&self) -> &[C64] {
        &self.q
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// F(z) = |z|^{4/d}z pointwise.
    pub fn f(&self, z: &[C64]) -> Vec<C64> {
        z.iter().map(|v| nonlinearity(*v, self.sigma)).collect()
    }

    /// ℓ(w) = (2/d + 1)Q^{4/d}w + (2/d)Q^{4/d}w̄
    pub fn ell(&self, w: &[C64]) -> Vec<C64> {
        let a = self.sigma / 2.0 + 1.0;
        let b = self.sigma / 2.0;
        (0..w.len()).map(|i| self.qs[i] * (a * w[i] + b * w[i].conj())).collect()
    }

    /// Z_p(v) = −i(p₁ + p₃·y + p₅|y|²)v + p₂·∇v + p₄(d/2 + y·∇)v
    pub fn z_p(&self, v: &[C64], p: &PValues) -> Result<Vec<C64>> {
        let g = self.grid;
        let d = g.dim();
        let mut out: Vec<C64> = g
            .coords()
            .iter()
            .zip(g.radius())
            .zip(v)
            .map(|((y, r), vi)| {
                let pot = p.p1 + p.p3[0] * y[0] + p.p3[1] * y[1] + p.p5 * r * r;
                C64::new(0.0, -pot) * vi
            })
            .collect();
        if p.p4 != 0.0 {
            let dil = g.dilation(v);
            for i in 0..v.len() {
                out[i] += p.p4 * (0.5 * d as f64 * v[i] + dil[i]);
            }
        }
        for axis in 0..2 {
            if p.p2[axis] == 0.0 {
                continue;
            }
            if g.geometry() == Geometry::Radial || axis >= d {
                return invalid("translation parameter p2 is not representable on this grid");
            }
            let dv = g.derivative(v, axis)?;
            for i in 0..v.len() {
                out[i] += p.p2[axis] * dv[i];
            }
        }
        Ok(out)
    }

    /// The expansion Z_p(Q) = p₁α₀n₁ − p₃β₀n₃ + 2p₅α₀(n₅ − γ₀n₁) − p₂β₀n₂ + p₄α₀n₄.
    pub fn zpq_secular(&self, p: &PValues) -> Secular {
        let b = self.basis;
        Secular {
            s1: b.alpha0 * p.p1 - 2.0 * b.gamma0 * b.alpha0 * p.p5,
            s2: [-b.beta0 * p.p2[0], -b.beta0 * p.p2[1]],
            s3: [-b.beta0 * p.p3[0], -b.beta0 * p.p3[1]],
            s4: b.alpha0 * p.p4,
            s5: 2.0 * b.alpha0 * p.p5,
            s6: 0.0,
        }
    }

    /// Physical point x/t = q₄(y + q₂)/t for a grid point y.
    fn physical(&self, y: [f64; 2], fr: &Frame) -> [f64; 2] {
        let s = fr.q.q4 / fr.t;
        [s * (y[0] + fr.q.q2[0]), s * (y[1] + fr.q.q2[1])]
    }

    pub fn coefficients(&self, fr: &Frame) -> Coefficients {
        let g0m1 = self.spec.g.origin() - 1.0;
        let scale = (fr.q.q4 / fr.t).powi(2);
        let mut gm1 = Vec::with_capacity(self.grid.len());
        let mut vp = Vec::with_capacity(self.grid.len());
        for y in self.grid.coords() {
            let x = self.physical(*y, fr);
            gm1.push(g0m1 + self.spec.g.deviation(x));
            vp.push(scale * self.spec.v.deviation(x));
        }
        Coefficients { g_minus_one: gm1, v_p: vp }
    }

    pub fn r_terms(&self, w: &[C64], c: &Coefficients) -> RTerms {
        let n = w.len();
        let ell = self.ell(w);
        let mi = C64::new(0.0, -1.0);
        let mut nl = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        let mut zero = Vec::with_capacity(n);
        for i in 0..n {
            let gp = 1.0 + c.g_minus_one[i];
            let one_minus_g = -c.g_minus_one[i];
            nl.push(C64::i() * gp * nonlinear_remainder(self.q[i].re, w[i], self.sigma));
            l.push(mi * (one_minus_g * ell[i] + c.v_p[i] * w[i]));
            zero.push(mi * (one_minus_g * self.fq[i] + c.v_p[i] * self.q[i]));
        }
        RTerms { nl, l, zero }
    }

    /// R_p(w) = −i(F(Q) + ℓ(w) − g_pF(Q+w) + V_p(Q+w)), evaluated as
    /// −i((1 − g_p)(F(Q) + ℓ(w)) − g_pN(w) + V_p(Q+w)) so that the nonlinear
    /// part carries no O(1) cancellation.
    pub fn r_unsplit(&self, w: &[C64], c: &Coefficients) -> Vec<C64> {
        let ell = self.ell(w);
        (0..w.len())
            .map(|i| {
                let z = self.q[i] + w[i];
                let gp = 1.0 + c.g_minus_one[i];
                let n = nonlinear_remainder(self.q[i].re, w[i], self.sigma);
                C64::new(0.0, -1.0) * (-c.g_minus_one[i] * (self.fq[i] + ell[i]) - gp * n + c.v_p[i] * z)
            })
            .collect()
    }

    pub fn r0(&self, c: &Coefficients) -> Vec<C64> {
        (0..self.q.len())
            .map(|i| C64::new(0.0, 1.0) * (c.g_minus_one[i] * self.fq[i] - c.v_p[i] * self.q[i]))
            .collect()
    }

    /// The forcing R_p(w) + Z_p(w) of the remainder equation (without Z_p(Q)).
    pub fn forcing(&self, w: &[C64], fr: &Frame, c: &Coefficients) -> Result<Vec<C64>> {
        let r = self.r_unsplit(w, c);
        let z = self.z_p(w, &fr.p)?;
        Ok(r.iter().zip(&z).map(|(a, b)| a + b).collect())
    }

    pub fn project(&self, w: &[C64], fr: &Frame) -> Result<Projected> {
        let c = self.coefficients(fr);
        let f = self.forcing(w, fr, &c)?;
        let big = Secular::from_basis(self.basis, &self.basis.coefficients(self.grid, &f));
        let z = self.zpq_secular(&fr.p);
        let small = Secular {
            s1: big.s1 + z.s1,
            s2: [big.s2[0] + z.s2[0], big.s2[1] + z.s2[1]],
            s3: [big.s3[0] + z.s3[0], big.s3[1] + z.s3[1]],
            s4: big.s4 + z.s4,
            s5: big.s5 + z.s5,
            s6: big.s6 + z.s6,
        };
        Ok(Projected { big_d: big, small_d: small })
    }
}
