//! Rotationally symmetric surfaces dr² + φ(r)²dω² and their reduction to a
//! flat radial problem: g = r/φ, V = ½φ″/φ − ¼((φ′/φ)² − 1/r²), and the field
//! map ũ = (r/φ)^{1/2}u.
//!
//! Every surface is described through the warp u(r) = φ(r)/r − 1, computed
//! without cancellation, so V and g − 1 stay accurate near the origin. In
//! terms of the warp:
//!
//! ```text
//! g − 1 = −u/(1+u),   V = (u′/(2r) + u″/2)/(1+u) − ¼(u′/(1+u))².
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Geometry, Grid};
use crate::C64;

/// Radius below which V and g come from the Taylor data of the warp.
pub const SERIES_RADIUS: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surface {
    /// φ = r
    Euclidean,
    /// φ = sinh r
    Hyperbolic,
    /// φ = r + c₀r⁵
    Quintic { c0: f64 },
    /// φ = r + d₀tanh(c₀r⁵/d₀): r + c₀r⁵ near 0, r + d₀ at infinity.
    CompactEuclidean { c0: f64, d0: f64 },
    /// φ = sinh r − (r³/6 + a r⁵)e^{−r²} with a = 1/120 + 1/6 − c₀:
    /// r + c₀r⁵ near 0, sinh r at infinity.
    CompactHyperbolic { c0: f64 },
    /// Surface x = (y² + z²)^k in ℝ³; φ is the distance to the axis as a
    /// function of the geodesic radius.
    Bowl { k: u32 },
}

/// u = φ/r − 1 with u′, u′/r and u″.
#[derive(Clone, Copy, Debug)]
pub struct Warp {
    pub u: f64,
    pub du: f64,
    pub du_over_r: f64,
    pub ddu: f64,
}

/// Σ_{k≥k0} r^{2k}/(2k+1)! and its first two derivatives.
fn sinhc_tail(r: f64, k0: usize) -> (f64, f64, f64) {
    if r < 1.0 {
        let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
        let mut fact = 1.0;
        for k in 1..=30usize {
            fact *= (2 * k) as f64 * (2 * k + 1) as f64;
            if k < k0 {
                continue;
            }
            let kk = (2 * k) as f64;
            v += r.powi(2 * k as i32) / fact;
            d += kk * r.powi(2 * k as i32 - 1) / fact;
            dd += kk * (kk - 1.0) * r.powi(2 * k as i32 - 2) / fact;
        }
        return (v, d, dd);
    }
    let (s, c) = (r.sinh(), r.cosh());
    let mut v = s / r - 1.0;
    let mut d = (r * c - s) / (r * r);
    let mut dd = (r * r * s - 2.0 * r * c + 2.0 * s) / r.powi(3);
    let mut fact = 1.0;
    for k in 1..k0 {
        fact *= (2 * k) as f64 * (2 * k + 1) as f64;
        let kk = (2 * k) as f64;
        v -= r.powi(2 * k as i32) / fact;
        d -= kk * r.powi(2 * k as i32 - 1) / fact;
        dd -= kk * (kk - 1.0) * r.powi(2 * k as i32 - 2) / fact;
    }
    (v, d, dd)
}

/// tanh(z)/z with two derivatives.
fn tanhc(z: f64) -> (f64, f64, f64) {
    if z.abs() < 0.05 {
        let z2 = z * z;
        // 1 − z²/3 + 2z⁴/15 − 17z⁶/315 + 62z⁸/2835
        let c = [1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0];
        let f = c[0] + z2 * (c[1] + z2 * (c[2] + z2 * (c[3] + z2 * c[4])));
        let df = z * (2.0 * c[1] + z2 * (4.0 * c[2] + z2 * (6.0 * c[3] + z2 * 8.0 * c[4])));
        let ddf = 2.0 * c[1] + z2 * (12.0 * c[2] + z2 * (30.0 * c[3] + z2 * 56.0 * c[4]));
        return (f, df, ddf);
    }
    let t = z.tanh();
    let s = 1.0 - t * t;
    (t / z, s / z - t / (z * z), -2.0 * t * s / z - 2.0 * s / (z * z) + 2.0 * t / z.powi(3))
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let dp = {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    n as f64 * (z * q1 - q0) / (z * z - 1.0)
                };
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

impl Surface {
    pub fn name(&self) -> String {
        match self {
            Surface::Euclidean => "euclidean".into(),
            Surface::Hyperbolic => "hyperbolic".into(),
            Surface::Quintic { c0 } => format!("quintic(c0={c0})"),
            Surface::CompactEuclidean { c0, d0 } => format!("compact_euclidean(c0={c0},d0={d0})"),
            Surface::CompactHyperbolic { c0 } => format!("compact_hyperbolic(c0={c0})"),
            Surface::Bowl { k } => format!("bowl(k={k})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Surface::CompactEuclidean { d0, .. } if *d0 == 0.0 => invalid("compact_euclidean needs d0 != 0"),
            Surface::Bowl { k } if *k < 2 => invalid("bowl surfaces need k >= 2"),
            _ => Ok(()),
        }
    }

    /// Coefficients (a₃, a₅, a₇) of φ = r + a₃r³ + a₅r⁵ + a₇r⁷ + O(r⁹).
    pub fn taylor(&self) -> [f64; 3] {
        match *self {
            Surface::Euclidean => [0.0; 3],
            Surface::Hyperbolic => [1.0 / 6.0, 1.0 / 120.0, 1.0 / 5040.0],
            Surface::Quintic { c0 } | Surface::CompactEuclidean { c0, .. } => [0.0, c0, 0.0],
            Surface::CompactHyperbolic { c0 } => {
                let a = 1.0 / 120.0 + 1.0 / 6.0 - c0;
                [0.0, c0, 1.0 / 5040.0 - 1.0 / 12.0 + a]
            }
            Surface::Bowl { k } => {
                if k == 2 {
                    [0.0, 0.0, -8.0 / 7.0]
                } else {
                    [0.0; 3]
                }
            }
        }
    }

    fn series(&self, r: f64) -> Warp {
        let [a3, a5, a7] = self.taylor();
        let r2 = r * r;
        Warp {
            u: r2 * (a3 + r2 * (a5 + r2 * a7)),
            du: r * (2.0 * a3 + r2 * (4.0 * a5 + r2 * 6.0 * a7)),
            du_over_r: 2.0 * a3 + r2 * (4.0 * a5 + r2 * 6.0 * a7),
            ddu: 2.0 * a3 + r2 * (12.0 * a5 + r2 * 30.0 * a7),
        }
    }

    /// Geodesic radius r(ρ) − ρ of the bowl at axis distance ρ, with
    /// s = 2kρ^{2k−1}: ∫₀^ρ s²/(√(1+s²) + 1).
    fn bowl_excess(k: u32, rho: f64) -> f64 {
        let (x, w) = gauss_legendre(24);
        let panels = 8;
        let h = rho / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let a = p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let s_ = a + 0.5 * h * (xi + 1.0);
                let s = 2.0 * k as f64 * s_.powi(2 * k as i32 - 1);
                acc += 0.5 * h * wi * s * s / ((1.0 + s * s).sqrt() + 1.0);
            }
        }
        acc
    }

    fn bowl_rho(k: u32, r: f64) -> f64 {
        let mut rho = r.min(r.powf(1.0 / (2.0 * k as f64)));
        for _ in 0..100 {
            let f = rho + Self::bowl_excess(k, rho) - r;
            let s = 2.0 * k as f64 * rho.powi(2 * k as i32 - 1);
            let step = f / (1.0 + s * s).sqrt();
            rho -= step;
            if step.abs() < 1e-15 * r.max(1e-300) {
                break;
            }
        }
        rho
    }

    pub fn warp(&self, r: f64) -> Warp {
        if r < SERIES_RADIUS {
            return self.series(r);
        }
        match *self {
            Surface::Euclidean => Warp { u: 0.0, du: 0.0, du_over_r: 0.0, ddu: 0.0 },
            Surface::Hyperbolic => {
                let (u, du, ddu) = sinhc_tail(r, 1);
                Warp { u, du, du_over_r: du / r, ddu }
            }
            Surface::Quintic { c0 } => Warp {
                u: c0 * r.powi(4),
                du: 4.0 * c0 * r.powi(3),
                du_over_r: 4.0 * c0 * r * r,
                ddu: 12.0 * c0 * r * r,
            },
            Surface::CompactEuclidean { c0, d0 } => {
                let z = c0 * r.powi(5) / d0;
                let (f, df, ddf) = tanhc(z);
                let du = c0 * r.powi(3) * (4.0 * f + 5.0 * z * df);
                Warp {
                    u: c0 * r.powi(4) * f,
                    du,
                    du_over_r: du / r,
                    ddu: c0 * r * r * (12.0 * f + 60.0 * z * df + 25.0 * z * z * ddf),
                }
            }
            Surface::CompactHyperbolic { c0 } => {
                let a = 1.0 / 120.0 + 1.0 / 6.0 - c0;
                let (t, dt, ddt) = sinhc_tail(r, 2);
                let e = (-r * r).exp();
                let ome = -(-r * r).exp_m1();
                let r2 = r * r;
                let h1 = r2 / 6.0 * ome;
                let dh1 = r / 3.0 * ome + r.powi(3) * e / 3.0;
                let ddh1 = ome / 3.0 + 5.0 / 3.0 * r2 * e - 2.0 / 3.0 * r2 * r2 * e;
                let h2 = a * r2 * r2 * e;
                let dh2 = a * (4.0 * r.powi(3) - 2.0 * r.powi(5)) * e;
                let ddh2 = a * (12.0 * r2 - 16.0 * r2 * r2 + 4.0 * r.powi(6)) * e;
                let du = dt + dh1 - dh2;
                Warp { u: t + h1 - h2, du, du_over_r: du / r, ddu: ddt + ddh1 - ddh2 }
            }
            Surface::Bowl { k } => {
                let rho = Self::bowl_rho(k, r);
                let kf = k as f64;
                let s = 2.0 * kf * rho.powi(2 * k as i32 - 1);
                let root = (1.0 + s * s).sqrt();
                let excess = Self::bowl_excess(k, rho);
                let u = -excess / r;
                // N = ρ′r − ρ with ρ′ = 1/√(1+s²)
                let n = -s * s / (root * (1.0 + root)) * r + excess;
                let du = n / (r * r);
                let ds = 2.0 * kf * (2.0 * kf - 1.0) * rho.powi(2 * k as i32 - 2);
                let ddrho = -s * ds / root.powi(4);
                Warp { u, du, du_over_r: du / r, ddu: ddrho / r - 2.0 * n / r.powi(3) }
            }
        }
    }

    /// (φ, φ′, φ″) at r.
    pub fn phi(&self, r: f64) -> (f64, f64, f64) {
        let w = self.warp(r);
        (r * (1.0 + w.u), 1.0 + w.u + r * w.du, 2.0 * w.du + r * w.ddu)
    }

    /// g − 1 = −u/(1+u)
    pub fn g_minus_one(&self, r: f64) -> f64 {
        let w = self.warp(r);
        -w.u / (1.0 + w.u)
    }

    pub fn g(&self, r: f64) -> f64 {
        1.0 / (1.0 + self.warp(r).u)
    }

    pub fn v(&self, r: f64) -> f64 {
        let w = self.warp(r);
        let q = w.du / (1.0 + w.u);
        (0.5 * w.du_over_r + 0.5 * w.ddu) / (1.0 + w.u) - 0.25 * q * q
    }

    /// V(0) = 2a₃
    pub fn v0(&self) -> f64 {
        2.0 * self.taylor()[0]
    }

    /// V(r) − V(0), cancellation-free inside the series radius.
    pub fn v_minus_v0(&self, r: f64) -> f64 {
        if r >= SERIES_RADIUS {
            return self.v(r) - self.v0();
        }
        let [a3, a5, a7] = self.taylor();
        let w = self.series(r);
        let r2 = r * r;
        let bracket = r2 * ((8.0 * a5 - 2.0 * a3 * a3) + r2 * ((18.0 * a7 - 2.0 * a3 * a5) - 2.0 * a3 * a7 * r2));
        let q = w.du / (1.0 + w.u);
        bracket / (1.0 + w.u) - 0.25 * q * q
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileCheck {
    pub phi_at_zero: f64,
    pub dphi_at_zero: f64,
    /// Largest |φ^{(2j)}(0)| estimated by central differences, j = 1, 2.
    pub even_derivatives_at_zero: f64,
    pub min_phi_over_r: f64,
    pub valid: bool,
}

/// Finite-difference validation of φ(0) = 0, φ′(0) = 1, φ^{(even)}(0) = 0 and φ > 0.
pub fn check_profile(s: &Surface, r_max: f64) -> Result<ProfileCheck> {
    s.validate()?;
    // extend φ oddly to negative r for central differences at 0
    let phi = |r: f64| if r >= 0.0 { s.phi(r).0 } else { -s.phi(-r).0 };
    let h = 1e-2;
    let d1 = (phi(h) - phi(-h)) / (2.0 * h);
    let d2 = (phi(h) - 2.0 * phi(0.0) + phi(-h)) / (h * h);
    let d4 = (phi(2.0 * h) - 4.0 * phi(h) + 6.0 * phi(0.0) - 4.0 * phi(-h) + phi(-2.0 * h)) / h.powi(4);
    let mut min_ratio = f64::INFINITY;
    for i in 1..=2000 {
        let r = r_max * i as f64 / 2000.0;
        min_ratio = min_ratio.min(s.phi(r).0 / r);
    }
    let even = d2.abs().max(d4.abs());
    let p0 = phi(0.0);
    Ok(ProfileCheck {
        phi_at_zero: p0,
        dphi_at_zero: d1,
        even_derivatives_at_zero: even,
        min_phi_over_r: min_ratio,
        valid: p0.abs() < 1e-12 && (d1 - 1.0).abs() < 1e-3 && even < 1e-6 && min_ratio > 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Admissibility {
    pub surface: String,
    pub sup_v_inner: f64,
    pub sup_v_outer: f64,
    pub sup_g_inner: f64,
    pub sup_g_outer: f64,
    pub sup_dv_inner: f64,
    pub sup_dg_inner: f64,
    pub bounded: bool,
    pub verdict: String,
}

/// Sup-norm screening of V, g and their first derivatives on [0, R] and [0, 2R].
/// A profile whose sup grows by more than 50% when the range doubles is
/// reported as growing, i.e. outside the boundedness hypotheses.
pub fn admissibility(s: &Surface, r_max: f64) -> Admissibility {
    let scan = |f: &dyn Fn(f64) -> f64, hi: f64| {
        (0..=4000).map(|i| f(hi * i as f64 / 4000.0).abs()).fold(0.0, f64::max)
    };
    let dv = |r: f64| {
        let h = 1e-4 * (1.0 + r);
        (s.v(r + h) - s.v((r - h).abs())) / (r + h - (r - h).abs())
    };
    let dg = |r: f64| {
        let h = 1e-4 * (1.0 + r);
        (s.g(r + h) - s.g((r - h).abs())) / (r + h - (r - h).abs())
    };
    let v_in = scan(&|r| s.v(r), r_max);
    let v_out = scan(&|r| s.v(r), 2.0 * r_max);
    let g_in = scan(&|r| s.g(r), r_max);
    let g_out = scan(&|r| s.g(r), 2.0 * r_max);
    let grows = |a: f64, b: f64| b > 1.5 * a.max(1e-12);
    let bounded = !(grows(v_in, v_out) || grows(g_in, g_out)) && v_out.is_finite() && g_out.is_finite();
    Admissibility {
        surface: s.name(),
        sup_v_inner: v_in,
        sup_v_outer: v_out,
        sup_g_inner: g_in,
        sup_g_outer: g_out,
        sup_dv_inner: scan(&dv, r_max),
        sup_dg_inner: scan(&dg, r_max),
        bounded,
        verdict: if bounded { "bounded".into() } else { "growing: outside the boundedness hypotheses".into() },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialCheck {
    /// ‖i∂u + Δu − Vu + g|u|²u‖ in L²(r dr)
    pub flat_residual: f64,
    /// ‖i∂ũ + Δ_Mũ + |ũ|²ũ‖ in L²(φ dr)
    pub surface_residual: f64,
    /// ‖Δ_M(g^{1/2}u) + g^{3/2}|u|²u − g^{1/2}(Δu − Vu + g|u|²u)‖ in L²(φ dr)
    pub identity_error: f64,
    /// |∫|ũ|²φ dr − ∫|u|²r dr|
    pub mass_mismatch: f64,
}

/// Compares the flat radial equation for u with the surface equation for
/// ũ = (r/φ)^{1/2}u on a radial grid, given ∂_t u.
pub fn radial_equation_check(s: &Surface, grid: &Grid, u: &[C64], dudt: &[C64]) -> Result<RadialCheck> {
    if grid.geometry() != Geometry::Radial {
        return invalid("radial_equation_check needs a radial grid");
    }
    let r = grid.radius();
    let warps: Vec<Warp> = r.iter().map(|&ri| s.warp(ri)).collect();
    let g: Vec<f64> = warps.iter().map(|w| 1.0 / (1.0 + w.u)).collect();
    let v: Vec<f64> = r.iter().map(|&ri| s.v(ri)).collect();
    let sqg: Vec<f64> = g.iter().map(|x| x.sqrt()).collect();
    let lap_u = grid.laplacian(u);
    let flat: Vec<C64> = (0..u.len())
        .map(|i| C64::i() * dudt[i] + lap_u[i] - v[i] * u[i] + g[i] * u[i].norm_sqr() * u[i])
        .collect();
    let ut: Vec<C64> = u.iter().zip(&sqg).map(|(a, b)| a * b).collect();
    let utt: Vec<C64> = dudt.iter().zip(&sqg).map(|(a, b)| a * b).collect();
    // Δ_M ũ = ũ″ + (φ′/φ)ũ′ = Δũ + u′/(1+u)·ũ′ with the 2D radial Laplacian Δ.
    let lap_ut = grid.laplacian(&ut);
    let dut = grid.radial_derivative(&ut)?;
    let dm: Vec<C64> = (0..u.len()).map(|i| lap_ut[i] + warps[i].du / (1.0 + warps[i].u) * dut[i]).collect();
    let surf: Vec<C64> = (0..u.len())
        .map(|i| C64::i() * utt[i] + dm[i] + ut[i].norm_sqr() * ut[i])
        .collect();
    let mapped_flat_spatial: Vec<C64> =
        (0..u.len()).map(|i| sqg[i] * (lap_u[i] - v[i] * u[i] + g[i] * u[i].norm_sqr() * u[i])).collect();
    let surf_spatial: Vec<C64> = (0..u.len()).map(|i| dm[i] + ut[i].norm_sqr() * ut[i]).collect();
    // L²(φ dr) = L²(r dr) weighted by φ/r = 1/g
    let surf_norm = |f: &[C64]| {
        grid.integrate(&f.iter().zip(&g).map(|(a, gi)| a.norm_sqr() / gi).collect::<Vec<_>>()).sqrt()
    };
    let diff: Vec<C64> = surf_spatial.iter().zip(&mapped_flat_spatial).map(|(a, b)| a - b).collect();
    let mass_flat = grid.l2_norm(u).powi(2);
    let mass_surf = surf_norm(&ut).powi(2);
    Ok(RadialCheck {
        flat_residual: grid.l2_norm(&flat),
        surface_residual: surf_norm(&surf),
        identity_error: surf_norm(&diff),
        mass_mismatch: (mass_flat - mass_surf).abs(),
    })
}

/// V and g sampled at |y| on any grid.
pub fn sample(s: &Surface, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let v = grid.radius().iter().map(|&r| s.v(r)).collect();
    let g = grid.radius().iter().map(|&r| s.g(r)).collect();
    (v, g)
}

/// ũ = (r/φ)^{1/2}u
pub fn to_surface_field(s: &Surface, grid: &Grid, u: &[C64]) -> Vec<C64> {
    grid.radius().iter().zip(u).map(|(&r, v)| v * s.g(r).sqrt()).collect()
}
