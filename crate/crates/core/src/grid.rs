//! Spectral discretizations of ℝᵈ for d ∈ {1, 2}.
//!
//! Three geometries share one interface:
//!
//! * `Line`: periodic box [−L, L) with N points, FFT based.
//! * `Plane`: the tensor product of two `Line` axes (N² points).
//! * `Radial`: radially symmetric functions on ℝ², discretized on the Bessel
//!   (J₀) discrete variable representation of the disk of radius L. Nodes are
//!   r_i = z_i / K where z_i are the zeros of J₀ and K = z_{N+1} / L; the
//!   Laplacian is a dense symmetric matrix diagonalized once, so propagators,
//!   Sobolev multipliers and resolvents are exact in its eigenbasis.
//!
//! The spectral transform is normalized so that ∫|f|² = Σ_k |f̂_k|² and each
//! coefficient carries the value λ_k = |ξ_k|² of −Δ.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Line,
    Radial,
    Plane,
}

impl Geometry {
    pub fn dim(self) -> usize {
        match self {
            Geometry::Line => 1,
            Geometry::Radial | Geometry::Plane => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub geometry: Geometry,
    /// Points per axis (radial: number of nodes).
    pub n: usize,
    /// Half-width L of the box (radial: disk radius).
    pub half_width: f64,
    /// Required bound on exp(−L).
    #[serde(default = "default_truncation")]
    pub truncation_tol: f64,
}

fn default_truncation() -> f64 {
    1e-10
}

impl GridConfig {
    pub fn line(n: usize, half_width: f64) -> Self {
        GridConfig { geometry: Geometry::Line, n, half_width, truncation_tol: default_truncation() }
    }
    pub fn radial(n: usize, radius: f64) -> Self {
        GridConfig { geometry: Geometry::Radial, n, half_width: radius, truncation_tol: default_truncation() }
    }
    pub fn plane(n: usize, half_width: f64) -> Self {
        GridConfig { geometry: Geometry::Plane, n, half_width, truncation_tol: default_truncation() }
    }
}

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    L2,
    Hs(f64),
    /// ‖⟨y⟩^δ f‖_{L²}
    Moment(f64),
    /// Hˢ norm plus the s-th moment.
    Sigma(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub l2: f64,
    pub s: f64,
    pub h_s: f64,
    pub weighted_moment: f64,
    pub sigma_s: f64,
}

struct Fourier {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// ξ_k in FFT order.
    freq: Vec<f64>,
}

struct Hankel {
    /// Orthonormal eigenvectors of the DVR kinetic matrix (columns).
    vecs: DMatrix<f64>,
    /// √(2π ω_i): maps samples to L²-orthonormal coordinates.
    sqrt_w: Vec<f64>,
    /// ∂_r at the nodes through the cardinal functions.
    deriv: DMatrix<f64>,
    zeros: Vec<f64>,
    j1_at_zeros: Vec<f64>,
    k: f64,
}

enum Backend {
    Line(Fourier),
    Plane(Fourier),
    Radial(Hankel),
}

pub struct Grid {
    config: GridConfig,
    coords: Vec<[f64; 2]>,
    radius: Vec<f64>,
    weights: Vec<f64>,
    lambda: Vec<f64>,
    backend: Backend,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("config", &self.config).finish()
    }
}

fn fourier_axis(n: usize, half_width: f64) -> (Vec<f64>, Vec<f64>, Fourier) {
    let h = 2.0 * half_width / n as f64;
    let x: Vec<f64> = (0..n).map(|j| -half_width + j as f64 * h).collect();
    let freq: Vec<f64> = (0..n)
        .map(|k| {
            let kk = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            PI * kk as f64 / half_width
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    (x, freq.clone(), Fourier { fwd, inv, freq })
}

/// Zeros of J₀ by McMahon's expansion refined with Newton steps.
pub fn bessel_j0_zeros(count: usize) -> Vec<f64> {
    (1..=count)
        .map(|m| {
            let b = (m as f64 - 0.25) * PI;
            let b8 = 8.0 * b;
            let mut z = b + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3)) + 120928.0 / (15.0 * b8.powi(5));
            for _ in 0..6 {
                let dz = puruspe::Jn(0, z) / puruspe::Jn(1, z);
                z += dz;
                if dz.abs() < 1e-15 * z {
                    break;
                }
            }
            z
        })
        .collect()
}

impl Grid {
    pub fn new(config: GridConfig) -> Result<Grid> {
        let n = config.n;
        let l = config.half_width;
        if !(l.is_finite() && l > 0.0) {
            return invalid(format!("half_width must be positive, got {l}"));
        }
        if n < 64 || n % 2 != 0 {
            return invalid(format!("n must be even and at least 64, got {n}"));
        }
        if (-l).exp() >= config.truncation_tol {
            return invalid(format!(
                "box too small: exp(-{l}) = {:.2e} is not below the truncation tolerance {:.1e}",
                (-l).exp(),
                config.truncation_tol
            ));
        }
        match config.geometry {
            Geometry::Line => {
                let (x, freq, f) = fourier_axis(n, l);
                let h = 2.0 * l / n as f64;
                Ok(Grid {
                    coords: x.iter().map(|&xi| [xi, 0.0]).collect(),
                    radius: x.iter().map(|xi| xi.abs()).collect(),
                    weights: vec![h; n],
                    lambda: freq.iter().map(|k| k * k).collect(),
                    backend: Backend::Line(f),
                    config,
                })
            }
            Geometry::Plane => {
                let (x, freq, f) = fourier_axis(n, l);
                let h = 2.0 * l / n as f64;
                let mut coords = Vec::with_capacity(n * n);
                let mut lambda = Vec::with_capacity(n * n);
                for iy in 0..n {
                    for ix in 0..n {
                        coords.push([x[ix], x[iy]]);
                        lambda.push(freq[ix] * freq[ix] + freq[iy] * freq[iy]);
                    }
                }
                Ok(Grid {
                    radius: coords.iter().map(|c| c[0].hypot(c[1])).collect(),
                    coords,
                    weights: vec![h * h; n * n],
                    lambda,
                    backend: Backend::Plane(f),
                    config,
                })
            }
            Geometry::Radial => Self::new_radial(config),
        }
    }

    fn new_radial(config: GridConfig) -> Result<Grid> {
        let n = config.n;
        let all = bessel_j0_zeros(n + 1);
        let k = all[n] / config.half_width;
        let zeros: Vec<f64> = all[..n].to_vec();
        let j1: Vec<f64> = zeros.iter().map(|&z| puruspe::Jn(1, z)).collect();
        let r: Vec<f64> = zeros.iter().map(|z| z / k).collect();
        let omega: Vec<f64> = j1.iter().map(|j| 2.0 / (k * k * j * j)).collect();

        let kin = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let z = zeros[i];
                k * k / 3.0 * (1.0 - 2.0 / (z * z))
            } else {
                let (zi, zj) = (zeros[i], zeros[j]);
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * 8.0 * k * k * zi * zj / (zi * zi - zj * zj).powi(2)
            }
        });
        let eig = SymmetricEigen::try_new(kin, 1e-14, 0)
            .ok_or_else(|| Error::LinearSolve("radial kinetic eigendecomposition".into()))?;
        // Newton-Schulz polish: unitarity of the transform pair to round-off,
        // so repeated propagator steps do not drift the mass.
        let mut vecs = eig.eigenvectors;
        for _ in 0..2 {
            let defect = DMatrix::<f64>::identity(n, n) - vecs.tr_mul(&vecs);
            vecs += &vecs * defect * 0.5;
        }
        let deriv = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -1.0 / r[j]
            } else {
                let (zi, zj) = (zeros[i], zeros[j]);
                -2.0 * zj * k * j1[i] / ((zj * zj - zi * zi) * j1[j])
            }
        });
        Ok(Grid {
            coords: r.iter().map(|&ri| [ri, 0.0]).collect(),
            radius: r,
            weights: omega.iter().map(|w| 2.0 * PI * w).collect(),
            lambda: eig.eigenvalues.iter().copied().collect(),
            backend: Backend::Radial(Hankel {
                vecs,
                sqrt_w: omega.iter().map(|w| (2.0 * PI * w).sqrt()).collect(),
                deriv,
                zeros,
                j1_at_zeros: j1,
                k,
            }),
            config,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }
    pub fn geometry(&self) -> Geometry {
        self.config.geometry
    }
    pub fn dim(&self) -> usize {
        self.config.geometry.dim()
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn half_width(&self) -> f64 {
        self.config.half_width
    }
    /// Sample positions; for the radial geometry the first entry is r.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }
    /// |y| at each sample.
    pub fn radius(&self) -> &[f64] {
        &self.radius
    }
    /// Quadrature weights: ∫f ≈ Σ w_i f_i.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Eigenvalues |ξ|² of −Δ per spectral coefficient.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn zeros(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.len()]
    }

    pub fn from_fn(&self, f: impl Fn([f64; 2]) -> C64) -> Vec<C64> {
        self.coords.iter().map(|&c| f(c)).collect()
    }
    pub fn real_from_fn(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.coords.iter().map(|&c| f(c)).collect()
    }

    fn check_len(&self, f: &[C64]) {
        assert_eq!(f.len(), self.len(), "field length does not match the grid");
    }

    /// Spectral coefficients with ∫|f|² = Σ|f̂|².
    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        self.check_len(f);
        match &self.backend {
            Backend::Line(ft) => {
                let n = f.len();
                let mut buf = f.to_vec();
                ft.fwd.process(&mut buf);
                let s = (2.0 * self.config.half_width).sqrt() / n as f64;
                buf.iter_mut().for_each(|c| *c *= s);
                buf
            }
            Backend::Plane(ft) => {
                let n = self.config.n;
                let mut buf = f.to_vec();
                fft2(&mut buf, n, &ft.fwd);
                let s = 2.0 * self.config.half_width / (n * n) as f64;
                buf.iter_mut().for_each(|c| *c *= s);
                buf
            }
            Backend::Radial(hk) => {
                let n = f.len();
                let m = DMatrix::from_fn(n, 2, |i, c| {
                    let v = f[i] * hk.sqrt_w[i];
                    if c == 0 {
                        v.re
                    } else {
                        v.im
                    }
                });
                let out = hk.vecs.tr_mul(&m);
                (0..n).map(|i| C64::new(out[(i, 0)], out[(i, 1)])).collect()
            }
        }
    }

    pub fn backward(&self, s: &[C64]) -> Vec<C64> {
        self.check_len(s);
        match &self.backend {
            Backend::Line(ft) => {
                let mut buf = s.to_vec();
                ft.inv.process(&mut buf);
                let sc = 1.0 / (2.0 * self.config.half_width).sqrt();
                buf.iter_mut().for_each(|c| *c *= sc);
                buf
            }
            Backend::Plane(ft) => {
                let n = self.config.n;
                let mut buf = s.to_vec();
                fft2(&mut buf, n, &ft.inv);
                let sc = 1.0 / (2.0 * self.config.half_width);
                buf.iter_mut().for_each(|c| *c *= sc);
                buf
            }
            Backend::Radial(hk) => {
                let n = s.len();
                let m = DMatrix::from_fn(n, 2, |i, c| if c == 0 { s[i].re } else { s[i].im });
                let out = &hk.vecs * m;
                (0..n)
                    .map(|i| C64::new(out[(i, 0)], out[(i, 1)]) / hk.sqrt_w[i])
                    .collect()
            }
        }
    }

    /// f ↦ m(−Δ) f for a real multiplier m(λ).
    pub fn multiplier(&self, f: &[C64], m: impl Fn(f64) -> f64) -> Vec<C64> {
        let mut s = self.forward(f);
        for (c, &l) in s.iter_mut().zip(&self.lambda) {
            *c *= m(l);
        }
        self.backward(&s)
    }

    /// f ↦ m(−Δ) f for a complex multiplier (propagators).
    pub fn multiplier_c(&self, f: &[C64], m: impl Fn(f64) -> C64) -> Vec<C64> {
        let mut s = self.forward(f);
        for (c, &l) in s.iter_mut().zip(&self.lambda) {
            *c *= m(l);
        }
        self.backward(&s)
    }

    pub fn laplacian(&self, f: &[C64]) -> Vec<C64> {
        self.multiplier(f, |l| -l)
    }

    pub fn laplacian_real(&self, f: &[f64]) -> Vec<f64> {
        re(&self.laplacian(&cplx(f)))
    }

    /// (1 − Δ)^{-1} f.
    pub fn resolvent(&self, f: &[C64]) -> Vec<C64> {
        self.multiplier(f, |l| 1.0 / (1.0 + l))
    }

    /// ∂_{x_axis} f on Fourier grids.
    pub fn derivative(&self, f: &[C64], axis: usize) -> Result<Vec<C64>> {
        let n = self.config.n;
        let ft = match &self.backend {
            Backend::Line(ft) if axis == 0 => ft,
            Backend::Plane(ft) if axis < 2 => ft,
            _ => {
                return Err(Error::Unsupported(format!(
                    "partial derivative along axis {axis} on {:?}",
                    self.geometry()
                )))
            }
        };
        let mut s = self.forward(f);
        for (idx, c) in s.iter_mut().enumerate() {
            let k = if axis == 0 { idx % n } else { idx / n };
            let xi = if k == n / 2 { 0.0 } else { ft.freq[k] };
            *c *= C64::new(0.0, xi);
        }
        Ok(self.backward(&s))
    }

    /// ∂_r f for the radial geometry.
    pub fn radial_derivative(&self, f: &[C64]) -> Result<Vec<C64>> {
        match &self.backend {
            Backend::Radial(hk) => Ok(matvec_c(&hk.deriv, f)),
            _ => Err(Error::Unsupported("radial derivative on a Cartesian grid".into())),
        }
    }

    /// The dilation generator y·∇f.
    pub fn dilation(&self, f: &[C64]) -> Vec<C64> {
        match self.geometry() {
            Geometry::Line => {
                let d = self.derivative(f, 0).expect("line derivative");
                d.iter().zip(&self.coords).map(|(v, c)| v * c[0]).collect()
            }
            Geometry::Plane => {
                let dx = self.derivative(f, 0).expect("plane derivative");
                let dy = self.derivative(f, 1).expect("plane derivative");
                (0..f.len())
                    .map(|i| dx[i] * self.coords[i][0] + dy[i] * self.coords[i][1])
                    .collect()
            }
            Geometry::Radial => {
                let d = self.radial_derivative(f).expect("radial derivative");
                d.iter().zip(&self.radius).map(|(v, r)| v * r).collect()
            }
        }
    }

    /// Re ∫ f ḡ.
    pub fn pairing(&self, f: &[C64], g: &[C64]) -> f64 {
        self.check_len(f);
        self.check_len(g);
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a.re * b.re + a.im * b.im))
            .sum()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn l2_norm(&self, f: &[C64]) -> f64 {
        self.pairing(f, f).max(0.0).sqrt()
    }

    /// L² norm evaluated on the spectral side.
    pub fn spectral_l2_norm(&self, f: &[C64]) -> f64 {
        self.forward(f).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖f‖_{Hˢ} with the multiplier (1 + |ξ|²)^{s/2}.
    pub fn hs_norm(&self, f: &[C64], s: f64) -> f64 {
        self.forward(f)
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| (1.0 + l).powf(s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ‖∇f‖_{L²}.
    pub fn grad_norm(&self, f: &[C64]) -> f64 {
        self.forward(f)
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| l * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ‖⟨y⟩^δ f‖_{L²}.
    pub fn moment_norm(&self, f: &[C64], delta: f64) -> f64 {
        f.iter()
            .zip(&self.weights)
            .zip(&self.radius)
            .map(|((v, w), r)| w * (1.0 + r * r).powf(delta) * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ‖ |y| f ‖_{L²}.
    pub fn position_norm(&self, f: &[C64]) -> f64 {
        f.iter()
            .zip(&self.weights)
            .zip(&self.radius)
            .map(|((v, w), r)| w * r * r * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self, f: &[C64], kind: NormKind) -> Result<f64> {
        match kind {
            NormKind::L2 => Ok(self.l2_norm(f)),
            NormKind::Hs(s) if s >= 0.0 => Ok(self.hs_norm(f, s)),
            NormKind::Moment(d) if d >= 0.0 => Ok(self.moment_norm(f, d)),
            NormKind::Sigma(s) if s >= 0.0 => Ok(self.hs_norm(f, s) + self.moment_norm(f, s)),
            other => invalid(format!("negative order in {other:?}")),
        }
    }

    pub fn norm_report(&self, f: &[C64], s: f64) -> Result<NormReport> {
        if s < 0.0 {
            return invalid("negative Sobolev order");
        }
        let h_s = self.hs_norm(f, s);
        let weighted_moment = self.moment_norm(f, s);
        Ok(NormReport { l2: self.l2_norm(f), s, h_s, weighted_moment, sigma_s: h_s + weighted_moment })
    }

    /// Average over the reflection symmetries of the box: even part in d = 1,
    /// the dihedral group of the square for the plane, identity for radial.
    pub fn symmetrize(&self, f: &[C64]) -> Vec<C64> {
        let n = self.config.n;
        match self.geometry() {
            Geometry::Radial => f.to_vec(),
            Geometry::Line => (0..n).map(|j| 0.5 * (f[j] + f[(n - j) % n])).collect(),
            Geometry::Plane => {
                let at = |ix: usize, iy: usize| f[iy * n + ix];
                let m = |i: usize| (n - i) % n;
                let mut out = Vec::with_capacity(n * n);
                for iy in 0..n {
                    for ix in 0..n {
                        let s = at(ix, iy)
                            + at(m(ix), iy)
                            + at(ix, m(iy))
                            + at(m(ix), m(iy))
                            + at(iy, ix)
                            + at(m(iy), ix)
                            + at(iy, m(ix))
                            + at(m(iy), m(ix));
                        out.push(s / 8.0);
                    }
                }
                out
            }
        }
    }

    /// Parity reflection y ↦ −y.
    pub fn reflect(&self, f: &[C64]) -> Vec<C64> {
        let n = self.config.n;
        match self.geometry() {
            Geometry::Radial => f.to_vec(),
            Geometry::Line => (0..n).map(|j| f[(n - j) % n]).collect(),
            Geometry::Plane => {
                let mut out = Vec::with_capacity(n * n);
                for iy in 0..n {
                    for ix in 0..n {
                        out.push(f[((n - iy) % n) * n + (n - ix) % n]);
                    }
                }
                out
            }
        }
    }

    /// Zero the upper third of the spectrum (2/3 rule).
    pub fn dealias(&self, f: &[C64]) -> Vec<C64> {
        let n = self.config.n;
        let mut s = self.forward(f);
        match self.geometry() {
            Geometry::Line => {
                for (k, c) in s.iter_mut().enumerate() {
                    let kk = if k < n / 2 { k } else { n - k };
                    if 3 * kk > n {
                        *c = C64::new(0.0, 0.0);
                    }
                }
            }
            Geometry::Plane => {
                for (idx, c) in s.iter_mut().enumerate() {
                    let (kx, ky) = (idx % n, idx / n);
                    let fx = if kx < n / 2 { kx } else { n - kx };
                    let fy = if ky < n / 2 { ky } else { n - ky };
                    if 3 * fx > n || 3 * fy > n {
                        *c = C64::new(0.0, 0.0);
                    }
                }
            }
            Geometry::Radial => {
                let lmax = self.lambda.iter().cloned().fold(0.0, f64::max);
                let cut = lmax * 4.0 / 9.0;
                for (c, &l) in s.iter_mut().zip(&self.lambda) {
                    if l > cut {
                        *c = C64::new(0.0, 0.0);
                    }
                }
            }
        }
        self.backward(&s)
    }

    /// Evaluate the interpolant of f at arbitrary points (zero outside the box).
    /// Radial grids read the first coordinate of each point as r.
    pub fn evaluate(&self, f: &[C64], points: &[[f64; 2]]) -> Result<Vec<C64>> {
        self.check_len(f);
        match &self.backend {
            Backend::Line(_) => {
                let m = self.cardinal_matrix_1d(points.iter().map(|p| p[0]));
                Ok(matvec_c(&m, f))
            }
            Backend::Radial(hk) => {
                let n = self.config.n;
                let mut out = Vec::with_capacity(points.len());
                for p in points {
                    let r = p[0].abs();
                    if r > self.config.half_width {
                        out.push(C64::new(0.0, 0.0));
                        continue;
                    }
                    let kr = hk.k * r;
                    let j0 = puruspe::Jn(0, kr);
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..n {
                        let z = hk.zeros[j];
                        let den = z * z - kr * kr;
                        let phi = if den.abs() < 1e-9 * z * z {
                            1.0
                        } else {
                            2.0 * z * j0 / (den * hk.j1_at_zeros[j])
                        };
                        acc += f[j] * phi;
                    }
                    out.push(acc);
                }
                Ok(out)
            }
            Backend::Plane(_) => Err(Error::Unsupported(
                "pointwise evaluation on the plane; use resample_affine".into(),
            )),
        }
    }

    /// Trigonometric cardinal interpolation matrix for target abscissae.
    fn cardinal_matrix_1d(&self, targets: impl Iterator<Item = f64>) -> DMatrix<f64> {
        let n = self.config.n;
        let l = self.config.half_width;
        let h = 2.0 * l / n as f64;
        let targets: Vec<f64> = targets.collect();
        DMatrix::from_fn(targets.len(), n, |i, j| {
            let x = targets[i];
            if x.abs() > l {
                return 0.0;
            }
            let dx = x - (-l + j as f64 * h);
            let m = (dx / h).round();
            if (dx / h - m).abs() < 1e-12 {
                return if (m as i64).rem_euclid(n as i64) == 0 { 1.0 } else { 0.0 };
            }
            let a = PI * dx / (2.0 * l);
            (n as f64 * a).sin() / (n as f64 * a.tan())
        })
    }

    /// g(y) = f(a·y + b) sampled on this grid (b per axis; radial requires b = 0).
    pub fn resample_affine(&self, f: &[C64], a: f64, b: [f64; 2]) -> Result<Vec<C64>> {
        self.check_len(f);
        match self.geometry() {
            Geometry::Line => {
                let m = self.cardinal_matrix_1d(self.coords.iter().map(|c| a * c[0] + b[0]));
                Ok(matvec_c(&m, f))
            }
            Geometry::Radial => {
                if b != [0.0, 0.0] {
                    return invalid("radial resampling cannot translate");
                }
                let pts: Vec<[f64; 2]> = self.radius.iter().map(|r| [a.abs() * r, 0.0]).collect();
                self.evaluate(f, &pts)
            }
            Geometry::Plane => {
                let n = self.config.n;
                let axis: Vec<f64> = (0..n).map(|i| self.coords[i][0]).collect();
                let mx = self.cardinal_matrix_1d(axis.iter().map(|x| a * x + b[0]));
                let my = self.cardinal_matrix_1d(axis.iter().map(|y| a * y + b[1]));
                let fr = DMatrix::from_fn(n, n, |iy, ix| f[iy * n + ix].re);
                let fi = DMatrix::from_fn(n, n, |iy, ix| f[iy * n + ix].im);
                let gr = &my * fr * mx.transpose();
                let gi = &my * fi * mx.transpose();
                let mut out = Vec::with_capacity(n * n);
                for iy in 0..n {
                    for ix in 0..n {
                        out.push(C64::new(gr[(iy, ix)], gi[(iy, ix)]));
                    }
                }
                Ok(out)
            }
        }
    }
}

fn fft2(buf: &mut [C64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    for row in buf.chunks_mut(n) {
        plan.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    for ix in 0..n {
        for iy in 0..n {
            col[iy] = buf[iy * n + ix];
        }
        plan.process(&mut col);
        for iy in 0..n {
            buf[iy * n + ix] = col[iy];
        }
    }
}

fn matvec_c(m: &DMatrix<f64>, f: &[C64]) -> Vec<C64> {
    let n = f.len();
    let v = DMatrix::from_fn(n, 2, |i, c| if c == 0 { f[i].re } else { f[i].im });
    let out = m * v;
    (0..m.nrows()).map(|i| C64::new(out[(i, 0)], out[(i, 1)])).collect()
}

pub fn cplx(f: &[f64]) -> Vec<C64> {
    f.iter().map(|&x| C64::new(x, 0.0)).collect()
}

pub fn re(f: &[C64]) -> Vec<f64> {
    f.iter().map(|c| c.re).collect()
}

pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scale(a: C64, x: &[C64]) -> Vec<C64> {
    x.iter().map(|v| a * v).collect()
}

pub fn max_abs(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
