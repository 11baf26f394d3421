//! Time evolution and the maps between frames.
//!
//! Three equations share the split-step machinery:
//!
//! ```text
//! physical     i∂_t u + Δu − V(x)u + g(x)|u|^{4/d}u = 0
//! transformed  i∂_t ṽ + Δṽ − t⁻²(V(x/t) − V(0))ṽ + g(x/t)|ṽ|^{4/d}ṽ = 0
//! remainder    ∂_τ w = −iLw + Z_p(w) + R_p(w) + Z_p(Q)
//! ```
//!
//! The first two have exact local flows (the modulus is frozen), so mass is
//! conserved to round-off. The remainder equation rotates the Q^{4/d} part
//! exactly and integrates the small modulation and source terms with RK4.
//!
//! Small physical times are never reached by stepping: the blow-up solution is
//! assembled from the transformed frame through 𝒯 on a grid rescaled by λ(t).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Geometry, Grid};
use crate::ground_state::{sigma, GroundState};
use crate::linops::{rotate_potential, SecularBasis};
use crate::modulation::ModulationPath;
use crate::profiles::Profile;
use crate::sources::{Frame, ProblemSpec, Sources};
use crate::split::{self, Order, SplitProblem};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Physical,
    Transformed,
    Remainder,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Rows of diagnostics, equally spaced in time (the end points included).
    pub rows: usize,
    pub order: Order,
    /// Times at which the field is stored.
    pub snapshots: Vec<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { dt: 1e-3, rows: 11, order: Order::Four, snapshots: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionRow {
    pub t: f64,
    pub mass: f64,
    /// NaN for frames without a conserved energy.
    pub energy: f64,
    pub grad_norm: f64,
    pub moment_norm: f64,
    /// Secular coordinates of the remainder (empty outside that frame).
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionResult {
    pub equation: Equation,
    pub rows: Vec<EvolutionRow>,
    #[serde(skip)]
    pub snapshots: Vec<(f64, Vec<C64>)>,
    #[serde(skip)]
    pub last: Vec<C64>,
    /// Time of the last valid state when the run halted on non-finite values.
    pub halted_at: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Drift {
    /// max |M(t) − M(t₀)| / (M(t₀)|t − t₀|)
    pub mass: f64,
    /// max |E(t) − E(t₀)| / (e|t − t₀|) with e = max(|E(t₀)|, ‖∇u(t₀)‖²),
    /// NaN when not conserved. The floor keeps the ratio meaningful near
    /// E = 0, which is the energy of Q.
    pub energy: f64,
}

impl EvolutionResult {
    pub fn drift(&self) -> Drift {
        let first = &self.rows[0];
        let scale = first.energy.abs().max(first.grad_norm * first.grad_norm);
        let mut mass = 0.0f64;
        let mut energy = 0.0f64;
        for r in &self.rows[1..] {
            let dt = (r.t - first.t).abs();
            mass = mass.max((r.mass - first.mass).abs() / (first.mass * dt));
            energy = energy.max((r.energy - first.energy).abs() / (scale * dt));
        }
        Drift { mass, energy }
    }
}

/// E = ∫ ½|∇u|² + ½V|u|² − g|u|^{2+4/d}/(2 + 4/d)
pub fn energy(grid: &Grid, u: &[C64], v: &[f64], g: &[f64]) -> f64 {
    let s = sigma(grid.dim());
    let kinetic = 0.5 * grid.grad_norm(u).powi(2);
    let dens: Vec<f64> = (0..u.len())
        .map(|i| {
            let m = u[i].norm_sqr();
            0.5 * v[i] * m - g[i] * m.powf(1.0 + s / 2.0) / (2.0 + s)
        })
        .collect();
    kinetic + grid.integrate(&dens)
}

fn free_schrodinger(grid: &Grid, f: &mut Vec<C64>, h: f64) {
    *f = grid.multiplier_c(f, |l| C64::from_polar(1.0, -h * l));
}

fn phase_rotate(f: &mut [C64], rate: impl Fn(usize, f64) -> f64, h: f64) {
    for (i, v) in f.iter_mut().enumerate() {
        let r = rate(i, v.norm_sqr());
        *v *= C64::from_polar(1.0, -h * r);
    }
}

/// i∂u + Δu − Vu + g|u|^σu = 0 with time-independent sampled coefficients.
pub struct PhysicalFlow<'a> {
    grid: &'a Grid,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    sigma: f64,
}

impl<'a> PhysicalFlow<'a> {
    pub fn new(grid: &'a Grid, v: &Profile, g: &Profile) -> Self {
        PhysicalFlow { grid, v: v.sample(grid), g: g.sample(grid), sigma: sigma(grid.dim()) }
    }
}

impl SplitProblem for PhysicalFlow<'_> {
    fn linear(&self, f: &mut Vec<C64>, h: f64) {
        free_schrodinger(self.grid, f, h);
    }

    fn local(&self, f: &mut Vec<C64>, _t: f64, h: f64) -> Result<()> {
        let s2 = self.sigma / 2.0;
        phase_rotate(f, |i, m| self.v[i] - self.g[i] * m.powf(s2), h);
        Ok(())
    }
}

/// The pseudo-conformal frame: coefficients V, g evaluated at x/t.
pub struct TransformedFlow<'a> {
    grid: &'a Grid,
    spec: &'a ProblemSpec,
    sigma: f64,
}

impl<'a> TransformedFlow<'a> {
    pub fn new(grid: &'a Grid, spec: &'a ProblemSpec) -> Self {
        TransformedFlow { grid, spec, sigma: sigma(grid.dim()) }
    }

    /// (t⁻²(V(x/t) − V(0)), g(x/t)) on the grid.
    pub fn coefficients(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let it = 1.0 / t;
        let v = self.grid.real_from_fn(|x| it * it * self.spec.v.deviation([x[0] * it, x[1] * it]));
        let g = self.grid.real_from_fn(|x| self.spec.g.value([x[0] * it, x[1] * it]));
        (v, g)
    }
}

impl SplitProblem for TransformedFlow<'_> {
    fn linear(&self, f: &mut Vec<C64>, h: f64) {
        free_schrodinger(self.grid, f, h);
    }

    fn local(&self, f: &mut Vec<C64>, t: f64, h: f64) -> Result<()> {
        if !(t > 0.0) {
            return invalid("transformed frame requires t > 0");
        }
        let (v, g) = self.coefficients(t);
        let s2 = self.sigma / 2.0;
        phase_rotate(f, |i, m| v[i] - g[i] * m.powf(s2), h);
        Ok(())
    }
}

/// e^{−ih(−Δ + 1)}
pub(crate) fn free_remainder(grid: &Grid, f: &mut Vec<C64>, h: f64) {
    *f = grid.multiplier_c(f, |l| C64::from_polar(1.0, -h * (l + 1.0)));
}

/// Frame at τ along a solved modulation path.
pub fn frame_at(path: &ModulationPath, tau: f64) -> Frame {
    Frame { tau, t: path.time.gamma_inv(tau), q: path.q.at(tau), p: path.p.at(tau) }
}

/// The full remainder equation along a fixed modulation path.
pub struct RemainderFlow<'a> {
    pub src: &'a Sources<'a>,
    pub path: &'a ModulationPath,
    qs: Vec<f64>,
}

impl<'a> RemainderFlow<'a> {
    pub fn new(src: &'a Sources<'a>, gs: &GroundState, path: &'a ModulationPath) -> Self {
        RemainderFlow { src, path, qs: gs.q_pow_sigma() }
    }

    /// Z_p(w) + R_p(w) + Z_p(Q)
    pub fn rest(&self, tau: f64, w: &[C64]) -> Result<Vec<C64>> {
        let fr = frame_at(self.path, tau);
        let c = self.src.coefficients(&fr);
        let mut out = self.src.forcing(w, &fr, &c)?;
        let zq = self.src.z_p(self.src.q(), &fr.p)?;
        for (o, z) in out.iter_mut().zip(&zq) {
            *o += z;
        }
        Ok(out)
    }

    /// Full right-hand side, used for residual checks.
    pub fn rhs(&self, tau: f64, w: &[C64]) -> Result<Vec<C64>> {
        let grid = self.src.grid;
        let mut lin = w.to_vec();
        let lap = grid.laplacian(w);
        let s = self.src.sigma();
        for i in 0..w.len() {
            let q = self.qs[i];
            let (a, b) = (w[i].re, w[i].im);
            // −iL = −i(L₊Re + iL₋Im) with L± = −Δ + 1 − c±Q^σ
            let lplus_re = -lap[i].re + a - (s + 1.0) * q * a;
            let lminus_im = -lap[i].im + b - q * b;
            lin[i] = C64::new(lminus_im, -lplus_re);
        }
        let r = self.rest(tau, w)?;
        Ok(lin.iter().zip(&r).map(|(a, b)| a + b).collect())
    }
}

impl SplitProblem for RemainderFlow<'_> {
    fn linear(&self, f: &mut Vec<C64>, h: f64) {
        free_remainder(self.src.grid, f, h);
    }

    fn local(&self, f: &mut Vec<C64>, tau: f64, h: f64) -> Result<()> {
        let s = self.src.sigma();
        rotate_potential(f, &self.qs, s, -0.5 * h);
        split::rk4(f, h, &|w| self.rest(tau, w))?;
        rotate_potential(f, &self.qs, s, -0.5 * h);
        Ok(())
    }
}

fn finite(f: &[C64]) -> bool {
    f.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

struct Diagnostics<'a> {
    grid: &'a Grid,
    energy: Option<(Vec<f64>, Vec<f64>)>,
    basis: Option<&'a SecularBasis>,
}

impl Diagnostics<'_> {
    fn row(&self, t: f64, f: &[C64]) -> EvolutionRow {
        let g = self.grid;
        EvolutionRow {
            t,
            mass: g.l2_norm(f).powi(2),
            energy: self.energy.as_ref().map(|(v, gg)| energy(g, f, v, gg)).unwrap_or(f64::NAN),
            grad_norm: g.grad_norm(f),
            moment_norm: g.moment_norm(f, 1.0),
            nu: self.basis.map(|b| b.coefficients(g, f)).unwrap_or_default(),
        }
    }
}

fn run<P: SplitProblem>(
    p: &P,
    diag: &Diagnostics,
    equation: Equation,
    initial: &[C64],
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    if !(opts.dt > 0.0) || opts.rows < 2 {
        return invalid("evolution needs dt > 0 and at least two rows");
    }
    if initial.len() != diag.grid.len() {
        return invalid("initial field does not match the grid");
    }
    let segments = opts.rows - 1;
    let seg = (t1 - t0) / segments as f64;
    let steps = ((seg.abs() / opts.dt).ceil() as usize).max(1);
    let mut f = initial.to_vec();
    let mut rows = vec![diag.row(t0, &f)];
    let mut snaps: Vec<f64> = opts.snapshots.clone();
    snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if t1 < t0 {
        snaps.reverse();
    }
    let mut snapshots = Vec::new();
    let mut halted_at = None;
    let h = seg / steps as f64;
    let mut pending = snaps.into_iter().peekable();
    while let Some(&s) = pending.peek() {
        if (s - t0).abs() < 1e-12 * t0.abs().max(1.0) {
            snapshots.push((t0, f.clone()));
            pending.next();
        } else {
            break;
        }
    }
    'outer: for k in 0..segments {
        for j in 0..steps {
            let t = t0 + k as f64 * seg + j as f64 * h;
            let mut g = f.clone();
            let ok = match opts.order {
                Order::Four => split::step(p, &mut g, t, h),
                Order::Six => split::step6(p, &mut g, t, h),
            };
            match ok {
                Err(Error::NonFinite { .. }) => {
                    halted_at = Some(t);
                    break 'outer;
                }
                Err(e) => return Err(e),
                Ok(()) if !finite(&g) => {
                    halted_at = Some(t);
                    break 'outer;
                }
                Ok(()) => f = g,
            }
            let tn = t + h;
            while let Some(&s) = pending.peek() {
                let crossed = if h > 0.0 { s <= tn + 1e-12 } else { s >= tn - 1e-12 };
                if crossed {
                    snapshots.push((tn, f.clone()));
                    pending.next();
                } else {
                    break;
                }
            }
        }
        rows.push(diag.row(t0 + (k + 1) as f64 * seg, &f));
    }
    Ok(EvolutionResult { equation, rows, snapshots, last: f, halted_at })
}

/// Physical NLS from t₀ to t₁.
pub fn evolve_physical(
    grid: &Grid,
    spec: &ProblemSpec,
    initial: &[C64],
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    spec.validate(grid)?;
    let flow = PhysicalFlow::new(grid, &spec.v, &spec.g);
    let diag = Diagnostics { grid, energy: Some((flow.v.clone(), flow.g.clone())), basis: None };
    run(&flow, &diag, Equation::Physical, initial, t0, t1, opts)
}

/// The transformed equation from t₀ to t₁ (both positive). Rows carry the
/// secular coordinates of e^{−it}ṽ − Q when a basis is supplied.
pub fn evolve_transformed(
    grid: &Grid,
    spec: &ProblemSpec,
    initial: &[C64],
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    spec.validate(grid)?;
    if !(t0 > 0.0 && t1 > 0.0) {
        return invalid("transformed frame requires positive times");
    }
    let flow = TransformedFlow::new(grid, spec);
    let diag = Diagnostics { grid, energy: None, basis: None };
    run(&flow, &diag, Equation::Transformed, initial, t0, t1, opts)
}

/// Secular coordinates of e^{−it}ṽ − Q for a transformed-frame snapshot.
pub fn transformed_secular(grid: &Grid, gs: &GroundState, basis: &SecularBasis, t: f64, v: &[C64]) -> Vec<f64> {
    let ph = C64::from_polar(1.0, -t);
    let w: Vec<C64> = v.iter().zip(&gs.q).map(|(a, q)| a * ph - q).collect();
    basis.coefficients(grid, &w)
}

/// The remainder equation along a fixed modulation path from τ₀ to τ₁.
pub fn evolve_remainder(
    flow: &RemainderFlow,
    initial: &[C64],
    tau0: f64,
    tau1: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let diag = Diagnostics { grid: flow.src.grid, energy: None, basis: Some(flow.src.basis) };
    run(flow, &diag, Equation::Remainder, initial, tau0, tau1, opts)
}

/// 𝒯 applied to a snapshot at time s > 0; the result is the snapshot at 1/s:
/// (𝒯u)(1/s, x) = e^{is|x|²/4} s^{d/2} ū(s, sx).
pub fn pc_transform(grid: &Grid, u: &[C64], s: f64) -> Result<Vec<C64>> {
    if !(s > 0.0 && s.is_finite()) {
        return invalid("pseudo-conformal transform requires a positive time");
    }
    let d = grid.dim() as f64;
    let amp = s.powf(d / 2.0);
    let resampled = grid.resample_affine(u, s, [0.0, 0.0])?;
    Ok(resampled
        .iter()
        .zip(grid.radius())
        .map(|(v, r)| v.conj() * C64::from_polar(amp, 0.25 * s * r * r))
        .collect())
}

/// Profiles of width t need at least this many samples per unit width.
pub const SAMPLES_PER_WIDTH: f64 = 4.0;

fn resolvable(grid: &Grid, t: f64) -> Result<()> {
    let n = grid.config().n as f64;
    let spacing = match grid.geometry() {
        Geometry::Radial => grid.half_width() / n,
        _ => 2.0 * grid.half_width() / n,
    };
    if t < SAMPLES_PER_WIDTH * spacing {
        return invalid(format!("t = {t} below the grid resolution {spacing:.3e}"));
    }
    if (-grid.half_width() / t).exp() >= grid.config().truncation_tol {
        return invalid(format!("t = {t}: profile wider than the box"));
    }
    Ok(())
}

/// S(t,x) = e^{−i/t} e^{i|x|²/4t} t^{−d/2} Q(x/t).
pub fn explicit_s(grid: &Grid, gs: &GroundState, t: f64) -> Result<Vec<C64>> {
    if !(t > 0.0) {
        return invalid("explicit profile requires t > 0");
    }
    resolvable(grid, t)?;
    let d = grid.dim() as f64;
    let qc: Vec<C64> = gs.q.iter().map(|v| C64::new(*v, 0.0)).collect();
    let q = grid.resample_affine(&qc, 1.0 / t, [0.0, 0.0])?;
    let amp = t.powf(-d / 2.0);
    Ok(q
        .iter()
        .zip(grid.radius())
        .map(|(v, r)| v.re * C64::from_polar(amp, -1.0 / t + r * r / (4.0 * t)))
        .collect())
}

/// A physical-frame snapshot sampled on the computational grid rescaled by λ:
/// `field[i] = λ^{d/2} u(s, λy_i)`.
#[derive(Clone, Debug)]
pub struct PhysicalSnapshot {
    pub s: f64,
    pub lambda: f64,
    pub field: Vec<C64>,
}

impl PhysicalSnapshot {
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        grid.l2_norm(&self.field)
    }

    pub fn grad_norm(&self, grid: &Grid) -> f64 {
        grid.grad_norm(&self.field) / self.lambda
    }

    pub fn position_norm(&self, grid: &Grid) -> f64 {
        grid.position_norm(&self.field) * self.lambda
    }

    /// ‖f‖_Σ = (‖f‖² + ‖∇f‖² + ‖xf‖²)^{1/2}
    pub fn sigma_norm(&self, grid: &Grid) -> f64 {
        (self.l2_norm(grid).powi(2) + self.grad_norm(grid).powi(2) + self.position_norm(grid).powi(2)).sqrt()
    }

    pub fn difference(&self, other: &PhysicalSnapshot) -> Result<PhysicalSnapshot> {
        if (self.lambda - other.lambda).abs() > 1e-14 * self.lambda || self.s != other.s {
            return invalid("snapshots on different rescaled grids");
        }
        Ok(PhysicalSnapshot {
            s: self.s,
            lambda: self.lambda,
            field: self.field.iter().zip(&other.field).map(|(a, b)| a - b).collect(),
        })
    }
}

/// One time of the assembled solution.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BlowupSample {
    /// Physical time s = 1/t.
    pub s: f64,
    pub tau: f64,
    pub theta: f64,
    pub lambda: f64,
    pub center: [f64; 2],
    pub mass: f64,
    /// s‖∇u(s)‖
    pub grad_rate: f64,
    /// ‖u(s) − S̃(s)‖_Σ
    pub sigma_distance: f64,
    /// ‖∇(u − S̃)‖ s, the Ḣ¹ closeness at the blow-up scale.
    pub hdot1_distance: f64,
    /// ‖w(τ)‖_{H¹}
    pub w_h1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupProfile {
    pub kappa: f64,
    pub grad_q: f64,
    pub samples: Vec<BlowupSample>,
}

impl BlowupProfile {
    /// λ(s)/s at the smallest s (should approach 1).
    pub fn scale_ratio(&self) -> f64 {
        self.samples.last().map(|s| s.lambda / s.s).unwrap_or(f64::NAN)
    }

    /// |x(s)|/s at the smallest s.
    pub fn drift_ratio(&self) -> f64 {
        self.samples.last().map(|s| s.center[0].hypot(s.center[1]) / s.s).unwrap_or(f64::NAN)
    }

    /// ‖u − S̃‖_Σ non-increasing as s decreases (samples ordered by decreasing s).
    pub fn distance_monotone(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].sigma_distance <= w[0].sigma_distance)
    }
}

/// u(s) and S̃(s) at s = 1/t from the remainder w(τ) and the modulation at τ.
pub fn assemble_snapshot(
    grid: &Grid,
    gs: &GroundState,
    path: &ModulationPath,
    v0: f64,
    tau: f64,
    w: &[C64],
) -> Result<(PhysicalSnapshot, PhysicalSnapshot)> {
    let fr = frame_at(path, tau);
    let s = 1.0 / fr.t;
    let q = fr.q;
    let lambda = s * q.q4;
    let shift = [-q.q2[0], -q.q2[1]];
    let translate = |f: &[C64]| -> Result<Vec<C64>> {
        if shift == [0.0, 0.0] {
            Ok(f.to_vec())
        } else {
            grid.resample_affine(f, 1.0, shift)
        }
    };
    let qc: Vec<C64> = gs.q.iter().map(|v| C64::new(*v, 0.0)).collect();
    let v: Vec<C64> = qc.iter().zip(w).map(|(a, b)| a + b).collect();
    let v = translate(&v)?;
    let qt = translate(&qc)?;
    let gauge = -s * v0;
    let chirp = lambda * lambda / (4.0 * s);
    let mut u = Vec::with_capacity(v.len());
    let mut st = Vec::with_capacity(v.len());
    for (i, y) in grid.coords().iter().enumerate() {
        let r2 = grid.radius()[i].powi(2);
        let common = gauge + chirp * r2;
        let modul = q.q1 + q.q4 * (q.q3[0] * y[0] + q.q3[1] * y[1]) + q.q5 * q.q4 * q.q4 * r2;
        let vi = v[i] * C64::from_polar(1.0, tau);
        u.push(C64::from_polar(1.0, common - modul) * vi.conj());
        st.push(C64::from_polar(1.0, common - tau) * qt[i]);
    }
    Ok((
        PhysicalSnapshot { s, lambda, field: u },
        PhysicalSnapshot { s, lambda, field: st },
    ))
}

/// Maps the remainder history back to the physical frame. `taus` must be
/// increasing, so the samples come out ordered by decreasing physical time.
pub fn assemble_blowup(
    grid: &Grid,
    gs: &GroundState,
    path: &ModulationPath,
    v0: f64,
    taus: &[f64],
    ws: &[Vec<C64>],
) -> Result<BlowupProfile> {
    if taus.len() != ws.len() || taus.is_empty() {
        return invalid("remainder history and times differ in length");
    }
    let qc: Vec<C64> = gs.q.iter().map(|v| C64::new(*v, 0.0)).collect();
    let mut samples = Vec::with_capacity(taus.len());
    for (tau, w) in taus.iter().zip(ws) {
        let (u, st) = assemble_snapshot(grid, gs, path, v0, *tau, w)?;
        let diff = u.difference(&st)?;
        let fr = frame_at(path, *tau);
        let lambda = u.lambda;
        samples.push(BlowupSample {
            s: u.s,
            tau: *tau,
            theta: *tau,
            lambda,
            center: [lambda * fr.q.q2[0], lambda * fr.q.q2[1]],
            mass: u.l2_norm(grid).powi(2),
            grad_rate: u.s * u.grad_norm(grid),
            sigma_distance: diff.sigma_norm(grid),
            hdot1_distance: u.s * diff.grad_norm(grid),
            w_h1: grid.hs_norm(w, 1.0),
        });
    }
    Ok(BlowupProfile { kappa: gs.kappa(grid), grad_q: grid.grad_norm(&qc), samples })
}
