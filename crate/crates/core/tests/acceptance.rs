//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs without the libtest harness. A criterion that fails prints FAIL with
//! its measured values; a criterion that panics or errors prints FAIL with
//! the message. The process exits non-zero only if a criterion could not be
//! evaluated at all.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use inls_core::checks::{doubling_check, HOLDER_TOL};
use inls_core::constructor::{ConstructOptions, Constructor, IterationState, RemainderSummary, Status};
use inls_core::dynamics::{
    assemble_blowup, evolve_physical, explicit_s, pc_transform, BlowupProfile, EvolveOptions,
};
use inls_core::geometry::Surface;
use inls_core::grid::{add, scale, sub, GridConfig};
use inls_core::ground_state::{closed_form_1d, GroundState, GroundStateOptions};
use inls_core::linops::{coercivity, growth_curve, random_field, LinearizedOperator, Mode, Profiles, SecularBasis};
use inls_core::modulation::{
    measure_q_decay, q_to_p, solve_q_from_p, DecayClass, PPath, SolveOptions, TauGrid,
};
use inls_core::profiles::Profile;
use inls_core::sources::{Frame, ProblemSpec, Secular, Sources};
use inls_core::split::Order;
use inls_core::{Grid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A scaled quantity counts as bounded on [τ₀, τ₁] when its sup over the
/// whole range is at most this multiple of its sup over [τ₀, √(τ₀τ₁)].
const BOUNDED_GROWTH: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Setup {
    grid: Grid,
    gs: GroundState,
    basis: SecularBasis,
}

fn build(cfg: GridConfig, tol: f64) -> Setup {
    let grid = Grid::new(cfg).unwrap();
    let gs = GroundState::solve(&grid, &GroundStateOptions { tol, ..Default::default() }).unwrap();
    let basis = SecularBasis::build(&grid, &gs).unwrap();
    Setup { grid, gs, basis }
}

fn line() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| build(GridConfig::line(1024, 32.0), 1e-12))
}

fn radial() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| build(GridConfig::radial(256, 30.0), 1e-12))
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

fn bounded(taus: &[f64], vals: &[f64]) -> (bool, f64) {
    let (t0, t1) = (taus[0], taus[taus.len() - 1]);
    let mid = (t0 * t1).sqrt();
    let early = taus.iter().zip(vals).filter(|(t, _)| **t <= mid).map(|(_, v)| *v).fold(0.0, f64::max);
    let all = vals.iter().cloned().fold(0.0, f64::max);
    let growth = all / early;
    (all.is_finite() && early > 0.0 && growth <= BOUNDED_GROWTH, growth)
}

fn ground_state() -> Outcome {
    let grid = Grid::new(GridConfig::line(1024, 32.0)).unwrap();
    let start = Instant::now();
    let gs = GroundState::solve(&grid, &GroundStateOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = grid.coords().iter().zip(&gs.q).map(|(c, q)| (q - closed_form_1d(c[0])).abs()).fold(0.0, f64::max);
    let mass_err = (gs.mass - 3f64.sqrt() * PI / 2.0).abs();
    outcome(
        err < 1e-8 && mass_err < 1e-6 && gs.residual < 1e-8 && secs < 10.0,
        format!(
            "pointwise {err:.2e} (< 1e-8), mass {:.9} err {mass_err:.2e} (< 1e-6), residual {:.2e} (< 1e-8), {secs:.2} s (< 10 s)",
            gs.mass, gs.residual
        ),
    )
}

fn secular_algebra() -> Outcome {
    let mut relations: f64 = 0.0;
    let mut gram: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let two = C64::new(2.0, 0.0);
    for s in [line(), radial()] {
        let g = &s.grid;
        let op = LinearizedOperator::new(g, &s.gs);
        let pr = Profiles::new(g, &s.gs).unwrap();
        let b = &s.basis;
        let mut res = vec![
            g.l2_norm(&op.apply_l(&pr.q.iter().map(|v| C64::i() * v).collect::<Vec<_>>())),
            g.l2_norm(&op.apply_lminus(&pr.q)),
            g.l2_norm(&add(&op.apply_lplus(&pr.lambda_q), &scale(two, &pr.q))),
            g.l2_norm(&add(&op.apply_lminus(&pr.r2q), &scale(C64::new(4.0, 0.0), &pr.lambda_q))),
            g.l2_norm(&add(&op.apply_lplus(&pr.qtilde), &pr.r2q)),
        ];
        for l in 0..pr.dq.len() {
            res.push(g.l2_norm(&op.apply_lplus(&pr.dq[l])));
            res.push(g.l2_norm(&add(&op.apply_lminus(&pr.xq[l]), &scale(two, &pr.dq[l]))));
        }
        let sl = |m: Mode| op.apply_script_l(b.n_of(m));
        res.push(g.l2_norm(&sl(Mode::N1)));
        res.push(g.l2_norm(&add(&sl(Mode::N4), &scale(two, b.n_of(Mode::N1)))));
        res.push(g.l2_norm(&sub(&sl(Mode::N5), &scale(two, b.n_of(Mode::N4)))));
        let n6 = sub(&scale(C64::new(2.0 * b.gamma0, 0.0), b.n_of(Mode::N1)), &scale(two, b.n_of(Mode::N5)));
        res.push(g.l2_norm(&sub(&sl(Mode::N6), &n6)));
        for l in 0..g.dim() {
            if b.index(Mode::N2(l)).is_some() {
                res.push(g.l2_norm(&sl(Mode::N2(l))));
                res.push(g.l2_norm(&sub(&sl(Mode::N3(l)), &scale(two, b.n_of(Mode::N2(l))))));
            }
        }
        relations = res.into_iter().fold(relations, f64::max);
        gram = gram.max(b.gram.raw_max_deviation);
        identity = identity.max(s.gs.identity_rel_error);
    }
    outcome(
        relations < 1e-6 && gram < 1e-6 && identity < 1e-6,
        format!("relations {relations:.2e}, Gram {gram:.2e}, ∫QQ̃ identity {identity:.2e} (all < 1e-6; line and radial)"),
    )
}

fn semigroup() -> Outcome {
    let start = Instant::now();
    let s = line();
    let g = &s.grid;
    let op = LinearizedOperator::new(g, &s.gs);
    let b = &s.basis;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let f = b.project_m(g, &random_field(g, &mut rng, 3));
        let h0 = g.hs_norm(&f, 1.0);
        let curve = growth_curve(&op, &f, 20.0, 20, 1.0, 0.01, Order::Four).unwrap();
        let sup = curve.iter().filter(|(t, _)| *t >= 1.0 - 1e-12).map(|(_, v)| v / h0).fold(0.0, f64::max);
        worst = worst.max(sup);
    }
    let (n1, n4, n5) = (b.n_of(Mode::N1), b.n_of(Mode::N4), b.n_of(Mode::N5));
    let mut f = n5.to_vec();
    let mut t = 0.0;
    let mut orbit: f64 = 0.0;
    let mut orbit_ok = true;
    for target in [1.0, 5.0, 10.0, 20.0] {
        f = op.evolve_direct(&f, target - t, 1.0, 0.0025, Order::Six).unwrap();
        t = target;
        let expect: Vec<C64> = (0..f.len()).map(|i| n5[i] - 2.0 * t * n4[i] - 2.0 * t * t * n1[i]).collect();
        let rel = g.hs_norm(&sub(&f, &expect), 1.0) / (1.0 + t * t);
        orbit = orbit.max(rel);
        orbit_ok &= rel < 1e-5;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 10.0 && orbit_ok && secs < 120.0,
        format!("sup H¹ ratio {worst:.3} (≤ 10), n₅ orbit error/(1+t²) {orbit:.2e} (< 1e-5), {secs:.1} s (< 120 s)"),
    )
}

fn m_positivity() -> Outcome {
    let fitted = |n: usize| {
        let s = build(GridConfig::line(n, 32.0), GroundStateOptions::default().tol);
        let op = LinearizedOperator::new(&s.grid, &s.gs);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fields: Vec<_> = (0..50).map(|_| random_field(&s.grid, &mut rng, 3)).collect();
        coercivity(&op, &s.basis, &fields).c_lower
    };
    let (c, c_fine) = (fitted(1024), fitted(2048));
    let change = (c_fine / c - 1.0).abs();
    outcome(
        c > 0.0 && c_fine > 0.0 && change <= 0.2,
        format!("c = {c:.4} at N = 1024, {c_fine:.4} at N = 2048, change {change:.2e} (≤ 0.2)"),
    )
}

fn random_p(rng: &mut ChaCha8Rng, g: &TauGrid, amp: f64, d: usize, c: f64) -> PPath {
    let mut p = PPath::zero(g.clone());
    let mut comp = || -> Vec<f64> {
        let a: f64 = rng.gen_range(-amp..amp);
        let b: f64 = rng.gen_range(-0.3..0.3);
        let w: f64 = rng.gen_range(0.5..2.0);
        g.tau.iter().map(|t| a * t.powf(-c) * (1.0 + b * (w * t.ln()).sin())).collect()
    };
    p.p1 = comp();
    p.p4 = comp();
    p.p5 = comp();
    for l in 0..d {
        p.p2[l] = comp();
        p.p3[l] = comp();
    }
    p
}

fn modulation() -> Outcome {
    let c = 2.5;
    let g = TauGrid::log(20.0, 2000.0, 4001).unwrap();
    let class = DecayClass::uniform(c);

    let mut p = PPath::zero(g.clone());
    p.p4 = g.tau.iter().map(|t| t.powf(-c)).collect();
    let (q, _) = solve_q_from_p(&p, &class, &SolveOptions::default()).unwrap();
    let closed = (0..g.len())
        .map(|k| (q.q4(k) - (-g.tau[k].powf(1.0 - c) / (c - 1.0)).exp()).abs())
        .fold(0.0, f64::max);

    let opts = SolveOptions { tol: 1e-14, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut round: f64 = 0.0;
    for d in [1, 2] {
        let p = random_p(&mut rng, &g, 0.2, d, c);
        let (q, _) = solve_q_from_p(&p, &class, &opts).unwrap();
        let (q2, _) = solve_q_from_p(&q_to_p(&q).unwrap(), &class, &opts).unwrap();
        let sc = q.components().iter().flat_map(|v| v.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        round = round.max(q2.max_difference(&q) / sc);
    }

    let mut p = random_p(&mut rng, &g, 1.0, 1, c);
    for f in [&mut p.p1, &mut p.p2[0], &mut p.p3[0], &mut p.p4, &mut p.p5] {
        *f = g.tau.iter().map(|t| 0.5 * t.powf(-c)).collect();
    }
    let (q, _) = solve_q_from_p(&p, &class, &SolveOptions::default()).unwrap();
    let m = measure_q_decay(&q, 100.0, 1000.0);
    let t = class.table();
    let measured = [m.q1, m.q2, m.q3, m.q4r, m.q5];
    let decay_ok = match measured {
        [Some(q1), Some(q2), Some(q3), Some(q4), Some(q5)] => {
            (q1 - t.q1).abs() <= 0.1
                && (q2 - t.q2).abs() <= 0.1
                && (q4 - t.q4r).abs() <= 0.1
                && q3 >= t.q3 - 0.1
                && q5 >= t.q5 - 0.1
        }
        _ => false,
    };
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.3}"));
    outcome(
        closed < 1e-7 && round < 1e-6 && decay_ok,
        format!(
            "closed-form q₄ {closed:.2e} (< 1e-7), q→p→q {round:.2e} (< 1e-6), exponents q1..q5 = {} {} {} {} {} vs table {:.2} {:.2} ≥{:.2} {:.2} ≥{:.2} (±0.1)",
            fmt(m.q1), fmt(m.q2), fmt(m.q3), fmt(m.q4r), fmt(m.q5), t.q1, t.q2, t.q3, t.q4r, t.q5
        ),
    )
}

fn pseudo_conformal() -> Outcome {
    let s = line();
    let g = &s.grid;
    let exact = |t: f64| {
        g.from_fn(|x| closed_form_1d(x[0] / t) * C64::from_polar(t.powf(-0.5), -1.0 / t + x[0] * x[0] / (4.0 * t)))
    };
    let mut image: f64 = 0.0;
    for t in [1.0, 0.5, 0.25] {
        let u: Vec<C64> = s.gs.q.iter().map(|v| v * C64::from_polar(1.0, 1.0 / t)).collect();
        image = image.max(max_diff(&pc_transform(g, &u, 1.0 / t).unwrap(), &exact(t)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut invol: f64 = 0.0;
    for _ in 0..5 {
        let f = random_field(g, &mut rng, 3);
        for sc in [0.8, 1.0, 1.25] {
            let twice = pc_transform(g, &pc_transform(g, &f, sc).unwrap(), 1.0 / sc).unwrap();
            invol = invol.max(max_diff(&twice, &f));
        }
    }
    let t = 0.25;
    let kappa = s.gs.kappa(g);
    let rate = t * g.grad_norm(&explicit_s(g, &s.gs, t).unwrap()) / kappa;
    outcome(
        image < 1e-6 && invol < 1e-7 && (rate - 1.0).abs() <= 0.01,
        format!("𝒯(e^{{it}}Q) − S {image:.2e} (< 1e-6), involution {invol:.2e} (< 1e-7), t‖∇S‖/κ at t = 0.25 is {rate:.4} (within 1%)"),
    )
}

fn source_structure() -> Outcome {
    let mut inner: f64 = 0.0;
    let mut worst_growth: f64 = 0.0;
    let mut ok = true;
    for s in [line(), radial()] {
        let spec = ProblemSpec {
            d: s.grid.dim(),
            v: Profile::Bump { base: 0.0, amplitude: 0.3, width: 1.0, order: 1, axial: false },
            g: Profile::Bump { base: 1.0, amplitude: -0.5, width: 1.0, order: 3, axial: false },
            tau0: 20.0,
        };
        let src = Sources::new(&s.grid, &s.gs, &s.basis, &spec).unwrap();
        let taus: Vec<f64> = (0..=20).map(|k| 20.0 * 10f64.powf(k as f64 / 20.0)).collect();
        let mut scaled = Vec::new();
        for &tau in &taus {
            let r0 = src.r0(&src.coefficients(&Frame::trivial(tau)));
            let nu = Secular::from_basis(&s.basis, &s.basis.coefficients(&s.grid, &r0));
            inner = [nu.s2[0], nu.s2[1], nu.s4, nu.s6].iter().fold(inner, |m, v| m.max(v.abs()));
            scaled.push(tau.powi(3) * s.grid.l2_norm(&r0));
        }
        let (b, growth) = bounded(&taus, &scaled);
        ok &= b;
        worst_growth = worst_growth.max(growth);
    }
    outcome(
        ok && inner < 1e-10,
        format!("max |⟨R₀, m_j⟩| for j ∈ {{2,4,6}} {inner:.2e} (< 1e-10), τ³‖R₀‖ growth over [20, 200] {worst_growth:.3} (≤ {BOUNDED_GROWTH})"),
    )
}

struct EndToEnd {
    state: IterationState,
    summary: RemainderSummary,
    blowup: Option<BlowupProfile>,
    epsilon: f64,
    seconds: f64,
    error: Option<String>,
}

fn end_to_end_run() -> &'static EndToEnd {
    static E: OnceLock<EndToEnd> = OnceLock::new();
    E.get_or_init(|| {
        let start = Instant::now();
        let grid = Grid::new(GridConfig::radial(512, 30.0)).unwrap();
        let gs = GroundState::solve(&grid, &GroundStateOptions::default()).unwrap();
        let basis = SecularBasis::build(&grid, &gs).unwrap();
        let surface = Surface::Quintic { c0: 0.1 };
        let spec = ProblemSpec {
            d: 2,
            v: Profile::SurfacePotential { surface: surface.clone() },
            g: Profile::SurfaceCoupling { surface },
            tau0: 20.0,
        };
        let opts = ConstructOptions { tau_max: 200.0, ..Default::default() };
        let c = Constructor::new(&grid, &gs, &basis, &spec, opts).unwrap();
        let state = c.picard();
        let summary = c.summary(&state);
        let (blowup, error) = match &state.path {
            Some(path) => match assemble_blowup(&grid, &gs, path, spec.v0(), &state.taus, &state.w) {
                Ok(b) => (Some(b), None),
                Err(e) => (None, Some(e.to_string())),
            },
            None => (None, Some("no modulation path".into())),
        };
        EndToEnd { state, summary, blowup, epsilon: opts.epsilon, seconds: start.elapsed().as_secs_f64(), error }
    })
}

fn tuning() -> Outcome {
    let e = end_to_end_run();
    let st = &e.state;
    let contraction = st.history.iter().map(|r| r.contraction).fold(0.0, f64::max);
    let nu_max = e.summary.max_secular_non_conformal;
    let scaled: Vec<f64> =
        st.taus.iter().zip(&st.nu6).map(|(t, v)| v.abs() * t.powf(3.0 - 2.0 * e.epsilon)).collect();
    let (b, growth) = bounded(&st.taus, &scaled);
    outcome(
        !st.history.is_empty() && contraction < 1.0 && nu_max < 1e-6 && b,
        format!(
            "Ψ contraction {contraction:.3} (< 1), max_{{j≤5}} sup|ν_j| {nu_max:.2e} (< 1e-6), |ν₆|τ^{{3−2ε}} growth over [20, 200] {growth:.3} (≤ {BOUNDED_GROWTH})"
        ),
    )
}

fn end_to_end() -> Outcome {
    let e = end_to_end_run();
    let st = &e.state;
    let converged = st.status == Status::Converged && st.residual < 1e-6;
    let sup = e.summary.h1_weighted_sup;
    let (monotone, rate) = match &e.blowup {
        Some(b) => {
            let last = b.samples.last().unwrap();
            (b.distance_monotone(), last.grad_rate / b.kappa)
        }
        None => (false, f64::NAN),
    };
    let mut detail = format!(
        "status {:?} after {} iterations, Y residual {:.2e} (< 1e-6), sup τ^{{2−ε}}‖w‖_H¹ {sup:.3e} (≤ 1), ‖u − S̃‖_Σ monotone {monotone}, t‖∇u‖/κ at t = 1/200 is {rate:.4} (within 10%), {:.0} s (< 1800 s)",
        st.status, st.iteration, st.residual, e.seconds
    );
    if let Some(err) = &e.error {
        detail.push_str(&format!(", assembly error: {err}"));
    }
    outcome(
        converged && sup <= 1.0 && monotone && (rate - 1.0).abs() <= 0.1 && e.seconds < 1800.0,
        detail,
    )
}

fn appendix() -> Outcome {
    let grid = Grid::new(GridConfig::line(1024, 40.0)).unwrap();
    let rows = doubling_check(&grid, 100, 2024).unwrap();
    let holder = rows[..4].iter().map(|r| r.ratio_n.max(r.ratio_2n)).fold(0.0, f64::max);
    let change = rows[4..].iter().map(|r| r.relative_change).fold(0.0, f64::max);
    let failing: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    outcome(
        failing.is_empty(),
        format!(
            "inter1–4 max ratio {holder:.12} (≤ 1 + {HOLDER_TOL:e}), inter5–9 max change under doubling {change:.3} (≤ 0.2), failing {failing:?}"
        ),
    )
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mass: f64 = 0.0;
    let mut energy: f64 = 0.0;
    for s in [line(), radial()] {
        let d = s.grid.dim();
        let inhomogeneous = ProblemSpec {
            d,
            v: Profile::Bump { base: 0.2, amplitude: 0.5, width: 2.0, order: 2, axial: false },
            g: Profile::Bump { base: 1.0, amplitude: -0.3, width: 1.5, order: 4, axial: false },
            tau0: 1.0,
        };
        // E(Q) = 0, so the relative energy drift needs data away from Q
        for spec in [inhomogeneous, ProblemSpec::flat(d, 1.0)] {
            let init: Vec<C64> = random_field(&s.grid, &mut rng, 2).iter().map(|z| 0.6 * z).collect();
            let opts = EvolveOptions { dt: 1e-3, rows: 6, ..Default::default() };
            let res = evolve_physical(&s.grid, &spec, &init, 0.0, 1.0, &opts).unwrap();
            let drift = res.drift();
            mass = mass.max(drift.mass);
            energy = energy.max(drift.energy);
        }
    }
    outcome(
        mass < 1e-10 && energy < 1e-8,
        format!("mass drift {mass:.2e} (< 1e-10), energy drift {energy:.2e} (< 1e-8) per unit time"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("ground_state", ground_state),
        ("secular_algebra", secular_algebra),
        ("semigroup", semigroup),
        ("m_positivity", m_positivity),
        ("modulation", modulation),
        ("pseudo_conformal", pseudo_conformal),
        ("source_structure", source_structure),
        ("tuning", tuning),
        ("end_to_end", end_to_end),
        ("appendix_inequalities", appendix),
        ("conservation", conservation),
    ];
    let mut passed = 0;
    let mut crashed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                passed += o.pass as usize;
                println!("{} {name} [{secs:.1} s]: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            }
            Err(e) => {
                crashed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {name} [{secs:.1} s]: not evaluated: {msg}");
            }
        }
    }
    println!("acceptance: {passed} of {} criteria pass", criteria.len());
    if crashed > 0 {
        std::process::exit(1);
    }
}
