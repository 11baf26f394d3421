use inls_core::dynamics::{
    assemble_blowup, assemble_snapshot, energy, evolve_physical, evolve_remainder, evolve_transformed, explicit_s,
    pc_transform, transformed_secular, EvolveOptions, RemainderFlow,
};
use inls_core::grid::{cplx, sub, GridConfig};
use inls_core::ground_state::{closed_form_1d, GroundState, GroundStateOptions};
use inls_core::linops::{random_field, SecularBasis};
use inls_core::modulation::{DecayClass, ModulationPath, PPath, SolveOptions, TauGrid};
use inls_core::profiles::Profile;
use inls_core::sources::{ProblemSpec, Sources};
use inls_core::split::Order;
use inls_core::{Grid, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

struct Setup {
    grid: Grid,
    gs: GroundState,
    basis: SecularBasis,
}

fn build(cfg: GridConfig) -> Setup {
    let grid = Grid::new(cfg).unwrap();
    let gs = GroundState::solve(&grid, &GroundStateOptions { tol: 1e-12, ..Default::default() }).unwrap();
    let basis = SecularBasis::build(&grid, &gs).unwrap();
    Setup { grid, gs, basis }
}

fn line() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| build(GridConfig::line(1024, 32.0)))
}

fn radial() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| build(GridConfig::radial(256, 30.0)))
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

fn exact_s(grid: &Grid, t: f64) -> Vec<C64> {
    grid.from_fn(|x| {
        closed_form_1d(x[0] / t) * C64::from_polar(t.powf(-0.5), -1.0 / t + x[0] * x[0] / (4.0 * t))
    })
}

#[test]
fn solitary_wave_rotates() {
    let s = line();
    let spec = ProblemSpec::flat(1, 1.0);
    let q = cplx(&s.gs.q);
    let opts = EvolveOptions { dt: 2e-3, rows: 5, ..Default::default() };
    let res = evolve_physical(&s.grid, &spec, &q, 0.0, 1.0, &opts).unwrap();
    assert!(res.halted_at.is_none());
    let exact: Vec<C64> = q.iter().map(|v| v * C64::from_polar(1.0, 1.0)).collect();
    let e = max_diff(&res.last, &exact);
    assert!(e < 1e-7, "{e}");
}

#[test]
fn drift_stays_meaningful_at_zero_energy() {
    let s = line();
    let spec = ProblemSpec::flat(1, 1.0);
    let q = cplx(&s.gs.q);
    let opts = EvolveOptions { dt: 2e-3, rows: 5, ..Default::default() };
    let res = evolve_physical(&s.grid, &spec, &q, 0.0, 1.0, &opts).unwrap();
    assert!(res.rows[0].energy.abs() < 1e-8 * res.rows[0].grad_norm.powi(2));
    let d = res.drift();
    assert!(d.mass < 1e-10 && d.energy < 1e-8, "{d:?}");
}

#[test]
fn backward_runs_store_every_snapshot() {
    let s = line();
    let spec = ProblemSpec::flat(1, 1.0);
    let q = cplx(&s.gs.q);
    let opts = EvolveOptions { dt: 2e-3, rows: 3, snapshots: vec![0.25, 0.5, 0.75], ..Default::default() };
    let res = evolve_physical(&s.grid, &spec, &q, 1.0, 0.0, &opts).unwrap();
    let times: Vec<f64> = res.snapshots.iter().map(|(t, _)| *t).collect();
    assert_eq!(times.len(), 3);
    for (t, want) in times.iter().zip([0.75, 0.5, 0.25]) {
        assert!((t - want).abs() < 1e-9, "{times:?}");
    }
    // the solitary wave started at t₀ = 1 is e^{i(t − 1)}Q
    let (t, f) = &res.snapshots[1];
    let exact: Vec<C64> = q.iter().map(|v| v * C64::from_polar(1.0, t - 1.0)).collect();
    assert!(max_diff(f, &exact) < 1e-7);
}

fn inhomogeneous(d: usize) -> ProblemSpec {
    ProblemSpec {
        d,
        v: Profile::Bump { base: 0.2, amplitude: 0.5, width: 2.0, order: 2, axial: false },
        g: Profile::Bump { base: 1.0, amplitude: -0.3, width: 1.5, order: 4, axial: false },
        tau0: 1.0,
    }
}

#[test]
fn mass_and_energy_are_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in [line(), radial()] {
        let spec = inhomogeneous(s.grid.dim());
        let u0: Vec<C64> = random_field(&s.grid, &mut rng, 2).iter().map(|z| 0.6 * z).collect();
        let opts = EvolveOptions { dt: 1e-3, rows: 6, ..Default::default() };
        let res = evolve_physical(&s.grid, &spec, &u0, 0.0, 1.0, &opts).unwrap();
        let d = res.drift();
        assert!(d.mass < 1e-10, "mass drift {}", d.mass);
        assert!(d.energy < 1e-8, "energy drift {}", d.energy);
    }
}

#[test]
fn energy_matches_quadrature_of_the_definition() {
    let s = line();
    let q = cplx(&s.gs.q);
    let zero = vec![0.0; q.len()];
    let one = vec![1.0; q.len()];
    // ½‖Q′‖² − ⅙∫Q⁶ for the closed form: ½·(√3π/8)·... evaluated by fine quadrature
    let h = 1e-4;
    let mut kin = 0.0;
    let mut pot = 0.0;
    let mut x = -30.0;
    while x < 30.0 {
        let dq = (closed_form_1d(x + h) - closed_form_1d(x - h)) / (2.0 * h);
        kin += 0.5 * dq * dq * h;
        pot += closed_form_1d(x).powi(6) / 6.0 * h;
        x += h;
    }
    let e = energy(&s.grid, &q, &zero, &one);
    assert!((e - (kin - pot)).abs() < 1e-6, "{e} {}", kin - pot);
}

#[test]
fn gauge_shift_leaves_the_modulus_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = line();
    let spec = inhomogeneous(1);
    let shifted = ProblemSpec {
        v: Profile::Bump { base: 1.2, amplitude: 0.5, width: 2.0, order: 2, axial: false },
        ..spec.clone()
    };
    let u0: Vec<C64> = random_field(&s.grid, &mut rng, 2).iter().map(|z| 0.5 * z).collect();
    let opts = EvolveOptions { dt: 2e-3, rows: 3, ..Default::default() };
    let a = evolve_physical(&s.grid, &spec, &u0, 0.0, 1.0, &opts).unwrap();
    let b = evolve_physical(&s.grid, &shifted, &u0, 0.0, 1.0, &opts).unwrap();
    let worst = a.last.iter().zip(&b.last).fold(0.0f64, |m, (x, y)| m.max((x.norm() - y.norm()).abs()));
    assert!(worst < 1e-9, "{worst}");
    let rephased = max_diff(&a.last.iter().map(|z| z * C64::from_polar(1.0, -1.0)).collect::<Vec<_>>(), &b.last);
    assert!(rephased < 1e-9);
}

#[test]
fn transformed_frame_keeps_the_standing_wave() {
    // the secular modes amplify roundoff like t³, so the line grid prefers fewer steps
    for (s, dt) in [(line(), 2e-3), (radial(), 1e-3)] {
        let spec = ProblemSpec::flat(s.grid.dim(), 20.0);
        let init: Vec<C64> = s.gs.q.iter().map(|q| q * C64::from_polar(1.0, 20.0)).collect();
        let snaps: Vec<f64> = (1..=4).map(|k| 20.0 + 5.0 * k as f64).collect();
        let opts = EvolveOptions { dt, rows: 2, order: Order::Six, snapshots: snaps };
        let res = evolve_transformed(&s.grid, &spec, &init, 20.0, 40.0, &opts).unwrap();
        assert_eq!(res.snapshots.len(), 4);
        for (t, v) in &res.snapshots {
            let nu = transformed_secular(&s.grid, &s.gs, &s.basis, *t, v);
            let worst = nu.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(worst < 1e-7, "t = {t}: {nu:?}");
        }
    }
}

#[test]
fn transform_of_the_standing_wave_is_the_explicit_profile() {
    let s = line();
    for t in [1.0, 0.5, 0.25] {
        let u = cplx(&s.gs.q).iter().map(|v| v * C64::from_polar(1.0, 1.0 / t)).collect::<Vec<_>>();
        let tu = pc_transform(&s.grid, &u, 1.0 / t).unwrap();
        let e = max_diff(&tu, &exact_s(&s.grid, t));
        assert!(e < 1e-6, "t = {t}: {e}");
        let st = explicit_s(&s.grid, &s.gs, t).unwrap();
        assert!(max_diff(&st, &exact_s(&s.grid, t)) < 1e-6);
    }
}

#[test]
fn explicit_profile_norms() {
    for (s, times) in [(line(), vec![1.0, 0.5, 0.25]), (radial(), vec![1.0, 0.5])] {
        let g = &s.grid;
        let q = cplx(&s.gs.q);
        let (gq, xq) = (g.grad_norm(&q), g.position_norm(&q));
        for t in times {
            let st = explicit_s(g, &s.gs, t).unwrap();
            // sampling at four points per width limits the quadrature to about 1e-8 for the mass, 1e-7 for the gradient
            assert!((g.l2_norm(&st).powi(2) / s.gs.mass - 1.0).abs() < 1e-7);
            // ‖∇S(t)‖² = t⁻²‖∇Q‖² + ¼‖yQ‖²
            let want = (gq * gq + 0.25 * t * t * xq * xq).sqrt();
            assert!((t * g.grad_norm(&st) / want - 1.0).abs() < 1e-6, "t = {t}: {}", t * g.grad_norm(&st) / want - 1.0);
        }
        assert!((explicit_s(g, &s.gs, 1.0).map(|st| g.grad_norm(&st)).unwrap() / s.gs.kappa(g) - 1.0).abs() < 1e-8);
        assert!(explicit_s(g, &s.gs, 1e-3).is_err());
        assert!(explicit_s(g, &s.gs, 5.0).is_err());
        assert!(explicit_s(g, &s.gs, 0.0).is_err());
    }
}

#[test]
fn explicit_profile_solves_the_flat_equation() {
    let s = line();
    let g = &s.grid;
    let h = 1e-3;
    let at = |t: f64| explicit_s(g, &s.gs, t).unwrap();
    let (m2, m1, p1, p2) = (at(1.0 - 2.0 * h), at(1.0 - h), at(1.0 + h), at(1.0 + 2.0 * h));
    let st = at(1.0);
    let lap = g.laplacian(&st);
    let res: Vec<C64> = (0..st.len())
        .map(|i| {
            let dt = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
            C64::i() * dt + lap[i] + st[i].norm_sqr().powi(2) * st[i]
        })
        .collect();
    let r = g.l2_norm(&res);
    assert!(r < 1e-8, "{r}");
}

#[test]
fn transform_is_an_involution_and_preserves_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in [line(), radial()] {
        let f = random_field(&s.grid, &mut rng, 3);
        for sc in [0.8, 1.0, 1.25] {
            let once = pc_transform(&s.grid, &f, sc).unwrap();
            assert!((s.grid.l2_norm(&once) / s.grid.l2_norm(&f) - 1.0).abs() < 1e-9);
            let twice = pc_transform(&s.grid, &once, 1.0 / sc).unwrap();
            let e = max_diff(&twice, &f);
            assert!(e < 1e-7, "s = {sc}: {e}");
        }
        assert!(pc_transform(&s.grid, &f, 0.0).is_err());
    }
}

#[test]
fn transform_maps_solutions_to_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = line();
    let spec = ProblemSpec::flat(1, 1.0);
    let u0: Vec<C64> = random_field(&s.grid, &mut rng, 2).iter().map(|z| 0.4 * z).collect();
    let opts = EvolveOptions { dt: 1e-3, rows: 2, ..Default::default() };
    let u1 = evolve_physical(&s.grid, &spec, &u0, 1.0, 1.25, &opts).unwrap().last;
    let a = pc_transform(&s.grid, &u0, 1.0).unwrap();
    let b = pc_transform(&s.grid, &u1, 1.25).unwrap();
    let moved = evolve_physical(&s.grid, &spec, &a, 1.0, 0.8, &opts).unwrap().last;
    let e = max_diff(&moved, &b);
    assert!(e < 1e-6, "{e}");
}

#[test]
fn non_finite_states_halt_the_run() {
    let s = line();
    let spec = ProblemSpec::flat(1, 1.0);
    let u0: Vec<C64> = s.gs.q.iter().map(|q| C64::new(q * 1e90, 0.0)).collect();
    let res = evolve_physical(&s.grid, &spec, &u0, 0.0, 1.0, &EvolveOptions::default()).unwrap();
    assert_eq!(res.halted_at, Some(0.0));
    assert_eq!(res.last, u0);
}

fn trivial_path(tau0: f64, tau1: f64) -> ModulationPath {
    let g = TauGrid::log(tau0, tau1, 101).unwrap();
    ModulationPath::solve(PPath::zero(g), &DecayClass::uniform(2.5), &SolveOptions::default()).unwrap().0
}

#[test]
fn flat_remainder_stays_zero_and_assembles_to_the_explicit_profile() {
    for s in [line(), radial()] {
        let spec = ProblemSpec::flat(s.grid.dim(), 1.0);
        let src = Sources::new(&s.grid, &s.gs, &s.basis, &spec).unwrap();
        let path = trivial_path(1.0, 4.0);
        let flow = RemainderFlow::new(&src, &s.gs, &path);
        let opts = EvolveOptions { dt: 0.01, rows: 3, ..Default::default() };
        let res = evolve_remainder(&flow, &s.grid.zeros(), 1.0, 2.0, &opts).unwrap();
        assert!(res.last.iter().all(|z| z.norm() == 0.0));

        let (u, st) = assemble_snapshot(&s.grid, &s.gs, &path, 0.0, 1.0, &s.grid.zeros()).unwrap();
        assert_eq!(u.lambda, 1.0);
        let ex = explicit_s(&s.grid, &s.gs, 1.0).unwrap();
        assert!(max_diff(&u.field, &ex) < 1e-10);
        assert!(max_diff(&st.field, &ex) < 1e-10);

        let taus = [1.0, 2.0, 4.0];
        let ws = vec![s.grid.zeros(); 3];
        let b = assemble_blowup(&s.grid, &s.gs, &path, 0.0, &taus, &ws).unwrap();
        for smp in &b.samples {
            assert!(smp.sigma_distance < 1e-6);
            let want = (b.grad_q.powi(2) + 0.25 * smp.s * smp.s * s.grid.position_norm(&cplx(&s.gs.q)).powi(2)).sqrt();
            assert!((smp.grad_rate / want - 1.0).abs() < 1e-9);
            assert!((smp.mass / s.gs.mass - 1.0).abs() < 1e-9);
        }
        assert!((b.scale_ratio() - 1.0).abs() < 1e-12);
        assert_eq!(b.drift_ratio(), 0.0);
    }
}

#[test]
fn remainder_rhs_matches_the_split_flow() {
    // one tiny step of the split flow against the explicit right-hand side
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = line();
    let spec = inhomogeneous(1);
    let src = Sources::new(&s.grid, &s.gs, &s.basis, &spec).unwrap();
    let path = trivial_path(5.0, 20.0);
    let flow = RemainderFlow::new(&src, &s.gs, &path);
    let w: Vec<C64> = random_field(&s.grid, &mut rng, 2).iter().map(|z| 0.05 * z).collect();
    let h = 1e-5;
    let opts = EvolveOptions { dt: h, rows: 2, order: Order::Four, snapshots: vec![] };
    let stepped = evolve_remainder(&flow, &w, 10.0, 10.0 + h, &opts).unwrap().last;
    let fd: Vec<C64> = sub(&stepped, &w).iter().map(|z| z / h).collect();
    let rhs = flow.rhs(10.0 + 0.5 * h, &w).unwrap();
    let rel = s.grid.l2_norm(&sub(&fd, &rhs)) / s.grid.l2_norm(&rhs);
    assert!(rel < 1e-3, "{rel}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn physical_mass_is_conserved(seed in any::<u64>(), amp in 0.1f64..0.8) {
        let s = line();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0: Vec<C64> = random_field(&s.grid, &mut rng, 2).iter().map(|z| amp * z).collect();
        let opts = EvolveOptions { dt: 5e-3, rows: 3, ..Default::default() };
        let res = evolve_physical(&s.grid, &inhomogeneous(1), &u0, 0.0, 0.5, &opts).unwrap();
        prop_assert!(res.drift().mass < 1e-10);
    }
}
