use inls_core::checks::{
    corpus, doubling_check, field_ratios, validate_hypotheses, vanishing_order, verify_interpolation, weighted_grad,
    HypothesisMode,
};
use inls_core::geometry::Surface;
use inls_core::ground_state::closed_form_1d;
use inls_core::grid::{sub, GridConfig};
use inls_core::linops::random_field;
use inls_core::profiles::Profile;
use inls_core::sources::ProblemSpec;
use inls_core::{Grid, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn line() -> &'static Grid {
    static G: OnceLock<Grid> = OnceLock::new();
    G.get_or_init(|| Grid::new(GridConfig::line(1024, 40.0)).unwrap())
}

fn plane() -> &'static Grid {
    static G: OnceLock<Grid> = OnceLock::new();
    G.get_or_init(|| Grid::new(GridConfig::plane(256, 24.0)).unwrap())
}

/// ∫⟨x⟩^{2m}e^{−x²}dx = Σ_j C(m, j)Γ(j + ½)
fn gaussian_moment(m: u32) -> f64 {
    let mut gamma = PI.sqrt();
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 0..=m {
        total += binom * gamma;
        binom *= (m - j) as f64 / (j + 1) as f64;
        gamma *= j as f64 + 0.5;
    }
    total
}

#[test]
fn gaussian_holder_ratio_matches_its_moments() {
    let g = line();
    let f = g.from_fn(|x| C64::new((-0.5 * x[0] * x[0]).exp(), 0.0));
    let r = field_ratios(g, &f).unwrap();
    let want = gaussian_moment(1).sqrt() / (gaussian_moment(3).powf(1.0 / 6.0) * gaussian_moment(0).powf(1.0 / 3.0));
    assert!((r[0] - want).abs() < 1e-10, "{} {want}", r[0]);
    assert!(r[0] <= 1.0);
    let want2 = gaussian_moment(2).sqrt() / (gaussian_moment(3).powf(1.0 / 3.0) * gaussian_moment(0).powf(1.0 / 6.0));
    assert!((r[1] - want2).abs() < 1e-10);
}

#[test]
fn zero_field_has_zero_ratios() {
    for g in [line(), plane()] {
        assert!(field_ratios(g, &g.zeros()).unwrap().iter().all(|r| *r == 0.0));
    }
}

#[test]
fn radial_grids_are_rejected() {
    let g = Grid::new(GridConfig::radial(64, 30.0)).unwrap();
    assert!(field_ratios(&g, &g.zeros()).is_err());
    assert!(corpus(&g, 3, 0).is_err());
}

#[test]
fn weighted_gradient_matches_spectral_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in [line(), plane()] {
        let f = random_field(g, &mut rng, 3);
        // ‖∇f‖ and ‖∇²f‖ = ‖Δf‖ without weight
        let e = weighted_grad(g, &f, 0.0, 1).unwrap() / g.grad_norm(&f) - 1.0;
        assert!(e.abs() < 1e-10, "{e} {:?}", g.geometry());
        let lap = g.l2_norm(&g.laplacian(&f));
        assert!((weighted_grad(g, &f, 0.0, 2).unwrap() / lap - 1.0).abs() < 1e-10);
        // ⟨x⟩ weight: ‖⟨x⟩∇f‖² = ‖∇f‖² + ‖|x|∇f‖²
        let dx = g.derivative(&f, 0).unwrap();
        let mut tot = g.moment_norm(&dx, 1.0).powi(2);
        if g.dim() == 2 {
            tot += g.moment_norm(&g.derivative(&f, 1).unwrap(), 1.0).powi(2);
        }
        assert!((weighted_grad(g, &f, 1.0, 1).unwrap() / tot.sqrt() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dilates_of_the_ground_state_respect_the_sobolev_form() {
    let g = line();
    let mut trend = Vec::new();
    for lam in [0.5f64, 1.0, 2.0] {
        let f = g.from_fn(|x| C64::new(lam.sqrt() * closed_form_1d(lam * x[0]), 0.0));
        let r = field_ratios(g, &f).unwrap();
        assert!(r[2] <= 1.0 + 1e-8);
        trend.push(r[2]);
    }
    // narrower profiles carry more of their H¹ mass at high frequency
    assert!(trend[0] > trend[1] && trend[1] > trend[2], "{trend:?}");
}

#[test]
fn corpus_extends_with_the_same_seed() {
    let g = line();
    let a = corpus(g, 10, 7).unwrap();
    let b = corpus(g, 20, 7).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(g.l2_norm(&sub(x, y)), 0.0);
    }
    let reports = verify_interpolation(g, &b).unwrap();
    assert_eq!(reports.len(), 9);
    assert!(reports[..4].iter().all(|r| r.constant.is_none()));
    assert!(reports[4..].iter().all(|r| r.constant == Some(r.max_ratio)));
}

#[test]
fn corpus_doubling_on_the_line() {
    let rows = doubling_check(line(), 100, 2024).unwrap();
    for r in &rows {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn corpus_doubling_in_the_plane() {
    let rows = doubling_check(plane(), 20, 5).unwrap();
    for r in &rows[..4] {
        assert!(r.pass, "{r:?}");
    }
    for r in &rows[4..] {
        assert!(r.ratio_2n.is_finite() && r.ratio_2n > 0.0, "{r:?}");
    }
}

fn spec(v: Profile, g: Profile) -> ProblemSpec {
    ProblemSpec { d: 2, v, g, tau0: 20.0 }
}

#[test]
fn flat_profiles_pass_both_modes() {
    let s = ProblemSpec::flat(2, 20.0);
    for mode in [HypothesisMode::Thblup, HypothesisMode::Stronger] {
        let v = validate_hypotheses(&s, mode);
        assert!(v.pass, "{v:?}");
        assert!(v.failing.is_none());
    }
}

#[test]
fn hyperbolic_coupling_fails_the_hessian_condition() {
    // r/sinh r = 1 − r²/6 + …
    let s = spec(Profile::zero(), Profile::SurfaceCoupling { surface: Surface::Hyperbolic });
    let v = validate_hypotheses(&s, HypothesisMode::Thblup);
    assert!(!v.pass);
    assert_eq!(v.failing.as_deref(), Some("vanishing order of g - 1"));
    assert!((vanishing_order(&s.g, 2) - 2.0).abs() < 0.01);
}

#[test]
fn high_order_bumps_pass_the_stronger_mode() {
    let s = spec(
        Profile::Bump { base: 0.0, amplitude: 0.2, width: 1.0, order: 7, axial: false },
        Profile::Bump { base: 1.0, amplitude: -1.0, width: 1.0, order: 9, axial: false },
    );
    let v = validate_hypotheses(&s, HypothesisMode::Stronger);
    assert!(v.pass, "{v:?}");
    assert!((vanishing_order(&s.g, 2) - 9.0).abs() < 0.01);
    assert!((vanishing_order(&s.v, 2) - 7.0).abs() < 0.01);
}

#[test]
fn quintic_surface_meets_only_the_weaker_hypothesis() {
    let q = Surface::Quintic { c0: 0.1 };
    let s = spec(Profile::SurfacePotential { surface: q.clone() }, Profile::SurfaceCoupling { surface: q });
    assert!(validate_hypotheses(&s, HypothesisMode::Thblup).pass);
    let v = validate_hypotheses(&s, HypothesisMode::Stronger);
    assert!(!v.pass);
    assert!((vanishing_order(&s.g, 2) - 4.0).abs() < 0.01);
}

#[test]
fn growing_profiles_fail_boundedness() {
    // on the bowl φ grows sublinearly, so g = r/φ is unbounded
    let s = spec(Profile::zero(), Profile::SurfaceCoupling { surface: Surface::Bowl { k: 2 } });
    let v = validate_hypotheses(&s, HypothesisMode::Thblup);
    assert_eq!(v.failing.as_deref(), Some("g bounded"), "{v:?}");
}

#[test]
fn axial_profiles_use_the_slowest_direction() {
    let p = Profile::Bump { base: 1.0, amplitude: 1.0, width: 1.0, order: 3, axial: true };
    assert!((vanishing_order(&p, 2) - 3.0).abs() < 0.01);
    assert_eq!(vanishing_order(&Profile::one(), 2), f64::INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn holder_forms_hold_for_random_fields(seed in any::<u64>(), bumps in 1usize..5) {
        let g = line();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(g, &mut rng, bumps);
        let r = field_ratios(g, &f).unwrap();
        for v in &r[..4] {
            prop_assert!(*v <= 1.0 + 1e-8);
        }
        prop_assert!(r.iter().all(|v| v.is_finite() && *v > 0.0));
    }
}
