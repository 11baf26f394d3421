use std::f64::consts::PI;

use inls_core::grid::{cplx, max_abs, sub, GridConfig, NormKind};
use inls_core::{Grid, C64};
use proptest::prelude::*;

fn line() -> Grid {
    Grid::new(GridConfig::line(256, 24.0)).unwrap()
}

fn gaussian(g: &Grid, width: f64) -> Vec<C64> {
    g.from_fn(|c| C64::new((-(c[0] * c[0] + c[1] * c[1]) / (2.0 * width * width)).exp(), 0.0))
}

#[test]
fn laplacian_of_constant_vanishes() {
    let g = line();
    let f = vec![C64::new(1.0, 0.0); g.len()];
    assert!(max_abs(&g.laplacian(&f)) < 1e-12);
}

#[test]
fn laplacian_of_lowest_sine_mode() {
    let g = line();
    let l = g.half_width();
    let f = g.from_fn(|c| C64::new((PI * c[0] / l).sin(), 0.0));
    let lap = g.laplacian(&f);
    let expected: Vec<C64> = f.iter().map(|v| -(PI / l).powi(2) * v).collect();
    assert!(max_abs(&sub(&lap, &expected)) < 1e-12);
}

#[test]
fn gaussian_mass_on_the_line() {
    let mut cfg = GridConfig::line(256, 12.0);
    cfg.truncation_tol = 1e-4;
    let g = Grid::new(cfg).unwrap();
    let f = gaussian(&g, 1.0);
    let m = g.l2_norm(&f).powi(2);
    assert!((m - PI.sqrt()).abs() < 1e-10, "{m}");
}

#[test]
fn gaussian_mass_radial_and_plane() {
    // ∫ e^{-|x|²} d²x = π
    let r = Grid::new(GridConfig::radial(128, 25.0)).unwrap();
    let p = Grid::new(GridConfig::plane(128, 24.0)).unwrap();
    for g in [&r, &p] {
        let f = gaussian(g, 1.0);
        assert!((g.l2_norm(&f).powi(2) - PI).abs() < 1e-10);
    }
}

#[test]
fn radial_laplacian_of_gaussian() {
    // Δ e^{-r²} = (4r² − 4) e^{-r²}
    let g = Grid::new(GridConfig::radial(256, 30.0)).unwrap();
    let f = g.from_fn(|c| C64::new((-c[0] * c[0]).exp(), 0.0));
    let lap = g.laplacian(&f);
    let expected = g.from_fn(|c| C64::new((4.0 * c[0] * c[0] - 4.0) * (-c[0] * c[0]).exp(), 0.0));
    assert!(max_abs(&sub(&lap, &expected)) < 1e-10);
    let dr = g.radial_derivative(&f).unwrap();
    let expected = g.from_fn(|c| C64::new(-2.0 * c[0] * (-c[0] * c[0]).exp(), 0.0));
    assert!(max_abs(&sub(&dr, &expected)) < 1e-10);
}

#[test]
fn plane_gradient_and_dilation() {
    let g = Grid::new(GridConfig::plane(256, 24.0)).unwrap();
    let f = g.from_fn(|c| C64::new((-(c[0] * c[0] + 2.0 * c[1] * c[1])).exp(), 0.0));
    let dil = g.dilation(&f);
    let expected = g.from_fn(|c| {
        let e = (-(c[0] * c[0] + 2.0 * c[1] * c[1])).exp();
        C64::new((-2.0 * c[0] * c[0] - 4.0 * c[1] * c[1]) * e, 0.0)
    });
    let e = max_abs(&sub(&dil, &expected));
    assert!(e < 1e-9, "{e}");
}

#[test]
fn norms_of_zero_and_negative_orders() {
    let g = line();
    let z = g.zeros();
    for kind in [NormKind::L2, NormKind::Hs(1.5), NormKind::Moment(2.0), NormKind::Sigma(1.0)] {
        assert_eq!(g.norm(&z, kind).unwrap(), 0.0);
    }
    assert!(g.norm(&z, NormKind::Hs(-1.0)).is_err());
    assert!(g.norm(&z, NormKind::Moment(-0.5)).is_err());
}

#[test]
fn first_moment_interpolation_for_gaussian() {
    let g = line();
    let f = gaussian(&g, 1.0);
    let lhs = g.moment_norm(&f, 1.0);
    let rhs = g.moment_norm(&f, 3.0).powf(1.0 / 3.0) * g.l2_norm(&f).powf(2.0 / 3.0);
    assert!(lhs <= rhs);
}

#[test]
fn pairing_basic_identities() {
    let g = line();
    let q = gaussian(&g, 1.3);
    let iq: Vec<C64> = q.iter().map(|v| C64::i() * v).collect();
    assert!(g.pairing(&iq, &q).abs() < 1e-15);
    assert!((g.pairing(&q, &q) - g.l2_norm(&q).powi(2)).abs() < 1e-14);
}

#[test]
fn resampling_dilates_and_shifts() {
    let g = line();
    let f = gaussian(&g, 1.0);
    let r = g.resample_affine(&f, 0.5, [0.7, 0.0]).unwrap();
    let expected = g.from_fn(|c| {
        let x = 0.5 * c[0] + 0.7;
        C64::new((-x * x / 2.0).exp(), 0.0)
    });
    assert!(max_abs(&sub(&r, &expected)) < 1e-10);

    let rg = Grid::new(GridConfig::radial(128, 25.0)).unwrap();
    let f = gaussian(&rg, 1.0);
    let r = rg.resample_affine(&f, 1.3, [0.0, 0.0]).unwrap();
    let expected = rg.from_fn(|c| C64::new((-(1.3 * c[0]).powi(2) / 2.0).exp(), 0.0));
    assert!(max_abs(&sub(&r, &expected)) < 1e-10);
}

#[test]
fn plane_resampling_is_separable_interpolation() {
    let g = Grid::new(GridConfig::plane(128, 24.0)).unwrap();
    let f = g.from_fn(|c| C64::new((-(c[0] * c[0] + c[1] * c[1]) / 4.0).exp(), 0.0));
    let r = g.resample_affine(&f, 0.8, [0.3, -0.2]).unwrap();
    let expected = g.from_fn(|c| {
        let (x, y) = (0.8 * c[0] + 0.3, 0.8 * c[1] - 0.2);
        C64::new((-(x * x + y * y) / 4.0).exp(), 0.0)
    });
    let e = max_abs(&sub(&r, &expected));
    assert!(e < 1e-9, "{e}");
}

fn random_field(g: &Grid, coeffs: &[(f64, f64, f64, f64)]) -> Vec<C64> {
    g.from_fn(|c| {
        coeffs
            .iter()
            .map(|&(a, b, x0, w)| {
                let d = (c[0] - x0).powi(2) + c[1] * c[1];
                C64::new(a, b) * (-d / (w * w)).exp()
            })
            .sum()
    })
}

fn coeff_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -4.0..4.0f64, 0.6..2.5f64), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_holds(c in coeff_strategy()) {
        for g in [line(), Grid::new(GridConfig::radial(96, 25.0)).unwrap()] {
            let cc: Vec<_> = if g.geometry() == inls_core::Geometry::Radial {
                c.iter().map(|t| (t.0, t.1, 0.0, t.3)).collect()
            } else { c.clone() };
            let f = random_field(&g, &cc);
            let a = g.l2_norm(&f);
            let b = g.spectral_l2_norm(&f);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn laplacian_is_linear(c1 in coeff_strategy(), c2 in coeff_strategy(), al in -2.0..2.0f64, be in -2.0..2.0f64) {
        let g = line();
        let f = random_field(&g, &c1);
        let h = random_field(&g, &c2);
        let comb: Vec<C64> = f.iter().zip(&h).map(|(a, b)| al * a + be * b).collect();
        let lhs = g.laplacian(&comb);
        let lf = g.laplacian(&f);
        let lh = g.laplacian(&h);
        let rhs: Vec<C64> = lf.iter().zip(&lh).map(|(a, b)| al * a + be * b).collect();
        let scale = 1.0 + g.l2_norm(&lhs);
        prop_assert!(g.l2_norm(&sub(&lhs, &rhs)) < 1e-12 * scale);
    }

    #[test]
    fn pairing_symmetric_and_phase_invariant(c1 in coeff_strategy(), c2 in coeff_strategy()) {
        let g = line();
        let f = random_field(&g, &c1);
        let h = random_field(&g, &c2);
        let fi: Vec<C64> = f.iter().map(|v| C64::i() * v).collect();
        let hi: Vec<C64> = h.iter().map(|v| C64::i() * v).collect();
        let p = g.pairing(&f, &h);
        prop_assert!((p - g.pairing(&h, &f)).abs() < 1e-13);
        prop_assert!((p - g.pairing(&fi, &hi)).abs() < 1e-13);
    }

    #[test]
    fn norm_triangle_inequality(c1 in coeff_strategy(), c2 in coeff_strategy(), s in 0.0..3.0f64) {
        let g = line();
        let f = random_field(&g, &c1);
        let h = random_field(&g, &c2);
        let sum: Vec<C64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
        let r = g.norm_report(&sum, s).unwrap();
        let a = g.norm_report(&f, s).unwrap();
        let b = g.norm_report(&h, s).unwrap();
        prop_assert!(r.h_s <= a.h_s + b.h_s + 1e-12);
        prop_assert!(r.weighted_moment <= a.weighted_moment + b.weighted_moment + 1e-12);
        prop_assert!(r.l2 >= 0.0 && r.sigma_s.is_finite());
    }
}

#[test]
fn real_fields_stay_real_under_multipliers() {
    let g = line();
    let f = cplx(&g.real_from_fn(|c| (-c[0] * c[0]).exp() * (1.0 + c[0])));
    let out = g.resolvent(&f);
    assert!(out.iter().all(|v| v.im.abs() < 1e-14));
}
