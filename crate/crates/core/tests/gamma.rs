mod common;

use std::f64::consts::{PI, TAU};

use anisocahn::domain::interpolate;
use anisocahn::gamma::*;
use anisocahn::geomlimits::raw_energy;
use anisocahn::integrand::IntegrandSpec;
use anisocahn::potential::{compute_cw, heteroclinic};
use anisocahn::{Grid, PotentialSpec, ScalarField};
use common::{diag41, grid, params, random_field, rel, smooth_random_field};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn cw() -> f64 {
    compute_cw(&PotentialSpec::quartic()).unwrap()
}

/// Periodic trapezoid rule, spectrally accurate for smooth periodic integrands.
fn periodic_quadrature(f: impl Fn(f64) -> f64) -> f64 {
    let m = 20_000;
    (0..m).map(|k| f(TAU * k as f64 / m as f64)).sum::<f64>() * TAU / m as f64
}

#[test]
fn h_transform_of_constants_and_order() {
    let g = grid(2, 8);
    let q = PotentialSpec::quartic();
    let one = h_transform(&ScalarField::<f64>::constant(&g, 1.0), &q).unwrap();
    // int_0^1 sqrt(2) (1 - s^2) / 2 ds
    assert!(one.data.iter().all(|&v| (v - 2f64.sqrt() / 3.0).abs() < 1e-12));
    assert!((one.data[0] - cw() / 2.0).abs() < 1e-12);
    let zero = h_transform(&ScalarField::<f64>::constant(&g, 0.0), &q).unwrap();
    assert!(zero.data.iter().all(|&v| v == 0.0));
    let cos = PotentialSpec::cosine();
    let c = h_transform(&ScalarField::<f64>::constant(&g, 1.0), &cos).unwrap();
    assert!(rel(c.data[0], compute_cw(&cos).unwrap() / 2.0) < 1e-10);
}

#[test]
fn perimeters_against_closed_forms() {
    let g = Grid::unit(2, 16).unwrap();
    let iso = IntegrandSpec::isotropic(2);
    // One unit-length line per offset, F(e_2) = 1 and F(e_1) = 2.
    let stripe = ShapeSpec::stripe(1, &[0.25, 0.75]);
    assert!((aniso_perimeter(&stripe, &diag41(), &g).unwrap() - 2.0).abs() < 1e-12);
    let vertical = ShapeSpec::stripe(0, &[0.25, 0.75]);
    assert!((aniso_perimeter(&vertical, &diag41(), &g).unwrap() - 4.0).abs() < 1e-12);
    let c = ShapeSpec::circle([0.5, 0.5], 0.25);
    assert!((aniso_perimeter(&c, &iso, &g).unwrap() - PI / 2.0).abs() < 1e-8);
    let exact = 0.25 * periodic_quadrature(|t| (4.0 * t.cos().powi(2) + t.sin().powi(2)).sqrt());
    assert!((exact - 2.4221).abs() < 1e-4);
    assert!((aniso_perimeter(&c, &diag41(), &g).unwrap() - exact).abs() < 1e-8);

    let e = ShapeSpec::Ellipse {
        center: vec![0.5, 0.5],
        axes: [0.3, 0.1],
    };
    let exact = periodic_quadrature(|t| {
        // Tangent (-a sin, b cos); F applied to the normal (b cos, a sin) times |tangent| / |normal| = 1.
        let (a, b) = (0.3, 0.1);
        (4.0 * (b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt()
    });
    assert!((aniso_perimeter(&e, &diag41(), &g).unwrap() - exact).abs() < 1e-8);
}

#[test]
fn bv_mass_of_smoothed_indicators() {
    // Stripe {1/4 < y < 3/4} scaled by c_W, boundary F(e_2) = 1 twice.
    let g = Grid::new(&[8, 4096], &[1.0, 1.0]).unwrap().shared();
    let p = params(&g, diag41(), 0.05, 0.0);
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&s| {
            let w = ScalarField::from_fn(&g, |x| {
                let d = 0.25 - (x[1] - 0.5).abs();
                cw() * 0.5 * (1.0 + (d / s).tanh())
            })
            .unwrap();
            (bv_mass_aniso(&w, &p) - 2.0 * cw()).abs()
        })
        .collect();
    assert!(errs[2] < errs[0] && errs[2] < 1e-6, "{errs:?}");

    let g = grid(2, 256);
    let p = params(&g, IntegrandSpec::isotropic(2), 0.05, 0.0);
    let r = 0.25;
    let w = ScalarField::from_fn(&g, |x| {
        let d = r - ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
        cw() * 0.5 * (1.0 + (d / (2.0 / 256.0)).tanh())
    })
    .unwrap();
    assert!(rel(bv_mass_aniso(&w, &p), cw() * TAU * r) < 0.02);
}

#[test]
fn stripe_recovery_is_the_truncated_profile() {
    let eps = 1.0 / 32.0;
    let gamma = 3.0;
    let g = grid(2, 256);
    let p = params(&g, diag41(), eps, 0.0);
    let u = recovery_field(&ShapeSpec::stripe(1, &[0.25, 0.75]), &p, gamma).unwrap();
    let prof = heteroclinic(&PotentialSpec::quartic(), 40.0, 8001).unwrap();
    for k in 0..g.len() {
        let y = g.position(k)[1];
        let d = (y - 0.25).abs().min((y - 0.75).abs());
        // F(e_2) = 1 for diag(4, 1).
        let expect = prof.truncated(gamma, d / eps).abs();
        assert!((u.data[k].abs() - expect).abs() < 1e-12);
    }
    // +1 outside the shape; the stripe's exterior contains y = 0.
    let below = u.data[g.index([0, 0, 0])];
    let above = u.data[g.index([0, 128, 0])];
    assert!(below * above < 0.0);
}

#[test]
fn circle_recovery_saturates_outside_the_band() {
    let eps = 1.0 / 64.0;
    let gamma = 6.0;
    let g = grid(2, 256);
    let p = params(&g, IntegrandSpec::isotropic(2), eps, 0.0);
    let r = 0.25;
    let u = recovery_field(&ShapeSpec::circle([0.5, 0.5], r), &p, gamma).unwrap();
    for k in 0..g.len() {
        let x = g.position(k);
        let d = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt() - r;
        if d.abs() >= 2.0 * gamma * eps {
            assert_eq!(u.data[k], d.signum());
        }
    }
}

#[test]
fn recovery_energy_approaches_the_perimeter() {
    let g = grid(2, 256);
    let eps = 1.0 / 128.0;
    let p = params(&g, IntegrandSpec::isotropic(2), eps, 0.0);
    let shape = ShapeSpec::circle([0.5, 0.5], 0.25);
    let gamma = GammaRule::default().gamma(eps).min(BAND_FILL * shape.reach(&g) / (2.0 * eps));
    let u = recovery_field(&shape, &p, gamma).unwrap();
    let target = cw() * aniso_perimeter(&shape, p.integrand(), &g).unwrap();
    assert!(rel(raw_energy(&u, &p), target) <= 0.05);
}

#[test]
fn recovery_converges_pointwise() {
    let shape = ShapeSpec::circle([0.5, 0.5], 0.3);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<([f64; 2], f64, f64)> = (0..1000)
        .map(|_| {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let d = ((x[0] - 0.5f64).powi(2) + (x[1] - 0.5f64).powi(2)).sqrt() - 0.3;
            (x, d.signum(), d)
        })
        .collect();
    let g = grid(2, 256);
    let gamma = 1.5;
    let mut prev = f64::INFINITY;
    for eps in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let p = params(&g, IntegrandSpec::isotropic(2), eps, 0.0);
        let u = recovery_field(&shape, &p, gamma).unwrap();
        let err: Vec<f64> = pts.iter().map(|(x, chi, _)| (interpolate(&u, &x[..]) - chi).abs()).collect();
        let mean = err.iter().sum::<f64>() / err.len() as f64;
        assert!(mean < prev, "{eps}: {mean} >= {prev}");
        prev = mean;
        // Interpolation reaches at most one cell diagonal into the band.
        let reach = 2.0 * gamma * eps + 2f64.sqrt() / 256.0;
        for ((_, _, d), e) in pts.iter().zip(&err) {
            if d.abs() > reach {
                assert!(*e < 1e-12);
            }
        }
    }
}

#[test]
fn stripe_sweep_closes_the_gap() {
    let g = Grid::new(&[8, 16384], &[1.0, 1.0]).unwrap().shared();
    let p = params(&g, diag41(), 0.1, 0.0);
    let rows = gamma_sweep(&ShapeSpec::stripe(1, &[0.25, 0.75]), &p, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0], GammaRule::default()).unwrap();
    assert!(rows.last().unwrap().gap <= 0.01);
    for r in &rows {
        assert!(r.chain_rule_mass <= r.energy);
    }
    assert!(gamma_sweep(&ShapeSpec::stripe(1, &[0.5]), &p, &[0.1, 0.2], GammaRule::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn h_is_monotone(seed in 0u64..1000, amp in 0.1f64..2.0) {
        let g = grid(2, 16);
        let u = random_field(&g, seed, amp);
        let bump = random_field(&g, seed + 1, 1.0).map(|v| v.abs());
        let v = ScalarField::from_vec(&g, u.data.iter().zip(&bump.data).map(|(a, b)| a + b).collect()).unwrap();
        let q = PotentialSpec::quartic();
        let (hu, hv) = (h_transform(&u, &q).unwrap(), h_transform(&v, &q).unwrap());
        prop_assert!(hu.data.iter().zip(&hv.data).all(|(a, b)| a <= b));
    }

    #[test]
    fn perimeter_is_translation_invariant(dx in -1.0f64..1.0, dy in -1.0f64..1.0, r in 0.05f64..0.45) {
        let g = Grid::unit(2, 16).unwrap();
        let base = aniso_perimeter(&ShapeSpec::circle([0.5, 0.5], r), &diag41(), &g).unwrap();
        let moved = aniso_perimeter(&ShapeSpec::circle([0.5 + dx, 0.5 + dy], r), &diag41(), &g).unwrap();
        prop_assert!((base - moved).abs() <= 1e-8);
        let e = ShapeSpec::Ellipse { center: vec![0.5 + dx, 0.5 + dy], axes: [r, r] };
        prop_assert!((aniso_perimeter(&e, &diag41(), &g).unwrap() - base).abs() <= 1e-8);
        let s1 = aniso_perimeter(&ShapeSpec::stripe(0, &[0.1, 0.6]), &diag41(), &g).unwrap();
        let s2 = aniso_perimeter(&ShapeSpec::stripe(0, &[(0.6 + dx).rem_euclid(1.0), (0.1 + dx).rem_euclid(1.0)]), &diag41(), &g).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-8);
    }

    #[test]
    fn chain_rule_mass_is_below_the_energy(seed in 0u64..1000, eps in 0.02f64..0.3, modulated in any::<bool>()) {
        let g = grid(2, 32);
        let spec = if modulated { diag41().with_modulation(0.25, vec![1.0, 1.0]).unwrap() } else { diag41() };
        let p = params(&g, spec, eps, 0.0);
        let u = smooth_random_field(&g, seed);
        prop_assert!(chain_rule_mass(&u, &p) <= raw_energy(&u, &p) * (1.0 + 1e-12));
    }
}
