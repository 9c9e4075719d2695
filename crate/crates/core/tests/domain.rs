mod common;

use anisocahn::domain::closing_length;
use anisocahn::{ConformalMetric, Domain, ScalarField, VectorField};
use common::{grid, random_field, smooth_random_field};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn random_vector(g: &std::sync::Arc<anisocahn::Grid>, seed: u64) -> VectorField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorField::from_vec(g, (0..g.len() * g.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn adjointness_residual(d: &Domain<f64>, u: &ScalarField<f64>, x: &VectorField<f64>) -> f64 {
    let gu = d.grad(u);
    let a = d.inner_vec(&gu, x);
    let b = d.inner(&u.data, &d.div(x).data);
    let scale = d.inner_vec(&gu, &gu).sqrt() * d.inner_vec(x, x).sqrt();
    (a + b).abs() / scale
}

#[test]
fn grad_div_adjointness_2d_and_3d() {
    for (dim, n) in [(2, 128), (3, 48)] {
        let g = grid(dim, n);
        let flat = Domain::flat(g.clone());
        let phi = smooth_random_field(&g, 99).map(|v| 0.3 * v);
        let curved = Domain::with_metric(g.clone(), ConformalMetric::from_phi(&phi).unwrap()).unwrap();
        for pair in 0..20 {
            let u = random_field(&g, 2 * pair, 1.0);
            let x = random_vector(&g, 2 * pair + 1);
            assert!(adjointness_residual(&flat, &u, &x) <= 1e-12);
            assert!(adjointness_residual(&curved, &u, &x) <= 1e-12);
        }
    }
}

#[test]
fn centred_stencils_are_second_order() {
    let err = |n: usize| {
        let g = grid(2, n);
        let d = Domain::flat(g.clone());
        let u = ScalarField::<f64>::from_fn(&g, |x| (TAU * x[0]).sin()).unwrap();
        let gu = d.grad(&u);
        let lap = d.div(&gu);
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for k in 0..g.len() {
            let x = g.position(k);
            e1 = e1.max((gu.at(k)[0] - TAU * (TAU * x[0]).cos()).abs());
            e2 = e2.max((lap.data[k] + TAU * TAU * (TAU * x[0]).sin()).abs());
            assert_eq!(gu.at(k)[1], 0.0);
        }
        (e1, e2)
    };
    let (a, b) = (err(64), err(128));
    assert!((a.0 / b.0).log2() > 1.9 && (a.1 / b.1).log2() > 1.9);
    let (c, _) = err(256);
    assert!(c < 4.0 * TAU * TAU * TAU / 6.0 / 256.0 / 256.0);
}

#[test]
fn constants_have_zero_derivatives() {
    let g = grid(3, 8);
    let d = Domain::flat(g.clone());
    let gu = d.grad(&ScalarField::constant(&g, 2.5));
    assert!((0..g.len()).all(|k| gu.at(k).iter().all(|&c| c == 0.0)));
    let x = VectorField::from_fn(&g, |_| [1.0, -2.0, 0.5]).unwrap();
    assert!(d.div(&x).data.iter().all(|&c| c == 0.0));
}

#[test]
fn non_periodic_data_is_rejected() {
    let g = grid(2, 16);
    assert!(ScalarField::<f64>::from_fn(&g, |x| x[0]).is_err());
    assert!(ScalarField::<f64>::from_vec(&g, vec![0.0; 10]).is_err());
    assert!(ScalarField::<f64>::from_vec(&g, vec![f64::NAN; g.len()]).is_err());
}

#[test]
fn integrals_and_ball_masses() {
    let g = grid(2, 256);
    let d = Domain::<f64>::flat(g.clone());
    let one = ScalarField::constant(&g, 1.0);
    assert!((d.integrate(&one) - 1.0).abs() < 1e-14);
    for r in [0.1, 0.2, 0.3] {
        let m = d.ball_mass(&one, &[0.37, 0.61], r).unwrap();
        assert!((m - PI * r * r).abs() < 4.0 * TAU * r / 256.0 / 256.0f64.sqrt());
    }
    assert!(d.ball_mass(&one, &[0.0, 0.0], 0.6).is_err());
}

#[test]
fn line_slice_reproduces_the_profile() {
    let g = grid(2, 128);
    let d = Domain::flat(g.clone());
    let u = ScalarField::<f64>::from_fn(&g, |x| (TAU * x[1]).cos()).unwrap();
    let samples = d.line_slice(&u, &[0.3, 0.0], &[0.0, 1.0], 400).unwrap();
    assert_eq!(samples.len(), 400);
    let h = 1.0 / 128.0;
    for (t, v) in samples {
        assert!((v - (TAU * t).cos()).abs() <= TAU * TAU * h * h / 8.0 + 1e-12);
    }
    let diag = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
    assert!((closing_length(&g, &diag).unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn operators_commute_with_translations(seed in 0u64..1000, sx in -20isize..20, sy in -20isize..20) {
        let g = grid(2, 32);
        let d = Domain::flat(g.clone());
        let u = random_field(&g, seed, 1.0);
        let shift = [sx, sy, 0];
        let a = d.div(&d.grad(&u.translated(shift)));
        let b = d.div(&d.grad(&u)).translated(shift);
        prop_assert_eq!(a.data, b.data);
        let e = d.integrate(&u.translated(shift)) - d.integrate(&u);
        prop_assert!(e.abs() < 1e-13);
    }
}
