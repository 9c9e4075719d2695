#![allow(dead_code)]

use std::sync::Arc;

use anisocahn::potential::heteroclinic;
use anisocahn::{Domain, EnergyParams, Grid, IntegrandSpec, PotentialSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid(dim: usize, n: usize) -> Arc<Grid> {
    Grid::unit(dim, n).unwrap().shared()
}

pub fn params(g: &Arc<Grid>, spec: IntegrandSpec, eps: f64, delta: f64) -> EnergyParams<f64> {
    EnergyParams::new(Domain::flat(g.clone()), PotentialSpec::quartic(), spec, eps, delta).unwrap()
}

pub fn diag41() -> IntegrandSpec {
    IntegrandSpec::diagonal(&[4.0, 1.0]).unwrap()
}

/// Two heteroclinic transitions across `axis` at `1/4` and `3/4` of the period,
/// scaled by the interface width `eps * f_nu`.
pub fn stripe_pair(g: &Arc<Grid>, axis: usize, eps: f64, f_nu: f64) -> ScalarField<f64> {
    let prof = heteroclinic(&PotentialSpec::quartic(), 40.0, 8001).unwrap();
    let l = g.lengths()[axis];
    ScalarField::from_fn(g, |x| {
        let s = x[axis];
        let d = (s - 0.25 * l).abs().min((s - 0.75 * l).abs()) * if s > 0.25 * l && s < 0.75 * l { 1.0 } else { -1.0 };
        prof.eval_f64(d / (eps * f_nu))
    })
    .unwrap()
}

pub fn random_field(g: &Arc<Grid>, seed: u64, amp: f64) -> ScalarField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_vec(g, (0..g.len()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn smooth_random_field(g: &Arc<Grid>, seed: u64) -> ScalarField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<([f64; 3], f64, f64)> = (0..6)
        .map(|_| {
            let mut k = [0.0; 3];
            for c in k.iter_mut().take(g.dim()) {
                *c = rng.gen_range(-3i32..=3) as f64;
            }
            (k, rng.gen_range(-0.4..0.4), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    ScalarField::from_fn(g, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| a * (std::f64::consts::TAU * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]) + ph).cos())
            .sum()
    })
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
