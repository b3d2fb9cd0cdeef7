#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netctl_core::network::{select_drivers, shift_spectrum, DriverConfig, NetworkSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Dense Gaussian coupling scaled by `1/√n`, optionally shifted to a target
/// `λ₁`, with `p` randomly chosen controllable drivers.
pub fn random_pair(n: usize, p: usize, seed: u64, lambda1: Option<f64>) -> (NetworkSystem, DriverConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(n, n, &mut rng) / (n as f64).sqrt();
    let mut sys = NetworkSystem::from_matrix(a).unwrap();
    if let Some(target) = lambda1 {
        sys = shift_spectrum(&sys, target).unwrap();
    }
    let drivers = select_drivers(&sys, p, seed ^ 0x5eed).unwrap();
    (sys, drivers)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
