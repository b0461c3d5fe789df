//! Shared generators and comparison helpers for the integration suites.

use rand::rngs::StdRng;
use rand::Rng;

use uvar::{MomentEntry, MomentSet, QpInstance};

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1.0_f64.max(a.abs()).max(b.abs())
}

// Not every suite uses every helper.
#[allow(dead_code)]
pub fn moment_set(entries: &[(&str, f64, f64)]) -> MomentSet {
    MomentSet::build(
        entries
            .iter()
            .map(|&(label, mean, kappa)| MomentEntry::new(label, mean, kappa).unwrap())
            .collect(),
    )
    .unwrap()
}

/// A probabilistic instance: means uniform in `[-10, 10]`, variances
/// uniform in `(0, 10]`, entries left in random (unsorted) input order.
pub fn random_moment_set(rng: &mut StdRng, k: usize) -> MomentSet {
    let entries = (0..k)
        .map(|i| {
            let mean = rng.random_range(-10.0..10.0);
            let variance = 10.0 - rng.random_range(0.0..10.0);
            MomentEntry::new(format!("m{i}"), mean, variance + mean * mean).unwrap()
        })
        .collect();
    MomentSet::build(entries).unwrap()
}

/// A quadratic-program instance with means in `[-10, 10]` and variance
/// margins `kappa - mu^2` uniform in `[-5, 5]`, so negative margins are
/// common.
pub fn random_qp_instance(rng: &mut StdRng, k: usize) -> QpInstance {
    let mut mu = Vec::with_capacity(k);
    let mut kappa = Vec::with_capacity(k);
    for _ in 0..k {
        let mean: f64 = rng.random_range(-10.0..10.0);
        let margin: f64 = rng.random_range(-5.0..5.0);
        mu.push(mean);
        kappa.push(mean * mean + margin);
    }
    QpInstance::new(mu, kappa).unwrap()
}

/// Uniform sample from the unit simplex (normalized unit exponentials).
pub fn random_simplex(rng: &mut StdRng, k: usize) -> Vec<f64> {
    loop {
        let mut draws: Vec<f64> = (0..k)
            .map(|_| -(1.0 - rng.random_range(0.0..1.0_f64)).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            for d in &mut draws {
                *d /= total;
            }
            return draws;
        }
    }
}
