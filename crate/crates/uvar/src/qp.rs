//! Exact solver for `max over the unit simplex of
//! lambda'kappa - (lambda'mu)^2` with arbitrary real `kappa`.
//!
//! When every `kappa_i - mu_i^2` is positive the problem literally is an
//! upper variance and [`crate::exact`] solves it directly. Otherwise the
//! objective is translated: with `C = min_i (kappa_i - mu_i^2)`, replacing
//! `kappa` by `kappa - C + 1` adds the constant `1 - C` to the objective
//! everywhere on the simplex (weights sum to one), so the maximizer is
//! unchanged and the value shifts back by subtraction.

use thiserror::Error;

use crate::exact::{self, ExactError};
use crate::model::{MixtureWeights, MomentEntry, MomentSet, Witness};

/// The shift path engages whenever the smallest `kappa_i - mu_i^2` is at
/// or below this margin, keeping the direct path clear of the exact
/// solver's negative-variance tolerance.
pub const SHIFT_TRIGGER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("no coefficients supplied")]
    EmptyInput,
    #[error("mu has {mu_len} entries but kappa has {kappa_len}")]
    LengthMismatch { mu_len: usize, kappa_len: usize },
    #[error("non-finite coefficient at index {index}")]
    NonFiniteValue { index: usize },
    #[error(transparent)]
    Solver(#[from] ExactError),
}

/// Paired coefficient vectors for the simplex program. No ordering is
/// assumed; results come back in this input order.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    mu: Vec<f64>,
    kappa: Vec<f64>,
}

impl QpInstance {
    pub fn new(mu: Vec<f64>, kappa: Vec<f64>) -> Result<Self, QpError> {
        if mu.len() != kappa.len() {
            return Err(QpError::LengthMismatch {
                mu_len: mu.len(),
                kappa_len: kappa.len(),
            });
        }
        if mu.is_empty() {
            return Err(QpError::EmptyInput);
        }
        for index in 0..mu.len() {
            if !mu[index].is_finite() || !kappa[index].is_finite() {
                return Err(QpError::NonFiniteValue { index });
            }
        }
        Ok(Self { mu, kappa })
    }

    /// The instance whose coefficients are a moment set's means and second
    /// moments, in the set's sorted order.
    pub fn from_moment_set(ms: &MomentSet) -> Self {
        Self {
            mu: ms.entries().iter().map(|e| e.mean()).collect(),
            kappa: ms.entries().iter().map(|e| e.second_moment()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// `lambda'kappa - (lambda'mu)^2` for any weight vector of matching
    /// length.
    pub fn objective(&self, weights: &[f64]) -> f64 {
        assert_eq!(weights.len(), self.len());
        let mut mean = 0.0;
        let mut kappa = 0.0;
        for ((&w, &m), &k) in weights.iter().zip(&self.mu).zip(&self.kappa) {
            mean += w * m;
            kappa += w * k;
        }
        kappa - mean * mean
    }
}

/// The simplex maximizer and its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Optimal objective value.
    pub value: f64,
    /// Optimal weights, in the instance's input index order. At most two
    /// are nonzero.
    pub lambda_star: MixtureWeights,
    /// Attaining candidate, in input indices (pair ordered ascending).
    pub witness: Witness,
    /// The constant added to every `kappa_i` before solving (`1 - C` when
    /// the shift path ran, otherwise zero).
    pub shift_applied: f64,
}

/// Solves the instance exactly.
pub fn solve(inst: &QpInstance) -> Result<QpSolution, QpError> {
    let k = inst.len();
    let margin = (0..k)
        .map(|i| inst.kappa[i] - inst.mu[i] * inst.mu[i])
        .fold(f64::INFINITY, f64::min);

    let (shift_applied, kappa) = if margin <= SHIFT_TRIGGER {
        let shift = 1.0 - margin;
        let shifted: Vec<f64> = inst.kappa.iter().map(|&x| x + shift).collect();
        if let Some(index) = shifted.iter().position(|x| !x.is_finite()) {
            return Err(QpError::NonFiniteValue { index });
        }
        (shift, shifted)
    } else {
        (0.0, inst.kappa.clone())
    };

    let entries: Vec<MomentEntry> = (0..k)
        .map(|i| MomentEntry::new(i.to_string(), inst.mu[i], kappa[i]))
        .collect::<Result<_, _>>()
        .expect("validated coefficients build valid entries");
    let ms = MomentSet::build(entries).expect("synthetic labels are unique");

    let report = exact::upper_variance(&ms)?;

    let weights = ms.to_input_order(report.lambda_star.weights());
    let lambda_star = MixtureWeights::new(weights).map_err(|err| {
        QpError::Solver(ExactError::InvariantViolation {
            detail: format!("reordered weights failed simplex validation: {err}"),
        })
    })?;
    let witness = match report.witness {
        Witness::Single(s) => Witness::Single(ms.input_position(s)),
        Witness::Pair(s, t) => {
            let (a, b) = (ms.input_position(s), ms.input_position(t));
            Witness::Pair(a.min(b), a.max(b))
        }
    };

    Ok(QpSolution {
        value: report.upper_variance - shift_applied,
        lambda_star,
        witness,
        shift_applied,
    })
}
