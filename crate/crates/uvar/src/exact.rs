//! Closed-form solver for the upper and lower variance under finitely
//! many measures.
//!
//! For each measure, `f_i(mu) = mu^2 - 2*mean_i*mu + kappa_i` is the
//! expected squared deviation from center `mu`; the upper variance is the
//! minimum over the mean interval of `max_i f_i`. That minimax is attained
//! either at some parabola's vertex or at the crossing of two parabolas,
//! so the whole problem reduces to scanning the `K` vertex values and the
//! `K*(K-1)/2` pairwise crossings, each clamped into its pair's mean gap.
//! The scan also yields the optimal center `mu_star` and the worst-case
//! mixture `lambda_star`.

use thiserror::Error;

use crate::model::{means_equal, MixtureWeights, MomentSet, VarianceReport, Witness};

/// Relative tolerance on `kappa - mean^2`: entries this far below zero are
/// treated as zero-variance (estimation round-off); anything further below
/// is rejected.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-12;

/// Candidates within `TIE_TOL * max(1, upper_variance)` of the maximum are
/// considered tied; the witness tie-break runs over them.
const TIE_TOL: f64 = 1e-12;

/// How far outside `[0, 1]` a computed mixture weight may land before it is
/// an internal error rather than float round-off.
const LAMBDA_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("`{label}` has negative variance (second moment below squared mean)")]
    NegativeVariance { label: String },
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("internal invariant violated: {detail}")]
    InvariantViolation { detail: String },
}

/// The squared-deviation parabola of one measure,
/// `f(mu) = mu^2 - 2*mean*mu + second_moment`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parabola {
    index: usize,
    mean: f64,
    second_moment: f64,
}

impl Parabola {
    pub fn from_set(ms: &MomentSet, index: usize) -> Result<Self, ExactError> {
        if index >= ms.len() {
            return Err(ExactError::IndexOutOfRange {
                index,
                len: ms.len(),
            });
        }
        let entry = ms.entry(index);
        Ok(Self {
            index,
            mean: entry.mean(),
            second_moment: entry.second_moment(),
        })
    }

    /// Sorted position of the measure this parabola belongs to.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn eval(&self, mu: f64) -> f64 {
        mu * mu - 2.0 * self.mean * mu + self.second_moment
    }

    /// The vertex sits at the measure's mean...
    pub fn min_point(&self) -> f64 {
        self.mean
    }

    /// ...and its value there is the measure's variance.
    pub fn min_value(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }
}

/// One pairwise candidate of the closed form: the crossing of parabolas
/// `i` and `j` clamped into `[mean_i, mean_j]`, and the envelope value
/// there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCandidate {
    /// Sorted position with the smaller mean.
    pub i: usize,
    /// Sorted position with the larger mean, `i < j`.
    pub j: usize,
    /// Clamped crossing point, always inside `[mean_i, mean_j]`.
    pub mu_ij: f64,
    /// `mu_ij^2 - 2*mean_i*mu_ij + kappa_i`.
    pub value: f64,
}

/// Computes the pairwise candidate for sorted positions `i < j`.
///
/// With distinct means the raw crossing is
/// `(kappa_j - kappa_i) / (2*(mean_j - mean_i))`, clamped into the mean
/// gap; means equal within tolerance degenerate to `mu_ij = mean_i`.
pub fn pair_candidate(ms: &MomentSet, i: usize, j: usize) -> Result<PairCandidate, ExactError> {
    let len = ms.len();
    if i >= len {
        return Err(ExactError::IndexOutOfRange { index: i, len });
    }
    if j >= len {
        return Err(ExactError::IndexOutOfRange { index: j, len });
    }
    if i >= j {
        return Err(ExactError::IndexOutOfRange { index: i, len: j });
    }
    Ok(pair_candidate_unchecked(ms, i, j))
}

fn pair_candidate_unchecked(ms: &MomentSet, i: usize, j: usize) -> PairCandidate {
    let (lo, hi) = (ms.entry(i), ms.entry(j));
    let (mean_i, kappa_i) = (lo.mean(), lo.second_moment());
    let (mean_j, kappa_j) = (hi.mean(), hi.second_moment());

    let mu_ij = if means_equal(mean_i, mean_j) {
        mean_i
    } else {
        let crossing = (kappa_j - kappa_i) / (2.0 * (mean_j - mean_i));
        crossing.max(mean_i).min(mean_j)
    };
    // Evaluating f_i at a clamp to mean_i reproduces the single-measure
    // value kappa_i - mean_i^2 bit for bit, so clamped pairs tie their
    // singles instead of floating above them.
    let value = mu_ij * mu_ij - 2.0 * mean_i * mu_ij + kappa_i;
    PairCandidate {
        i,
        j,
        mu_ij,
        value,
    }
}

/// Per-entry variances with the negative-variance policy applied: values in
/// `[-tol, 0)` clamp to zero, values below `-tol` are an error.
fn checked_variances(ms: &MomentSet) -> Result<Vec<f64>, ExactError> {
    ms.entries()
        .iter()
        .map(|entry| {
            let variance = entry.variance();
            if variance >= 0.0 {
                Ok(variance)
            } else {
                let tol = NEGATIVE_VARIANCE_TOL * 1.0_f64.max(entry.second_moment().abs());
                if variance < -tol {
                    Err(ExactError::NegativeVariance {
                        label: entry.label().to_string(),
                    })
                } else {
                    Ok(0.0)
                }
            }
        })
        .collect()
}

/// Solves the minimax problem exactly.
///
/// Returns the upper variance, lower variance, optimal center, worst-case
/// mixture and the attaining candidate, all aligned to `ms`'s sorted
/// order. Requires every entry's variance to be nonnegative (up to the
/// round-off tolerance); use [`crate::qp::solve`] for arbitrary second
/// moments.
///
/// When several candidates tie within `1e-12 * max(1, upper_variance)`,
/// the witness prefers a single over a pair, the lowest index among
/// singles, and the lexicographically smallest `(i, j)` among pairs. A
/// pair whose crossing was clamped to an endpoint never beats the endpoint
/// single under this rule, so the mixture formula below only ever divides
/// by a genuinely nonzero mean gap.
pub fn upper_variance(ms: &MomentSet) -> Result<VarianceReport, ExactError> {
    let k = ms.len();
    let variances = checked_variances(ms)?;
    let lower_variance = variances.iter().copied().fold(f64::INFINITY, f64::min);

    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            pairs.push(pair_candidate_unchecked(ms, i, j));
        }
    }

    let best_single = variances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_pair = pairs
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = best_single.max(best_pair);
    let tie = TIE_TOL * 1.0_f64.max(upper);

    let witness = select_witness(ms, &variances, &pairs, upper, tie);

    let (mu_star, lambda_star) = match witness {
        Witness::Single(i) => (ms.entry(i).mean(), MixtureWeights::unit(k, i)),
        Witness::Pair(i, j) => {
            let candidate = pairs
                .iter()
                .find(|c| c.i == i && c.j == j)
                .expect("selected pair exists");
            let lambda = pair_mixture(ms, candidate, k)?;
            (candidate.mu_ij, lambda)
        }
    };

    Ok(VarianceReport {
        upper_variance: upper,
        lower_variance,
        mu_star,
        lambda_star,
        witness,
    })
}

/// Tie-break scan. Singles first in index order, then pairs in lex order;
/// pairs are only eligible with a strictly interior crossing. If float
/// noise leaves no eligible candidate inside the tie window (possible only
/// when a clamped pair's value drifted a few ulps above its single), fall
/// back to the best single, which the clamped pair ties in real
/// arithmetic.
fn select_witness(
    ms: &MomentSet,
    variances: &[f64],
    pairs: &[PairCandidate],
    upper: f64,
    tie: f64,
) -> Witness {
    if let Some(i) = (0..variances.len()).find(|&i| variances[i] >= upper - tie) {
        return Witness::Single(i);
    }
    let interior = |c: &PairCandidate| {
        let (mean_i, mean_j) = (ms.entry(c.i).mean(), ms.entry(c.j).mean());
        !means_equal(mean_i, mean_j) && mean_i < c.mu_ij && c.mu_ij < mean_j
    };
    if let Some(c) = pairs
        .iter()
        .find(|c| c.value >= upper - tie && interior(c))
    {
        return Witness::Pair(c.i, c.j);
    }
    let mut best = 0;
    for i in 1..variances.len() {
        if variances[i] > variances[best] {
            best = i;
        }
    }
    Witness::Single(best)
}

/// The worst-case mixture for an interior pair witness:
/// `lambda_i = mean_j/(mean_j - mean_i) + (kappa_i - kappa_j)/(2*(mean_i - mean_j)^2)`
/// and `lambda_j = 1 - lambda_i`, zero elsewhere.
fn pair_mixture(
    ms: &MomentSet,
    candidate: &PairCandidate,
    k: usize,
) -> Result<MixtureWeights, ExactError> {
    let (lo, hi) = (ms.entry(candidate.i), ms.entry(candidate.j));
    let gap = hi.mean() - lo.mean();
    let lambda_i = hi.mean() / gap + (lo.second_moment() - hi.second_moment()) / (2.0 * gap * gap);
    let clamped = clamp_unit(lambda_i).ok_or_else(|| ExactError::InvariantViolation {
        detail: format!(
            "pair ({}, {}) mixture weight {lambda_i} outside [0, 1]",
            candidate.i, candidate.j
        ),
    })?;
    let mut weights = vec![0.0; k];
    weights[candidate.i] = clamped;
    weights[candidate.j] = 1.0 - clamped;
    MixtureWeights::new(weights).map_err(|err| ExactError::InvariantViolation {
        detail: format!("pair mixture failed simplex validation: {err}"),
    })
}

/// Clamps values within `LAMBDA_CLAMP_TOL` outside `[0, 1]` back onto the
/// boundary; anything further out is not round-off.
fn clamp_unit(x: f64) -> Option<f64> {
    if (0.0..=1.0).contains(&x) {
        Some(x)
    } else if (-LAMBDA_CLAMP_TOL..0.0).contains(&x) {
        Some(0.0)
    } else if x > 1.0 && x <= 1.0 + LAMBDA_CLAMP_TOL {
        Some(1.0)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MomentEntry;

    fn set(entries: &[(&str, f64, f64)]) -> MomentSet {
        MomentSet::build(
            entries
                .iter()
                .map(|&(label, mean, kappa)| MomentEntry::new(label, mean, kappa).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn parabola_vertex_is_variance() {
        let ms = set(&[("a", 3.0, 13.0)]);
        let p = Parabola::from_set(&ms, 0).unwrap();
        assert_eq!(p.min_point(), 3.0);
        assert_eq!(p.min_value(), 4.0);
        assert_eq!(p.eval(3.0), p.min_value());
        assert!(Parabola::from_set(&ms, 1).is_err());
    }

    #[test]
    fn pair_candidate_two_regime_example() {
        let ms = set(&[("bear", -0.1, 0.41), ("bull", 0.1, 0.41)]);
        let c = pair_candidate(&ms, 0, 1).unwrap();
        assert!(close(c.mu_ij, 0.0, 1e-12));
        assert!(close(c.value, 0.41, 1e-12));
    }

    #[test]
    fn pair_candidate_equal_means() {
        let ms = set(&[("a", 1.0, 2.0), ("b", 1.0, 3.0)]);
        let c = pair_candidate(&ms, 0, 1).unwrap();
        assert_eq!(c.mu_ij, 1.0);
        assert_eq!(c.value, 2.0 - 1.0);
    }

    #[test]
    fn pair_candidate_clamps_to_right_endpoint() {
        // Raw crossing (3 - 0.1) / 2 = 1.45 exceeds the larger mean 1.
        let ms = set(&[("a", 0.0, 0.1), ("b", 1.0, 3.0)]);
        let c = pair_candidate(&ms, 0, 1).unwrap();
        assert_eq!(c.mu_ij, 1.0);
        assert!(close(c.value, 1.1, 1e-12));

        // Independent check: minimize max(f_a, f_b) over [0, 1] on a fine
        // grid; the minimum must sit at the right endpoint.
        let f = |mean: f64, kappa: f64, x: f64| x * x - 2.0 * mean * x + kappa;
        let g = |x: f64| f(0.0, 0.1, x).max(f(1.0, 3.0, x));
        let steps = 200_000;
        let (mut best_x, mut best_g) = (0.0, g(0.0));
        for step in 1..=steps {
            let x = step as f64 / steps as f64;
            let gx = g(x);
            if gx < best_g {
                best_g = gx;
                best_x = x;
            }
        }
        assert!(close(best_x, 1.0, 1e-5), "grid argmin {best_x}");
        // The pairwise minimax value is f_b's vertex there, not the
        // candidate value; the candidate is dominated by the single.
        assert!(best_g >= c.value);
    }

    #[test]
    fn pair_candidate_index_checks() {
        let ms = set(&[("a", 0.0, 1.0), ("b", 1.0, 2.0)]);
        assert!(pair_candidate(&ms, 0, 2).is_err());
        assert!(pair_candidate(&ms, 1, 1).is_err());
        assert!(pair_candidate(&ms, 1, 0).is_err());
    }

    #[test]
    fn two_regime_example_full_report() {
        let ms = set(&[("bear", -0.1, 0.41), ("bull", 0.1, 0.41)]);
        let report = upper_variance(&ms).unwrap();
        assert!(close(report.upper_variance, 0.41, 1e-12));
        assert!(close(report.lower_variance, 0.40, 1e-12));
        assert!(close(report.mu_star, 0.0, 1e-12));
        assert_eq!(report.witness, Witness::Pair(0, 1));
        let w = report.lambda_star.weights();
        assert!(close(w[0], 0.5, 1e-12) && close(w[1], 0.5, 1e-12));
    }

    #[test]
    fn single_measure_is_plain_variance() {
        let ms = set(&[("only", 3.0, 13.0)]);
        let report = upper_variance(&ms).unwrap();
        assert_eq!(report.upper_variance, 4.0);
        assert_eq!(report.lower_variance, 4.0);
        assert_eq!(report.mu_star, 3.0);
        assert_eq!(report.witness, Witness::Single(0));
        assert_eq!(report.lambda_star.weights(), [1.0]);
    }

    #[test]
    fn three_measure_crossing() {
        let ms = set(&[("a", -1.0, 1.5), ("b", 0.0, 0.5), ("c", 1.0, 1.5)]);
        let report = upper_variance(&ms).unwrap();
        assert!(close(report.upper_variance, 1.5, 1e-12));
        assert!(close(report.mu_star, 0.0, 1e-12));
        assert_eq!(report.witness, Witness::Pair(0, 2));
        let w = report.lambda_star.weights();
        assert!(close(w[0], 0.5, 1e-12));
        assert_eq!(w[1], 0.0);
        assert!(close(w[2], 0.5, 1e-12));

        // Independent check by ternary search, and the reported mixture
        // must reproduce the value through the simplex objective.
        let searched =
            crate::oracle::minimax_oracle(&ms, &crate::oracle::OracleConfig::default()).unwrap();
        assert!(close(report.upper_variance, searched.value, 1e-9));
        let objective = crate::qp::QpInstance::from_moment_set(&ms).objective(w);
        assert!(close(objective, report.upper_variance, 1e-12));
    }

    #[test]
    fn dominated_measure_single_witness() {
        // f_a's vertex value 1.0 dominates; the pair crossing clamps left
        // and ties it, so the tie-break picks the single.
        let ms = set(&[("a", 0.0, 1.0), ("b", 0.05, 0.1)]);
        let report = upper_variance(&ms).unwrap();
        assert_eq!(report.upper_variance, 1.0);
        assert_eq!(report.witness, Witness::Single(0));
        assert_eq!(report.mu_star, 0.0);
        assert_eq!(report.lambda_star.weights(), [1.0, 0.0]);

        let searched =
            crate::oracle::minimax_oracle(&ms, &crate::oracle::OracleConfig::default()).unwrap();
        assert!(close(report.upper_variance, searched.value, 1e-9));
    }

    #[test]
    fn negative_variance_rejected_with_label() {
        let ms = set(&[("ok", 0.0, 1.0), ("bad", 2.0, 3.0)]);
        assert_eq!(
            upper_variance(&ms),
            Err(ExactError::NegativeVariance {
                label: "bad".into()
            })
        );
    }

    #[test]
    fn round_off_negative_variance_clamps_to_zero() {
        let kappa = 4.0;
        let mean = 2.0000000000000004; // mean^2 just above kappa
        let ms = set(&[("edge", mean, kappa), ("other", 3.0, 10.0)]);
        assert!(ms.entry(0).variance() < 0.0);
        let report = upper_variance(&ms).unwrap();
        assert_eq!(report.lower_variance, 0.0);
    }

    #[test]
    fn lower_variance_is_min_single() {
        let ms = set(&[("a", 0.0, 2.0), ("b", 1.0, 1.25), ("c", -1.0, 4.0)]);
        let report = upper_variance(&ms).unwrap();
        assert_eq!(report.lower_variance, 0.25);
    }

    #[test]
    fn equal_mean_pair_loses_to_single() {
        let ms = set(&[("a", 1.0, 3.0), ("b", 1.0, 2.0)]);
        let report = upper_variance(&ms).unwrap();
        assert_eq!(report.upper_variance, 2.0);
        assert_eq!(report.witness, Witness::Single(0));
    }
}
