//! Domain types shared by every solver in this crate.
//!
//! A random variable under `K` probability measures is abstracted to the
//! per-measure first and second moments `(mean_i, second_moment_i)`; those
//! two numbers per measure are all the solvers ever need. [`MomentSet`]
//! keeps the entries sorted ascending by mean (the order every closed-form
//! expression assumes) while remembering the caller's original order so
//! results can be reported back in it.

use std::collections::HashSet;

use thiserror::Error;

/// Absolute tolerance for the "weights sum to one" simplex check.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative tolerance under which two means are treated as equal.
///
/// The comparison is `|a - b| <= MEAN_EQ_TOL * max(1, |a|, |b|)`. Pairs of
/// measures whose means are equal in this sense take the degenerate branch
/// of the pairwise-intersection formula instead of dividing by the
/// near-zero mean gap.
pub const MEAN_EQ_TOL: f64 = 1e-12;

/// True when `a` and `b` are equal up to [`MEAN_EQ_TOL`].
pub fn means_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= MEAN_EQ_TOL * 1.0_f64.max(a.abs()).max(b.abs())
}

/// Validation failures for the moment-level types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("no entries supplied")]
    EmptyInput,
    #[error("non-finite moment for `{label}`")]
    NonFiniteValue { label: String },
    #[error("duplicate label `{label}`")]
    DuplicateLabel { label: String },
    #[error("empty label")]
    EmptyLabel,
    #[error("weight {weight} at index {index} is outside [0, 1]")]
    WeightOutOfRange { index: usize, weight: f64 },
    #[error("weights sum to {sum}, expected 1")]
    WeightSumInvalid { sum: f64 },
}

/// One measure's labelled moments: the mean `E[X]` and the raw second
/// moment `E[X^2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEntry {
    label: String,
    mean: f64,
    second_moment: f64,
}

impl MomentEntry {
    /// Builds an entry, rejecting empty labels and non-finite moments.
    pub fn new(
        label: impl Into<String>,
        mean: f64,
        second_moment: f64,
    ) -> Result<Self, ModelError> {
        let label = label.into();
        if label.is_empty() {
            return Err(ModelError::EmptyLabel);
        }
        if !mean.is_finite() || !second_moment.is_finite() {
            return Err(ModelError::NonFiniteValue { label });
        }
        Ok(Self {
            label,
            mean,
            second_moment,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// The ordinary variance this entry encodes, `second_moment - mean^2`.
    ///
    /// May be negative: the model layer accepts arbitrary second moments
    /// because the quadratic-program solver does. The probabilistic solver
    /// rejects meaningfully negative values itself.
    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }

    /// Moments of `a*X + b` under the same measure.
    ///
    /// `mean -> a*mean + b` and
    /// `second_moment -> a^2*second_moment + 2ab*mean + b^2`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self, ModelError> {
        let mean = a * self.mean + b;
        let second_moment = a * a * self.second_moment + 2.0 * a * b * self.mean + b * b;
        Self::new(self.label.clone(), mean, second_moment)
    }
}

/// A validated collection of [`MomentEntry`] sorted ascending by mean.
///
/// Sorting is stable, so entries with equal means keep their input order.
/// The permutation between input order and sorted order is retained;
/// [`MomentSet::input_position`] and [`MomentSet::sorted_position`] map
/// between the two.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    entries: Vec<MomentEntry>,
    /// `input_position[s]` = position in the builder's input of `entries[s]`.
    input_position: Vec<usize>,
    /// Inverse of `input_position`.
    sorted_position: Vec<usize>,
}

impl MomentSet {
    /// Validates and mean-sorts `entries`.
    ///
    /// Fails on an empty list or a repeated label. Finiteness and label
    /// shape are already guaranteed by [`MomentEntry::new`].
    pub fn build(entries: Vec<MomentEntry>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        let mut seen = HashSet::new();
        for entry in &entries {
            if !seen.insert(entry.label.as_str()) {
                return Err(ModelError::DuplicateLabel {
                    label: entry.label.clone(),
                });
            }
        }

        let mut order: Vec<usize> = (0..entries.len()).collect();
        // Stable sort: ties keep input order. Means are finite, so the
        // comparison is total.
        order.sort_by(|&a, &b| entries[a].mean.partial_cmp(&entries[b].mean).unwrap());

        let mut sorted_position = vec![0; entries.len()];
        for (sorted, &input) in order.iter().enumerate() {
            sorted_position[input] = sorted;
        }

        let mut slots: Vec<Option<MomentEntry>> = entries.into_iter().map(Some).collect();
        let sorted_entries = order
            .iter()
            .map(|&input| slots[input].take().unwrap())
            .collect();

        Ok(Self {
            entries: sorted_entries,
            input_position: order,
            sorted_position,
        })
    }

    /// Number of measures `K`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false: a set holds at least one entry.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in sorted (ascending mean) order.
    pub fn entries(&self) -> &[MomentEntry] {
        &self.entries
    }

    pub fn entry(&self, sorted: usize) -> &MomentEntry {
        &self.entries[sorted]
    }

    /// Input position of the entry now at sorted position `sorted`.
    pub fn input_position(&self, sorted: usize) -> usize {
        self.input_position[sorted]
    }

    /// Sorted position of the entry that was at input position `input`.
    pub fn sorted_position(&self, input: usize) -> usize {
        self.sorted_position[input]
    }

    /// Reorders per-entry values from sorted order back to input order.
    pub fn to_input_order(&self, sorted_values: &[f64]) -> Vec<f64> {
        assert_eq!(sorted_values.len(), self.len());
        let mut out = vec![0.0; self.len()];
        for (sorted, &value) in sorted_values.iter().enumerate() {
            out[self.input_position[sorted]] = value;
        }
        out
    }

    /// The mean-uncertainty interval `[min mean, max mean]`.
    pub fn mean_interval(&self) -> MeanInterval {
        MeanInterval {
            lower: self.entries[0].mean,
            upper: self.entries[self.entries.len() - 1].mean,
        }
    }

    /// The moment set of `a*X + b`; re-sorts when `a < 0`.
    ///
    /// Entries are fed to the builder in this set's (sorted) order, so the
    /// returned set's permutation maps its positions back to positions in
    /// `self`.
    pub fn affine_transform(&self, a: f64, b: f64) -> Result<MomentSet, ModelError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(ModelError::NonFiniteValue {
                label: self.entries[0].label.clone(),
            });
        }
        let transformed = self
            .entries
            .iter()
            .map(|entry| entry.affine(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        MomentSet::build(transformed)
    }
}

/// The interval of possible means, `[min mean_i, max mean_i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanInterval {
    lower: f64,
    upper: f64,
}

impl MeanInterval {
    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// A point of the unit simplex: `K` weights in `[0, 1]` summing to one.
///
/// Weights are aligned to the order of whatever moment or instance vector
/// produced them; producers document which.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights {
    weights: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        for (index, &weight) in weights.iter().enumerate() {
            // NaN fails this comparison too.
            if !(0.0..=1.0).contains(&weight) {
                return Err(ModelError::WeightOutOfRange { index, weight });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ModelError::WeightSumInvalid { sum });
        }
        Ok(Self { weights })
    }

    /// The vertex of the simplex with all mass on `index`.
    ///
    /// Panics if `index >= len`; this is a constructor for internal
    /// solver output, not a validation surface.
    pub fn unit(len: usize, index: usize) -> Self {
        assert!(index < len, "unit weight index out of range");
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of strictly positive components.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Which candidate of the closed form attained the maximum.
///
/// Indices refer to sorted positions of the solved [`MomentSet`] (or to
/// input positions once a caller has translated them).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    Single(usize),
    Pair(usize, usize),
}

/// Everything the exact solver knows after one run.
///
/// `lambda_star` and the `witness` indices are aligned to the sorted order
/// of the solved [`MomentSet`]; use its permutation accessors to express
/// them in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub upper_variance: f64,
    pub lower_variance: f64,
    /// The center in the mean interval at which the worst case is attained.
    pub mu_star: f64,
    /// Worst-case mixture weights over the measures.
    pub lambda_star: MixtureWeights,
    pub witness: Witness,
}
