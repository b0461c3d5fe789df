//! Moment estimation from labelled raw samples.
//!
//! Each label ("regime") gets the sample mean and the unbiased sample
//! variance of its observations, combined into a raw second moment
//! `kappa = variance + mean^2`. The variance uses the centered two-pass
//! sum `sum((x - mean)^2) / (n - 1)`; the naive `sum(x^2) - n*mean^2`
//! form loses catastrophically when the mean is large relative to the
//! spread.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{ModelError, MomentEntry, MomentSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("no sample groups supplied")]
    EmptyInput,
    #[error("group `{label}` has {len} observation(s), need at least 2")]
    GroupTooSmall { label: String, len: usize },
    #[error("non-finite observation in group `{label}`")]
    NonFiniteValue { label: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Labelled raw observations, grouped by label in first-appearance order.
#[derive(Debug, Clone, Default)]
pub struct SampleTable {
    groups: Vec<(String, Vec<f64>)>,
    index: HashMap<String, usize>,
}

impl SampleTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one observation to its label's group, creating the group on
    /// first sight. Rejects non-finite values.
    pub fn push(&mut self, label: &str, value: f64) -> Result<(), EstimateError> {
        if !value.is_finite() {
            return Err(EstimateError::NonFiniteValue {
                label: label.to_string(),
            });
        }
        match self.index.get(label) {
            Some(&at) => self.groups[at].1.push(value),
            None => {
                self.index.insert(label.to_string(), self.groups.len());
                self.groups.push((label.to_string(), vec![value]));
            }
        }
        Ok(())
    }

    /// Builds a table from `(label, value)` rows.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self, EstimateError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut table = Self::new();
        for (label, value) in rows {
            table.push(label, value)?;
        }
        Ok(table)
    }

    /// Groups in first-appearance order.
    pub fn groups(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.groups
            .iter()
            .map(|(label, values)| (label.as_str(), values.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Two-pass sample mean and unbiased variance: `mean = sum(x) / n`, then
/// `variance = sum((x - mean)^2) / (n - 1)`.
///
/// Returns `None` for fewer than two observations or any non-finite one.
/// Centering before squaring keeps the variance accurate even when the
/// mean dwarfs the spread, e.g. `{1e8, 1e8 + 1, 1e8 + 2}` comes out as
/// exactly one.
pub fn two_pass_mean_variance(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 || !values.iter().all(|x| x.is_finite()) {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centered: f64 = values.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Some((mean, centered / (n - 1.0)))
}

/// Estimates a [`MomentSet`] from raw samples.
///
/// Per group: [`two_pass_mean_variance`], packed into a raw second moment
/// `variance + mean^2`. Every group needs at least two observations. The
/// resulting set is mean-sorted as usual; its permutation maps sorted
/// positions back to the table's group order.
pub fn estimate_moments(table: &SampleTable) -> Result<MomentSet, EstimateError> {
    if table.is_empty() {
        return Err(EstimateError::EmptyInput);
    }
    let mut entries = Vec::with_capacity(table.len());
    for (label, values) in table.groups() {
        if values.len() < 2 {
            return Err(EstimateError::GroupTooSmall {
                label: label.to_string(),
                len: values.len(),
            });
        }
        // The table only admits finite observations, so the estimator
        // cannot refuse here.
        let (mean, variance) = two_pass_mean_variance(values).expect("validated group");
        let second_moment = variance + mean * mean;
        let entry = MomentEntry::new(label, mean, second_moment).map_err(|err| match err {
            ModelError::NonFiniteValue { label } => EstimateError::NonFiniteValue { label },
            other => EstimateError::Model(other),
        })?;
        entries.push(entry);
    }
    Ok(MomentSet::build(entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample() {
        let table = SampleTable::from_rows([("a", 1.0), ("a", 1.0), ("a", 1.0)]).unwrap();
        let ms = estimate_moments(&table).unwrap();
        let e = ms.entry(0);
        assert_eq!(e.mean(), 1.0);
        assert_eq!(e.variance(), 0.0);
        assert_eq!(e.second_moment(), 1.0);
    }

    #[test]
    fn two_point_sample() {
        let table = SampleTable::from_rows([("a", 0.0), ("a", 2.0)]).unwrap();
        let ms = estimate_moments(&table).unwrap();
        let e = ms.entry(0);
        assert_eq!(e.mean(), 1.0);
        // sum((x - 1)^2) = 2, divided by n - 1 = 1.
        assert_eq!(e.variance(), 2.0);
        assert_eq!(e.second_moment(), 3.0);
    }

    #[test]
    fn group_too_small() {
        let table = SampleTable::from_rows([("a", 1.0), ("a", 2.0), ("b", 5.0)]).unwrap();
        assert_eq!(
            estimate_moments(&table),
            Err(EstimateError::GroupTooSmall {
                label: "b".into(),
                len: 1
            })
        );
    }

    #[test]
    fn empty_table() {
        assert_eq!(
            estimate_moments(&SampleTable::new()),
            Err(EstimateError::EmptyInput)
        );
    }

    #[test]
    fn rejects_non_finite_observation() {
        let mut table = SampleTable::new();
        assert_eq!(
            table.push("a", f64::NAN),
            Err(EstimateError::NonFiniteValue { label: "a".into() })
        );
        assert_eq!(
            table.push("a", f64::NEG_INFINITY),
            Err(EstimateError::NonFiniteValue { label: "a".into() })
        );
    }

    #[test]
    fn adversarial_large_mean() {
        // The two-pass form must recover variance 1 exactly-ish here; the
        // naive one-pass form loses every significant digit.
        let (mean, variance) = two_pass_mean_variance(&[1e8, 1e8 + 1.0, 1e8 + 2.0]).unwrap();
        assert_eq!(mean, 1e8 + 1.0);
        assert!(
            (variance - 1.0).abs() <= 1e-9,
            "two-pass variance drifted: {variance}"
        );
    }

    #[test]
    fn two_pass_refuses_degenerate_input() {
        assert_eq!(two_pass_mean_variance(&[1.0]), None);
        assert_eq!(two_pass_mean_variance(&[1.0, f64::NAN]), None);
    }

    #[test]
    fn groups_sorted_by_mean_with_permutation() {
        let table = SampleTable::from_rows([
            ("late", 10.0),
            ("late", 12.0),
            ("early", -3.0),
            ("early", -1.0),
        ])
        .unwrap();
        let ms = estimate_moments(&table).unwrap();
        let labels: Vec<_> = ms.entries().iter().map(|e| e.label()).collect();
        assert_eq!(labels, ["early", "late"]);
        // "late" was the first group in the table.
        assert_eq!(ms.input_position(1), 0);
    }
}
