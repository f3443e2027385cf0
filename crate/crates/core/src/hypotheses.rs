//! Decision-stump dictionary and the weak-learner oracle.
//!
//! Candidate thresholds for a feature are the midpoints between consecutive
//! sorted distinct training values plus one sentinel below the minimum and
//! one above the maximum. Every threshold is paired with both polarities and
//! the resulting columns are deduplicated by their response vector on the
//! training set, so the dictionary holds each achievable dichotomy exactly
//! once. Entries are kept in (feature, threshold, polarity) order, which is
//! also the oracle's tie-breaking order.

use std::collections::HashMap;
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Axis-aligned threshold classifier: `polarity * sign(x[feature] - threshold)`
/// with `sign(0) = +1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn new(feature: usize, threshold: f64, polarity: i8) -> Self {
        debug_assert!(polarity == 1 || polarity == -1);
        Self {
            feature,
            threshold,
            polarity,
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> i8 {
        if x[self.feature] >= self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }

    pub fn responses(&self, data: &Dataset) -> Vec<i8> {
        data.rows().map(|x| self.predict(x)).collect()
    }
}

/// A stump together with its ±1 responses on the training examples.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisColumn {
    pub stump: Stump,
    pub responses: Vec<i8>,
}

impl HypothesisColumn {
    pub fn new(stump: Stump, data: &Dataset) -> Self {
        Self {
            stump,
            responses: stump.responses(data),
        }
    }

    pub fn key(&self) -> ColumnKey {
        ColumnKey::from_responses(&self.responses)
    }

    /// `Σ u_i y_i h(x_i)`.
    pub fn edge(&self, u: &[f64], labels: &[i8]) -> f64 {
        self.responses
            .iter()
            .zip(labels)
            .zip(u)
            .map(|((&h, &y), &ui)| ui * f64::from(h * y))
            .sum()
    }
}

/// Canonical identity of a column: its response vector packed into bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColumnKey(Vec<u64>);

impl ColumnKey {
    pub fn from_responses(responses: &[i8]) -> Self {
        let mut words = vec![0u64; responses.len().div_ceil(64)];
        for (i, &h) in responses.iter().enumerate() {
            if h > 0 {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        ColumnKey(words)
    }
}

/// Result of an oracle call: dictionary index of the chosen column and its edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleChoice {
    pub index: usize,
    pub edge: f64,
}

/// Finite stump dictionary over the training set, with a blacklist of
/// columns the oracle may no longer offer. Cloning is cheap: the columns are
/// shared and only the blacklist is copied.
#[derive(Clone, Debug)]
pub struct Dictionary {
    entries: Arc<Vec<HypothesisColumn>>,
    index: Arc<HashMap<ColumnKey, usize>>,
    thresholds: Arc<Vec<Vec<f64>>>,
    blacklisted: Vec<bool>,
    n_blacklisted: usize,
    n_examples: usize,
}

/// Midpoints between consecutive sorted distinct values, plus a sentinel
/// half a gap below the minimum and half a gap above the maximum (half a
/// unit when the feature is constant).
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let Some((&lo, &hi)) = distinct.first().zip(distinct.last()) else {
        return Vec::new();
    };
    if distinct.len() == 1 {
        return vec![lo - 0.5, lo + 0.5];
    }
    let mut out = Vec::with_capacity(distinct.len() + 1);
    out.push(lo - (distinct[1] - lo) / 2.0);
    out.extend(distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(hi + (hi - distinct[distinct.len() - 2]) / 2.0);
    out
}

impl Dictionary {
    /// Enumerates every stump on the training set and collapses duplicates
    /// by response vector, keeping the first in (feature, threshold,
    /// polarity) order.
    pub fn enumerate_candidates(train: &Dataset) -> Self {
        let d = train.n_features();
        let mut thresholds = Vec::with_capacity(d);
        let mut stumps = Vec::new();
        for feature in 0..d {
            let values: Vec<f64> = (0..train.n_examples())
                .map(|i| train.value(i, feature))
                .collect();
            let ts = candidate_thresholds(&values);
            for &threshold in &ts {
                for polarity in [-1, 1] {
                    stumps.push(Stump::new(feature, threshold, polarity));
                }
            }
            thresholds.push(ts);
        }
        let mut dict = Self::from_stumps(train, stumps);
        dict.thresholds = Arc::new(thresholds);
        dict
    }

    /// Builds a dictionary from an explicit stump list (in the given order),
    /// dropping stumps whose responses duplicate an earlier one.
    pub fn from_stumps(train: &Dataset, stumps: impl IntoIterator<Item = Stump>) -> Self {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for stump in stumps {
            let col = HypothesisColumn::new(stump, train);
            let key = col.key();
            if let std::collections::hash_map::Entry::Vacant(slot) = index.entry(key) {
                slot.insert(entries.len());
                entries.push(col);
            }
        }
        let n = entries.len();
        Self {
            entries: Arc::new(entries),
            index: Arc::new(index),
            thresholds: Arc::new(Vec::new()),
            blacklisted: vec![false; n],
            n_blacklisted: 0,
            n_examples: train.n_examples(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_examples(&self) -> usize {
        self.n_examples
    }

    pub fn column(&self, index: usize) -> &HypothesisColumn {
        &self.entries[index]
    }

    pub fn columns(&self) -> &[HypothesisColumn] {
        &self.entries
    }

    /// Candidate thresholds per feature (empty when built from explicit stumps).
    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn find(&self, col: &HypothesisColumn) -> Option<usize> {
        self.index.get(&col.key()).copied()
    }

    pub fn is_blacklisted(&self, index: usize) -> bool {
        self.blacklisted[index]
    }

    pub fn n_available(&self) -> usize {
        self.len() - self.n_blacklisted
    }

    pub fn is_exhausted(&self) -> bool {
        self.n_available() == 0
    }

    /// Blacklists the column with the same response vector as `col`.
    /// Returns its dictionary index, or `None` if no entry matches.
    pub fn blacklist(&mut self, col: &HypothesisColumn) -> Option<usize> {
        let index = self.find(col)?;
        self.blacklist_index(index);
        Some(index)
    }

    pub fn blacklist_index(&mut self, index: usize) {
        if !self.blacklisted[index] {
            self.blacklisted[index] = true;
            self.n_blacklisted += 1;
        }
    }

    fn check_weights(&self, u: &[f64], labels: &[i8]) -> Result<()> {
        if u.len() != self.n_examples || labels.len() != self.n_examples {
            return Err(Error::InvalidArgument(format!(
                "sample weights ({}) and labels ({}) must match the {} training examples",
                u.len(),
                labels.len(),
                self.n_examples
            )));
        }
        if u.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "sample weights must be nonnegative".into(),
            ));
        }
        if u.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("sample weights are all zero".into()));
        }
        Ok(())
    }

    /// Edges `Σ u_i y_i h_j(x_i)` of every entry, blacklisted or not.
    pub fn edges(&self, u: &[f64], labels: &[i8]) -> Vec<f64> {
        let signed: Vec<f64> = u
            .iter()
            .zip(labels)
            .map(|(&ui, &y)| ui * f64::from(y))
            .collect();
        self.entries
            .iter()
            .map(|col| {
                col.responses
                    .iter()
                    .zip(&signed)
                    .map(|(&h, &s)| if h > 0 { s } else { -s })
                    .sum()
            })
            .collect()
    }

    /// Most violated dual constraint among non-blacklisted columns: the
    /// maximum edge, ties resolved towards the earliest entry. `None` once
    /// every entry is blacklisted.
    pub fn oracle_best_column(&self, u: &[f64], labels: &[i8]) -> Result<Option<OracleChoice>> {
        self.check_weights(u, labels)?;
        let edges = self.edges(u, labels);
        let mut best: Option<OracleChoice> = None;
        for (index, &edge) in edges.iter().enumerate() {
            if self.blacklisted[index] {
                continue;
            }
            if best.is_none_or(|b| edge > b.edge) {
                best = Some(OracleChoice { index, edge });
            }
        }
        Ok(best)
    }
}
