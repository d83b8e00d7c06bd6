//! Datasets: feature matrix, labels and the two weight vectors.

mod csv_io;
mod split;
mod synthetic;

pub use csv_io::{load_higgs_csv, write_csv, LoadOptions, PARTITION_TAGS};
pub use split::{split, split_by_tags, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Class label. Background is the negative class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Label {
    Background = -1,
    Signal = 1,
}

impl Label {
    pub fn sign(self) -> f64 {
        self as i8 as f64
    }

    pub fn from_sign(v: i64) -> Option<Label> {
        match v {
            -1 => Some(Label::Background),
            1 => Some(Label::Signal),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Background => Label::Signal,
            Label::Signal => Label::Background,
        }
    }

    pub fn is_signal(self) -> bool {
        self == Label::Signal
    }
}

/// Tolerance for "weights sum to one" checks.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// An immutable labelled dataset.
///
/// Features are stored column-major so that split search over one feature
/// walks contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    feature_names: Vec<String>,
    labels: Vec<Label>,
    boost_weights: Vec<f64>,
    event_weights: Vec<f64>,
    ids: Vec<String>,
    tags: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major features. Boost weights start uniform.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<Label>,
        event_weights: Option<Vec<f64>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].len();
        let mut columns = vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                columns[j * n + i] = v;
            }
        }
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Self::from_columns(columns, n, names, labels, event_weights, ids)
    }

    /// Builds a dataset from a column-major buffer of `n_rows * names.len()` values.
    pub fn from_columns(
        columns: Vec<f64>,
        n_rows: usize,
        feature_names: Vec<String>,
        labels: Vec<Label>,
        event_weights: Option<Vec<f64>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if n_rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let n_features = feature_names.len();
        if n_features == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one feature".into()));
        }
        if columns.len() != n_rows * n_features {
            return Err(Error::Contract(format!(
                "feature buffer has {} values, expected {}",
                columns.len(),
                n_rows * n_features
            )));
        }
        if labels.len() != n_rows {
            return Err(Error::Contract(format!(
                "{} labels for {} rows",
                labels.len(),
                n_rows
            )));
        }
        let event_weights = event_weights.unwrap_or_else(|| vec![1.0; n_rows]);
        if event_weights.len() != n_rows {
            return Err(Error::Contract(format!(
                "{} event weights for {} rows",
                event_weights.len(),
                n_rows
            )));
        }
        if let Some(w) = event_weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Contract(format!("event weight {w} is not a finite non-negative value")));
        }
        let ids = ids.unwrap_or_else(|| (0..n_rows).map(|i| i.to_string()).collect());
        if ids.len() != n_rows {
            return Err(Error::Contract(format!("{} ids for {} rows", ids.len(), n_rows)));
        }
        Ok(Dataset {
            columns,
            n_rows,
            n_features,
            feature_names,
            labels,
            boost_weights: vec![1.0 / n_rows as f64; n_rows],
            event_weights,
            ids,
            tags: None,
        })
    }

    pub fn len(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// All values of one feature, indexed by row.
    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature * self.n_rows..(feature + 1) * self.n_rows]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature * self.n_rows + row]
    }

    /// Copies one row into `buf`, resizing it to the feature count.
    pub fn row_into(&self, row: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend((0..self.n_features).map(|j| self.value(row, j)));
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.n_features);
        self.row_into(row, &mut buf);
        buf
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn boost_weights(&self) -> &[f64] {
        &self.boost_weights
    }

    pub fn event_weights(&self) -> &[f64] {
        &self.event_weights
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Per-row partition tags, present when loaded with a split column.
    pub fn tags(&self) -> Option<&[String]> {
        self.tags.as_deref()
    }

    pub fn count_signal(&self) -> usize {
        self.labels.iter().filter(|l| l.is_signal()).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let s = self.count_signal();
        s > 0 && s < self.n_rows
    }

    /// Returns a copy with the given boosting weights, normalized to sum 1.
    pub fn with_boost_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows {
            return Err(Error::Contract(format!(
                "{} boost weights for {} rows",
                weights.len(),
                self.n_rows
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Contract("boost weights must be finite and positive".into()));
        }
        self.boost_weights = weights;
        normalize(&mut self.boost_weights);
        Ok(self)
    }

    pub fn with_event_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows {
            return Err(Error::Contract(format!(
                "{} event weights for {} rows",
                weights.len(),
                self.n_rows
            )));
        }
        self.event_weights = weights;
        Ok(self)
    }

    pub(crate) fn with_tags(mut self, tags: Option<Vec<String>>) -> Self {
        self.tags = tags;
        self
    }

    /// New dataset holding `rows` in the given order, with uniform boost weights.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = rows.len();
        let mut columns = Vec::with_capacity(n * self.n_features);
        for j in 0..self.n_features {
            let col = self.column(j);
            columns.extend(rows.iter().map(|&r| col[r]));
        }
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        let ev = rows.iter().map(|&r| self.event_weights[r]).collect();
        let ids = rows.iter().map(|&r| self.ids[r].clone()).collect();
        let tags = self
            .tags
            .as_ref()
            .map(|t| rows.iter().map(|&r| t[r].clone()).collect());
        Ok(Self::from_columns(
            columns,
            n,
            self.feature_names.clone(),
            labels,
            Some(ev),
            Some(ids),
        )?
        .with_tags(tags))
    }

    /// SHA-256 over features, labels and event weights, as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows as u64).to_le_bytes());
        h.update((self.n_features as u64).to_le_bytes());
        for v in &self.columns {
            h.update(v.to_bits().to_le_bytes());
        }
        for l in &self.labels {
            h.update([*l as i8 as u8]);
        }
        for v in &self.event_weights {
            h.update(v.to_bits().to_le_bytes());
        }
        to_hex(&h.finalize())
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Scales `weights` in place so they sum to one.
pub fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
}

pub(crate) fn check_weight_sum(weights: &[f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Contract(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_rows(
            &[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]],
            vec![Label::Signal, Label::Background, Label::Signal],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn column_major_layout() {
        let ds = tiny();
        assert_eq!(ds.column(1), &[10.0, 20.0, 30.0]);
        assert_eq!(ds.row(2), vec![3.0, 30.0]);
        assert_eq!(ds.value(1, 0), 2.0);
    }

    #[test]
    fn uniform_boost_weights() {
        let ds = tiny();
        assert!(ds.boost_weights().iter().all(|&w| w == 1.0 / 3.0));
        check_weight_sum(ds.boost_weights()).unwrap();
        assert_eq!(ds.event_weights(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = Dataset::from_rows(
            &[vec![1.0, 2.0], vec![1.0]],
            vec![Label::Signal, Label::Background],
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(
            Dataset::from_rows(&[], vec![], None, None),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn subset_renormalizes() {
        let ds = tiny().subset(&[2, 0]).unwrap();
        assert_eq!(ds.ids(), &["2".to_string(), "0".to_string()]);
        assert_eq!(ds.boost_weights(), &[0.5, 0.5]);
        assert_eq!(ds.column(0), &[3.0, 1.0]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = tiny();
        let b = tiny().with_event_weights(vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(a.content_hash(), tiny().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
