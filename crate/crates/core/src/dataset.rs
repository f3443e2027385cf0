//! Binary classification datasets: loading, validation, 80/20 splitting and
//! a synthetic two-cluster generator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Fraction of examples assigned to the training part of a split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Feature matrix (row-major, one example per row) with ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<i8>,
    n_features: usize,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major features and ±1 labels, enforcing the
    /// invariants: every label is ±1, both classes present, `m >= 2`, every
    /// feature value finite.
    pub fn new(features: Vec<f64>, labels: Vec<i8>, n_features: usize) -> Result<Self> {
        let m = labels.len();
        if n_features == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if features.len() != m * n_features {
            return Err(Error::InvalidDataset(format!(
                "feature buffer holds {} values, expected {} x {}",
                features.len(),
                m,
                n_features
            )));
        }
        if m < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 examples, got {m}"
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidDataset(format!(
                "label {} at row {i} is not -1 or +1",
                labels[i]
            )));
        }
        if !labels.contains(&1) || !labels.contains(&-1) {
            return Err(Error::InvalidDataset("only one class present".into()));
        }
        if let Some(k) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature value at row {}, feature {}",
                k / n_features,
                k % n_features
            )));
        }
        Ok(Self {
            features,
            labels,
            n_features,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_examples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features + feature]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    /// Copies the selected rows into a new dataset. The subset must still
    /// contain both classes.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_examples() {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range"
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let mut out = Dataset::new(features, labels, self.n_features)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.labels.len() - pos, pos)
    }

    /// Writes the dataset as delimited text with the label in the last
    /// column. Floats use the shortest representation that parses back to
    /// the same value.
    pub fn write_delimited(&self, path: &Path, delimiter: char) -> Result<()> {
        let sep = delimiter.to_string();
        let mut out = String::new();
        if let Some(names) = &self.feature_names {
            let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
            header.push("label");
            out.push_str(&header.join(&sep));
            out.push('\n');
        }
        for (row, &y) in self.rows().zip(&self.labels) {
            for v in row {
                write!(out, "{v}{sep}").expect("writing to a String cannot fail");
            }
            writeln!(out, "{y}").expect("writing to a String cannot fail");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn split_fields(line: &str, delimiter: char) -> Vec<&str> {
    if delimiter.is_whitespace() {
        line.split_whitespace().collect()
    } else {
        line.split(delimiter).map(str::trim).collect()
    }
}

/// Loads a delimited text file, one example per row. Blank lines and lines
/// starting with `#` are skipped. A first row that does not parse as numbers
/// is taken as a header of column names. Labels must be ±1, or 0/1 in which
/// case 0 is remapped to -1.
pub fn load_delimited(path: &Path, label_column: usize, delimiter: char) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };

    let mut expected: Option<usize> = None;
    let mut header: Option<Vec<String>> = None;
    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut seen_data = false;

    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed, delimiter);
        match expected {
            None => {
                if label_column >= fields.len() {
                    return Err(parse_err(
                        row,
                        label_column + 1,
                        format!(
                            "label column {label_column} out of range for {} fields",
                            fields.len()
                        ),
                    ));
                }
                expected = Some(fields.len());
            }
            Some(n) if n != fields.len() => {
                return Err(Error::RaggedRow {
                    path: path.to_path_buf(),
                    row,
                    found: fields.len(),
                    expected: n,
                });
            }
            Some(_) => {}
        }
        if !seen_data && header.is_none() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(
                fields
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != label_column)
                    .map(|(_, f)| f.to_string())
                    .collect(),
            );
            continue;
        }
        seen_data = true;
        for (j, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(row, j + 1, format!("cannot parse {field:?} as a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(row, j + 1, format!("non-finite value {field:?}")));
            }
            if j == label_column {
                raw_labels.push((row, j + 1, v));
            } else {
                features.push(v);
            }
        }
    }

    let zero_one = raw_labels.iter().any(|&(_, _, v)| v == 0.0);
    let mut labels = Vec::with_capacity(raw_labels.len());
    for &(row, column, v) in &raw_labels {
        let y = match v {
            1.0 => 1,
            -1.0 if !zero_one => -1,
            0.0 => -1,
            _ => {
                return Err(parse_err(
                    row,
                    column,
                    format!("label {v} is not in {{-1, +1}} or {{0, 1}}"),
                ))
            }
        };
        labels.push(y);
    }
    if zero_one {
        log::info!(
            "{}: labels encoded as {{0, 1}}, remapped 0 -> -1",
            path.display()
        );
    }

    let n_features = expected.map_or(0, |n| n - 1);
    let data = Dataset::new(features, labels, n_features)?;
    match header {
        Some(names) => data.with_feature_names(names),
        None => Ok(data),
    }
}

/// Disjoint train/validation index sets covering all examples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub seed: u64,
}

/// Stratified 80/20 split. Each class contributes to the validation part in
/// proportion to its size (largest remainder), and every class with at least
/// two examples appears in both parts.
pub fn split_80_20(data: &Dataset, seed: u64) -> Result<Split> {
    let m = data.n_examples();
    if m < 5 {
        return Err(Error::InvalidArgument(format!(
            "split needs at least 5 examples, got {m}"
        )));
    }
    let n_val = m - (TRAIN_FRACTION * m as f64).round() as usize;

    let mut classes: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, &y) in data.labels().iter().enumerate() {
        classes[usize::from(y == 1)].push(i);
    }

    // largest-remainder apportionment of n_val over the two classes
    let exact: Vec<f64> = classes
        .iter()
        .map(|c| n_val as f64 * c.len() as f64 / m as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = n_val - quota.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if quota[c] < classes[c].len() {
            quota[c] += 1;
            remaining -= 1;
        }
    }
    for c in 0..classes.len() {
        let other = 1 - c;
        if classes[c].len() >= 2 && quota[c] == 0 && quota[other] > 1 {
            quota[c] += 1;
            quota[other] -= 1;
        }
        if quota[c] == classes[c].len()
            && classes[c].len() >= 2
            && quota[other] < classes[other].len()
        {
            quota[c] -= 1;
            quota[other] += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(m - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (c, idx) in classes.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        val.extend_from_slice(&idx[..quota[c]]);
        train.extend_from_slice(&idx[quota[c]..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok(Split { train, val, seed })
}

/// Two isotropic unit-variance Gaussian clusters of `m / 2` points each,
/// centred at `∓(separation / 2)` along the first axis. The first half of
/// the rows is labelled -1, the second half +1.
pub fn make_synthetic_two_gaussians(
    m: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "m must be even and >= 4, got {m}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be >= 1".into()));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(m * d);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let y: i8 = if i < m / 2 { -1 } else { 1 };
        for k in 0..d {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let centre = if k == 0 {
                f64::from(y) * separation / 2.0
            } else {
                0.0
            };
            features.push(centre + noise);
        }
        labels.push(y);
    }
    Dataset::new(features, labels, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_four_rows_with_label_last() {
        let f = write_tmp("0.5,1.0,1\n0.1,2.0,-1\n0.7,3.0,1\n0.2,4.0,-1\n");
        let data = load_delimited(f.path(), 2, ',').unwrap();
        assert_eq!(data.n_examples(), 4);
        assert_eq!(data.n_features(), 2);
        assert_eq!(data.labels(), &[1, -1, 1, -1]);
        assert_eq!(data.row(1), &[0.1, 2.0]);
        assert_eq!(data.class_counts(), (2, 2));
    }

    #[test]
    fn remaps_zero_one_labels() {
        let f = write_tmp("1 0.5 0\n0 0.2 1\n1 0.3 0\n");
        let data = load_delimited(f.path(), 2, ' ').unwrap();
        assert_eq!(data.labels(), &[-1, 1, -1]);
    }

    #[test]
    fn label_column_may_be_first() {
        let f = write_tmp("x,a,b\n1,3,4\n-1,5,6\n");
        let data = load_delimited(f.path(), 0, ',').unwrap();
        assert_eq!(data.labels(), &[1, -1]);
        assert_eq!(data.row(0), &[3.0, 4.0]);
        assert_eq!(
            data.feature_names().unwrap(),
            &["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn ragged_row_names_the_row() {
        let f = write_tmp("1,2,3,1\n1,2,3,-1\n1,2,1\n1,2,3,1\n");
        match load_delimited(f.path(), 3, ',') {
            Err(Error::RaggedRow {
                row,
                found,
                expected,
                ..
            }) => {
                assert_eq!((row, found, expected), (3, 3, 4));
            }
            other => panic!("expected ragged row error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_single_class() {
        let f = write_tmp("1,1\n2,1\n3,1\n");
        assert!(matches!(
            load_delimited(f.path(), 1, ','),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn rejects_non_finite_features() {
        let f = write_tmp("1,1\nNaN,-1\n3,1\n");
        match load_delimited(f.path(), 1, ',') {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 1)),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write_tmp("1,1\ninf,-1\n");
        assert!(load_delimited(f.path(), 1, ',').is_err());
    }

    #[test]
    fn rejects_bad_labels() {
        let f = write_tmp("1,2\n2,-1\n");
        assert!(matches!(
            load_delimited(f.path(), 1, ','),
            Err(Error::Parse { row: 1, .. })
        ));
        let f = write_tmp("1,0\n2,-1\n3,1\n");
        assert!(load_delimited(f.path(), 1, ',').is_err());
    }

    #[test]
    fn split_ten_examples() {
        let data = make_synthetic_two_gaussians(10, 2, 1.0, 3).unwrap();
        let s = split_80_20(&data, 0).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.val.len(), 2);
        assert_eq!(s, split_80_20(&data, 0).unwrap());
    }

    #[test]
    fn split_is_stratified_with_rare_class() {
        let features: Vec<f64> = (0..100).map(f64::from).collect();
        let labels: Vec<i8> = (0..100).map(|i| if i < 10 { 1 } else { -1 }).collect();
        let data = Dataset::new(features, labels, 1).unwrap();
        for seed in 0..20 {
            let s = split_80_20(&data, seed).unwrap();
            let pos_train = s.train.iter().filter(|&&i| data.labels()[i] == 1).count();
            let pos_val = s.val.iter().filter(|&&i| data.labels()[i] == 1).count();
            assert!(pos_train > 0 && pos_val > 0);
            assert_eq!(s.train.len(), 80);
        }
    }

    #[test]
    fn split_keeps_tiny_class_on_both_sides() {
        let features: Vec<f64> = (0..20).map(f64::from).collect();
        let labels: Vec<i8> = (0..20).map(|i| if i < 2 { 1 } else { -1 }).collect();
        let data = Dataset::new(features, labels, 1).unwrap();
        let s = split_80_20(&data, 7).unwrap();
        assert_eq!(s.train.len(), 16);
        assert!(s.val.iter().any(|&i| data.labels()[i] == 1));
        assert!(s.train.iter().any(|&i| data.labels()[i] == 1));
    }

    #[test]
    fn split_rejects_tiny_dataset() {
        let data = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], vec![1, -1, 1, -1], 1).unwrap();
        assert!(split_80_20(&data, 0).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_separable() {
        let a = make_synthetic_two_gaussians(4, 1, 10.0, 11).unwrap();
        let b = make_synthetic_two_gaussians(4, 1, 10.0, 11).unwrap();
        assert_eq!(a, b);
        let max_neg = (0..2).map(|i| a.value(i, 0)).fold(f64::MIN, f64::max);
        let min_pos = (2..4).map(|i| a.value(i, 0)).fold(f64::MAX, f64::min);
        assert!(max_neg < min_pos);
    }

    #[test]
    fn synthetic_rejects_bad_sizes() {
        assert!(make_synthetic_two_gaussians(5, 1, 1.0, 0).is_err());
        assert!(make_synthetic_two_gaussians(2, 1, 1.0, 0).is_err());
        assert!(make_synthetic_two_gaussians(4, 0, 1.0, 0).is_err());
        assert!(make_synthetic_two_gaussians(4, 1, 0.0, 0).is_err());
    }

    #[test]
    fn write_then_load_is_bit_exact() {
        let data = make_synthetic_two_gaussians(30, 3, 2.0, 5).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        data.write_delimited(f.path(), ',').unwrap();
        let back = load_delimited(f.path(), 3, ',').unwrap();
        assert_eq!(back, data);
    }
}
