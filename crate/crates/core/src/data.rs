//! Dataset representation, CSV ingestion and stratified splitting.
//!
//! A [`FeatureMatrix`] is stored column-major because every consumer in this
//! crate (the rankers, the clustering step and the tree learner) walks a
//! single feature at a time.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("cannot parse value at row {row}, column {col}: {value:?}")]
    ParseError { row: usize, col: usize, value: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("label column must hold exactly two classes, found {0}")]
    NotBinaryLabels(usize),
    #[error("class {class:?} has {count} samples, at least 2 are required")]
    ClassTooSmall { class: String, count: usize },
    #[error("label column {0:?} not found in header")]
    UnknownLabelColumn(String),
    #[error("duplicate feature name {0:?}")]
    DuplicateFeatureName(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("dataset needs at least 2 samples and 1 feature (got n={n}, m={m})")]
    TooSmall { n: usize, m: usize },
    #[error("matrix has {values} cells, expected {n}x{m}")]
    ShapeMismatch { values: usize, n: usize, m: usize },
    #[error("label vector has {labels} entries but matrix has {n} rows")]
    LengthMismatch { labels: usize, n: usize },
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("split would leave class {class} with {test} test and {train} train samples")]
    DegenerateSplit { class: u8, test: usize, train: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `n x m` table of finite reals, one column per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    m: usize,
    columns: Vec<f64>,
    feature_names: Vec<String>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values.
    pub fn from_rows(rows: &[Vec<f64>], feature_names: Vec<String>) -> Result<Self, DataError> {
        let n = rows.len();
        let m = feature_names.len();
        let mut columns = vec![0.0; n * m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(DataError::RaggedRow { row: i, found: row.len(), expected: m });
            }
            for (j, &v) in row.iter().enumerate() {
                columns[j * n + i] = v;
            }
        }
        Self::from_columns(n, columns, feature_names)
    }

    /// Builds a matrix from column-major values (`columns[j * n + i]`).
    pub fn from_columns(
        n: usize,
        columns: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let m = feature_names.len();
        if n < 2 || m < 1 {
            return Err(DataError::TooSmall { n, m });
        }
        if columns.len() != n * m {
            return Err(DataError::ShapeMismatch { values: columns.len(), n, m });
        }
        for (k, v) in columns.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue { row: k % n, col: k / n });
            }
        }
        let mut seen = HashSet::with_capacity(m);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeatureName(name.clone()));
            }
        }
        Ok(Self { n, m, columns, feature_names })
    }

    /// Matrix with generated names `f0, f1, ...`.
    pub fn from_rows_unnamed(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let m = rows.first().map_or(0, Vec::len);
        Self::from_rows(rows, (0..m).map(|j| format!("f{j}")).collect())
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature * self.n + row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.value(i, j)).collect()
    }

    /// Row `i` restricted to the given feature indices, in that order.
    pub fn row_subset(&self, i: usize, features: &[usize]) -> Vec<f64> {
        features.iter().map(|&j| self.value(i, j)).collect()
    }
}

/// Binary class labels encoded as 0/1 by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<u8>,
    class_names: [String; 2],
}

impl LabelVector {
    /// Encodes raw label strings; the first distinct string becomes class 0.
    pub fn from_strings<S: AsRef<str>>(raw: &[S]) -> Result<Self, DataError> {
        let mut names: Vec<String> = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        for s in raw {
            let s = s.as_ref();
            let id = match names.iter().position(|n| n == s) {
                Some(p) => p,
                None => {
                    names.push(s.to_string());
                    names.len() - 1
                }
            };
            labels.push(id.min(u8::MAX as usize) as u8);
        }
        if names.len() != 2 {
            return Err(DataError::NotBinaryLabels(names.len()));
        }
        let class_names = [names[0].clone(), names[1].clone()];
        Self::new(labels, class_names)
    }

    pub fn new(labels: Vec<u8>, class_names: [String; 2]) -> Result<Self, DataError> {
        if let Some(&bad) = labels.iter().find(|&&c| c > 1) {
            return Err(DataError::NotBinaryLabels(bad as usize + 1));
        }
        let out = Self { labels, class_names };
        for c in 0..2u8 {
            let count = out.class_count(c);
            if count < 2 {
                return Err(DataError::ClassTooSmall {
                    class: out.class_names[c as usize].clone(),
                    count,
                });
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        [self.class_count(0), self.class_count(1)]
    }
}

/// Train/test partition of sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub test_fraction: f64,
    pub seed: u64,
}

/// Reads a CSV with a header row. The label column defaults to the last one.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
) -> Result<(FeatureMatrix, LabelVector), DataError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(DataError::MissingFile(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    read_csv(file, label_column)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    label_column: Option<&str>,
) -> Result<(FeatureMatrix, LabelVector), DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let width = header.len();
    let label_idx = match label_column {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::UnknownLabelColumn(name.to_string()))?,
        None => width.saturating_sub(1),
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(DataError::RaggedRow { row: i, found: record.len(), expected: width });
        }
        let mut row = Vec::with_capacity(width.saturating_sub(1));
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| DataError::ParseError {
                row: i,
                col: j,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue { row: i, col: j });
            }
            row.push(v);
        }
        rows.push(row);
    }
    let labels = LabelVector::from_strings(&raw_labels)?;
    let matrix = FeatureMatrix::from_rows(&rows, feature_names)?;
    Ok((matrix, labels))
}

/// Writes the matrix and labels as CSV with the label in the last column.
pub fn write_csv<W: Write>(
    writer: W,
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    label_header: &str,
) -> Result<(), DataError> {
    if labels.len() != matrix.n_samples() {
        return Err(DataError::LengthMismatch { labels: labels.len(), n: matrix.n_samples() });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = matrix.feature_names().iter().map(String::as_str).collect();
    header.push(label_header);
    w.write_record(&header)?;
    for i in 0..matrix.n_samples() {
        let mut rec: Vec<String> = (0..matrix.n_features())
            .map(|j| format!("{:?}", matrix.value(i, j)))
            .collect();
        rec.push(labels.class_names()[labels.get(i) as usize].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-class test seat counts under the largest-remainder rule.
///
/// The total is `round(n * test_fraction)`; each class first receives the
/// floor of its ideal share, then the leftover seats go to the classes with
/// the largest fractional remainders (lower class index wins ties).
pub fn stratified_test_counts(class_counts: [usize; 2], test_fraction: f64) -> [usize; 2] {
    let n: usize = class_counts.iter().sum();
    let total = (n as f64 * test_fraction).round() as usize;
    let ideal = class_counts.map(|c| c as f64 * test_fraction);
    let mut seats = ideal.map(|x| x.floor() as usize);
    let assigned: usize = seats.iter().sum();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(total.saturating_sub(assigned)) {
        seats[c] += 1;
    }
    seats
}

/// Seeded stratified holdout split.
///
/// Returned index lists are sorted ascending; membership is decided by a
/// seeded shuffle of each class's indices.
pub fn stratified_split(
    labels: &LabelVector,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidFraction(test_fraction));
    }
    let counts = labels.class_counts();
    let seats = stratified_test_counts(counts, test_fraction);
    for c in 0..2 {
        if seats[c] == 0 || seats[c] >= counts[c] {
            return Err(DataError::DegenerateSplit {
                class: c as u8,
                test: seats[c],
                train: counts[c] - seats[c].min(counts[c]),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::with_capacity(seats.iter().sum());
    for c in 0..2u8 {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels.get(i) == c).collect();
        members.shuffle(&mut rng);
        let k = seats[c as usize];
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan { train_indices: train, test_indices: test, test_fraction, seed })
}
