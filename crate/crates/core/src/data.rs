//! Dataset ingestion: delimited text, sparse `index:value` files and a
//! synthetic Gaussian mixture. All loaders produce a stratified train/test
//! split; file-based loaders standardize features with train-split statistics.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::samplers::rng_from_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub provenance: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// Original label tokens, indexed by dense class id.
    pub class_names: Vec<String>,
    /// Pool (train) rows, ascending.
    pub train: Vec<usize>,
    /// Held-out rows, ascending.
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn train_features(&self) -> Matrix {
        self.features.select_rows(&self.train)
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn test_features(&self) -> Matrix {
        self.features.select_rows(&self.test)
    }

    pub fn test_labels(&self) -> Vec<usize> {
        self.test.iter().map(|&i| self.labels[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Per-class shuffle, then `round(fraction * n_c)` rows of each class go to
/// the test split, always leaving at least one in train.
pub fn stratified_split(
    labels: &[usize],
    num_classes: usize,
    spec: SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&spec.test_fraction) {
        return invalid(format!(
            "test fraction {} must lie in [0, 1)",
            spec.test_fraction
        ));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut rows in by_class {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let n_test =
            ((spec.test_fraction * rows.len() as f64).round() as usize).min(rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Zero mean, unit variance per column using statistics of the `train` rows
/// only. Columns that are constant on train become all zeros.
pub fn standardize(features: &mut Matrix, train: &[usize]) {
    let d = features.cols();
    let n = train.len() as f64;
    if train.is_empty() {
        return;
    }
    let mut mean = vec![0.0; d];
    for &r in train {
        for (m, v) in mean.iter_mut().zip(features.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for &r in train {
        for ((s, v), m) in var.iter_mut().zip(features.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
    for r in 0..features.rows() {
        for ((v, m), s) in features.row_mut(r).iter_mut().zip(&mean).zip(&sd) {
            *v = if *s > 0.0 { (*v - m) / s } else { 0.0 };
        }
    }
}

/// Maps label tokens to dense ids in first-appearance order.
#[derive(Default)]
struct LabelIndex {
    ids: HashMap<String, usize>,
    names: Vec<String>,
}

impl LabelIndex {
    fn id(&mut self, token: &str) -> usize {
        if let Some(&i) = self.ids.get(token) {
            return i;
        }
        let i = self.names.len();
        self.ids.insert(token.to_string(), i);
        self.names.push(token.to_string());
        i
    }
}

fn finish(
    name: String,
    provenance: String,
    mut features: Matrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
    split: SplitSpec,
    standardize_features: bool,
) -> Result<Dataset> {
    if labels.is_empty() {
        return invalid(format!("dataset {name} has no rows"));
    }
    let (train, test) = stratified_split(&labels, class_names.len(), split)?;
    if standardize_features {
        standardize(&mut features, &train);
    }
    Ok(Dataset {
        name,
        provenance,
        features,
        labels,
        class_names,
        train,
        test,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s == "last" {
            LabelColumn::Last
        } else if let Ok(i) = s.parse() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_string())
        })
    }
}

impl From<LabelColumn> for String {
    fn from(c: LabelColumn) -> String {
        match c {
            LabelColumn::Index(i) => i.to_string(),
            LabelColumn::Name(n) => n,
            LabelColumn::Last => "last".into(),
        }
    }
}

impl From<String> for LabelColumn {
    fn from(s: String) -> Self {
        match s.parse() {
            Ok(c) => c,
            Err(never) => match never {},
        }
    }
}

/// Reads a comma-separated file. Every column other than the label column is
/// a numeric feature. Row numbers in errors are 1-based file lines.
pub fn load_csv(
    path: &Path,
    label_column: &LabelColumn,
    has_header: bool,
    split: SplitSpec,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Option<Vec<String>> = if has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let parse_err = |row: u64, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };

    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut label_idx: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut index = LabelIndex::default();

    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(parse_err(
                line,
                rec.len(),
                format!("expected {w} fields, found {}", rec.len()),
            ));
        }
        let li = match label_idx {
            Some(i) => i,
            None => {
                let i = match label_column {
                    LabelColumn::Last => w.checked_sub(1),
                    LabelColumn::Index(i) => (*i < w).then_some(*i),
                    LabelColumn::Name(n) => {
                        header.as_ref().and_then(|h| h.iter().position(|c| c == n))
                    }
                };
                let i = i.ok_or_else(|| {
                    Error::Schema(format!(
                        "label column {label_column:?} not found in {}",
                        path.display()
                    ))
                })?;
                label_idx = Some(i);
                i
            }
        };
        for (c, cell) in rec.iter().enumerate() {
            if c == li {
                labels.push(index.id(cell));
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(line, c + 1, format!("non-numeric feature value {cell:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    c + 1,
                    format!("non-finite feature value {cell:?}"),
                ));
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return invalid(format!("{} contains no data rows", path.display()));
    }
    let d = width.unwrap_or(1) - 1;
    let features = Matrix::new(labels.len(), d, values)?;
    finish(
        file_stem(path),
        format!("csv:{}", path.display()),
        features,
        labels,
        index.names,
        split,
        true,
    )
}

/// Reads `label idx:value idx:value ...` lines with 1-based feature indices;
/// missing entries are zero. `#` starts a comment.
pub fn load_libsvm(path: &Path, split: SplitSpec) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row: row as u64,
        column,
        message,
    };
    let mut index = LabelIndex::default();
    let mut labels = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("non-empty line");
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (t, tok) in tokens.enumerate() {
            let col = t + 2;
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(ln + 1, col, format!("malformed pair {tok:?}")))?;
            let i: usize =
                i.parse().ok().filter(|&i| i >= 1).ok_or_else(|| {
                    parse_err(ln + 1, col, format!("bad feature index in {tok:?}"))
                })?;
            let v: f64 = v
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(ln + 1, col, format!("bad feature value in {tok:?}")))?;
            if row.iter().any(|&(j, _)| j == i) {
                return Err(parse_err(
                    ln + 1,
                    col,
                    format!("duplicate feature index {i}"),
                ));
            }
            dim = dim.max(i);
            row.push((i, v));
        }
        labels.push(index.id(label));
        sparse_rows.push(row);
    }
    if labels.is_empty() {
        return invalid(format!("{} contains no data rows", path.display()));
    }
    let mut features = Matrix::zeros(labels.len(), dim);
    for (r, row) in sparse_rows.iter().enumerate() {
        let dst = features.row_mut(r);
        for &(i, v) in row {
            dst[i - 1] = v;
        }
    }
    finish(
        file_stem(path),
        format!("libsvm:{}", path.display()),
        features,
        labels,
        index.names,
        split,
        true,
    )
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// `K` unit-covariance Gaussian clusters centred at `separation * u_c` for
/// random unit vectors `u_c`; row `i` belongs to class `i mod K`.
pub fn synth_gaussian_mixture(
    num_classes: usize,
    input_dim: usize,
    n: usize,
    separation: f64,
    rng_seed: u64,
    split: SplitSpec,
) -> Result<Dataset> {
    if num_classes == 0 || input_dim == 0 || n < num_classes {
        return invalid("need K >= 1, d >= 1 and n >= K");
    }
    if !separation.is_finite() || separation < 0.0 {
        return invalid(format!(
            "separation {separation} must be finite and non-negative"
        ));
    }
    let mut rng = rng_from_seed(rng_seed);
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..input_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.iter().map(|x| separation * x / norm).collect();
            }
        })
        .collect();
    let mut data = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % num_classes;
        labels.push(c);
        for m in &means[c] {
            let e: f64 = StandardNormal.sample(&mut rng);
            data.push(m + e);
        }
    }
    let features = Matrix::new(n, input_dim, data)?;
    finish(
        format!("gmm-k{num_classes}-d{input_dim}-n{n}-sep{separation}"),
        format!("synthetic gaussian mixture (seed {rng_seed})"),
        features,
        labels,
        (0..num_classes).map(|c| c.to_string()).collect(),
        split,
        false,
    )
}
