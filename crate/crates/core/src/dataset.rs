//! Tabular classification data: CSV loading with ordinal encoding,
//! stratified (nested) fold plans and grid search over fold plans.
//!
//! Categorical feature columns are ordinally encoded: the distinct values are
//! sorted lexicographically and mapped to `0, 1, 2, ...`. Labels are mapped
//! to class indices in order of first appearance. The [`Encoding`] recorded
//! on load is enough to re-encode new rows identically.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// Interprets `s` as a header name, falling back to a zero-based index
    /// when no header matches (resolved at load time).
    pub fn parse(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }

    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < headers.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::MissingLabelColumn(i.to_string())),
            LabelColumn::Name(name) => {
                if let Some(pos) = headers.iter().position(|h| h == name) {
                    return Ok(pos);
                }
                match name.parse::<usize>() {
                    Ok(i) if i < headers.len() => Ok(i),
                    _ => Err(Error::MissingLabelColumn(name.clone())),
                }
            }
        }
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::parse(s)
    }
}

impl From<usize> for LabelColumn {
    fn from(i: usize) -> Self {
        LabelColumn::Index(i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Ordinal { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// How the raw CSV columns were turned into features and class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub label_column: String,
    /// Position of the label column in the raw CSV row.
    pub label_position: usize,
    pub features: Vec<ColumnEncoding>,
    pub class_names: Vec<String>,
}

impl Encoding {
    /// Encodes one raw CSV row (all columns, label included). Returns the
    /// feature vector and the class index when the label is a known class.
    pub fn encode_row<F: Scalar>(&self, fields: &[&str]) -> Result<(Vec<F>, Option<usize>)> {
        let expected = self.features.len() + 1;
        if fields.len() != expected {
            return Err(Error::InvalidDataset(format!(
                "row has {} fields, expected {expected}",
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(self.features.len());
        let mut feature = 0;
        let mut class = None;
        for (pos, raw) in fields.iter().enumerate() {
            let raw = raw.trim();
            if pos == self.label_position {
                class = self.class_names.iter().position(|c| c == raw);
                continue;
            }
            let column = &self.features[feature];
            feature += 1;
            let v =
                match &column.kind {
                    ColumnKind::Numeric => parse_finite(raw).ok_or_else(|| Error::BadColumn {
                        column: column.name.clone(),
                        reason: format!("value {raw:?} is not a finite number"),
                    })?,
                    ColumnKind::Ordinal { levels } => {
                        let level = levels.iter().position(|l| l == raw).ok_or_else(|| {
                            Error::BadColumn {
                                column: column.name.clone(),
                                reason: format!("unknown category {raw:?}"),
                            }
                        })?;
                        level as f64
                    }
                };
            values.push(F::cast(v));
        }
        Ok((values, class))
    }
}

fn parse_finite(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Immutable feature matrix (row-major, `m × p`) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    features: Vec<F>,
    labels: Vec<usize>,
    n_features: usize,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    encoding: Option<Encoding>,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset from rows. The class count is `max(label) + 1` and
    /// every class must occur.
    pub fn from_rows(rows: Vec<Vec<F>>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |&k| k + 1);
        let p = rows.first().map_or(0, Vec::len);
        let feature_names = (0..p).map(|f| format!("x{f}")).collect();
        let class_names = (0..n_classes).map(|k| k.to_string()).collect();
        Self::new(rows, labels, feature_names, class_names)
    }

    pub fn new(
        rows: Vec<Vec<F>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::EmptyData);
        }
        let p = feature_names.len();
        if p == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if labels.len() != m {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {m} rows",
                labels.len()
            )));
        }
        let k = class_names.len();
        if k < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, found {k}"
            )));
        }
        let mut features = Vec::with_capacity(m * p);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features, expected {p}",
                    row.len()
                )));
            }
            if let Some(f) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "row {i}, feature {f} is not finite"
                )));
            }
            features.extend(row);
        }
        let mut seen = vec![false; k];
        for (i, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(Error::InvalidDataset(format!(
                    "label {y} of row {i} is out of range for {k} classes"
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!(
                "class {missing} ({}) has no samples",
                class_names[missing]
            )));
        }
        Ok(Dataset {
            features,
            labels,
            n_features: p,
            feature_names,
            class_names,
            encoding: None,
        })
    }

    /// Loads a CSV file with a header row.
    pub fn load_csv(path: impl AsRef<Path>, label: impl Into<LabelColumn>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, label)
    }

    pub fn from_csv_reader(reader: impl Read, label: impl Into<LabelColumn>) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let label_position = label.into().resolve(&headers)?;
        let mut records = Vec::new();
        for record in csv.records() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidDataset(format!(
                    "record {} has {} fields, header has {}",
                    records.len() + 1,
                    record.len(),
                    headers.len()
                )));
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::EmptyData);
        }

        let mut columns = Vec::new();
        for (pos, name) in headers.iter().enumerate() {
            if pos == label_position {
                continue;
            }
            let mut numeric = 0usize;
            for record in &records {
                let raw = &record[pos];
                if raw.is_empty() {
                    return Err(Error::BadColumn {
                        column: name.clone(),
                        reason: "missing value".into(),
                    });
                }
                if raw.parse::<f64>().is_ok() {
                    numeric += 1;
                }
            }
            let kind = if numeric == records.len() {
                ColumnKind::Numeric
            } else if numeric == 0 {
                let mut levels: Vec<String> = records.iter().map(|r| r[pos].to_string()).collect();
                levels.sort();
                levels.dedup();
                ColumnKind::Ordinal { levels }
            } else {
                return Err(Error::BadColumn {
                    column: name.clone(),
                    reason: format!(
                        "mixed content: {numeric} of {} values are numeric",
                        records.len()
                    ),
                });
            };
            columns.push(ColumnEncoding {
                name: name.clone(),
                kind,
            });
        }

        let mut class_names: Vec<String> = Vec::new();
        for record in &records {
            let raw = &record[label_position];
            if !class_names.iter().any(|c| c == raw) {
                class_names.push(raw.to_string());
            }
        }
        let encoding = Encoding {
            label_column: headers[label_position].clone(),
            label_position,
            features: columns,
            class_names: class_names.clone(),
        };

        let mut rows = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for record in &records {
            let fields: Vec<&str> = record.iter().collect();
            let (row, class) = encoding.encode_row::<F>(&fields)?;
            rows.push(row);
            labels.push(class.expect("label seen while building class map"));
        }
        let feature_names = encoding.features.iter().map(|c| c.name.clone()).collect();
        let mut dataset = Self::new(rows, labels, feature_names, class_names)?;
        dataset.encoding = Some(encoding);
        Ok(dataset)
    }

    /// Rows `indices` (repeats allowed) as a new dataset sharing the class
    /// space. A subset may lack some classes.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let p = self.n_features;
        let mut features = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_features: p,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            encoding: self.encoding.clone(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> F {
        self.features[i * self.n_features + feature]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> + '_ {
        self.features.chunks(self.n_features)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn encoding(&self) -> Option<&Encoding> {
        self.encoding.as_ref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Assignment of every sample to one of `outer_folds` stratified folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub outer_folds: usize,
    /// Folds used for tuning inside each outer training split (0 = no
    /// nested level).
    pub inner_folds: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// Stratified plan over the training part of outer fold `fold`. Indices
    /// in the returned plan are positions within `train_indices(fold)`.
    /// Seeded with `seed + fold + 1`.
    pub fn inner_plan<F: Scalar>(&self, dataset: &Dataset<F>, fold: usize) -> Result<FoldPlan> {
        if self.inner_folds < 2 {
            return Err(Error::InvalidParameter(
                "fold plan has no inner level".into(),
            ));
        }
        let train = dataset.subset(&self.train_indices(fold));
        stratified_kfold(
            &train,
            self.inner_folds,
            self.seed.wrapping_add(fold as u64 + 1),
        )
    }
}

/// Stratified k-fold split.
///
/// Members of each class are shuffled and dealt round-robin; the dealing
/// position carries over from one class to the next, so classes with fewer
/// than `k` members are spread over different folds instead of piling into
/// the first ones. Every fold then holds `⌊m_c/k⌋` or `⌈m_c/k⌉` samples of
/// class `c`.
pub fn stratified_kfold<F: Scalar>(dataset: &Dataset<F>, k: usize, seed: u64) -> Result<FoldPlan> {
    let m = dataset.n_samples();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k}, need k >= 2")));
    }
    if k > m {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {m} available samples"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let mut assignments = vec![0; m];
    let mut offset = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignments[i] = (offset + pos) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldPlan {
        outer_folds: k,
        inner_folds: 0,
        assignments,
        seed,
    })
}

/// Outer stratified plan whose inner level is derived per fold by
/// [`FoldPlan::inner_plan`].
pub fn nested_kfold<F: Scalar>(
    dataset: &Dataset<F>,
    outer: usize,
    inner: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if inner < 2 {
        return Err(Error::InvalidParameter(format!(
            "inner = {inner}, need at least 2"
        )));
    }
    let mut plan = stratified_kfold(dataset, outer, seed)?;
    plan.inner_folds = inner;
    Ok(plan)
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// One training run performed by [`grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub combination: usize,
    pub fold: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch<P> {
    pub best_index: usize,
    pub best: P,
    pub best_score: f64,
    /// Mean accuracy per combination, in grid order.
    pub mean_scores: Vec<f64>,
    pub trace: Vec<GridRun>,
}

/// Evaluates every grid combination on every fold of `folds` and returns the
/// combination with the highest mean accuracy (earliest in grid order on
/// ties). `trainer(train, test, params)` returns the test accuracy.
pub fn grid_search<F, P, T>(
    dataset: &Dataset<F>,
    grid: &[P],
    folds: &FoldPlan,
    trainer: T,
) -> Result<GridSearch<P>>
where
    F: Scalar,
    P: Clone + Sync,
    T: Fn(&Dataset<F>, &Dataset<F>, &P) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    if folds.assignments.len() != dataset.n_samples() {
        return Err(Error::InvalidParameter(format!(
            "fold plan covers {} samples, dataset has {}",
            folds.assignments.len(),
            dataset.n_samples()
        )));
    }
    let k = folds.outer_folds;
    let splits: Vec<(Dataset<F>, Dataset<F>)> = (0..k)
        .map(|fold| {
            (
                dataset.subset(&folds.train_indices(fold)),
                dataset.subset(&folds.test_indices(fold)),
            )
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..k).map(move |fold| (c, fold)))
        .collect();
    let trace = jobs
        .par_iter()
        .map(|&(combination, fold)| {
            let (train, test) = &splits[fold];
            trainer(train, test, &grid[combination])
                .map(|accuracy| GridRun {
                    combination,
                    fold,
                    accuracy,
                })
                .map_err(|e| Error::Fold {
                    fold,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sums = vec![0.0; grid.len()];
    for run in &trace {
        sums[run.combination] += run.accuracy;
    }
    let mean_scores: Vec<f64> = sums.iter().map(|s| s / k as f64).collect();
    let mut best_index = 0;
    for (c, &score) in mean_scores.iter().enumerate() {
        if score > mean_scores[best_index] {
            best_index = c;
        }
    }
    Ok(GridSearch {
        best_index,
        best: grid[best_index].clone(),
        best_score: mean_scores[best_index],
        mean_scores,
        trace,
    })
}
