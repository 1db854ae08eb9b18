//! Tabular datasets sharing one schema: CSV ingestion, categorical encoding,
//! protected-group aggregation and standard scaling.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout and protected-attribute conventions shared by every dataset
/// in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub protected_attribute: String,
    /// Group labels after aggregation. Index order is the group index used
    /// everywhere else.
    pub protected_groups: Vec<String>,
    /// Raw protected-column category -> group label.
    pub aggregation_map: BTreeMap<String, String>,
    pub target: String,
    pub positive_label: String,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        if self.feature_names.is_empty() {
            return Err(Error::Schema("feature_names is empty".into()));
        }
        for reserved in [&self.protected_attribute, &self.target] {
            if self.feature_names.contains(reserved) {
                return Err(Error::Schema(format!(
                    "`{reserved}` cannot be both a feature and a protected/target column"
                )));
            }
        }
        if self.protected_attribute == self.target {
            return Err(Error::Schema(
                "protected_attribute and target must differ".into(),
            ));
        }
        if self.protected_groups.len() < 2 {
            return Err(Error::Schema(format!(
                "protected_groups needs at least 2 entries, got {}",
                self.protected_groups.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for g in &self.protected_groups {
            if !seen.insert(g) {
                return Err(Error::Schema(format!("duplicate protected group `{g}`")));
            }
        }
        for (raw, label) in &self.aggregation_map {
            if !self.protected_groups.contains(label) {
                return Err(Error::Schema(format!(
                    "aggregation_map sends `{raw}` to unknown group `{label}`"
                )));
            }
        }
        Ok(())
    }

    /// Reads a schema from a TOML or JSON file (chosen by extension, TOML
    /// otherwise).
    pub fn from_path(path: &Path) -> Result<Schema> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn n_groups(&self) -> usize {
        self.protected_groups.len()
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.protected_groups.iter().position(|g| g == label)
    }
}

/// Where a row of a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowOrigin {
    /// Row `row` of the dataset loaded as `dataset`.
    Original { dataset: Arc<str>, row: usize },
    /// Interpolated row `base + weight * (neighbor - base)` between two rows
    /// of `dataset`.
    Synthetic {
        dataset: Arc<str>,
        base: usize,
        neighbor: usize,
        weight: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub features: Array2<f64>,
    pub group_labels: Vec<usize>,
    pub targets: Vec<u8>,
    pub schema: Arc<Schema>,
    pub origins: Vec<RowOrigin>,
}

impl Dataset {
    /// Builds a dataset whose rows are all original rows of `id`.
    pub fn new(
        id: impl Into<String>,
        features: Array2<f64>,
        group_labels: Vec<usize>,
        targets: Vec<u8>,
        schema: Arc<Schema>,
    ) -> Result<Dataset> {
        let id = id.into();
        let source: Arc<str> = Arc::from(id.as_str());
        let origins = (0..features.nrows())
            .map(|row| RowOrigin::Original {
                dataset: source.clone(),
                row,
            })
            .collect();
        Dataset::with_origins(id, features, group_labels, targets, schema, origins)
    }

    pub fn with_origins(
        id: impl Into<String>,
        features: Array2<f64>,
        group_labels: Vec<usize>,
        targets: Vec<u8>,
        schema: Arc<Schema>,
        origins: Vec<RowOrigin>,
    ) -> Result<Dataset> {
        let id = id.into();
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset(id));
        }
        if features.ncols() != schema.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.feature_names.len(),
                found: features.ncols(),
            });
        }
        for len in [group_labels.len(), targets.len(), origins.len()] {
            if len != n {
                return Err(Error::LengthMismatch(n, len));
            }
        }
        let p = schema.n_groups();
        if let Some(&g) = group_labels.iter().find(|&&g| g >= p) {
            return Err(Error::Schema(format!("group index {g} out of range for {p} groups")));
        }
        if let Some(&t) = targets.iter().find(|&&t| t > 1) {
            return Err(Error::Schema(format!("target {t} is not binary")));
        }
        Ok(Dataset {
            id,
            features,
            group_labels,
            targets,
            schema,
            origins,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.schema.n_groups()
    }

    /// Subset of rows in the given order; provenance follows the rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(0), rows);
        Dataset::with_origins(
            self.id.clone(),
            features,
            rows.iter().map(|&i| self.group_labels[i]).collect(),
            rows.iter().map(|&i| self.targets[i]).collect(),
            self.schema.clone(),
            rows.iter().map(|&i| self.origins[i].clone()).collect(),
        )
    }

    /// Same rows with a different feature matrix (e.g. after scaling).
    pub fn with_features(&self, features: Array2<f64>) -> Dataset {
        assert_eq!(features.dim(), self.features.dim());
        Dataset {
            features,
            ..self.clone()
        }
    }

    pub fn ensure_same_schema(&self, other: &Dataset) -> Result<()> {
        if self.schema != other.schema || self.n_features() != other.n_features() {
            return Err(Error::SchemaMismatch(self.id.clone(), other.id.clone()));
        }
        Ok(())
    }
}

/// `|X_{S_i}|` for every protected group `i`.
pub fn group_cardinalities(ds: &Dataset) -> Vec<usize> {
    let mut counts = vec![0usize; ds.n_groups()];
    for &g in &ds.group_labels {
        counts[g] += 1;
    }
    counts
}

/// Row-wise concatenation under the id `id`. Provenance of every row is kept.
pub fn concat(id: impl Into<String>, parts: &[&Dataset]) -> Result<Dataset> {
    let first = parts.first().ok_or(Error::TooFewDatasets(0))?;
    for p in &parts[1..] {
        first.ensure_same_schema(p)?;
    }
    let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
    let features = ndarray::concatenate(Axis(0), &views)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    Dataset::with_origins(
        id,
        features,
        parts.iter().flat_map(|p| p.group_labels.iter().copied()).collect(),
        parts.iter().flat_map(|p| p.targets.iter().copied()).collect(),
        first.schema.clone(),
        parts.iter().flat_map(|p| p.origins.iter().cloned()).collect(),
    )
}

/// Per-column standardization `z = (x - mean) / std` with the population
/// standard deviation. Columns with zero spread map to `x - mean`, which is
/// all zeros on the data the scaler was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

const CONSTANT_COLUMN_EPS: f64 = 1e-12;

impl StandardScaler {
    /// Fits on the union of the rows of `datasets`.
    pub fn fit(datasets: &[&Dataset]) -> Result<StandardScaler> {
        let first = datasets.first().ok_or(Error::TooFewDatasets(0))?;
        let d = first.n_features();
        let mut n = 0usize;
        let mut sum = Array1::<f64>::zeros(d);
        for ds in datasets {
            if ds.n_features() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: ds.n_features(),
                });
            }
            n += ds.n_rows();
            sum += &ds.features.sum_axis(Axis(0));
        }
        let means = sum / n as f64;
        let mut sq = Array1::<f64>::zeros(d);
        for ds in datasets {
            for row in ds.features.rows() {
                let diff = &row - &means;
                sq += &(&diff * &diff);
            }
        }
        let stds = (sq / n as f64).mapv(f64::sqrt);
        Ok(StandardScaler {
            means: means.to_vec(),
            stds: stds.to_vec(),
        })
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let mut features = ds.features.clone();
        for (j, mut col) in features.columns_mut().into_iter().enumerate() {
            let mean = self.means[j];
            let std = self.stds[j];
            if std <= CONSTANT_COLUMN_EPS * mean.abs().max(1.0) {
                col.mapv_inplace(|x| x - mean);
            } else {
                col.mapv_inplace(|x| (x - mean) / std);
            }
        }
        ds.with_features(features)
    }
}

/// Standardizes each feature column of a single dataset.
pub fn standard_scale(ds: &Dataset) -> Dataset {
    let scaler = StandardScaler::fit(&[ds]).expect("a dataset always has at least one row");
    scaler.transform(ds)
}

/// Fits one scaler on all datasets and applies it to each, so that shifts
/// between datasets survive the scaling.
pub fn pooled_standard_scale(datasets: &[Dataset]) -> Result<Vec<Dataset>> {
    let refs: Vec<&Dataset> = datasets.iter().collect();
    let scaler = StandardScaler::fit(&refs)?;
    Ok(datasets.iter().map(|d| scaler.transform(d)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub dataset_id: String,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

#[derive(Debug, Clone)]
enum ColumnKind {
    Unknown,
    Numeric,
    Categorical(HashMap<String, f64>),
}

/// Loads CSV files under one schema. Categorical feature columns share a
/// dictionary across every file loaded through the same loader, so a
/// category gets the same code in every dataset.
#[derive(Debug, Clone)]
pub struct CsvLoader {
    schema: Arc<Schema>,
    columns: Vec<ColumnKind>,
}

fn is_missing(value: &str) -> bool {
    matches!(value, "" | "NA" | "N/A" | "NaN" | "nan" | "?" | "null")
}

impl CsvLoader {
    pub fn new(schema: Arc<Schema>) -> Result<CsvLoader> {
        schema.validate()?;
        let columns = vec![ColumnKind::Unknown; schema.feature_names.len()];
        Ok(CsvLoader { schema, columns })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Loads `path` with the file stem as dataset id.
    pub fn load(&mut self, path: &Path) -> Result<(Dataset, LoadReport)> {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.load_as(path, &id)
    }

    pub fn load_as(&mut self, path: &Path, id: &str) -> Result<(Dataset, LoadReport)> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(csv_err)?;
        let headers = reader.headers().map_err(csv_err)?.clone();
        let position = |column: &str| {
            headers
                .iter()
                .position(|h| h.trim() == column)
                .ok_or_else(|| Error::MissingColumn {
                    column: column.to_string(),
                    path: path.to_path_buf(),
                })
        };
        let schema = self.schema.clone();
        let feature_cols = schema
            .feature_names
            .iter()
            .map(|f| position(f))
            .collect::<Result<Vec<_>>>()?;
        let protected_col = position(&schema.protected_attribute)?;
        let target_col = position(&schema.target)?;

        let mut raw_rows: Vec<Vec<String>> = Vec::new();
        let mut groups = Vec::new();
        let mut targets = Vec::new();
        let mut rows_read = 0usize;
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            rows_read += 1;
            let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
            let needed = feature_cols
                .iter()
                .chain([&protected_col, &target_col])
                .map(|&c| field(c));
            if needed.clone().any(is_missing) {
                continue;
            }
            let category = field(protected_col);
            let label = schema.aggregation_map.get(category).ok_or_else(|| {
                Error::UnmappedCategory {
                    column: schema.protected_attribute.clone(),
                    category: category.to_string(),
                }
            })?;
            let group = schema
                .group_index(label)
                .expect("aggregation_map targets are validated");
            groups.push(group);
            targets.push(binarize(field(target_col), &schema.positive_label));
            raw_rows.push(feature_cols.iter().map(|&c| field(c).to_string()).collect());
        }
        if raw_rows.is_empty() {
            return Err(Error::EmptyDataset(id.to_string()));
        }

        let n = raw_rows.len();
        let d = feature_cols.len();
        let mut features = Array2::<f64>::zeros((n, d));
        for j in 0..d {
            let parsed: Option<Vec<f64>> = raw_rows
                .iter()
                .map(|r| r[j].parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            let column = &mut self.columns[j];
            match (parsed, &mut *column) {
                (Some(values), ColumnKind::Unknown | ColumnKind::Numeric) => {
                    *column = ColumnKind::Numeric;
                    for (i, v) in values.into_iter().enumerate() {
                        features[[i, j]] = v;
                    }
                }
                (None, ColumnKind::Numeric) => {
                    let value = raw_rows
                        .iter()
                        .map(|r| &r[j])
                        .find(|v| v.parse::<f64>().is_err())
                        .cloned()
                        .unwrap_or_default();
                    return Err(Error::InconsistentColumn {
                        column: schema.feature_names[j].clone(),
                        value,
                    });
                }
                (_, kind) => {
                    if matches!(kind, ColumnKind::Unknown) {
                        *kind = ColumnKind::Categorical(HashMap::new());
                    }
                    let ColumnKind::Categorical(dict) = kind else {
                        unreachable!()
                    };
                    for (i, r) in raw_rows.iter().enumerate() {
                        let next = dict.len() as f64;
                        features[[i, j]] = *dict.entry(r[j].clone()).or_insert(next);
                    }
                }
            }
        }

        let dataset = Dataset::new(id, features, groups, targets, schema)?;
        let report = LoadReport {
            dataset_id: id.to_string(),
            rows_read,
            rows_dropped: rows_read - n,
        };
        Ok((dataset, report))
    }
}

fn binarize(value: &str, positive: &str) -> u8 {
    if value == positive {
        return 1;
    }
    match (value.parse::<f64>(), positive.parse::<f64>()) {
        (Ok(a), Ok(b)) if a == b => 1,
        _ => 0,
    }
}

/// Renders a dataset as CSV under its schema's column names. The protected
/// column holds the aggregated group label; the target holds the positive
/// label for positives and `0` otherwise (`1` if the positive label is `0`).
/// Categorical features appear with their integer codes.
pub fn dataset_csv(ds: &Dataset) -> String {
    use crate::io::{csv_field, fmt6};
    let schema = &ds.schema;
    let negative = if schema.positive_label == "0" { "1" } else { "0" };
    let mut out = String::new();
    let header: Vec<String> = schema
        .feature_names
        .iter()
        .chain([&schema.protected_attribute, &schema.target])
        .map(|c| csv_field(c))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n_rows() {
        for v in ds.features.row(i) {
            out.push_str(&fmt6(*v));
            out.push(',');
        }
        out.push_str(&csv_field(&schema.protected_groups[ds.group_labels[i]]));
        out.push(',');
        out.push_str(&csv_field(if ds.targets[i] == 1 {
            &schema.positive_label
        } else {
            negative
        }));
        out.push('\n');
    }
    out
}

/// Loads a single CSV with a fresh category dictionary.
pub fn load_csv(path: &Path, schema: Arc<Schema>) -> Result<Dataset> {
    CsvLoader::new(schema)?.load(path).map(|(ds, _)| ds)
}
