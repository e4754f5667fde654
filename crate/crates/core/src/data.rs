//! Loss/context records, feature schemas and discretization.
//!
//! Raw CSV records are first classified into a [`ContextSchema`]. Numerical
//! features with more distinct values than `max_numeric_levels` are binned into
//! uniform-width bins over the observed range; everything else becomes a
//! categorical feature whose codes index its sorted category list.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of distinct numeric values above which a feature is binned.
pub const DEFAULT_MAX_NUMERIC_LEVELS: usize = 10;
/// Default number of uniform bins for numerical features.
pub const DEFAULT_BINS: usize = 10;

const LOSS_SUPPORT_WARN: usize = 32;

/// Sorted, distinct set of loss values observed in a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSupport {
    values: Vec<f64>,
}

impl LossSupport {
    pub fn from_losses(losses: &[f64]) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::EmptyTable);
        }
        if let Some(bad) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::Row {
                row: bad + 1,
                message: "loss is not finite".into(),
            });
        }
        let mut values = losses.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.len() > LOSS_SUPPORT_WARN {
            log::warn!(
                "loss takes {} distinct values; per-cell estimates will be noisy",
                values.len()
            );
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_loss(&self) -> f64 {
        self.values[0]
    }

    pub fn max_loss(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// True when the support is a subset of {0, 1}.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn code_of(&self, loss: f64) -> Option<u32> {
        self.values
            .binary_search_by(|v| v.total_cmp(&loss))
            .ok()
            .map(|i| i as u32)
    }
}

/// How a feature's raw values map onto discrete codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical { categories: Vec<String> },
    /// `bin_edges` holds `B + 1` ascending edges. Before discretization it
    /// holds just the observed `[min, max]` range.
    Numerical { bin_edges: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureDescriptor {
    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical { categories },
        }
    }

    pub fn numerical(name: impl Into<String>, bin_edges: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numerical { bin_edges },
        }
    }

    pub fn cardinality(&self) -> usize {
        match &self.kind {
            FeatureKind::Categorical { categories } => categories.len(),
            FeatureKind::Numerical { bin_edges } => bin_edges.len().saturating_sub(1),
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.kind, FeatureKind::Numerical { .. })
    }

    /// Human-readable label for code `code`.
    pub fn label(&self, code: usize) -> String {
        match &self.kind {
            FeatureKind::Categorical { categories } => categories[code].clone(),
            FeatureKind::Numerical { bin_edges } => {
                format!("[{}, {})", fmt_edge(bin_edges[code]), fmt_edge(bin_edges[code + 1]))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            FeatureKind::Categorical { categories } => {
                if categories.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "feature `{}` has no categories",
                        self.name
                    )));
                }
                let distinct: BTreeSet<&String> = categories.iter().collect();
                if distinct.len() != categories.len() {
                    return Err(Error::InvalidParameter(format!(
                        "feature `{}` lists a category twice",
                        self.name
                    )));
                }
            }
            FeatureKind::Numerical { bin_edges } => {
                let ascending = bin_edges.windows(2).all(|w| w[0] < w[1]);
                if bin_edges.len() < 2 || !ascending || bin_edges.iter().any(|e| !e.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "feature `{}` needs at least two strictly ascending finite bin edges",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Maps a raw value onto this feature's discrete code.
    ///
    /// Numerical values outside the fitted range clamp to the first or last bin.
    pub fn encode(&self, raw: &str) -> Result<u32> {
        let raw = raw.trim();
        match &self.kind {
            FeatureKind::Categorical { categories } => {
                if let Some(i) = categories.iter().position(|c| c == raw) {
                    return Ok(i as u32);
                }
                // numeric categories also match on value, so "2.0" finds "2"
                if let Some(v) = parse_finite(raw) {
                    if let Some(i) = categories
                        .iter()
                        .position(|c| parse_finite(c).is_some_and(|cv| cv == v))
                    {
                        return Ok(i as u32);
                    }
                }
                Err(Error::UnknownCategory {
                    feature: self.name.clone(),
                    value: raw.to_string(),
                })
            }
            FeatureKind::Numerical { bin_edges } => {
                let v = parse_finite(raw).ok_or_else(|| Error::Parse {
                    what: format!("value of numerical feature `{}`", self.name),
                    message: format!("`{raw}` is not a finite number"),
                })?;
                Ok(bin_index(bin_edges, v) as u32)
            }
        }
    }
}

fn fmt_edge(e: f64) -> String {
    let rounded = (e * 1e6).round() / 1e6;
    format!("{rounded}")
}

/// Bin index of `v` against ascending `edges`, clamping out-of-range values.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    if v <= edges[0] {
        return 0;
    }
    // number of edges <= v, minus one, is the bin whose left edge is <= v
    let idx = edges.partition_point(|&e| e <= v);
    (idx - 1).min(bins - 1)
}

/// Uniform-width bin edges over `[min, max]`. The last edge is exactly `max`.
pub fn uniform_edges(min: f64, max: f64, bins: usize) -> Vec<f64> {
    let width = max - min;
    let mut edges: Vec<f64> = (0..=bins)
        .map(|k| min + width * (k as f64) / (bins as f64))
        .collect();
    edges[bins] = max;
    edges
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Ordered list of feature descriptors; position defines the feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSchema {
    features: Vec<FeatureDescriptor>,
}

impl ContextSchema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for f in &features {
            f.validate()?;
            if !names.insert(f.name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "feature name `{}` is not unique",
                    f.name
                )));
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> Option<&FeatureDescriptor> {
        self.features.get(index)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

/// Context-only records as read from disk: one string column per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RawContexts {
    pub names: Vec<String>,
    /// Column-major: `columns[j][i]` is feature `j` of row `i`.
    pub columns: Vec<Vec<String>>,
}

impl RawContexts {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[String]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
    }

    /// Encodes the named features into row-major codes.
    pub fn encode(&self, features: &[FeatureDescriptor]) -> Result<Vec<u32>> {
        let cols: Vec<&[String]> = features
            .iter()
            .map(|f| self.column(&f.name).ok_or_else(|| Error::MissingColumn(f.name.clone())))
            .collect::<Result<_>>()?;
        let n = self.n_rows();
        let mut codes = Vec::with_capacity(n * features.len());
        for i in 0..n {
            for (f, col) in features.iter().zip(&cols) {
                let code = f.encode(&col[i]).map_err(|e| Error::Row {
                    row: i + 1,
                    message: e.to_string(),
                })?;
                codes.push(code);
            }
        }
        Ok(codes)
    }
}

/// Raw, undiscretized loss/context records.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub losses: Vec<f64>,
    pub contexts: RawContexts,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.losses.len()
    }

    pub fn n_features(&self) -> usize {
        self.contexts.names.len()
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Row {
            row: 0,
            message: "missing header row".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(Error::Row {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        if let Some(j) = record.iter().position(str::is_empty) {
            return Err(Error::Row {
                row,
                message: format!("missing value in column `{}`", header[j]),
            });
        }
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn to_columns(width: usize, rows: &[Vec<String>], skip: Option<usize>) -> Vec<Vec<String>> {
    (0..width)
        .filter(|&j| Some(j) != skip)
        .map(|j| rows.iter().map(|r| r[j].clone()).collect())
        .collect()
}

/// Reads a CSV of per-sample losses and context features.
///
/// Row numbers in diagnostics count data rows from 1, excluding the header.
pub fn load_samples(path: impl AsRef<Path>, loss_column: &str) -> Result<RawTable> {
    let (header, rows) = read_csv(path.as_ref())?;
    let loss_idx = header
        .iter()
        .position(|h| h == loss_column)
        .ok_or_else(|| Error::MissingColumn(loss_column.to_string()))?;
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let losses = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            parse_finite(&r[loss_idx]).ok_or_else(|| Error::Row {
                row: i + 1,
                message: format!("loss `{}` is not a finite number", r[loss_idx]),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let names = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != loss_idx)
        .map(|(_, h)| h.clone())
        .collect();
    Ok(RawTable {
        losses,
        contexts: RawContexts {
            names,
            columns: to_columns(header.len(), &rows, Some(loss_idx)),
        },
    })
}

/// Reads a CSV of context-only records (an operating-domain sample).
pub fn load_contexts(path: impl AsRef<Path>) -> Result<RawContexts> {
    let (header, rows) = read_csv(path.as_ref())?;
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(RawContexts {
        columns: to_columns(header.len(), &rows, None),
        names: header,
    })
}

fn write_csv(path: &Path, header: Vec<&str>, n_rows: usize, row: impl Fn(usize) -> Vec<String>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(&header).map_err(csv_err)?;
    for i in 0..n_rows {
        writer.write_record(row(i)).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes `table` with the loss in the first column, readable by
/// [`load_samples`].
pub fn write_samples(path: impl AsRef<Path>, table: &RawTable, loss_column: &str) -> Result<()> {
    let header = std::iter::once(loss_column)
        .chain(table.contexts.names.iter().map(String::as_str))
        .collect();
    write_csv(path.as_ref(), header, table.n_rows(), |i| {
        std::iter::once(format!("{}", table.losses[i]))
            .chain(table.contexts.columns.iter().map(|c| c[i].clone()))
            .collect()
    })
}

pub fn write_contexts(path: impl AsRef<Path>, contexts: &RawContexts) -> Result<()> {
    let header = contexts.names.iter().map(String::as_str).collect();
    write_csv(path.as_ref(), header, contexts.n_rows(), |i| {
        contexts.columns.iter().map(|c| c[i].clone()).collect()
    })
}

/// Classifies every context column of `raw`.
///
/// Columns that all parse as numbers and have more than `max_numeric_levels`
/// distinct values become numerical features carrying their `[min, max]`
/// range; all other columns become categorical with sorted categories.
pub fn infer_schema(raw: &RawTable, max_numeric_levels: usize) -> Result<ContextSchema> {
    if raw.n_rows() == 0 {
        return Err(Error::EmptyTable);
    }
    let features = raw
        .contexts
        .names
        .iter()
        .zip(&raw.contexts.columns)
        .map(|(name, col)| infer_feature(name, col, max_numeric_levels))
        .collect::<Result<Vec<_>>>()?;
    ContextSchema::new(features)
}

fn infer_feature(name: &str, column: &[String], max_numeric_levels: usize) -> Result<FeatureDescriptor> {
    let numeric: Option<Vec<f64>> = column.iter().map(|v| parse_finite(v)).collect();
    match numeric {
        Some(mut values) => {
            values.sort_by(f64::total_cmp);
            values.dedup();
            if values.len() < 2 {
                return Err(Error::DegenerateFeature(name.to_string()));
            }
            if values.len() > max_numeric_levels {
                let range = vec![values[0], values[values.len() - 1]];
                Ok(FeatureDescriptor::numerical(name, range))
            } else {
                let categories = values.iter().map(|v| format!("{v}")).collect();
                Ok(FeatureDescriptor::categorical(name, categories))
            }
        }
        None => {
            let distinct: BTreeSet<&str> = column.iter().map(|s| s.trim()).collect();
            if distinct.len() < 2 {
                return Err(Error::DegenerateFeature(name.to_string()));
            }
            let categories = distinct.into_iter().map(str::to_string).collect();
            Ok(FeatureDescriptor::categorical(name, categories))
        }
    }
}

/// Fits uniform bin edges on numerical features and encodes every row.
///
/// Numerical features whose schema already carries `bins + 1` edges keep them,
/// so re-discretizing with a fitted schema reproduces the same codes.
pub fn discretize(raw: &RawTable, schema: &ContextSchema, bins: usize) -> Result<SampleTable> {
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let fitted = schema
        .features()
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Numerical { bin_edges } if bin_edges.len() != bins + 1 => {
                let (lo, hi) = (bin_edges[0], bin_edges[bin_edges.len() - 1]);
                if lo.partial_cmp(&hi) != Some(Ordering::Less) {
                    return Err(Error::DegenerateFeature(f.name.clone()));
                }
                Ok(FeatureDescriptor::numerical(f.name.clone(), uniform_edges(lo, hi, bins)))
            }
            _ => Ok(f.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let schema = ContextSchema::new(fitted)?;
    let codes = raw.contexts.encode(schema.features())?;
    SampleTable::new(schema, raw.losses.clone(), codes)
}

/// Discretized loss/context table: `N` losses and an `N x J` code matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    schema: ContextSchema,
    support: LossSupport,
    losses: Vec<f64>,
    loss_codes: Vec<u32>,
    codes: Vec<u32>,
}

impl SampleTable {
    /// Builds a table from row-major `codes`, validating every code.
    pub fn new(schema: ContextSchema, losses: Vec<f64>, codes: Vec<u32>) -> Result<Self> {
        let support = LossSupport::from_losses(&losses)?;
        let j = schema.len();
        if codes.len() != losses.len() * j {
            return Err(Error::InvalidParameter(format!(
                "{} codes do not form {} rows of {} features",
                codes.len(),
                losses.len(),
                j
            )));
        }
        let cards: Vec<u32> = schema.features().iter().map(|f| f.cardinality() as u32).collect();
        for (i, row) in codes.chunks(j.max(1)).enumerate().take(losses.len()) {
            if j == 0 {
                break;
            }
            for (k, (&c, &card)) in row.iter().zip(&cards).enumerate() {
                if c >= card {
                    return Err(Error::Row {
                        row: i + 1,
                        message: format!(
                            "code {c} out of range for `{}` (cardinality {card})",
                            schema.features()[k].name
                        ),
                    });
                }
            }
        }
        let loss_codes = losses
            .iter()
            .map(|&l| support.code_of(l).expect("support built from losses"))
            .collect();
        Ok(Self {
            schema,
            support,
            losses,
            loss_codes,
            codes,
        })
    }

    pub fn schema(&self) -> &ContextSchema {
        &self.schema
    }

    pub fn support(&self) -> &LossSupport {
        &self.support
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn loss_codes(&self) -> &[u32] {
        &self.loss_codes
    }

    pub fn n_rows(&self) -> usize {
        self.losses.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn code(&self, row: usize, feature: usize) -> u32 {
        self.codes[row * self.schema.len() + feature]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let j = self.schema.len();
        &self.codes[row * j..(row + 1) * j]
    }

    pub fn feature_codes(&self, feature: usize) -> impl Iterator<Item = u32> + '_ {
        let j = self.schema.len();
        self.codes[feature..].iter().step_by(j).copied()
    }

    pub fn cardinality(&self, feature: usize) -> usize {
        self.schema.features()[feature].cardinality()
    }

    /// Sub-table restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let losses = rows.iter().map(|&r| self.losses[r]).collect();
        let codes = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Self::new(self.schema.clone(), losses, codes)
    }
}

/// Mean loss over all rows.
///
/// Summation runs over the loss support in ascending order, so the result does
/// not depend on row order.
pub fn empirical_loss(table: &SampleTable) -> f64 {
    let support = table.support().values();
    let mut counts = vec![0u64; support.len()];
    for &c in table.loss_codes() {
        counts[c as usize] += 1;
    }
    let total: f64 = counts
        .iter()
        .zip(support)
        .map(|(&n, &v)| n as f64 * v)
        .sum();
    total / table.n_rows() as f64
}
