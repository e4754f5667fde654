//! Context subspaces, per-cell loss maps, domain distributions and
//! expected-loss prediction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ContextSchema, FeatureDescriptor, FeatureKind, LossSupport, RawContexts, SampleTable};
use crate::error::{Error, Result};

const MAX_CELLS: u128 = u32::MAX as u128;

/// Grid over `K` selected features. Cells are numbered row-major over the
/// feature order, the last feature varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSubspace {
    features: Vec<FeatureDescriptor>,
    /// Index of each feature in the schema the subspace was built from.
    feature_indices: Vec<usize>,
}

impl ContextSubspace {
    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn feature_indices(&self) -> &[usize] {
        &self.feature_indices
    }

    pub fn dims(&self) -> Vec<usize> {
        self.features.iter().map(FeatureDescriptor::cardinality).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.features.iter().map(FeatureDescriptor::cardinality).product()
    }

    pub fn cell_of(&self, codes: &[u32]) -> usize {
        debug_assert_eq!(codes.len(), self.features.len());
        codes
            .iter()
            .zip(&self.features)
            .fold(0usize, |acc, (&c, f)| acc * f.cardinality() + c as usize)
    }

    pub fn codes_of(&self, cell: usize) -> Vec<u32> {
        let mut rem = cell;
        let mut out = vec![0u32; self.features.len()];
        for (k, f) in self.features.iter().enumerate().rev() {
            let card = f.cardinality();
            out[k] = (rem % card) as u32;
            rem /= card;
        }
        out
    }

    /// Human-readable label of a cell, e.g. `brightness=[0, 0.1) scene=city`.
    pub fn cell_label(&self, cell: usize) -> String {
        self.codes_of(cell)
            .iter()
            .zip(&self.features)
            .map(|(&c, f)| format!("{}={}", f.name, f.label(c as usize)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks that `other` describes the same grid: same names, kinds,
    /// categories and bin edges in the same order.
    pub fn ensure_same(&self, other: &ContextSubspace) -> Result<()> {
        if self.features.len() != other.features.len() {
            return Err(Error::SubspaceMismatch(format!(
                "{} features vs {}",
                self.features.len(),
                other.features.len()
            )));
        }
        for (a, b) in self.features.iter().zip(&other.features) {
            if a != b {
                return Err(Error::SubspaceMismatch(format!(
                    "feature `{}` (cardinality {}) does not match `{}` (cardinality {})",
                    a.name,
                    a.cardinality(),
                    b.name,
                    b.cardinality()
                )));
            }
        }
        Ok(())
    }

    /// Position of each subspace feature in `schema`, verifying descriptors.
    fn locate_in(&self, schema: &ContextSchema) -> Result<Vec<usize>> {
        self.features
            .iter()
            .map(|f| {
                let j = schema
                    .index_of(&f.name)
                    .ok_or_else(|| Error::SubspaceMismatch(format!("table lacks feature `{}`", f.name)))?;
                if &schema.features()[j] != f {
                    return Err(Error::SubspaceMismatch(format!(
                        "feature `{}` is discretized differently in the table",
                        f.name
                    )));
                }
                Ok(j)
            })
            .collect()
    }

    fn row_cells(&self, table: &SampleTable) -> Result<Vec<usize>> {
        let idx = self.locate_in(table.schema())?;
        let mut codes = vec![0u32; idx.len()];
        Ok((0..table.n_rows())
            .map(|r| {
                for (c, &j) in codes.iter_mut().zip(&idx) {
                    *c = table.code(r, j);
                }
                self.cell_of(&codes)
            })
            .collect())
    }
}

/// Builds the subspace over `indices` of `schema`, in the given order.
pub fn build_subspace(schema: &ContextSchema, indices: &[usize]) -> Result<ContextSubspace> {
    let mut seen = vec![false; schema.len()];
    for &i in indices {
        if i >= schema.len() {
            return Err(Error::InvalidFeature(i));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateFeature(i));
        }
    }
    let features: Vec<FeatureDescriptor> = indices.iter().map(|&i| schema.features()[i].clone()).collect();
    let cells = features
        .iter()
        .fold(1u128, |acc, f| acc.saturating_mul(f.cardinality() as u128));
    if cells > MAX_CELLS {
        return Err(Error::InvalidParameter(format!("subspace would have {cells} cells")));
    }
    Ok(ContextSubspace {
        features,
        feature_indices: indices.to_vec(),
    })
}

/// Expected loss of the model in every subspace cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMap {
    pub subspace: ContextSubspace,
    pub support: LossSupport,
    pub expected_loss: Vec<f64>,
    pub sample_count: Vec<u64>,
    pub tested: Vec<bool>,
    pub max_loss: f64,
}

impl LossMap {
    pub fn untested_cells(&self) -> usize {
        self.tested.iter().filter(|t| !**t).count()
    }
}

/// Per-cell mean loss over the whole table; cells without samples get the
/// maximum of the loss support.
pub fn fit_loss_map(table: &SampleTable, subspace: &ContextSubspace) -> Result<LossMap> {
    let cells = subspace.row_cells(table)?;
    let n_cells = subspace.cell_count();
    let support = table.support().clone();
    let n_values = support.len();
    // per-cell histogram over the loss support keeps sums independent of row order
    let mut hist = vec![0u64; n_cells * n_values];
    for (r, &c) in cells.iter().enumerate() {
        hist[c * n_values + table.loss_codes()[r] as usize] += 1;
    }
    let max_loss = support.max_loss();
    let mut expected_loss = Vec::with_capacity(n_cells);
    let mut sample_count = Vec::with_capacity(n_cells);
    for h in hist.chunks(n_values) {
        let n: u64 = h.iter().sum();
        sample_count.push(n);
        if n == 0 {
            expected_loss.push(max_loss);
        } else {
            let total: f64 = h.iter().zip(support.values()).map(|(&k, &v)| k as f64 * v).sum();
            expected_loss.push(total / n as f64);
        }
    }
    Ok(LossMap {
        subspace: subspace.clone(),
        tested: sample_count.iter().map(|&n| n > 0).collect(),
        support,
        expected_loss,
        sample_count,
        max_loss,
    })
}

/// Probability of encountering each subspace cell in some domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDistribution {
    pub subspace: ContextSubspace,
    pub mass: Vec<f64>,
    pub label: String,
}

impl DomainDistribution {
    /// Validates non-negativity and normalization (to 1e-12).
    pub fn new(subspace: ContextSubspace, mass: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if mass.len() != subspace.cell_count() {
            return Err(Error::InvalidParameter(format!(
                "{} masses for {} cells",
                mass.len(),
                subspace.cell_count()
            )));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidParameter("negative or non-finite mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("domain mass sums to {total}")));
        }
        Ok(Self {
            subspace,
            mass,
            label: label.into(),
        })
    }

    /// `alpha * self + (1 - alpha) * other` over the same subspace.
    pub fn mix(&self, other: &DomainDistribution, alpha: f64, label: impl Into<String>) -> Result<Self> {
        self.subspace.ensure_same(&other.subspace)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        Self::new(self.subspace.clone(), mass, label)
    }
}

fn from_cell_counts(subspace: &ContextSubspace, cells: impl Iterator<Item = usize>, label: &str) -> Result<DomainDistribution> {
    let mut counts = vec![0u64; subspace.cell_count()];
    let mut n = 0u64;
    for c in cells {
        counts[c] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let mass = counts.into_iter().map(|c| c as f64 / n as f64).collect();
    DomainDistribution::new(subspace.clone(), mass, label)
}

/// Empirical cell frequencies of context-only records.
///
/// Records only need to carry the subspace's columns; numerical values outside
/// the fitted range clamp to the edge bins.
pub fn domain_from_samples(records: &RawContexts, subspace: &ContextSubspace, label: &str) -> Result<DomainDistribution> {
    let k = subspace.features().len();
    let codes = records.encode(subspace.features())?;
    if k == 0 {
        return from_cell_counts(subspace, (0..records.n_rows()).map(|_| 0), label);
    }
    from_cell_counts(subspace, codes.chunks(k).map(|c| subspace.cell_of(c)), label)
}

/// Empirical cell frequencies of a discretized table.
pub fn domain_from_table(table: &SampleTable, subspace: &ContextSubspace, label: &str) -> Result<DomainDistribution> {
    let cells = subspace.row_cells(table)?;
    from_cell_counts(subspace, cells.into_iter(), label)
}

/// Product of per-feature marginals, one per subspace feature in order.
pub fn domain_from_marginals(marginals: &[Vec<f64>], subspace: &ContextSubspace, label: &str) -> Result<DomainDistribution> {
    let features = subspace.features();
    if marginals.len() != features.len() {
        return Err(Error::InvalidParameter(format!(
            "{} marginals for {} subspace features",
            marginals.len(),
            features.len()
        )));
    }
    for (m, f) in marginals.iter().zip(features) {
        let bad = |message: String| Error::BadMarginal {
            feature: f.name.clone(),
            message,
        };
        if m.len() != f.cardinality() {
            return Err(bad(format!("{} entries for cardinality {}", m.len(), f.cardinality())));
        }
        if m.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(bad("negative or non-finite probability".into()));
        }
        let total: f64 = m.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(bad(format!("sums to {total}, not 1")));
        }
    }
    let mass: Vec<f64> = (0..subspace.cell_count())
        .map(|cell| {
            subspace
                .codes_of(cell)
                .iter()
                .zip(marginals)
                .map(|(&c, m)| m[c as usize])
                .product()
        })
        .collect();
    // marginals are only normalized to 1e-9; renormalize the product exactly
    let total: f64 = mass.iter().sum();
    let mass = mass.into_iter().map(|m| m / total).collect();
    DomainDistribution::new(subspace.clone(), mass, label)
}

/// Weights for one feature's marginal: either one weight per code, or a map
/// from category label (or bin index) to weight with absent entries zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalWeights {
    Dense(Vec<f64>),
    Named(BTreeMap<String, f64>),
}

/// On-disk description of a product-form domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsFile {
    #[serde(default)]
    pub label: Option<String>,
    pub marginals: BTreeMap<String, MarginalWeights>,
}

impl MarginalsFile {
    /// Resolves the named marginals into code-indexed vectors for `subspace`.
    pub fn resolve(&self, subspace: &ContextSubspace) -> Result<Vec<Vec<f64>>> {
        for name in self.marginals.keys() {
            if !subspace.features().iter().any(|f| &f.name == name) {
                return Err(Error::BadMarginal {
                    feature: name.clone(),
                    message: "not a subspace feature".into(),
                });
            }
        }
        subspace
            .features()
            .iter()
            .map(|f| {
                let weights = self.marginals.get(&f.name).ok_or_else(|| Error::BadMarginal {
                    feature: f.name.clone(),
                    message: "missing".into(),
                })?;
                match weights {
                    MarginalWeights::Dense(v) => Ok(v.clone()),
                    MarginalWeights::Named(map) => {
                        let mut v = vec![0.0; f.cardinality()];
                        for (key, &w) in map {
                            let code = match &f.kind {
                                FeatureKind::Categorical { .. } => f.encode(key).ok(),
                                FeatureKind::Numerical { .. } => {
                                    key.parse::<usize>().ok().filter(|&b| b < f.cardinality()).map(|b| b as u32)
                                }
                            }
                            .ok_or_else(|| Error::BadMarginal {
                                feature: f.name.clone(),
                                message: format!("unknown level `{key}`"),
                            })?;
                            v[code as usize] = w;
                        }
                        Ok(v)
                    }
                }
            })
            .collect()
    }
}

/// Predicted loss of a domain under a loss map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub label: String,
    pub predicted_loss: f64,
    /// `1 - predicted_loss`, present only for 0/1 losses.
    pub predicted_recall: Option<f64>,
    /// Domain mass on cells without test samples.
    pub untested_mass: f64,
    pub per_cell_contribution: Vec<f64>,
}

/// `sum_c p(c) g(c)`, with untested cells already carrying `max_loss`.
pub fn predict(map: &LossMap, domain: &DomainDistribution) -> Result<PredictionReport> {
    map.subspace.ensure_same(&domain.subspace)?;
    let per_cell_contribution: Vec<f64> = domain
        .mass
        .iter()
        .zip(&map.expected_loss)
        .map(|(p, g)| p * g)
        .collect();
    let predicted_loss: f64 = per_cell_contribution.iter().sum();
    let untested_mass: f64 = domain
        .mass
        .iter()
        .zip(&map.tested)
        .filter(|(_, t)| !**t)
        .fold(0.0, |acc, (p, _)| acc + p);
    Ok(PredictionReport {
        label: domain.label.clone(),
        predicted_loss,
        predicted_recall: map.support.is_binary().then_some(1.0 - predicted_loss),
        untested_mass: untested_mass.clamp(0.0, 1.0),
        per_cell_contribution,
    })
}
