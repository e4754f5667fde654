//! The end-to-end chain: discretize, rank, select K, fit, predict.

use serde::{Deserialize, Serialize};

use crate::data::{discretize, infer_schema, RawContexts, RawTable, SampleTable, DEFAULT_BINS, DEFAULT_MAX_NUMERIC_LEVELS};
use crate::error::Result;
use crate::selection::{
    default_k_max, greedy_rank, select_dimensionality, DimensionalityReport, RankedFeatures, SplitConfig,
    DEFAULT_FLAT_TOLERANCE,
};
use crate::subspace::{
    build_subspace, domain_from_samples, domain_from_table, fit_loss_map, predict, ContextSubspace, LossMap,
    PredictionReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub bins: usize,
    pub max_numeric_levels: usize,
    /// `None` means `min(J, 6)`.
    pub k_max: Option<usize>,
    pub split: SplitConfig,
    pub flat_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            max_numeric_levels: DEFAULT_MAX_NUMERIC_LEVELS,
            k_max: None,
            split: SplitConfig::default(),
            flat_tolerance: DEFAULT_FLAT_TOLERANCE,
        }
    }
}

impl PipelineConfig {
    pub fn k_max_for(&self, n_features: usize) -> usize {
        self.k_max.unwrap_or_else(|| default_k_max(n_features))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub table: SampleTable,
    pub ranked: RankedFeatures,
    pub report: DimensionalityReport,
    pub subspace: ContextSubspace,
    pub loss_map: LossMap,
    /// Prediction under the empirical test-domain distribution.
    pub test_prediction: PredictionReport,
    /// One prediction per operating sample, in input order.
    pub predictions: Vec<PredictionReport>,
}

/// Ranks, selects a subspace and predicts each operating domain.
pub fn run_pipeline(test: &RawTable, operating: &[(String, RawContexts)], cfg: &PipelineConfig) -> Result<PipelineRun> {
    let schema = infer_schema(test, cfg.max_numeric_levels)?;
    let table = discretize(test, &schema, cfg.bins)?;
    let k_max = cfg.k_max_for(table.n_features());
    let ranked = greedy_rank(&table, k_max)?;
    let report = select_dimensionality(&table, &ranked, k_max, &cfg.split, cfg.flat_tolerance)?;
    let subspace = build_subspace(table.schema(), &ranked.order[..report.chosen_k])?;
    let loss_map = fit_loss_map(&table, &subspace)?;
    let test_prediction = predict(&loss_map, &domain_from_table(&table, &subspace, "test")?)?;
    let predictions = operating
        .iter()
        .map(|(name, records)| predict(&loss_map, &domain_from_samples(records, &subspace, name)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineRun {
        table,
        ranked,
        report,
        subspace,
        loss_map,
        test_prediction,
        predictions,
    })
}
