//! Predicting a fixed model's expected loss in shifted operating domains.
//!
//! The test set is described by discrete context features. A small subspace of
//! the most loss-informative features is selected by greedy
//! redundancy-penalized mutual information ([`selection::greedy_rank`]) and a
//! split-based estimate of prediction error ([`selection::select_dimensionality`]).
//! The per-cell expected loss over that subspace ([`subspace::fit_loss_map`]) is
//! then reweighted by an operating domain's cell distribution
//! ([`subspace::predict`]), with untested cells assumed to fail at the maximum
//! loss.

pub mod data;
pub mod error;
pub mod heatmap;
pub mod info;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod subspace;
pub mod synth;

pub use data::{
    discretize, empirical_loss, infer_schema, load_contexts, load_samples, write_contexts, write_samples, ContextSchema, FeatureDescriptor,
    FeatureKind, LossSupport, RawContexts, RawTable, SampleTable,
};
pub use error::{Error, Result};
pub use info::{JointDistribution, Var};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineRun};
pub use selection::{DimensionalityReport, RankedFeatures, SplitConfig};
pub use subspace::{ContextSubspace, DomainDistribution, LossMap, MarginalsFile, PredictionReport};
pub use synth::{ScenarioSpec, TruthBundle};

/// Version string embedded in every artifact.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
