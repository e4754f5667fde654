//! Synthetic scenarios with analytically known failure rates.
//!
//! A [`ScenarioSpec`] plants a per-cell failure rate over a subset of the
//! features, and describes the testing domain and any number of operating
//! domains as products of independent blocks (single-feature marginals or
//! explicit joints). Rows are drawn i.i.d.; losses are Bernoulli draws of the
//! planted rate, so the true expected loss of every domain is available in
//! closed form.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RawContexts, RawTable};
use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineRun};
use crate::rng::{stream, PURPOSE_OPERATING_ROWS, PURPOSE_TEST_ROWS};

/// Numerical values are drawn from the middle of their level's interval,
/// keeping this fraction of the level width clear on each side.
const LEVEL_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub levels: usize,
    /// Category labels for a categorical feature; defaults to `name0`, `name1`, ...
    #[serde(default)]
    pub categories: Option<Vec<String>>,
    /// Value range of a numerical feature, split into `levels` equal intervals.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
}

impl FeatureSpec {
    /// Raw value written for a categorical level.
    pub fn label(&self, level: usize) -> String {
        match &self.categories {
            Some(c) => c[level].clone(),
            None => {
                let width = (self.levels - 1).to_string().len();
                format!("{}{:0width$}", self.name, level)
            }
        }
    }
}

/// Logistic failure-rate model: `rate = 1 / (1 + exp(-(intercept + sum effects)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitRates {
    pub intercept: f64,
    /// Per-level additive effect of each planted feature.
    #[serde(default)]
    pub effects: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    /// Features that drive the failure rate, in the order `rates` is laid out.
    #[serde(default)]
    pub planted: Vec<String>,
    /// Row-major failure rates over the planted features' levels.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
    #[serde(default)]
    pub logit: Option<LogitRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub features: Vec<String>,
    /// Row-major, unnormalized.
    pub weights: Vec<f64>,
}

/// A domain: independent blocks of features. Features without a marginal or a
/// joint are uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    /// Unnormalized per-level weights.
    #[serde(default)]
    pub marginals: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub joint: Vec<JointSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    pub n_test: usize,
    pub n_operating: usize,
    pub features: Vec<FeatureSpec>,
    pub loss: LossSpec,
    pub test_domain: DomainSpec,
    #[serde(default)]
    pub operating_domains: Vec<DomainSpec>,
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "scenario spec".into(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn feature_index(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown feature `{name}`")))
    }

    fn planted_indices(&self) -> Result<Vec<usize>> {
        let idx: Vec<usize> = self
            .loss
            .planted
            .iter()
            .map(|n| self.feature_index(n))
            .collect::<Result<_>>()?;
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != idx.len() {
            return Err(Error::InvalidScenario("planted feature listed twice".into()));
        }
        Ok(idx)
    }

    fn planted_dims(&self, planted: &[usize]) -> Vec<usize> {
        planted.iter().map(|&p| self.features[p].levels).collect()
    }

    /// Failure rate of every planted cell, row-major over `loss.planted`.
    pub fn failure_rates(&self) -> Result<Vec<f64>> {
        let planted = self.planted_indices()?;
        let dims = self.planted_dims(&planted);
        let cells: usize = dims.iter().product();
        let rates = match (&self.loss.rates, &self.loss.logit) {
            (Some(r), None) => r.clone(),
            (None, Some(logit)) => {
                for (name, effects) in &logit.effects {
                    let pos = self
                        .loss
                        .planted
                        .iter()
                        .position(|p| p == name)
                        .ok_or_else(|| Error::InvalidScenario(format!("effect for unplanted feature `{name}`")))?;
                    if effects.len() != dims[pos] {
                        return Err(Error::InvalidScenario(format!(
                            "feature `{name}` has {} levels but {} effects",
                            dims[pos],
                            effects.len()
                        )));
                    }
                }
                (0..cells)
                    .map(|cell| {
                        let levels = unravel(cell, &dims);
                        let eta = self.loss.planted.iter().zip(&levels).fold(logit.intercept, |acc, (n, &l)| {
                            acc + logit.effects.get(n).map_or(0.0, |e| e[l])
                        });
                        1.0 / (1.0 + (-eta).exp())
                    })
                    .collect()
            }
            _ => {
                return Err(Error::InvalidScenario(
                    "loss needs exactly one of `rates` or `logit`".into(),
                ))
            }
        };
        if rates.len() != cells {
            return Err(Error::InvalidScenario(format!(
                "{} rates for {} planted cells",
                rates.len(),
                cells
            )));
        }
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidScenario("failure rates must lie in [0, 1]".into()));
        }
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_test == 0 {
            return Err(Error::InvalidScenario("n_test must be positive".into()));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidScenario("no features".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::InvalidScenario(format!("feature `{}` defined twice", f.name)));
            }
            if f.levels < 2 {
                return Err(Error::InvalidScenario(format!("feature `{}` needs at least 2 levels", f.name)));
            }
            match (&f.categories, &f.range) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidScenario(format!(
                        "feature `{}` cannot have both categories and a range",
                        f.name
                    )))
                }
                (Some(c), None) if c.len() != f.levels => {
                    return Err(Error::InvalidScenario(format!(
                        "feature `{}` lists {} categories for {} levels",
                        f.name,
                        c.len(),
                        f.levels
                    )))
                }
                (None, Some([lo, hi])) if lo >= hi || lo.is_nan() || hi.is_nan() => {
                    return Err(Error::InvalidScenario(format!("feature `{}` has an empty range", f.name)))
                }
                _ => {}
            }
        }
        self.failure_rates()?;
        DomainSampler::new(self, &self.test_domain)?;
        for d in &self.operating_domains {
            DomainSampler::new(self, d)?;
        }
        Ok(())
    }
}

fn unravel(cell: usize, dims: &[usize]) -> Vec<usize> {
    let mut rem = cell;
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = rem % dims[k];
        rem /= dims[k];
    }
    out
}

fn normalize(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidScenario(format!("{what}: weights must be non-negative")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return Err(Error::InvalidScenario(format!("{what}: weights sum to zero")));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// One independent block of a domain: a distribution over the joint levels
/// of `features`.
#[derive(Debug, Clone)]
struct Block {
    features: Vec<usize>,
    dims: Vec<usize>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Block {
    fn new(features: Vec<usize>, dims: Vec<usize>, probs: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            features,
            dims,
            probs,
            cdf,
        }
    }

    fn sample(&self, u: f64) -> Vec<usize> {
        let last = self.probs.len() - 1;
        let mut idx = self.cdf.partition_point(|&c| c <= u * self.cdf[last]).min(last);
        // never land on a zero-probability entry from rounding at a cdf plateau
        while self.probs[idx] == 0.0 && idx > 0 {
            idx -= 1;
        }
        unravel(idx, &self.dims)
    }
}

/// Positions in the planted list covered by a block, with its marginal over them.
type BlockMarginal = (Vec<usize>, BTreeMap<Vec<usize>, f64>);

struct DomainSampler {
    blocks: Vec<Block>,
}

impl DomainSampler {
    fn new(spec: &ScenarioSpec, domain: &DomainSpec) -> Result<Self> {
        let mut covered = vec![false; spec.features.len()];
        let mut blocks = Vec::new();
        let ctx = |m: &str| format!("domain `{}`: {m}", domain.name);
        for joint in &domain.joint {
            let features: Vec<usize> = joint
                .features
                .iter()
                .map(|n| spec.feature_index(n))
                .collect::<Result<_>>()?;
            for &f in &features {
                if std::mem::replace(&mut covered[f], true) {
                    return Err(Error::InvalidScenario(ctx(&format!(
                        "feature `{}` appears in more than one block",
                        spec.features[f].name
                    ))));
                }
            }
            let dims: Vec<usize> = features.iter().map(|&f| spec.features[f].levels).collect();
            let cells: usize = dims.iter().product();
            if joint.weights.len() != cells {
                return Err(Error::InvalidScenario(ctx(&format!(
                    "joint over {:?} needs {cells} weights, got {}",
                    joint.features,
                    joint.weights.len()
                ))));
            }
            blocks.push(Block::new(features, dims, normalize(&joint.weights, &ctx("joint"))?));
        }
        for (name, weights) in &domain.marginals {
            let f = spec.feature_index(name)?;
            if std::mem::replace(&mut covered[f], true) {
                return Err(Error::InvalidScenario(ctx(&format!(
                    "feature `{name}` appears in more than one block"
                ))));
            }
            let levels = spec.features[f].levels;
            if weights.len() != levels {
                return Err(Error::InvalidScenario(ctx(&format!(
                    "marginal of `{name}` needs {levels} weights, got {}",
                    weights.len()
                ))));
            }
            blocks.push(Block::new(vec![f], vec![levels], normalize(weights, &ctx(name))?));
        }
        for (f, done) in covered.iter().enumerate() {
            if !done {
                let levels = spec.features[f].levels;
                blocks.push(Block::new(vec![f], vec![levels], vec![1.0 / levels as f64; levels]));
            }
        }
        // fixed block order keeps sampling independent of map iteration details
        blocks.sort_by_key(|b| b.features[0]);
        Ok(Self { blocks })
    }

    fn sample_levels(&self, rng: &mut impl Rng, n_features: usize) -> Vec<usize> {
        let mut levels = vec![0; n_features];
        for b in &self.blocks {
            let u: f64 = rng.random();
            for (&f, l) in b.features.iter().zip(b.sample(u)) {
                levels[f] = l;
            }
        }
        levels
    }

    /// Exact distribution over the planted cells (row-major over `planted`).
    fn planted_mass(&self, planted: &[usize], dims: &[usize]) -> Vec<f64> {
        let cells: usize = dims.iter().product();
        // marginal of each block over the planted features it contains
        let block_marginals: Vec<BlockMarginal> = self
            .blocks
            .iter()
            .filter_map(|b| {
                let pos: Vec<(usize, usize)> = b
                    .features
                    .iter()
                    .enumerate()
                    .filter_map(|(k, f)| planted.iter().position(|p| p == f).map(|pp| (k, pp)))
                    .collect();
                if pos.is_empty() {
                    return None;
                }
                let mut marg = BTreeMap::new();
                for (e, &p) in b.probs.iter().enumerate() {
                    let lv = unravel(e, &b.dims);
                    let key: Vec<usize> = pos.iter().map(|&(k, _)| lv[k]).collect();
                    *marg.entry(key).or_insert(0.0) += p;
                }
                Some((pos.iter().map(|&(_, pp)| pp).collect(), marg))
            })
            .collect();
        (0..cells)
            .map(|cell| {
                let lv = unravel(cell, dims);
                block_marginals
                    .iter()
                    .map(|(pp, marg)| {
                        let key: Vec<usize> = pp.iter().map(|&p| lv[p]).collect();
                        marg.get(&key).copied().unwrap_or(0.0)
                    })
                    .product()
            })
            .collect()
    }
}

/// Analytic ground truth of a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthBundle {
    pub scenario: String,
    pub seed: u64,
    pub planted: Vec<String>,
    pub planted_dims: Vec<usize>,
    /// True expected loss per planted cell, row-major over `planted`.
    pub failure_rates: Vec<f64>,
    pub test_domain: DomainTruth,
    pub operating_domains: Vec<DomainTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTruth {
    pub name: String,
    pub true_loss: f64,
    /// Sampling distribution over planted cells.
    pub planted_mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub test: RawTable,
    pub operating: Vec<(String, RawContexts)>,
    pub truth: TruthBundle,
}

fn feature_value(spec: &FeatureSpec, level: usize, rng: &mut impl Rng) -> String {
    match spec.range {
        Some([lo, hi]) => {
            let width = (hi - lo) / spec.levels as f64;
            let u: f64 = rng.random();
            let offset = LEVEL_MARGIN + (1.0 - 2.0 * LEVEL_MARGIN) * u;
            format!("{}", lo + (level as f64 + offset) * width)
        }
        None => spec.label(level),
    }
}

fn sample_rows(
    spec: &ScenarioSpec,
    sampler: &DomainSampler,
    n: usize,
    purpose: u64,
    loss: Option<(&[usize], &[usize], &[f64])>,
) -> (Vec<f64>, RawContexts) {
    let j = spec.features.len();
    let rows: Vec<(f64, Vec<String>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, purpose, i as u64);
            let levels = sampler.sample_levels(&mut rng, j);
            let values = spec
                .features
                .iter()
                .zip(&levels)
                .map(|(f, &l)| feature_value(f, l, &mut rng))
                .collect();
            let l = match loss {
                Some((planted, dims, rates)) => {
                    let cell = planted.iter().zip(dims).fold(0, |acc, (&p, &d)| acc * d + levels[p]);
                    let u: f64 = rng.random();
                    if u < rates[cell] {
                        1.0
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            };
            (l, values)
        })
        .collect();
    let losses = rows.iter().map(|(l, _)| *l).collect();
    let columns = (0..j)
        .map(|k| rows.iter().map(|(_, v)| v[k].clone()).collect())
        .collect();
    (
        losses,
        RawContexts {
            names: spec.features.iter().map(|f| f.name.clone()).collect(),
            columns,
        },
    )
}

/// Draws the test table, one context-only sample per operating domain, and the
/// analytic truth. Output depends only on the spec (including its seed).
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedScenario> {
    spec.validate()?;
    let planted = spec.planted_indices()?;
    let dims = spec.planted_dims(&planted);
    let rates = spec.failure_rates()?;

    let truth_of = |sampler: &DomainSampler, name: &str| {
        let planted_mass = sampler.planted_mass(&planted, &dims);
        let true_loss = planted_mass.iter().zip(&rates).map(|(p, r)| p * r).sum();
        DomainTruth {
            name: name.to_string(),
            true_loss,
            planted_mass,
        }
    };

    let test_sampler = DomainSampler::new(spec, &spec.test_domain)?;
    let (losses, contexts) = sample_rows(
        spec,
        &test_sampler,
        spec.n_test,
        PURPOSE_TEST_ROWS,
        Some((&planted, &dims, &rates)),
    );
    let test_truth = truth_of(&test_sampler, &spec.test_domain.name);

    let mut operating = Vec::new();
    let mut operating_truth = Vec::new();
    for (d, domain) in spec.operating_domains.iter().enumerate() {
        let sampler = DomainSampler::new(spec, domain)?;
        let (_, contexts) = sample_rows(
            spec,
            &sampler,
            spec.n_operating,
            PURPOSE_OPERATING_ROWS + d as u64,
            None,
        );
        operating.push((domain.name.clone(), contexts));
        operating_truth.push(truth_of(&sampler, &domain.name));
    }

    Ok(GeneratedScenario {
        test: RawTable { losses, contexts },
        operating,
        truth: TruthBundle {
            scenario: spec.name.clone(),
            seed: spec.seed,
            planted: spec.loss.planted.clone(),
            planted_dims: dims,
            failure_rates: rates,
            test_domain: test_truth,
            operating_domains: operating_truth,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainOutcome {
    pub name: String,
    pub predicted_loss: f64,
    pub true_loss: f64,
    pub abs_error: f64,
    pub untested_mass: f64,
}

/// Comparison of a full pipeline run against the scenario's truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub scenario: String,
    pub seed: u64,
    pub chosen_k: usize,
    pub ranking: Vec<String>,
    /// The planted features occupy exactly the top `|planted|` ranks.
    pub planted_ranked_top: bool,
    pub epsilon_tilde: Vec<f64>,
    pub domains: Vec<DomainOutcome>,
}

/// Generates the scenario, runs discretize, rank, select K, fit and predict,
/// and compares every operating-domain prediction with its true loss.
pub fn evaluate_pipeline(spec: &ScenarioSpec, cfg: &PipelineConfig) -> Result<(EvaluationSummary, PipelineRun)> {
    let generated = generate(spec)?;
    let run = run_pipeline(&generated.test, &generated.operating, cfg)?;
    let names = run.table.schema().names();
    let ranking: Vec<String> = run.ranked.order.iter().map(|&f| names[f].clone()).collect();
    let n_planted = spec.loss.planted.len();
    let planted_ranked_top = ranking.len() >= n_planted
        && spec
            .loss
            .planted
            .iter()
            .all(|p| ranking[..n_planted].contains(p));
    let domains = run
        .predictions
        .iter()
        .zip(&generated.truth.operating_domains)
        .map(|(p, t)| DomainOutcome {
            name: t.name.clone(),
            predicted_loss: p.predicted_loss,
            true_loss: t.true_loss,
            abs_error: (p.predicted_loss - t.true_loss).abs(),
            untested_mass: p.untested_mass,
        })
        .collect();
    let summary = EvaluationSummary {
        scenario: spec.name.clone(),
        seed: spec.seed,
        chosen_k: run.report.chosen_k,
        ranking,
        planted_ranked_top,
        epsilon_tilde: run.report.epsilon_tilde.clone(),
        domains,
    };
    Ok((summary, run))
}
