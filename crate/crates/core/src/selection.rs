//! Greedy context-feature ranking and subspace dimensionality selection.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SampleTable;
use crate::error::{Error, Result};
use crate::info::{mutual_information, Var};
use crate::rng::{stream, PURPOSE_SPLIT};

/// Upper bound on the default number of ranked features.
pub const DEFAULT_K_MAX: usize = 6;
pub const DEFAULT_ITERATIONS: usize = 50;
pub const DEFAULT_SPLIT: f64 = 0.5;
/// Relative slack (as a fraction of the context-free baseline error) under
/// which an error curve counts as flat.
pub const DEFAULT_FLAT_TOLERANCE: f64 = 0.1;
/// Mean errors closer than this are treated as tied.
const TIE_EPSILON: f64 = 1e-12;

/// `min(J, 6)`.
pub fn default_k_max(n_features: usize) -> usize {
    n_features.min(DEFAULT_K_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub feature: usize,
    pub score: f64,
}

/// Result of greedy ranking: selected features in order, with the full score
/// table of every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub order: Vec<usize>,
    /// Score of each selected feature at the iteration it was picked.
    pub scores: Vec<f64>,
    /// `per_iteration_scores[k]` scores every candidate still unselected at
    /// iteration `k`, in ascending feature index.
    pub per_iteration_scores: Vec<Vec<CandidateScore>>,
    /// Number of candidate evaluations performed.
    pub candidate_scorings: usize,
}

/// Ranks up to `k_max` features by greedy redundancy-penalized relevance.
///
/// At every iteration the unselected feature maximizing
/// `I(C_j, L) - sum_{s in S} I(C_j, C_s)` is added to `S`; ties go to the lowest
/// feature index. Each pairwise MI is computed once, when its selected
/// feature enters `S`.
pub fn greedy_rank(table: &SampleTable, k_max: usize) -> Result<RankedFeatures> {
    let j = table.n_features();
    if k_max == 0 || k_max > j {
        return Err(Error::InvalidParameter(format!(
            "k_max must lie in 1..={j}, got {k_max}"
        )));
    }
    let relevance: Vec<f64> = (0..j)
        .into_par_iter()
        .map(|f| mutual_information(table, Var::Loss, Var::Feature(f)))
        .collect::<Result<_>>()?;
    let mut redundancy = vec![0.0f64; j];
    let mut selected = vec![false; j];
    let mut ranked = RankedFeatures {
        order: Vec::with_capacity(k_max),
        scores: Vec::with_capacity(k_max),
        per_iteration_scores: Vec::with_capacity(k_max),
        candidate_scorings: 0,
    };

    for _ in 0..k_max {
        let candidates: Vec<CandidateScore> = (0..j)
            .filter(|&f| !selected[f])
            .map(|f| CandidateScore {
                feature: f,
                score: relevance[f] - redundancy[f],
            })
            .collect();
        ranked.candidate_scorings += candidates.len();
        let best = candidates
            .iter()
            .fold(None::<CandidateScore>, |best, c| match best {
                Some(b) if b.score >= c.score => Some(b),
                _ => Some(*c),
            })
            .expect("at least one candidate");
        selected[best.feature] = true;
        ranked.order.push(best.feature);
        ranked.scores.push(best.score);
        ranked.per_iteration_scores.push(candidates);

        let added: Vec<(usize, f64)> = (0..j)
            .into_par_iter()
            .filter(|&f| !selected[f])
            .map(|f| {
                mutual_information(table, Var::Feature(f), Var::Feature(best.feature)).map(|mi| (f, mi))
            })
            .collect::<Result<_>>()?;
        for (f, mi) in added {
            redundancy[f] += mi;
        }
    }
    Ok(ranked)
}

/// Settings for repeated fit/validation splitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub iterations: usize,
    /// Fraction of rows assigned to the fit partition.
    pub split: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            split: DEFAULT_SPLIT,
            seed: 0,
        }
    }
}

impl SplitConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split must lie strictly between 0 and 1, got {}",
                self.split
            )));
        }
        Ok(())
    }
}

/// Row indices of the fit and validation partitions of one iteration, each in
/// ascending order. The permutation depends only on `(seed, iteration)`.
pub fn partition(n_rows: usize, split: f64, seed: u64, iteration: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_fit = (split * n_rows as f64).round() as usize;
    if n_fit == 0 {
        return Err(Error::EmptyPartition("fit"));
    }
    if n_fit >= n_rows {
        return Err(Error::EmptyPartition("validation"));
    }
    let mut rows: Vec<usize> = (0..n_rows).collect();
    rows.shuffle(&mut stream(seed, PURPOSE_SPLIT, iteration as u64));
    let mut val = rows.split_off(n_fit);
    rows.sort_unstable();
    val.sort_unstable();
    Ok((rows, val))
}

/// Compact cell id of every row over the first `k` ranked features. Ids are
/// assigned in ascending row-major order over the occupied cells only.
fn prefix_cells(table: &SampleTable, features: &[usize]) -> (Vec<u32>, usize) {
    let raw: Vec<u128> = (0..table.n_rows())
        .map(|r| {
            features.iter().fold(0u128, |acc, &f| {
                acc * table.cardinality(f) as u128 + table.code(r, f) as u128
            })
        })
        .collect();
    let mut distinct = raw.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let ids = raw
        .iter()
        .map(|k| distinct.binary_search(k).expect("present") as u32)
        .collect();
    (ids, distinct.len())
}

/// `|L_val - sum_c p_val(c) g_fit(c)|`, imputing `max_loss` for cells that
/// appear in the validation rows but not the fit rows.
fn split_error(losses: &[f64], cells: &[u32], n_cells: usize, fit: &[usize], val: &[usize], max_loss: f64) -> f64 {
    let mut fit_sum = vec![0.0f64; n_cells];
    let mut fit_n = vec![0u32; n_cells];
    for &r in fit {
        let c = cells[r] as usize;
        fit_sum[c] += losses[r];
        fit_n[c] += 1;
    }
    let mut val_n = vec![0u32; n_cells];
    let mut val_sum = 0.0;
    for &r in val {
        val_n[cells[r] as usize] += 1;
        val_sum += losses[r];
    }
    let n_val = val.len() as f64;
    let observed = val_sum / n_val;
    let weighted: f64 = (0..n_cells)
        .filter(|&c| val_n[c] > 0)
        .map(|c| {
            let g = if fit_n[c] > 0 {
                fit_sum[c] / fit_n[c] as f64
            } else {
                max_loss
            };
            val_n[c] as f64 * g
        })
        .sum();
    let predicted = weighted / n_val;
    (observed - predicted).abs()
}

/// The error of predicting the validation loss by the fit-partition mean,
/// i.e. using no context at all.
fn baseline_error(losses: &[f64], fit: &[usize], val: &[usize]) -> f64 {
    let mean = |rows: &[usize]| rows.iter().map(|&r| losses[r]).sum::<f64>() / rows.len() as f64;
    (mean(val) - mean(fit)).abs()
}

/// Mean within-test prediction error of the `k`-feature prefix subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorEstimate {
    pub k: usize,
    pub mean: f64,
    pub samples: Vec<f64>,
}

/// Estimates the expected prediction error of the subspace formed by the
/// first `k` ranked features over `cfg.iterations` random fit/val splits.
pub fn expected_prediction_error(
    table: &SampleTable,
    ranked: &RankedFeatures,
    k: usize,
    cfg: &SplitConfig,
) -> Result<PredictionErrorEstimate> {
    cfg.validate()?;
    if k == 0 || k > ranked.order.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..={}, got {k}",
            ranked.order.len()
        )));
    }
    let (cells, n_cells) = prefix_cells(table, &ranked.order[..k]);
    let max_loss = table.support().max_loss();
    let samples = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| {
            let (fit, val) = partition(table.n_rows(), cfg.split, cfg.seed, it)?;
            Ok(split_error(table.losses(), &cells, n_cells, &fit, &val, max_loss))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PredictionErrorEstimate {
        k,
        mean: mean(&samples),
        samples,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionalityReport {
    /// `epsilon_tilde[k - 1]` is the mean error of the `k`-feature subspace.
    pub epsilon_tilde: Vec<f64>,
    /// `per_iteration_errors[k - 1][it]`.
    pub per_iteration_errors: Vec<Vec<f64>>,
    /// Mean error when predicting without any context.
    pub baseline_error: f64,
    pub chosen_k: usize,
    pub iterations: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub flat_tolerance: f64,
    /// Set when the error curve is flat or rising from `K = 1` and the first
    /// feature does not beat the context-free baseline, both up to
    /// `flat_tolerance * baseline_error`.
    pub uninformative: bool,
}

/// Runs the prediction-error estimate for `K = 1..=k_max` on shared splits and
/// picks the `K` with the smallest mean error (smallest `K` on ties).
pub fn select_dimensionality(
    table: &SampleTable,
    ranked: &RankedFeatures,
    k_max: usize,
    cfg: &SplitConfig,
    flat_tolerance: f64,
) -> Result<DimensionalityReport> {
    cfg.validate()?;
    if k_max == 0 || k_max > ranked.order.len() {
        return Err(Error::InvalidParameter(format!(
            "k_max must lie in 1..={}, got {k_max}",
            ranked.order.len()
        )));
    }
    let prefixes: Vec<(Vec<u32>, usize)> = (1..=k_max)
        .map(|k| prefix_cells(table, &ranked.order[..k]))
        .collect();
    let max_loss = table.support().max_loss();
    let losses = table.losses();

    // one row per iteration: [baseline, K=1, ..., K=k_max]
    let rows = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| {
            let (fit, val) = partition(table.n_rows(), cfg.split, cfg.seed, it)?;
            let mut out = Vec::with_capacity(k_max + 1);
            out.push(baseline_error(losses, &fit, &val));
            for (cells, n_cells) in &prefixes {
                out.push(split_error(losses, cells, *n_cells, &fit, &val, max_loss));
            }
            Ok(out)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let per_iteration_errors: Vec<Vec<f64>> = (1..=k_max)
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect();
    let baseline: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let epsilon_tilde: Vec<f64> = per_iteration_errors.iter().map(|e| mean(e)).collect();
    let best = epsilon_tilde.iter().copied().fold(f64::INFINITY, f64::min);
    let chosen_k = epsilon_tilde
        .iter()
        .position(|&e| e <= best + TIE_EPSILON)
        .expect("non-empty")
        + 1;
    let baseline_error = mean(&baseline);
    let slack = flat_tolerance * baseline_error;
    let first = epsilon_tilde[0];
    let uninformative =
        epsilon_tilde.iter().all(|&e| e >= first - slack) && first >= baseline_error - slack;
    Ok(DimensionalityReport {
        epsilon_tilde,
        per_iteration_errors,
        baseline_error,
        chosen_k,
        iterations: cfg.iterations,
        split_fraction: cfg.split,
        seed: cfg.seed,
        flat_tolerance,
        uninformative,
    })
}
