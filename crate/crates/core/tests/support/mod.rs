//! Random-table builders and brute-force information-theory oracles.
//!
//! The oracles work on raw code columns with hash-map counting and never call
//! into the library's estimators.

#![allow(dead_code)]

use std::collections::HashMap;
use std::hash::Hash;

use contextspace_core::{ContextSchema, FeatureDescriptor, SampleTable};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn categorical_schema(cards: &[usize]) -> ContextSchema {
    ContextSchema::new(
        cards
            .iter()
            .enumerate()
            .map(|(j, &c)| FeatureDescriptor::categorical(format!("f{j}"), (0..c).map(|k| format!("v{k}")).collect()))
            .collect(),
    )
    .unwrap()
}

/// Table with the given feature cardinalities whose loss takes `loss_card`
/// values. The loss copies a random function of the first two features with
/// probability `signal`, and is uniform otherwise.
pub fn random_table(rng: &mut impl Rng, n: usize, cards: &[usize], loss_card: usize, signal: f64) -> SampleTable {
    let j = cards.len();
    let mut codes = Vec::with_capacity(n * j);
    let mut losses = Vec::with_capacity(n);
    let table: Vec<u32> = (0..64).map(|_| rng.random_range(0..loss_card as u32)).collect();
    for _ in 0..n {
        let row: Vec<u32> = cards.iter().map(|&c| rng.random_range(0..c as u32)).collect();
        let l = if rng.random::<f64>() < signal {
            let a = row.first().copied().unwrap_or(0) as usize;
            let b = row.get(1).copied().unwrap_or(0) as usize;
            table[(a * 8 + b) % 64]
        } else {
            rng.random_range(0..loss_card as u32)
        };
        losses.push(l as f64);
        codes.extend(row);
    }
    SampleTable::new(categorical_schema(cards), losses, codes).unwrap()
}

/// Random table shape: up to `max_features` features with cardinality 2..=`max_card`.
pub fn random_shape(rng: &mut impl Rng, max_features: usize, max_card: usize) -> Vec<usize> {
    let j = rng.random_range(1..=max_features);
    (0..j).map(|_| rng.random_range(2..=max_card)).collect()
}

pub fn loss_column(table: &SampleTable) -> Vec<u32> {
    table.loss_codes().to_vec()
}

pub fn feature_column(table: &SampleTable, j: usize) -> Vec<u32> {
    table.feature_codes(j).collect()
}

fn counts<K: Hash + Eq>(keys: impl Iterator<Item = K>) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

fn distinct(col: &[u32]) -> Vec<u32> {
    let mut v = col.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// `sum_{l,c} p(l,c) ln(p(l,c) / (p(l) p(c)))`, looping over every value pair.
pub fn mi_eq5(l: &[u32], c: &[u32]) -> f64 {
    let n = l.len() as f64;
    let pl = counts(l.iter().copied());
    let pc = counts(c.iter().copied());
    let plc = counts(l.iter().copied().zip(c.iter().copied()));
    let mut total = 0.0;
    for &lv in &distinct(l) {
        for &cv in &distinct(c) {
            let Some(&joint) = plc.get(&(lv, cv)) else { continue };
            let p = joint as f64 / n;
            let p_l = pl[&lv] as f64 / n;
            let p_c = pc[&cv] as f64 / n;
            total += p * (p / (p_l * p_c)).ln();
        }
    }
    total
}

/// `I(L; C2 | C1) = sum p(l,c1,c2) ln(p(c1) p(l,c1,c2) / (p(l,c1) p(c1,c2)))`.
pub fn cmi_eq8(l: &[u32], c2: &[u32], c1: &[u32]) -> f64 {
    let n = l.len() as f64;
    let p1 = counts(c1.iter().copied());
    let pl1 = counts(l.iter().copied().zip(c1.iter().copied()));
    let p12 = counts(c1.iter().copied().zip(c2.iter().copied()));
    let pl12 = counts((0..l.len()).map(|i| (l[i], c1[i], c2[i])));
    let mut total = 0.0;
    for &lv in &distinct(l) {
        for &a in &distinct(c1) {
            for &b in &distinct(c2) {
                let Some(&joint) = pl12.get(&(lv, a, b)) else { continue };
                let p = joint as f64 / n;
                let num = (p1[&a] as f64 / n) * p;
                let den = (pl1[&(lv, a)] as f64 / n) * (p12[&(a, b)] as f64 / n);
                total += p * (num / den).ln();
            }
        }
    }
    total
}

/// Joint entropy of several columns.
pub fn entropy(cols: &[&[u32]]) -> f64 {
    if cols.is_empty() {
        return 0.0;
    }
    let n = cols[0].len();
    let c = counts((0..n).map(|i| cols.iter().map(|col| col[i]).collect::<Vec<u32>>()));
    let mut probs: Vec<f64> = c.values().map(|&k| k as f64 / n as f64).collect();
    probs.sort_by(f64::total_cmp);
    -probs.iter().map(|p| p * p.ln()).sum::<f64>()
}

/// Interaction information of all `cols` by inclusion-exclusion over subsets:
/// `-sum_{T subset V} (-1)^|T| H(T)`.
pub fn ii_expansion(cols: &[&[u32]]) -> f64 {
    let v = cols.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << v) {
        let subset: Vec<&[u32]> = (0..v).filter(|k| mask & (1 << k) != 0).map(|k| cols[k]).collect();
        let sign = if subset.len().is_multiple_of(2) { 1.0 } else { -1.0 };
        total -= sign * entropy(&subset);
    }
    total
}

/// Argmax with ties to the lowest index, treating values within `tol` as tied.
pub fn argmax_lowest(values: &[f64], tol: f64) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| v >= best - tol).unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Exact joint over `(L, C1, C2)` with `C1` independent of `C2` and
/// `p(L = 1 | c1, c2) = eps * w(c1, c2)`. As `eps` shrinks, `p(l | c2)` tends
/// to 1 on every populated combination.
pub fn appendix_family(eps: f64) -> contextspace_core::JointDistribution {
    let p1 = [0.5, 0.3, 0.2];
    let p2 = [0.1, 0.2, 0.3, 0.4];
    let mut mass = [0.0; 2 * 3 * 4];
    for (a, pa) in p1.iter().enumerate() {
        for (b, pb) in p2.iter().enumerate() {
            let w = (1.0 + a as f64 + 2.0 * b as f64) / 9.0;
            let fail = eps * w;
            mass[a * 4 + b] = pa * pb * (1.0 - fail);
            mass[12 + a * 4 + b] = pa * pb * fail;
        }
    }
    let total: f64 = mass.iter().sum();
    contextspace_core::JointDistribution::from_mass(vec![2, 3, 4], mass.iter().map(|m| m / total).collect()).unwrap()
}

/// Entropy of the marginal of a dense row-major joint over the axes in `keep`.
pub fn mass_entropy(axes: &[usize], mass: &[f64], keep: &[usize]) -> f64 {
    let mut marginal: HashMap<Vec<usize>, f64> = HashMap::new();
    for (cell, &m) in mass.iter().enumerate() {
        let mut rem = cell;
        let mut idx = vec![0; axes.len()];
        for k in (0..axes.len()).rev() {
            idx[k] = rem % axes[k];
            rem /= axes[k];
        }
        *marginal.entry(keep.iter().map(|&k| idx[k]).collect()).or_insert(0.0) += m;
    }
    let mut probs: Vec<f64> = marginal.into_values().filter(|&p| p > 0.0).collect();
    probs.sort_by(f64::total_cmp);
    -probs.iter().map(|p| p * p.ln()).sum::<f64>()
}

/// Inclusion-exclusion interaction information of every axis of a dense joint.
pub fn mass_ii_expansion(axes: &[usize], mass: &[f64]) -> f64 {
    let v = axes.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << v) {
        let keep: Vec<usize> = (0..v).filter(|k| mask & (1 << k) != 0).collect();
        let sign = if keep.len().is_multiple_of(2) { 1.0 } else { -1.0 };
        total -= sign * mass_entropy(axes, mass, &keep);
    }
    total
}

/// `|delta_I(L, C1, C2) - I(L, C1, C2)|` on the appendix family.
pub fn appendix_gap(eps: f64) -> f64 {
    let j = appendix_family(eps);
    let delta = j.mutual_information(&[0], &[2]) - j.mutual_information(&[1], &[2]);
    (delta - j.interaction_information(0, &[1, 2])).abs()
}

pub const APPENDIX_EPSILONS: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.01];
