//! Discrete information measures over sample tables, in nats.
//!
//! All estimates are plug-in: probabilities are empirical frequencies with no
//! smoothing, and cells with zero mass contribute nothing (`0 ln 0 = 0`).
//! Sums always run in ascending cell order, so results are reproducible
//! bit-for-bit and independent of row order.

use serde::{Deserialize, Serialize};

use crate::data::SampleTable;
use crate::error::{Error, Result};

/// Default cap on the number of joint cells the interaction-information
/// oracle is willing to materialize.
pub const DEFAULT_ORACLE_CELL_CAP: u128 = 1_000_000;

const DENSE_LIMIT: usize = 1 << 22;

/// A column of a [`SampleTable`]: the loss or one context feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    Loss,
    Feature(usize),
}

impl Var {
    fn cardinality(self, table: &SampleTable) -> usize {
        match self {
            Var::Loss => table.support().len(),
            Var::Feature(j) => table.cardinality(j),
        }
    }

    fn code(self, table: &SampleTable, row: usize) -> u32 {
        match self {
            Var::Loss => table.loss_codes()[row],
            Var::Feature(j) => table.code(row, j),
        }
    }
}

/// Per-row codes of a variable together with its number of levels.
struct Coded {
    codes: Vec<u32>,
    levels: usize,
}

impl Coded {
    fn single(table: &SampleTable, var: Var) -> Result<Self> {
        check_var(table, var)?;
        let codes = (0..table.n_rows()).map(|r| var.code(table, r)).collect();
        Ok(Self {
            codes,
            levels: var.cardinality(table).max(1),
        })
    }

    /// Product code of several variables, relabelled densely onto the
    /// combinations that actually occur (in ascending mixed-radix order).
    fn product(table: &SampleTable, vars: &[Var]) -> Result<Self> {
        match vars {
            [] => Ok(Self {
                codes: vec![0; table.n_rows()],
                levels: 1,
            }),
            [v] => Self::single(table, *v),
            _ => {
                for &v in vars {
                    check_var(table, v)?;
                }
                let radices: Vec<u128> = vars.iter().map(|v| v.cardinality(table) as u128).collect();
                let raw: Vec<u128> = (0..table.n_rows())
                    .map(|r| {
                        vars.iter()
                            .zip(&radices)
                            .fold(0u128, |acc, (v, &rad)| acc * rad + v.code(table, r) as u128)
                    })
                    .collect();
                let mut distinct = raw.clone();
                distinct.sort_unstable();
                distinct.dedup();
                let codes = raw
                    .iter()
                    .map(|k| distinct.binary_search(k).expect("present") as u32)
                    .collect();
                Ok(Self {
                    codes,
                    levels: distinct.len().max(1),
                })
            }
        }
    }
}

fn check_var(table: &SampleTable, var: Var) -> Result<()> {
    match var {
        Var::Feature(j) if j >= table.n_features() => Err(Error::InvalidFeature(j)),
        _ => Ok(()),
    }
}

fn counts_1d(x: &Coded) -> Vec<u64> {
    let mut c = vec![0u64; x.levels];
    for &v in &x.codes {
        c[v as usize] += 1;
    }
    c
}

/// Non-zero joint counts as `(key, count)` pairs in ascending key order, where
/// `key` is the row-major index over the given variables.
fn joint_counts(vars: &[&Coded]) -> Vec<(u128, u64)> {
    let n = vars.first().map_or(0, |v| v.codes.len());
    let size: u128 = vars.iter().map(|v| v.levels as u128).product();
    let key = |r: usize| {
        vars.iter()
            .fold(0u128, |acc, v| acc * v.levels as u128 + v.codes[r] as u128)
    };
    if size <= DENSE_LIMIT as u128 {
        let mut dense = vec![0u64; size as usize];
        for r in 0..n {
            dense[key(r) as usize] += 1;
        }
        dense
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(k, c)| (k as u128, c))
            .collect()
    } else {
        let mut keys: Vec<u128> = (0..n).map(key).collect();
        keys.sort_unstable();
        let mut out: Vec<(u128, u64)> = Vec::new();
        for k in keys {
            match out.last_mut() {
                Some((last, c)) if *last == k => *c += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }
}

fn entropy_coded(x: &Coded) -> f64 {
    let n = x.codes.len() as f64;
    -counts_1d(x)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn mi_coded(x: &Coded, y: &Coded) -> f64 {
    let n = x.codes.len() as f64;
    let cx = counts_1d(x);
    let cy = counts_1d(y);
    let ny = y.levels as u128;
    joint_counts(&[x, y])
        .into_iter()
        .map(|(k, c)| {
            let (a, b) = ((k / ny) as usize, (k % ny) as usize);
            let c = c as f64;
            (c / n) * (c * n / (cx[a] as f64 * cy[b] as f64)).ln()
        })
        .sum()
}

fn cmi_coded(x: &Coded, y: &Coded, z: &Coded) -> f64 {
    let n = x.codes.len() as f64;
    let lz = z.levels as u128;
    let ly = y.levels as u128;
    let cz = counts_1d(z);
    let cxz: std::collections::HashMap<u128, u64> = joint_counts(&[x, z]).into_iter().collect();
    let cyz: std::collections::HashMap<u128, u64> = joint_counts(&[y, z]).into_iter().collect();
    joint_counts(&[x, y, z])
        .into_iter()
        .map(|(k, c)| {
            let zc = k % lz;
            let yc = (k / lz) % ly;
            let xc = k / lz / ly;
            let c = c as f64;
            let nxz = cxz[&(xc * lz + zc)] as f64;
            let nyz = cyz[&(yc * lz + zc)] as f64;
            (c / n) * (c * cz[zc as usize] as f64 / (nxz * nyz)).ln()
        })
        .sum()
}

/// Shannon entropy of the joint of `vars`.
pub fn entropy(table: &SampleTable, vars: &[Var]) -> Result<f64> {
    Ok(entropy_coded(&Coded::product(table, vars)?))
}

/// `I(a; b)` between two columns.
pub fn mutual_information(table: &SampleTable, a: Var, b: Var) -> Result<f64> {
    Ok(mi_coded(&Coded::single(table, a)?, &Coded::single(table, b)?))
}

/// `I(A; B)` where each side is the joint of a set of columns.
pub fn mutual_information_sets(table: &SampleTable, a: &[Var], b: &[Var]) -> Result<f64> {
    Ok(mi_coded(&Coded::product(table, a)?, &Coded::product(table, b)?))
}

/// `I(a; b | given)`.
pub fn conditional_mi(table: &SampleTable, a: Var, b: Var, given: Var) -> Result<f64> {
    conditional_mi_sets(table, &[a], &[b], &[given])
}

/// `I(A; B | G)` over sets of columns. An empty `given` reduces to plain MI.
pub fn conditional_mi_sets(table: &SampleTable, a: &[Var], b: &[Var], given: &[Var]) -> Result<f64> {
    let x = Coded::product(table, a)?;
    let y = Coded::product(table, b)?;
    if given.is_empty() {
        return Ok(mi_coded(&x, &y));
    }
    Ok(cmi_coded(&x, &y, &Coded::product(table, given)?))
}

/// Score of adding `candidate` to `selected`: its MI with the loss minus its
/// summed pairwise MI with every already-selected feature.
pub fn delta_i(table: &SampleTable, candidate: usize, selected: &[usize]) -> Result<f64> {
    if selected.contains(&candidate) {
        return Err(Error::AlreadySelected(candidate));
    }
    let relevance = mutual_information(table, Var::Loss, Var::Feature(candidate))?;
    let redundancy = selected
        .iter()
        .map(|&s| mutual_information(table, Var::Feature(s), Var::Feature(candidate)))
        .sum::<Result<f64>>()?;
    Ok(relevance - redundancy)
}

/// Exact interaction information `I(L, C_s1, ..., C_sK)` by the recursive
/// conditioning definition.
///
/// Cost grows with the product of all cardinalities, so the joint is only
/// materialized when it has at most `cell_cap` cells.
pub fn interaction_information(table: &SampleTable, features: &[usize], cell_cap: u128) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::InvalidParameter(
            "interaction information needs at least one feature".into(),
        ));
    }
    for &f in features {
        check_var(table, Var::Feature(f))?;
    }
    if let [only] = features {
        return mutual_information(table, Var::Loss, Var::Feature(*only));
    }
    let cells = features
        .iter()
        .fold(table.support().len() as u128, |acc, &f| {
            acc.saturating_mul(table.cardinality(f) as u128)
        });
    if cells > cell_cap {
        return Err(Error::OracleCapExceeded { cells, cap: cell_cap });
    }
    let mut vars = vec![Var::Loss];
    vars.extend(features.iter().map(|&f| Var::Feature(f)));
    let joint = JointDistribution::from_table(table, &vars)?;
    let axes: Vec<usize> = (1..=features.len()).collect();
    Ok(joint.interaction_information(0, &axes))
}

/// Dense probability mass over the product of several discrete variables.
///
/// Cells are stored row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    axes: Vec<usize>,
    mass: Vec<f64>,
}

impl JointDistribution {
    /// Validates non-negativity and normalization (to 1e-12).
    pub fn from_mass(axes: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        let size: usize = axes.iter().product();
        if axes.contains(&0) || mass.len() != size {
            return Err(Error::InvalidParameter(format!(
                "mass of length {} does not match axes {:?}",
                mass.len(),
                axes
            )));
        }
        if mass.iter().any(|&m| !m.is_finite() || m < 0.0) {
            return Err(Error::InvalidParameter("negative or non-finite mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mass sums to {total}, not 1")));
        }
        Ok(Self { axes, mass })
    }

    /// Empirical joint of `vars`: `count(cell) / N`.
    pub fn from_table(table: &SampleTable, vars: &[Var]) -> Result<Self> {
        for &v in vars {
            check_var(table, v)?;
        }
        let axes: Vec<usize> = vars.iter().map(|v| v.cardinality(table)).collect();
        let size: usize = axes.iter().product();
        let mut counts = vec![0u64; size];
        for r in 0..table.n_rows() {
            let idx = vars
                .iter()
                .zip(&axes)
                .fold(0usize, |acc, (v, &a)| acc * a + v.code(table, r) as usize);
            counts[idx] += 1;
        }
        let n = table.n_rows() as f64;
        Ok(Self {
            axes,
            mass: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Multi-index of flat cell `cell`.
    pub fn unravel(&self, cell: usize) -> Vec<usize> {
        let mut rem = cell;
        let mut out = vec![0; self.axes.len()];
        for k in (0..self.axes.len()).rev() {
            out[k] = rem % self.axes[k];
            rem /= self.axes[k];
        }
        out
    }

    /// Marginal over the axes in `keep`, in the order given.
    pub fn marginalize(&self, keep: &[usize]) -> JointDistribution {
        let axes: Vec<usize> = keep.iter().map(|&k| self.axes[k]).collect();
        let size: usize = axes.iter().product();
        let mut mass = vec![0.0; size];
        for (cell, &m) in self.mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let idx = self.unravel(cell);
            let flat = keep
                .iter()
                .zip(&axes)
                .fold(0usize, |acc, (&k, &a)| acc * a + idx[k]);
            mass[flat] += m;
        }
        JointDistribution { axes, mass }
    }

    pub fn entropy(&self) -> f64 {
        -self
            .mass
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// `I(X; Y)` where `x` and `y` are sets of axes.
    pub fn mutual_information(&self, x: &[usize], y: &[usize]) -> f64 {
        self.conditional_mi(x, y, &[])
    }

    /// `I(X; Y | Z)` evaluated as the log-ratio sum
    /// `p(x,y,z) ln[p(x,y,z) p(z) / (p(x,z) p(y,z))]`.
    pub fn conditional_mi(&self, x: &[usize], y: &[usize], z: &[usize]) -> f64 {
        let xyz: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
        let xz: Vec<usize> = x.iter().chain(z).copied().collect();
        let yz: Vec<usize> = y.iter().chain(z).copied().collect();
        let p_xyz = self.marginalize(&xyz);
        let p_xz = self.marginalize(&xz);
        let p_yz = self.marginalize(&yz);
        let p_z = self.marginalize(z);
        let (nx, ny) = (x.len(), y.len());
        let flat = |d: &JointDistribution, idx: &[usize]| {
            idx.iter().zip(&d.axes).fold(0usize, |acc, (&i, &a)| acc * a + i)
        };
        let mut total = 0.0;
        for (cell, &p) in p_xyz.mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let idx = p_xyz.unravel(cell);
            let (ix, rest) = idx.split_at(nx);
            let (iy, iz) = rest.split_at(ny);
            let ixz: Vec<usize> = ix.iter().chain(iz).copied().collect();
            let iyz: Vec<usize> = iy.iter().chain(iz).copied().collect();
            let pz = if z.is_empty() { 1.0 } else { p_z.mass[flat(&p_z, iz)] };
            let pxz = p_xz.mass[flat(&p_xz, &ixz)];
            let pyz = p_yz.mass[flat(&p_yz, &iyz)];
            total += p * (p * pz / (pxz * pyz)).ln();
        }
        total
    }

    /// Interaction information between `target` and `features` by recursion:
    /// `I(T, F1..FK) = I(T, F1..F(K-1)) - I(T, F1..F(K-1) | FK)`.
    pub fn interaction_information(&self, target: usize, features: &[usize]) -> f64 {
        self.conditional_interaction(target, features, &mut Vec::new())
    }

    fn conditional_interaction(&self, target: usize, features: &[usize], given: &mut Vec<usize>) -> f64 {
        match features {
            [] => 0.0,
            [only] => self.conditional_mi(&[target], &[*only], given),
            [head @ .., last] => {
                let outer = self.conditional_interaction(target, head, given);
                given.push(*last);
                let inner = self.conditional_interaction(target, head, given);
                given.pop();
                outer - inner
            }
        }
    }
}
