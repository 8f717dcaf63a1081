//! Truncated PDD basis: multi-index enumeration, basis counting and design
//! matrix assembly.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::orthopoly::OrthoBasis1D;

/// One multivariate basis function `Π_{i∈U} ψ_{i, j_i}(z_i)`. The constant
/// function has empty `vars`. Variable indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexEntry {
    pub vars: Vec<usize>,
    pub degrees: Vec<usize>,
}

impl IndexEntry {
    pub fn constant() -> Self {
        Self {
            vars: Vec::new(),
            degrees: Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.degrees.iter().sum()
    }
}

/// Ordered index set of an `S`-variate, `m`th-order PDD in `N` variables.
///
/// Order: constant first, then by `|U|`, then lexicographic `U`, then
/// lexicographic degree vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    n: usize,
    s: usize,
    m: usize,
    entries: Vec<IndexEntry>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn check_truncation(n: usize, s: usize, m: usize) -> Result<()> {
    if s == 0 || s > n || m < s {
        return Err(Error::InvalidTruncation { n, s, m });
    }
    Ok(())
}

/// `L = 1 + Σ_{s=1}^{S} C(N, s) · C(m, s)`.
pub fn count_l(n: usize, s: usize, m: usize) -> Result<usize> {
    check_truncation(n, s, m)?;
    Ok(1 + (1..=s).map(|k| binomial(n, k) * binomial(m, k)).sum::<usize>())
}

/// All sorted `k`-subsets of `0..n`, lexicographic.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in start..n {
            prefix.push(i);
            rec(n, k, i + 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// All positive integer vectors of length `k` with sum ≤ `m`, lexicographic.
fn degree_vectors(k: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, budget: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        let remaining = k - prefix.len() - 1;
        if budget < remaining + 1 {
            return;
        }
        for j in 1..=budget - remaining {
            prefix.push(j);
            rec(k, budget - j, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, &mut Vec::with_capacity(k), &mut out);
    out
}

impl MultiIndexSet {
    pub fn new(n: usize, s: usize, m: usize) -> Result<Self> {
        check_truncation(n, s, m)?;
        let mut entries = vec![IndexEntry::constant()];
        for size in 1..=s {
            for vars in subsets(n, size) {
                for degrees in degree_vectors(size, m) {
                    entries.push(IndexEntry {
                        vars: vars.clone(),
                        degrees,
                    });
                }
            }
        }
        Ok(Self { n, s, m, entries })
    }

    /// Rebuilds a set from explicit entries after checking every invariant.
    pub fn from_entries(n: usize, s: usize, m: usize, entries: Vec<IndexEntry>) -> Result<Self> {
        let canonical = Self::new(n, s, m)?;
        if canonical.entries != entries {
            return Err(Error::DimensionMismatch(format!(
                "index entries do not match the canonical (N={n}, S={s}, m={m}) set"
            )));
        }
        Ok(canonical)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Position of a `(U, j_U)` pair, if present.
    pub fn position(&self, vars: &[usize], degrees: &[usize]) -> Option<usize> {
        self.entries.iter().position(|e| e.vars == vars && e.degrees == degrees)
    }
}

pub fn build_index_set(n: usize, s: usize, m: usize) -> Result<MultiIndexSet> {
    MultiIndexSet::new(n, s, m)
}

fn check_bases(bases: &[OrthoBasis1D], idx: &MultiIndexSet) -> Result<()> {
    if bases.len() != idx.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} bases for N = {}",
            bases.len(),
            idx.n()
        )));
    }
    if let Some((i, b)) = bases.iter().enumerate().find(|(_, b)| b.max_degree() < idx.m()) {
        return Err(Error::DimensionMismatch(format!(
            "basis {i} built to degree {} < m = {}",
            b.max_degree(),
            idx.m()
        )));
    }
    Ok(())
}

/// Writes the basis row at `z` into `out` (length `L`).
pub fn basis_row_into(
    bases: &[OrthoBasis1D],
    idx: &MultiIndexSet,
    z: &[f64],
    scratch: &mut [Vec<f64>],
    out: &mut [f64],
) {
    let m = idx.m();
    for (i, (b, zi)) in bases.iter().zip(z).enumerate() {
        scratch[i].resize(m + 1, 0.0);
        b.eval_all_into(*zi, &mut scratch[i]);
    }
    for (k, e) in idx.entries().iter().enumerate() {
        out[k] = e.vars.iter().zip(&e.degrees).map(|(&i, &j)| scratch[i][j]).product();
    }
}

pub fn basis_row(bases: &[OrthoBasis1D], idx: &MultiIndexSet, z: &[f64]) -> Result<Vec<f64>> {
    check_bases(bases, idx)?;
    if z.len() != idx.n() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, expected {}",
            z.len(),
            idx.n()
        )));
    }
    let mut scratch = vec![Vec::new(); idx.n()];
    let mut out = vec![0.0; idx.len()];
    basis_row_into(bases, idx, z, &mut scratch, &mut out);
    Ok(out)
}

/// `A[l][k] = Ψ_k(z^(l))`, an `M × L` matrix with an all-ones first column.
pub fn design_matrix(bases: &[OrthoBasis1D], idx: &MultiIndexSet, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_bases(bases, idx)?;
    if z.ncols() != idx.n() {
        return Err(Error::DimensionMismatch(format!(
            "sample matrix has {} columns, expected {}",
            z.ncols(),
            idx.n()
        )));
    }
    let rows = z.nrows();
    let l = idx.len();
    let data: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let point: Vec<f64> = z.row(r).iter().copied().collect();
            let mut scratch = vec![Vec::new(); idx.n()];
            let mut out = vec![0.0; l];
            basis_row_into(bases, idx, &point, &mut scratch, &mut out);
            out
        })
        .collect();
    Ok(DMatrix::from_fn(rows, l, |r, c| data[r][c]))
}
