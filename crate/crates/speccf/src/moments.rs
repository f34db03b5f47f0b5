//! Single-pass estimators for the item marginal, the pairwise co-occurrence
//! probability matrix, and the whitened third moment.

use std::collections::HashMap;

use ndarray::{Array1, ArrayView2};

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::tensor::SymmetricTensor3;

/// The whitened third moment is a plain symmetric tensor of side `K`.
pub type WhitenedTriple = SymmetricTensor3;

/// Item occurrence frequencies: entry `d` is the column count of item `d`
/// divided by the total interaction count. Consumes one data pass.
pub fn estimate_m1(x: &InteractionMatrix) -> Result<Array1<f64>> {
    let mut counts = vec![0u64; x.n_items()];
    for row in x.scan_rows() {
        for &item in row {
            counts[item as usize] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::AllRowsEmpty);
    }
    Ok(Array1::from_iter(
        counts.iter().map(|&c| c as f64 / total as f64),
    ))
}

/// Sparse symmetric pairwise probability matrix. Entries are nonnegative and
/// sum to one; both `(i, j)` and `(j, i)` are stored so row iteration and
/// matrix-vector products are direct.
#[derive(Debug, Clone)]
pub struct PairwiseMoment {
    dim: usize,
    include_diagonal: bool,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl PairwiseMoment {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn include_diagonal(&self) -> bool {
        self.include_diagonal
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Sum of all stored entries.
    pub fn sum(&self) -> f64 {
        self.vals.iter().sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.cols[lo..hi].binary_search(&(j as u32)) {
            Ok(pos) => self.vals[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |p| (i, self.cols[p] as usize, self.vals[p]))
        })
    }

    /// `y = M x` over the sparse pattern.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p] as usize];
            }
            y[i] = acc;
        }
    }

    /// Lower bound on the smallest eigenvalue via Gershgorin discs.
    pub fn gershgorin_lower_bound(&self) -> f64 {
        let mut bound = f64::INFINITY;
        for i in 0..self.dim {
            let mut diag = 0.0;
            let mut off = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[p] as usize == i {
                    diag = self.vals[p];
                } else {
                    off += self.vals[p].abs();
                }
            }
            bound = bound.min(diag - off);
        }
        if bound.is_finite() {
            bound
        } else {
            0.0
        }
    }

    /// Builds the matrix from a dense symmetric array with nonnegative
    /// finite entries. Entries are not rescaled; estimator outputs sum to
    /// one by construction.
    pub fn from_dense(values: ArrayView2<'_, f64>, include_diagonal: bool) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "pairwise moment must be square, got {r} x {c}"
            )));
        }
        for i in 0..r {
            for j in 0..r {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "pairwise entry at ({i}, {j}) is {v}"
                    )));
                }
                if (v - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidMatrix(format!(
                        "pairwise moment not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(r + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..r {
            for j in 0..r {
                let v = values[(i, j)];
                if v != 0.0 {
                    cols.push(j as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(PairwiseMoment {
            dim: r,
            include_diagonal,
            row_ptr,
            cols,
            vals,
        })
    }
}

/// Estimates the pairwise probability matrix from one pass over the rows.
///
/// Co-occurrence counts are accumulated as exact integers and divided by the
/// total count once at the end, so the result is bit-identical for any row
/// processing order. With `include_diagonal = false` the self-pairs are
/// dropped and the normalizer shrinks accordingly.
pub fn estimate_m2(x: &InteractionMatrix, include_diagonal: bool) -> Result<PairwiseMoment> {
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut normalizer: u128 = 0;
    for row in x.scan_rows() {
        let n = row.len() as u128;
        normalizer += if include_diagonal {
            n * n
        } else {
            n * n.saturating_sub(1)
        };
        for (pos, &a) in row.iter().enumerate() {
            let start = if include_diagonal { pos } else { pos + 1 };
            for &b in &row[start..] {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    if normalizer == 0 {
        return Err(Error::AllRowsEmpty);
    }

    let scale = normalizer as f64;
    let mut triples: Vec<(u32, u32, u64)> = Vec::with_capacity(counts.len() * 2);
    for (&(a, b), &c) in &counts {
        triples.push((a, b, c));
        if a != b {
            triples.push((b, a, c));
        }
    }
    triples.sort_unstable();

    let dim = x.n_items();
    let mut row_ptr = vec![0usize; dim + 1];
    let mut cols = Vec::with_capacity(triples.len());
    let mut vals = Vec::with_capacity(triples.len());
    let mut current = 0usize;
    for (a, b, c) in triples {
        let a = a as usize;
        while current < a {
            current += 1;
            row_ptr[current] = cols.len();
        }
        cols.push(b);
        vals.push(c as f64 / scale);
    }
    while current < dim {
        current += 1;
        row_ptr[current] = cols.len();
    }

    Ok(PairwiseMoment {
        dim,
        include_diagonal,
        row_ptr,
        cols,
        vals,
    })
}

/// Estimates the whitened third moment in one pass without materializing the
/// full third-order tensor: each row contributes the cube of its whitened
/// profile `z = sum of W rows over the row's items`, at cost
/// `Theta(nnz * K + K^3)` per row. Cells accumulate with compensated
/// summation; the normalizer is the exact sum of cubed row sizes.
pub fn estimate_whitened_m3(
    x: &InteractionMatrix,
    w: ArrayView2<'_, f64>,
) -> Result<WhitenedTriple> {
    let (rows, k) = w.dim();
    if rows != x.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "whitening matrix has {rows} rows but the data has {} items",
            x.n_items()
        )));
    }
    if k == 0 || k > x.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "whitening matrix has {k} columns for {} items",
            x.n_items()
        )));
    }

    let cells = k * k * k;
    let mut sums = vec![0.0f64; cells];
    let mut comps = vec![0.0f64; cells];
    let mut z = vec![0.0f64; k];
    let mut normalizer: u128 = 0;

    for row in x.scan_rows() {
        if row.is_empty() {
            continue;
        }
        let n = row.len() as u128;
        normalizer += n * n * n;
        z.iter_mut().for_each(|v| *v = 0.0);
        for &item in row {
            for c in 0..k {
                z[c] += w[(item as usize, c)];
            }
        }
        for i in 0..k {
            for j in i..k {
                let zij = z[i] * z[j];
                for l in j..k {
                    let idx = (i * k + j) * k + l;
                    // Kahan step.
                    let y = zij * z[l] - comps[idx];
                    let t = sums[idx] + y;
                    comps[idx] = (t - sums[idx]) - y;
                    sums[idx] = t;
                }
            }
        }
    }
    if normalizer == 0 {
        return Err(Error::AllRowsEmpty);
    }

    let scale = 1.0 / normalizer as f64;
    let mut tensor = SymmetricTensor3::zeros(k);
    for i in 0..k {
        for j in i..k {
            for l in j..k {
                let idx = (i * k + j) * k + l;
                tensor.write_symmetric(i, j, l, sums[idx] * scale);
            }
        }
    }
    Ok(tensor)
}
