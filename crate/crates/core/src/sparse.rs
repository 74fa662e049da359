//! Compressed sparse row storage used for every assembled operator.
//!
//! Construction from triplets sums duplicates in insertion order, so two
//! assemblies that push the same contributions in the same order produce
//! bitwise-identical matrices.

use faer::sparse::{SparseColMat, Triplet};

/// Accumulates `(row, col, value)` contributions.
#[derive(Debug, Clone, Default)]
pub struct TripletList {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletList {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(capacity),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds every stored entry of `block`, scaled, at the given offset.
    pub fn add_block(
        &mut self,
        row_offset: usize,
        col_offset: usize,
        block: &CsrMatrix,
        scale: f64,
    ) {
        for (i, j, v) in block.iter() {
            self.push(row_offset + i, col_offset + j, scale * v);
        }
    }

    /// Adds the transpose of `block`, scaled, at the given offset.
    pub fn add_block_transposed(
        &mut self,
        row_offset: usize,
        col_offset: usize,
        block: &CsrMatrix,
        scale: f64,
    ) {
        for (i, j, v) in block.iter() {
            self.push(row_offset + j, col_offset + i, scale * v);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from triplets, summing duplicates in the order given.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        // counting sort by row keeps insertion order within a row
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in entries {
            assert!(
                i < nrows && j < ncols,
                "triplet ({i},{j}) outside {nrows}x{ncols}"
            );
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; entries.len()];
        let mut next = counts.clone();
        for (k, &(i, _, _)) in entries.iter().enumerate() {
            order[next[i]] = k;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend(
                order[counts[i]..counts[i + 1]]
                    .iter()
                    .map(|&k| (entries[k].1, entries[k].2)),
            );
            // stable: equal columns keep insertion order, so sums are reproducible
            scratch.sort_by_key(|&(j, _)| j);
            let mut it = scratch.iter().peekable();
            while let Some(&(j, v)) = it.next() {
                let mut acc = v;
                while let Some(&&(j2, v2)) = it.peek() {
                    if j2 != j {
                        break;
                    }
                    acc += v2;
                    it.next();
                }
                col_idx.push(j);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from sparse rows given as `(column, value)` lists.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut entries = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for (i, row) in rows.iter().enumerate() {
            entries.extend(row.iter().map(|&(j, v)| (i, j, v)));
        }
        Self::from_triplets(rows.len(), ncols, &entries)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "mul_vec: input length");
        assert_eq!(y.len(), self.nrows, "mul_vec: output length");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y += scale * A x`
    pub fn mul_vec_acc(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
            *yi += scale * s;
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.iter() {
            entries.push((j, i, v));
        }
        Self::from_triplets(self.ncols, self.nrows, &entries)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a·self + b·other`
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletList::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.add_block(0, 0, self, a);
        t.add_block(0, 0, other, b);
        t.build()
    }

    /// Extracts `self[rows, cols]`; `col_map[j]` gives the new column of old column `j`.
    pub fn select(&self, rows: &[usize], col_map: &[Option<usize>], new_ncols: usize) -> CsrMatrix {
        assert_eq!(col_map.len(), self.ncols);
        let mut entries = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(nj) = col_map[j] {
                    entries.push((new_i, nj, v));
                }
            }
        }
        Self::from_triplets(rows.len(), new_ncols, &entries)
    }

    /// Sparse product `self · other` (row-by-row Gustavson).
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul: inner dimensions");
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut acc = vec![0.0f64; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (cols2, vals2) = other.row(k);
                for (&j, &b) in cols2.iter().zip(vals2) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Congruence `left · self · rightᵀ`, the Galerkin projection onto row bases.
    pub fn project(&self, left: &CsrMatrix, right: &CsrMatrix) -> CsrMatrix {
        left.matmul(self).matmul(&right.transpose())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] += v;
        }
        d
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let triplets: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .expect("valid sparse structure")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m =
            CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b =
            CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 4.0), (2, 1, -1.0)]);
        let c = a.matmul(&b);
        assert_eq!(c.to_dense(), vec![vec![9.0, -2.0], vec![0.0, 3.0]]);
        let ct = b.transpose().matmul(&a.transpose());
        assert_eq!(ct.to_dense(), c.transpose().to_dense());
    }

    #[test]
    fn select_and_transpose_products() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (2, 2, 5.0),
            ],
        );
        let sub = a.select(&[1, 2], &[None, Some(0), Some(1)], 2);
        assert_eq!(sub.to_dense(), vec![vec![2.0, 0.0], vec![0.0, 5.0]]);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(a.mul_transpose_vec(&x), a.transpose().mul_vec(&x));
        assert!(a.is_symmetric(0.0));
        assert_eq!(a.quadratic_form(&x), 2.0 - 4.0 + 8.0 + 45.0);
    }
}
