//! Compressed sparse row matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Real CSR matrix. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets. Duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Shape(alloc::format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            order.clear();
            order.extend(counts[r]..counts[r + 1]);
            order.sort_by_key(|&p| cols[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if cols[p] == last {
                    *data.last_mut().unwrap() += vals[p];
                } else {
                    indices.push(cols[p]);
                    data.push(vals[p]);
                    last = cols[p];
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    /// Builds from per-row sorted (col, value) lists.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                debug_assert!(c < ncols);
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push((i, c, v));
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec length");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Shape(alloc::format!(
                "add {}x{} and {}x{}",
                self.nrows,
                self.ncols,
                other.nrows,
                other.ncols
            )));
        }
        let rows = (0..self.nrows)
            .map(|i| {
                let (ca, va) = self.row(i);
                let (cb, vb) = other.row(i);
                let mut r: Vec<(usize, f64)> = ca.iter().copied().zip(va.iter().copied()).collect();
                r.extend(cb.iter().copied().zip(vb.iter().map(|v| s * v)));
                r
            })
            .collect();
        Ok(Self::from_rows(self.ncols, rows))
    }

    /// `I - dt * self` for a square matrix.
    pub fn identity_minus(&self, dt: f64) -> Result<Self> {
        if self.nrows != self.ncols {
            return Err(Error::Shape("identity_minus needs a square matrix".into()));
        }
        Self::identity(self.nrows).add_scaled(-dt, self)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::Shape(alloc::format!(
                "matmul {}x{} by {}x{}",
                self.nrows,
                self.ncols,
                other.nrows,
                other.ncols
            )));
        }
        let rows = (0..self.nrows)
            .map(|i| {
                let mut r = Vec::new();
                let (ca, va) = self.row(i);
                for (&k, &a) in ca.iter().zip(va) {
                    let (cb, vb) = other.row(k);
                    r.extend(cb.iter().zip(vb).map(|(&c, &b)| (c, a * b)));
                }
                r
            })
            .collect();
        Ok(Self::from_rows(other.ncols, rows))
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                rows[c].push((i, v));
            }
        }
        Self::from_rows(self.nrows, rows)
    }

    /// Submatrix selecting the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (p, &c) in cols.iter().enumerate() {
            map[c] = p;
        }
        let out = rows
            .iter()
            .map(|&i| {
                let (ci, vi) = self.row(i);
                ci.iter()
                    .zip(vi)
                    .filter(|(c, _)| map[**c] != usize::MAX)
                    .map(|(&c, &v)| (map[c], v))
                    .collect()
            })
            .collect();
        Self::from_rows(cols.len(), out)
    }

    /// Horizontal split at column `at`.
    pub fn split_cols(&self, at: usize) -> (Self, Self) {
        let left: Vec<usize> = (0..at).collect();
        let right: Vec<usize> = (at..self.ncols).collect();
        let rows: Vec<usize> = (0..self.nrows).collect();
        (self.select(&rows, &left), self.select(&rows, &right))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[i * self.ncols + c] = v;
            }
        }
        out
    }

    /// Half-bandwidths (lower, upper).
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut up = 0;
        for i in 0..self.nrows {
            let (cols, _) = self.row(i);
            if let (Some(&a), Some(&b)) = (cols.first(), cols.last()) {
                lo = lo.max(i.saturating_sub(a));
                up = up.max(b.saturating_sub(i));
            }
        }
        (lo, up)
    }

    /// Symmetric permutation `P A P^T` with `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        self.select(perm, perm)
    }
}
