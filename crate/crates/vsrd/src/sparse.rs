//! Compressed sparse row matrices with the small set of operations the
//! assembly, time stepping, and eigenvalue code need.
//!
//! Assembly accumulates (row, col, value) triplets in a fixed order and
//! compresses them with a stable sort, so repeated runs produce bit-identical
//! matrices.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Triplet accumulator for finite element assembly.
#[derive(Debug, Clone, Default)]
pub struct TripletBuffer {
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    /// Compress into CSR, summing duplicates in insertion order.
    pub fn to_csr(&self, nrows: usize, ncols: usize) -> Csr {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        // Stable sort: duplicates keep insertion order, so the floating-point
        // accumulation order is reproducible.
        order.sort_by_key(|&k| (self.entries[k].0, self.entries[k].1));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = self.entries[k];
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }
}

/// Sparse matrix in compressed sparse row format.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Diagonal matrix from a vector.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
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
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec dimension");
        assert_eq!(y.len(), self.nrows, "matvec dimension");
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    /// u' A v with dimension checking.
    pub fn quadratic_form(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                context: "quadratic_form left vector",
                expected: self.nrows,
                got: u.len(),
            });
        }
        if v.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "quadratic_form right vector",
                expected: self.ncols,
                got: v.len(),
            });
        }
        let mut acc = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut row_acc = 0.0;
            for (&j, &val) in cols.iter().zip(vals) {
                row_acc += val * v[j];
            }
            acc += u[i] * row_acc;
        }
        Ok(acc)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    /// Row-sum lumping: the diagonal matrix with the same row sums.
    pub fn lumped_diagonal(&self) -> Vec<f64> {
        self.row_sums()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// C = alpha * self + beta * other, merging sparsity patterns.
    pub fn add_scaled(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    indices.push(ja);
                    values.push(alpha * va[p]);
                    p += 1;
                } else if jb < ja {
                    indices.push(jb);
                    values.push(beta * vb[q]);
                    q += 1;
                } else {
                    indices.push(ja);
                    values.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Csr {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// max_ij |A_ij - A_ji|; zero for exactly symmetric matrices.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Adjacency of the symmetric pattern, for ordering algorithms.
    pub fn pattern_neighbors(&self) -> Vec<Vec<usize>> {
        assert_eq!(self.nrows, self.ncols);
        let mut adj = vec![Vec::new(); self.nrows];
        for i in 0..self.nrows {
            for &j in self.row(i).0 {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Symmetric permutation B = P A P' with B[p2new[i]][p2new[j]] = A[i][j],
    /// where `old_of_new[k]` is the original index placed at position k.
    pub fn permuted_symmetric(&self, old_of_new: &[usize]) -> Csr {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(old_of_new.len(), self.nrows);
        let mut new_of_old = vec![0usize; self.nrows];
        for (new, &old) in old_of_new.iter().enumerate() {
            new_of_old[old] = new;
        }
        let mut buf = TripletBuffer::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                buf.push(new_of_old[i], new_of_old[j], v);
            }
        }
        buf.to_csr(self.nrows, self.ncols)
    }

    /// Write in Matrix Market coordinate format (general, real).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(f, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(f, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Csr {
        let mut buf = TripletBuffer::new();
        buf.push(0, 0, 2.0);
        buf.push(0, 1, -1.0);
        buf.push(1, 0, -1.0);
        buf.push(1, 1, 2.0);
        buf.push(1, 2, -1.0);
        buf.push(2, 1, -1.0);
        buf.push(2, 2, 2.0);
        buf.to_csr(3, 3)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut buf = TripletBuffer::new();
        buf.push(0, 0, 1.0);
        buf.push(0, 0, 0.5);
        buf.push(1, 1, 3.0);
        let a = buf.to_csr(2, 2);
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.get(1, 1), 3.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn matvec_and_quadratic_form() {
        let a = sample();
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(a.matvec(&x), vec![0.0, 0.0, 4.0]);
        let q = a.quadratic_form(&x, &x).unwrap();
        // x'Ax = 1*0 + 2*0 + 3*4
        assert_eq!(q, 12.0);
        assert!(a
            .quadratic_form(&x[..2], &x)
            .is_err_and(|e| matches!(e, Error::DimensionMismatch { .. })));
    }

    #[test]
    fn add_scaled_merges_patterns() {
        let a = sample();
        let b = Csr::from_diagonal(&[1.0, 1.0, 1.0]);
        let c = a.add_scaled(2.0, &b, 3.0);
        assert_eq!(c.get(0, 0), 7.0);
        assert_eq!(c.get(0, 1), -2.0);
        assert_eq!(c.get(2, 2), 7.0);
    }

    #[test]
    fn permutation_round_trip() {
        let a = sample();
        let perm = vec![2, 0, 1];
        let b = a.permuted_symmetric(&perm);
        for i in 0..3 {
            for j in 0..3 {
                let (pi, pj) = (perm[i], perm[j]);
                assert_eq!(b.get(i, j), a.get(pi, pj));
            }
        }
    }

    #[test]
    fn asymmetry_detects_mismatch() {
        assert_eq!(sample().asymmetry(), 0.0);
        let mut buf = TripletBuffer::new();
        buf.push(0, 1, 1.0);
        buf.push(1, 0, 0.75);
        let a = buf.to_csr(2, 2);
        assert_eq!(a.asymmetry(), 0.25);
    }
}
