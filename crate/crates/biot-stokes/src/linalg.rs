//! Minimal sparse-matrix plumbing: COO assembly buffers, CSR storage with
//! deterministic duplicate summation, block composition into one monolithic
//! matrix, and a direct sparse LU front end (faer) with a dense oracle path.

use crate::error::SolveError;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

/// Assembly buffer of (row, col, value) triplets.
#[derive(Debug, Clone)]
pub struct Coo {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Coo { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    /// Compresses to CSR. Duplicate contributions to one entry are summed in
    /// value-sorted order, so the result is independent of insertion order:
    /// entries built from equal multisets of contributions (transpose pairs,
    /// permuted assembly sweeps) come out bit-identical.
    pub fn to_csr(&self) -> Csr {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by_key(|&e| (self.entries[e].0, self.entries[e].1, e));
        let mut row_counts = vec![0usize; self.nrows + 1];
        let mut cols: Vec<usize> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut group: Vec<f64> = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let (r, c, _) = self.entries[order[i]];
            group.clear();
            while i < order.len() {
                let (r2, c2, v2) = self.entries[order[i]];
                if (r2, c2) != (r, c) {
                    break;
                }
                group.push(v2);
                i += 1;
            }
            group.sort_by(|a, b| a.total_cmp(b));
            cols.push(c);
            vals.push(group.iter().sum());
            row_counts[r + 1] += 1;
        }
        for r in 0..self.nrows {
            row_counts[r + 1] += row_counts[r];
        }
        Csr { nrows: self.nrows, ncols: self.ncols, row_ptr: row_counts, cols, vals }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, row_ptr: vec![0; nrows + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A^T x without forming the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k]] += self.vals[k] * x[r];
            }
        }
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut coo = Coo::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                coo.push(self.cols[k], r, self.vals[k]);
            }
        }
        coo.to_csr()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    pub fn quadform(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(ay.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute entry difference against the transpose of `other`.
    pub fn max_transpose_diff(&self, other: &Csr) -> f64 {
        let a = self.to_dense();
        let b = other.to_dense().transpose();
        (&a - &b).abs().max()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.max_transpose_diff(self) <= tol
    }
}

/// Builder for a block matrix with named row/column offsets.
pub struct BlockCompose {
    coo: Coo,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
}

impl BlockCompose {
    pub fn new(row_sizes: &[usize], col_sizes: &[usize]) -> Self {
        let acc = |sizes: &[usize]| {
            let mut off = vec![0usize];
            for s in sizes {
                off.push(off.last().unwrap() + s);
            }
            off
        };
        let row_offsets = acc(row_sizes);
        let col_offsets = acc(col_sizes);
        BlockCompose {
            coo: Coo::new(*row_offsets.last().unwrap(), *col_offsets.last().unwrap()),
            row_offsets,
            col_offsets,
        }
    }

    /// Adds `scale * block` at block position (bi, bj).
    pub fn add(&mut self, bi: usize, bj: usize, block: &Csr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let r0 = self.row_offsets[bi];
        let c0 = self.col_offsets[bj];
        debug_assert!(block.nrows <= self.row_offsets[bi + 1] - r0);
        debug_assert!(block.ncols <= self.col_offsets[bj + 1] - c0);
        for r in 0..block.nrows {
            for k in block.row_ptr[r]..block.row_ptr[r + 1] {
                self.coo.push(r0 + r, c0 + block.cols[k], scale * block.vals[k]);
            }
        }
    }

    /// Adds `scale * block^T` at block position (bi, bj).
    pub fn add_t(&mut self, bi: usize, bj: usize, block: &Csr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let r0 = self.row_offsets[bi];
        let c0 = self.col_offsets[bj];
        for r in 0..block.nrows {
            for k in block.row_ptr[r]..block.row_ptr[r + 1] {
                self.coo.push(r0 + block.cols[k], c0 + r, scale * block.vals[k]);
            }
        }
    }

    pub fn finish(self) -> Csr {
        self.coo.to_csr()
    }

    pub fn row_offset(&self, bi: usize) -> usize {
        self.row_offsets[bi]
    }
}

/// Direct sparse LU factorization (monolithic saddle-point systems).
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    matrix: Csr,
}

impl SparseLu {
    pub fn factor(matrix: &Csr) -> Result<Self, SolveError> {
        faer::set_global_parallelism(faer::Par::Seq);
        let mut trips = Vec::with_capacity(matrix.vals.len());
        for r in 0..matrix.nrows {
            for k in matrix.row_ptr[r]..matrix.row_ptr[r + 1] {
                trips.push(Triplet::new(r, matrix.cols[k], matrix.vals[k]));
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.nrows, matrix.ncols, &trips)
            .map_err(|e| SolveError::SingularSystem(format!("sparse build failed: {e:?}")))?;
        // The factorization panics on exactly singular input; report that as
        // a SingularSystem error instead of unwinding.
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| a.sp_lu()))
            .map_err(|_| SolveError::SingularSystem("LU factorization aborted".into()))?
            .map_err(|e| SolveError::SingularSystem(format!("LU factorization failed: {e:?}")))?;
        Ok(SparseLu { lu, matrix: matrix.clone() })
    }

    /// Solves to the requested relative residual, erroring otherwise.
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>, SolveError> {
        use faer::prelude::Solve;
        let b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let sol: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
        let r = self.matrix.matvec(&sol);
        let mut rnorm = 0.0f64;
        let mut bnorm = 0.0f64;
        for i in 0..rhs.len() {
            rnorm += (r[i] - rhs[i]) * (r[i] - rhs[i]);
            bnorm += rhs[i] * rhs[i];
        }
        let rel = if bnorm > 0.0 { (rnorm / bnorm).sqrt() } else { rnorm.sqrt() };
        if !rel.is_finite() || rel > tol {
            return Err(SolveError::SolverFailure { residual: rel, tol });
        }
        Ok(sol)
    }
}

/// One-shot direct solve of a sparse system with residual check.
pub fn solve_saddle(matrix: &Csr, rhs: &[f64], tol: f64) -> Result<Vec<f64>, SolveError> {
    SparseLu::factor(matrix)?.solve(rhs, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_sums_duplicates() {
        let mut coo = Coo::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(0, 0, 2.0);
        coo.push(1, 1, -1.0);
        coo.push(0, 1, 4.0);
        let csr = coo.to_csr();
        let d = csr.to_dense();
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(0, 1)], 4.0);
        assert_eq!(d[(1, 0)], 0.0);
        assert_eq!(d[(1, 1)], -1.0);
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let mut coo = Coo::new(3, 3);
        for i in 0..3 {
            coo.push(i, i, 1.0);
        }
        let csr = coo.to_csr();
        let rhs = vec![1.0, -2.0, 3.5];
        let x = solve_saddle(&csr, &rhs, 1e-12).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn sparse_matches_dense_lu_oracle() {
        // Small shifted Laplacian-like asymmetric system.
        let n = 12;
        let mut coo = Coo::new(n, n);
        for i in 0..n {
            coo.push(i, i, 3.0 + 0.1 * i as f64);
            if i + 1 < n {
                coo.push(i, i + 1, -1.0);
                coo.push(i + 1, i, -1.5);
            }
        }
        let csr = coo.to_csr();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.77).sin()).collect();
        let x = solve_saddle(&csr, &rhs, 1e-12).unwrap();
        let dense = csr.to_dense();
        let xd = dense
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&rhs))
            .unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut coo = Coo::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(0, 1, 1.0);
        coo.push(1, 0, 1.0);
        coo.push(1, 1, 1.0);
        let csr = coo.to_csr();
        assert!(solve_saddle(&csr, &[1.0, 0.0], 1e-10).is_err());
    }

    #[test]
    fn transpose_and_matvec_t() {
        let mut coo = Coo::new(2, 3);
        coo.push(0, 1, 2.0);
        coo.push(1, 0, -1.0);
        coo.push(1, 2, 5.0);
        let a = coo.to_csr();
        let at = a.transpose();
        let x = vec![1.0, 2.0];
        assert_eq!(a.matvec_t(&x), at.matvec(&x));
        assert!(a.max_transpose_diff(&at) == 0.0);
    }
}
