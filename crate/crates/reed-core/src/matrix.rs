//! Dense-matrix helpers and a minimal CSR sparse matrix.
//!
//! Dense values are `ndarray::Array2<f64>` throughout the crate; this
//! module adds the small set of norms and constructors the engine
//! needs, plus a compressed-sparse-row matrix for per-relation graph
//! diffusion. The CSR type is deliberately tiny: build once, then
//! multiply against dense matrices (optionally transposed, which the
//! backward pass needs).

use ndarray::Array2;

/// Dense row-major matrix of `f64`.
pub type Mat = Array2<f64>;

/// Frobenius norm of a dense matrix.
pub fn frobenius_norm(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean norm of one row.
pub fn row_norm(m: &Mat, row: usize) -> f64 {
    m.row(row).iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximum Euclidean row norm over all rows; 0 for an empty matrix.
pub fn max_row_norm(m: &Mat) -> f64 {
    (0..m.nrows())
        .map(|i| row_norm(m, i))
        .fold(0.0, f64::max)
}

/// True when `m` is exactly the identity matrix (bitwise 1.0/0.0).
pub fn is_identity(m: &Mat) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    m.indexed_iter()
        .all(|((i, j), &x)| x == if i == j { 1.0 } else { 0.0 })
}

/// Identity matrix of size `n`.
pub fn identity(n: usize) -> Mat {
    Array2::eye(n)
}

/// True when any entry is NaN or infinite.
pub fn has_non_finite(m: &Mat) -> bool {
    m.iter().any(|x| !x.is_finite())
}

/// Compressed-sparse-row matrix.
///
/// Rows are stored as `indptr[r]..indptr[r+1]` slices into `indices`
/// (column ids, strictly increasing within a row) and `data`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) entries. Duplicate coordinates are
    /// summed; zero values are kept out of the structure.
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = entries
            .iter()
            .copied()
            .inspect(|&(r, c, _)| {
                assert!(r < rows && c < cols, "csr entry ({r},{c}) out of {rows}x{cols}");
            })
            .filter(|&(_, _, v)| v != 0.0)
            .collect();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            match merged.last_mut() {
                Some((pr, pc, pv)) if *pr == r && *pc == c => *pv += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut indptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            indptr[r + 1] += 1;
        }
        for i in 1..=rows {
            indptr[i] += indptr[i - 1];
        }
        let indices = merged.iter().map(|&(_, c, _)| c).collect();
        let data = merged.iter().map(|&(_, _, v)| v).collect();
        CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Row slice as (column ids, values).
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    /// Sum of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).1.iter().sum())
            .collect()
    }

    /// Infinity norm: maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `self * dense`, dense result.
    pub fn matmul_dense(&self, b: &Mat) -> Mat {
        assert_eq!(
            self.cols,
            b.nrows(),
            "csr matmul: {}x{} * {}x{}",
            self.rows,
            self.cols,
            b.nrows(),
            b.ncols()
        );
        let mut out = Array2::zeros((self.rows, b.ncols()));
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let mut out_row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let b_row = b.row(c);
                out_row.iter_mut().zip(b_row.iter()).for_each(|(o, &x)| *o += v * x);
            }
        }
        out
    }

    /// `self^T * dense`, dense result.
    pub fn transpose_matmul_dense(&self, b: &Mat) -> Mat {
        assert_eq!(
            self.rows,
            b.nrows(),
            "csr t-matmul: {}x{} ^T * {}x{}",
            self.rows,
            self.cols,
            b.nrows(),
            b.ncols()
        );
        let mut out = Array2::zeros((self.cols, b.ncols()));
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let b_row = b.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let mut out_row = out.row_mut(c);
                out_row.iter_mut().zip(b_row.iter()).for_each(|(o, &x)| *o += v * x);
            }
        }
        out
    }

    /// Materialize as a dense matrix (test oracles, small inputs only).
    pub fn to_dense(&self) -> Mat {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c)] = v;
            }
        }
        out
    }
}
