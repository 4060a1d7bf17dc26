//! Compressed sparse row storage and the direct solver behind it.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Collects `(row, col, value)` contributions; duplicates are summed on
/// [`finish`](TripletBuilder::finish) in insertion order.
#[derive(Clone, Debug)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn finish(mut self) -> SparseMatrix<T> {
        // Stable sort keeps the summation order of duplicates fixed.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            cols,
            vals,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, T::one());
        }
        b.finish()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates `(col, value)` over row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols, "vector length");
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (r, c, v) in self.triplets() {
            b.push(c, r, v);
        }
        b.finish()
    }

    pub fn max_abs(&self) -> T {
        self.vals.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> T {
        self.vals.iter().copied().sum()
    }

    /// Row-major dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] += v;
        }
        out
    }
}

/// Solves `A x = b` by sparse LU with partial pivoting.
///
/// The factorization runs in double precision. The returned solution is
/// checked against `‖Ax − b‖₂ ≤ 1e-10 (‖A‖_max ‖x‖₂ + ‖b‖₂)` (relaxed to the
/// scalar type's precision for `f32`).
pub fn solve_sparse<T: Real>(a: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("matrix is {}x{}", n, a.ncols())));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} entries, matrix has {n} rows",
            b.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let trips: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v.as_f64())).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::Singular(format!("matrix assembly failed: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::Singular(format!("LU factorization failed: {e:?}")))?;
    let rhs = Col::<f64>::from_fn(n, |i| b[i].as_f64());
    let sol = lu.solve(&rhs);
    let x: Vec<T> = (0..n).map(|i| T::lit(sol[i])).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("solution has non-finite entries (zero pivot)".into()));
    }

    let ax = a.mul_vec(&x);
    let res = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (*p - *q).powi(2))
        .sum::<T>()
        .sqrt()
        .as_f64();
    let xn = x.iter().map(|v| v.powi(2)).sum::<T>().sqrt().as_f64();
    let bn = b.iter().map(|v| v.powi(2)).sum::<T>().sqrt().as_f64();
    let tol = 1e-10f64.max(T::epsilon_f64() * 1e3);
    let bound = tol * (a.max_abs().as_f64() * xn + bn);
    if !(res <= bound) && res > 0.0 {
        return Err(Error::Singular(format!(
            "residual {res:.3e} exceeds {bound:.3e}; estimated condition ≳ {:.1e}",
            res / (bound.max(f64::MIN_POSITIVE)) / tol
        )));
    }
    Ok(x)
}
