//! Small dense linear algebra on `f64` slices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Inner product, summed left to right.
///
/// Membership tests and linear push-forwards both go through this function,
/// so `contains(P, x)` and `contains(orthant, A x)` see bit-identical values.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
    }
    s.sqrt()
}

/// Unit vector in the direction of `a`, or `None` for a (near) zero vector.
pub fn normalize(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 1e-300 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

/// Pairwise (tree) summation. Fixed association order, so the result only
/// depends on the input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if v.len() <= LEAF {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        s
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::EmptyInput("matrix has no rows"));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(Error::EmptyInput("matrix has no columns"));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dim(c, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate().take(self.rows) {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// Spectral norm estimate by power iteration on `AᵀA`.
    pub fn operator_norm(&self, iters: usize) -> f64 {
        // Deterministic start vector with no special alignment.
        let mut v: Vec<f64> = (0..self.cols).map(|k| 1.0 + 0.1 * k as f64).collect();
        let mut est = 0.0;
        for _ in 0..iters {
            let Some(u) = normalize(&v) else { return 0.0 };
            let w = self.mul_t_vec(&self.mul_vec(&u));
            let n = norm(&w);
            if n == 0.0 {
                return 0.0;
            }
            if (n - est).abs() <= 1e-15 * n {
                est = n;
                break;
            }
            est = n;
            v = w;
        }
        est.sqrt()
    }
}

/// Numerical rank of a set of row vectors: singular values above `tol`.
pub fn rank(rows: &[&[f64]], tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let m = DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()));
    m.rank(tol)
}

/// Solve the square system `A x = b`. Returns `None` when the smallest
/// singular value of `A` is at most `tol`.
pub fn solve(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return None;
    }
    let m = DMatrix::from_row_iterator(n, n, a.iter().flat_map(|r| r.iter().copied()));
    let svd = m.svd(true, true);
    if svd.singular_values.iter().any(|&s| s <= tol) {
        return None;
    }
    let x = svd.solve(&DVector::from_column_slice(b), 0.0).ok()?;
    Some(x.iter().copied().collect())
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt with
/// re-orthogonalization); vectors within `tol` of the current span are skipped.
pub fn orthonormal_basis(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let n = norm(&w);
        if n > tol {
            basis.push(scale(&w, 1.0 / n));
        }
    }
    basis
}
