//! Dense linear-algebra kernels: SPD Cholesky solves, a one-sided Jacobi
//! singular value decomposition, and the rank-revealing pseudoinverse.
//!
//! # Overview
//! The solvers need exactly three nontrivial factorizations: a symmetric
//! positive-definite solve (the amplitude re-fit), a thin SVD (pseudoinverse
//! and null-space bases), and the pseudoinverse built on top of it. All are
//! hand-written over contiguous buffers so the crate stays pure Rust with no
//! BLAS/LAPACK dependency and bit-reproducible results across platforms.
//!
//! The Jacobi SVD iterates plane rotations until all column pairs are
//! numerically orthogonal; it is slower than blocked bidiagonalization but
//! accurate to a few ulps, which the derived-operator tolerances rely on.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Thin singular value decomposition `a = u * diag(sigma) * v^T`.
///
/// For an input with `r` rows and `c` columns (`r >= c`), `u` is `r x c` with
/// orthonormal columns, `sigma` is length `c` in non-increasing order, and
/// `v` is `c x c` orthogonal.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Array2<T>,
    pub sigma: Array1<T>,
    pub v: Array2<T>,
}

/// Row-major matrix helper over a plain buffer; rows are contiguous slices.
struct Rows<T> {
    data: Vec<T>,
    cols: usize,
}

impl<T: Scalar> Rows<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Rows {
            data: vec![T::zero(); rows * cols],
            cols,
        }
    }

    fn eye(n: usize) -> Self {
        let mut m = Rows::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutable views of two distinct rows.
    #[inline]
    fn row_pair_mut(&mut self, i: usize, j: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(i < j);
        let (head, tail) = self.data.split_at_mut(j * self.cols);
        (
            &mut head[i * self.cols..(i + 1) * self.cols],
            &mut tail[..self.cols],
        )
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * *y;
    }
    acc
}

/// Applies the rotation `[c -s; s c]` to a row pair in place.
#[inline]
fn rotate<T: Scalar>(p: &mut [T], q: &mut [T], cos: T, sin: T) {
    for (a, b) in p.iter_mut().zip(q.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = cos * x - sin * y;
        *b = sin * x + cos * y;
    }
}

/// One-sided Jacobi SVD of a tall-or-square matrix (`rows >= cols`).
///
/// Iterates sweeps of plane rotations until every column pair is orthogonal
/// to within a few ulps, then reads singular values off the column norms.
/// Deterministic: fixed sweep order, no data-dependent branching beyond the
/// convergence test.
pub fn thin_svd<T: Scalar>(a: &Array2<T>) -> Result<Svd<T>> {
    let (r, c) = a.dim();
    if r < c {
        return Err(Error::DimMismatch {
            context: "thin_svd rows >= cols",
            expected: c,
            found: r,
        });
    }
    // Work on the transpose so the columns being orthogonalized are
    // contiguous rows of the buffer.
    let mut w = Rows::zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            w.data[j * r + i] = a[(i, j)];
        }
    }
    let mut v = Rows::<T>::eye(c);

    let tol = T::epsilon() * T::from_usize_lossy(c.max(8));
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..c.saturating_sub(1) {
            for q in (p + 1)..c {
                let app = dot(w.row(p), w.row(p));
                let aqq = dot(w.row(q), w.row(q));
                let apq = dot(w.row(p), w.row(q));
                let scale = (app * aqq).sqrt();
                if apq.abs() <= tol * scale || scale == T::zero() {
                    continue;
                }
                let tau = (aqq - app) / (apq + apq);
                let t = {
                    let sign = if tau < T::zero() { -T::one() } else { T::one() };
                    sign / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let cos = T::one() / (T::one() + t * t).sqrt();
                let sin = cos * t;
                {
                    let (rp, rq) = w.row_pair_mut(p, q);
                    rotate(rp, rq, cos, sin);
                }
                {
                    let (rp, rq) = v.row_pair_mut(p, q);
                    rotate(rp, rq, cos, sin);
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    // Singular values are the column norms; sort descending.
    let mut order: Vec<usize> = (0..c).collect();
    let norms: Vec<T> = (0..c).map(|j| dot(w.row(j), w.row(j)).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));

    let mut u = Array2::zeros((r, c));
    let mut sigma = Array1::zeros(c);
    let mut vmat = Array2::zeros((c, c));
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma[k] = s;
        if s > T::zero() {
            let wr = w.row(j);
            for i in 0..r {
                u[(i, k)] = wr[i] / s;
            }
        }
        let vr = v.row(j);
        for i in 0..c {
            vmat[(i, k)] = vr[i];
        }
    }
    Ok(Svd {
        u,
        sigma,
        v: vmat,
    })
}

/// Moore-Penrose pseudoinverse with a rank cutoff relative to the largest
/// singular value; returns the pseudoinverse and the numerical rank.
///
/// Singular values `<= rel_tol * sigma_max` are treated as zero.
pub fn pseudo_inverse<T: Scalar>(a: &Array2<T>, rel_tol: T) -> Result<(Array2<T>, usize)> {
    let (r, c) = a.dim();
    if r < c {
        let (p, rank) = pseudo_inverse(&a.t().to_owned(), rel_tol)?;
        return Ok((p.t().to_owned(), rank));
    }
    let svd = thin_svd(a)?;
    let smax = svd.sigma[0];
    let cut = rel_tol * smax;
    let rank = svd
        .sigma
        .iter()
        .take_while(|&&s| s > cut && s > T::zero())
        .count();
    // pinv = V_k * diag(1/sigma_k) * U_k^T  (c x r)
    let mut pinv = Array2::zeros((c, r));
    if rank > 0 {
        let mut v_scaled = Array2::zeros((c, rank));
        for k in 0..rank {
            let inv = T::one() / svd.sigma[k];
            for i in 0..c {
                v_scaled[(i, k)] = svd.v[(i, k)] * inv;
            }
        }
        let ut = svd.u.slice(ndarray::s![.., ..rank]).t().to_owned();
        pinv = v_scaled.dot(&ut);
    }
    Ok((pinv, rank))
}

/// Cholesky factorization `a = l * l^T` of a symmetric positive-definite
/// matrix; returns the lower factor.
pub fn cholesky_factor<T: Scalar>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimMismatch {
            context: "cholesky square matrix",
            expected: n,
            found: a.ncols(),
        });
    }
    // Row-major lower-triangular factor; inner products run over contiguous
    // row prefixes.
    let mut l = Rows::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            let aij = a[(i, j)] - s;
            if i == j {
                if aij <= T::zero() || !aij.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: i });
                }
                l.data[i * n + i] = aij.sqrt();
            } else {
                let ljj = l.row(j)[j];
                l.data[i * n + j] = aij / ljj;
            }
        }
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            out[(i, j)] = l.row(i)[j];
        }
    }
    Ok(out)
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn cholesky_solve<T: Scalar>(a: &Array2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::DimMismatch {
            context: "cholesky_solve rhs",
            expected: n,
            found: b.len(),
        });
    }
    let l = cholesky_factor(a)?;
    // Forward substitution: l y = b.
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    // Back substitution: l^T x = y.
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Ok(y)
}

/// Squared Frobenius norm.
pub fn frobenius_norm_sq<T: Scalar>(a: &Array2<T>) -> T {
    a.iter().map(|&x| x * x).sum()
}

/// Euclidean norm of a vector.
pub fn norm2<T: Scalar>(v: &Array1<T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}
