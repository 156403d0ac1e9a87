//! Linear-algebra kernels shared by all solvers: correlations, the
//! minimum-norm solution, residual cross-talk corrections, and the
//! regularized amplitude re-fit.
//!
//! # Overview
//! Everything here is a pure function of a [`Dictionary`] and vectors; the
//! only cached state is the dictionary's derived-operator block. The
//! amplitude re-fit solves the n x n regularized system
//! `(sigma_r^2 phi Q phi^T + sigma_e^2 I) u = x` by Cholesky and reads the
//! per-atom amplitudes off `sigma_r^2 Q phi^T u`, so entries outside the
//! active set are exactly zero.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::model::Dictionary;
use crate::scalar::Scalar;

/// Per-atom correlations of an observation with the dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector<T> {
    /// `z_j = <x, phi_j>`, length m.
    pub z: Array1<T>,
}

/// Computes all atom correlations `z = phi^T x`.
pub fn correlations<T: Scalar>(dict: &Dictionary<T>, x: &Array1<T>) -> Result<CorrelationVector<T>> {
    if x.len() != dict.n() {
        return Err(Error::DimMismatch {
            context: "correlations observation",
            expected: dict.n(),
            found: x.len(),
        });
    }
    Ok(CorrelationVector {
        z: dict.phi().t().dot(x),
    })
}

/// Minimum Euclidean-norm coefficient vector reproducing `x`: the
/// pseudoinverse applied to the observation.
///
/// Errors when the dictionary lacks full row rank, since the cached
/// pseudoinverse then no longer maps onto all observations.
pub fn min_l2_solution<T: Scalar>(dict: &Dictionary<T>, x: &Array1<T>) -> Result<Array1<T>> {
    if x.len() != dict.n() {
        return Err(Error::DimMismatch {
            context: "min_l2_solution observation",
            expected: dict.n(),
            found: x.len(),
        });
    }
    let d = dict.derived();
    if d.rank < dict.n() {
        return Err(Error::RankDeficient {
            rank: d.rank,
            rows: dict.n(),
        });
    }
    Ok(d.pseudo_inverse.dot(x))
}

/// Cross-talk of all other current estimates onto atom `j`:
/// `c_j = sum_{i != j} y_hat_i * gram_ij`, evaluated as `(gram y_hat)_j -
/// y_hat_j` using the unit Gram diagonal.
pub fn residual_correction<T: Scalar>(
    dict: &Dictionary<T>,
    y_hat: &Array1<T>,
    j: usize,
) -> Result<T> {
    if y_hat.len() != dict.m() {
        return Err(Error::DimMismatch {
            context: "residual_correction coefficients",
            expected: dict.m(),
            found: y_hat.len(),
        });
    }
    if j >= dict.m() {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: format!("atom index {j} out of range for m = {}", dict.m()),
        });
    }
    let row = dict.derived().gram.row(j);
    let mut acc = T::zero();
    for (i, (&g, &y)) in row.iter().zip(y_hat.iter()).enumerate() {
        if i != j {
            acc += g * y;
        }
    }
    Ok(acc)
}

/// Batch form of [`residual_correction`]: all cross-talk terms at once as
/// `gram * y_hat - y_hat`.
pub fn residual_correction_all<T: Scalar>(
    dict: &Dictionary<T>,
    y_hat: &Array1<T>,
) -> Result<Array1<T>> {
    if y_hat.len() != dict.m() {
        return Err(Error::DimMismatch {
            context: "residual_correction coefficients",
            expected: dict.m(),
            found: y_hat.len(),
        });
    }
    Ok(dict.derived().gram.dot(y_hat) - y_hat)
}

/// Regularized amplitude re-fit for a fixed (binary or fractional) activity
/// pattern; see the module docs for the solved system.
///
/// Activity entries must lie in `[0, 1]`; entries equal to zero produce
/// exactly zero amplitudes. With `sigma_e = 0` the system may be singular,
/// so the regularization is floored at `1e-12 * sigma_r^2` (see
/// [`lls_amplitudes_flagged`] to observe when the floor engages).
pub fn lls_amplitudes<T: Scalar>(
    dict: &Dictionary<T>,
    q_hat: &Array1<T>,
    sigma_r: T,
    sigma_e: T,
    x: &Array1<T>,
) -> Result<Array1<T>> {
    lls_amplitudes_flagged(dict, q_hat, sigma_r, sigma_e, x).map(|(r, _)| r)
}

/// As [`lls_amplitudes`], additionally reporting whether the regularization
/// floor replaced the supplied `sigma_e`.
pub fn lls_amplitudes_flagged<T: Scalar>(
    dict: &Dictionary<T>,
    q_hat: &Array1<T>,
    sigma_r: T,
    sigma_e: T,
    x: &Array1<T>,
) -> Result<(Array1<T>, bool)> {
    let n = dict.n();
    let m = dict.m();
    if q_hat.len() != m {
        return Err(Error::DimMismatch {
            context: "lls_amplitudes activity",
            expected: m,
            found: q_hat.len(),
        });
    }
    if x.len() != n {
        return Err(Error::DimMismatch {
            context: "lls_amplitudes observation",
            expected: n,
            found: x.len(),
        });
    }
    if !(sigma_r > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "sigma_r",
            reason: format!("must be positive, got {sigma_r}"),
        });
    }
    if sigma_e < T::zero() {
        return Err(Error::InvalidParameter {
            name: "sigma_e",
            reason: format!("must be nonnegative, got {sigma_e}"),
        });
    }
    for (i, &q) in q_hat.iter().enumerate() {
        if !(q >= T::zero() && q <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "q_hat",
                reason: format!("entry {i} is {q}, expected a value in [0, 1]"),
            });
        }
    }

    let active: Vec<usize> = (0..m).filter(|&i| q_hat[i] > T::zero()).collect();
    if active.is_empty() {
        return Ok((Array1::zeros(m), false));
    }

    let sr2 = sigma_r * sigma_r;
    let mut se2 = sigma_e * sigma_e;
    let floor = T::from_f64_lossy(1e-12) * sr2;
    let mut floored = false;
    if se2 < floor {
        se2 = floor;
        floored = true;
    }

    // M = sigma_r^2 * phi * diag(q) * phi^T + se2 * I, built either by
    // rank-one accumulation over the active set (sparse activity) or by a
    // scaled matrix product (dense activity). Both paths are deterministic
    // for a given activity pattern.
    let phi = dict.phi();
    let mut mat;
    if active.len() * 4 <= m {
        // Rank-one accumulation over active atoms on a contiguous buffer.
        let mut buf = vec![T::zero(); n * n];
        let mut col = vec![T::zero(); n];
        for &j in &active {
            for (a, c) in col.iter_mut().enumerate() {
                *c = phi[(a, j)];
            }
            let w = sr2 * q_hat[j];
            for a in 0..n {
                let wa = w * col[a];
                let row = &mut buf[a * n..(a + 1) * n];
                for (rb, &cb) in row.iter_mut().zip(col.iter()) {
                    *rb += wa * cb;
                }
            }
        }
        mat = Array2::from_shape_vec((n, n), buf).expect("buffer sized n*n");
    } else {
        let mut scaled = phi.to_owned();
        for j in 0..m {
            let w = (sr2 * q_hat[j]).sqrt();
            scaled.column_mut(j).mapv_inplace(|v| v * w);
        }
        mat = scaled.dot(&scaled.t());
    }
    for i in 0..n {
        mat[(i, i)] += se2;
    }

    let u = cholesky_solve(&mat, x)?;
    let mut r = Array1::zeros(m);
    for &j in &active {
        let mut acc = T::zero();
        for (a, &ua) in u.iter().enumerate() {
            acc += phi[(a, j)] * ua;
        }
        r[j] = sr2 * q_hat[j] * acc;
    }
    Ok((r, floored))
}
