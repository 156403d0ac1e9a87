//! Greedy reference solvers and an exhaustive support-search oracle.
//!
//! # Overview
//! Two classical correlation-driven solvers serve as comparison baselines:
//! [`matching_pursuit`], which repeatedly peels off the single best-matching
//! atom, and [`orthogonal_matching_pursuit`], which additionally re-fits all
//! selected coefficients by least squares after every selection. Both are
//! deterministic and draw no randomness.
//!
//! [`exhaustive_oracle`] searches every support up to a size cap and keeps
//! the one with the smallest residual under the regularized amplitude fit.
//! It is intentionally restricted to tiny problems and exists to provide
//! ground truth for correctness checks.
//!
//! # Example
//! ```
//! use ndarray::Array1;
//! use sparse_bht::baselines::{matching_pursuit, GreedyConfig};
//! use sparse_bht::model::{sample_dictionary, ProblemInstance};
//!
//! let dict = sample_dictionary::<f64>(16, 32, 7).unwrap();
//! let x = dict.atom(5).to_owned() * 2.0;
//! let inst = ProblemInstance { dictionary: dict, x, truth: None, seed: 0 };
//! let y = matching_pursuit(&inst, &GreedyConfig { max_atoms: 4, residual_tol: 1e-12 }).unwrap();
//! assert!((y[5] - 2.0).abs() < 1e-10);
//! ```

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, norm2};
use crate::model::ProblemInstance;
use crate::operators::lls_amplitudes;
use crate::scalar::Scalar;

/// Stopping rules shared by the greedy solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig<T> {
    /// Maximum number of selections; must not exceed the atom count.
    pub max_atoms: usize,
    /// Stop once the residual norm is at or below this.
    pub residual_tol: T,
}

impl<T: Scalar> Default for GreedyConfig<T> {
    /// Defaults sized for the benchmark-scale problems (twice the typical
    /// active count there); small problems should set `max_atoms`
    /// explicitly.
    fn default() -> Self {
        GreedyConfig {
            max_atoms: 102,
            residual_tol: T::zero(),
        }
    }
}

impl<T: Scalar> GreedyConfig<T> {
    fn validate(&self, m: usize) -> Result<()> {
        if self.max_atoms > m {
            return Err(Error::InvalidParameter {
                name: "max_atoms",
                reason: format!("{} exceeds atom count {m}", self.max_atoms),
            });
        }
        if !(self.residual_tol >= T::zero()) {
            return Err(Error::InvalidParameter {
                name: "residual_tol",
                reason: "must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// Index of the largest-magnitude correlation; ties keep the lowest index.
fn argmax_abs<T: Scalar, I: Iterator<Item = (usize, T)>>(iter: I) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (j, v) in iter {
        let a = v.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((j, a)),
        }
    }
    best
}

/// Matching pursuit: greedy selection by correlation magnitude, one rank-one
/// update per step. Atoms may be selected more than once; coefficients
/// accumulate.
pub fn matching_pursuit<T: Scalar>(
    instance: &ProblemInstance<T>,
    config: &GreedyConfig<T>,
) -> Result<Array1<T>> {
    let dict = &instance.dictionary;
    let m = dict.m();
    config.validate(m)?;
    let phi = dict.phi();
    let mut residual = instance.x.clone();
    let mut y_hat: Array1<T> = Array1::zeros(m);
    for _ in 0..config.max_atoms {
        if norm2(&residual) <= config.residual_tol {
            break;
        }
        let corr = phi.t().dot(&residual);
        let Some((j, mag)) = argmax_abs(corr.iter().cloned().enumerate()) else {
            break;
        };
        if mag == T::zero() {
            break;
        }
        let coeff = corr[j];
        y_hat[j] += coeff;
        residual.scaled_add(-coeff, &phi.column(j));
    }
    Ok(y_hat)
}

/// Greedy solver result with selection bookkeeping.
#[derive(Debug, Clone)]
pub struct OmpOutcome<T> {
    pub y_hat: Array1<T>,
    /// Atoms in selection order.
    pub selected: Vec<usize>,
    /// Atoms whose inclusion made the active subdictionary rank-deficient;
    /// they were passed over and barred from reselection.
    pub skipped: Vec<usize>,
}

/// Orthogonal matching pursuit; see [`orthogonal_matching_pursuit_detailed`]
/// for the selection bookkeeping.
pub fn orthogonal_matching_pursuit<T: Scalar>(
    instance: &ProblemInstance<T>,
    config: &GreedyConfig<T>,
) -> Result<Array1<T>> {
    Ok(orthogonal_matching_pursuit_detailed(instance, config)?.y_hat)
}

/// Orthogonal matching pursuit: correlation-maximizing selection with a full
/// least-squares re-fit of the selected coefficients after every step, so
/// the residual stays orthogonal to the selected span and no atom is picked
/// twice. A candidate that would make the subdictionary rank-deficient is
/// skipped and recorded.
pub fn orthogonal_matching_pursuit_detailed<T: Scalar>(
    instance: &ProblemInstance<T>,
    config: &GreedyConfig<T>,
) -> Result<OmpOutcome<T>> {
    let dict = &instance.dictionary;
    let (n, m) = (dict.n(), dict.m());
    config.validate(m)?;
    let phi = dict.phi();
    let gram = &dict.derived().gram;
    let z = phi.t().dot(&instance.x);

    let mut residual = instance.x.clone();
    let mut selected: Vec<usize> = Vec::new();
    let mut skipped: Vec<usize> = Vec::new();
    let mut blocked = vec![false; m];
    let mut coeffs: Vec<T> = Vec::new();

    while selected.len() < config.max_atoms {
        if norm2(&residual) <= config.residual_tol {
            break;
        }
        let corr = phi.t().dot(&residual);
        let Some((j, mag)) = argmax_abs(
            corr.iter()
                .cloned()
                .enumerate()
                .filter(|(j, _)| !blocked[*j]),
        ) else {
            break;
        };
        if mag == T::zero() {
            break;
        }

        // Trial fit with the candidate included; the Gram entries come from
        // the cached full Gram matrix.
        let trial: Vec<usize> = selected.iter().cloned().chain(std::iter::once(j)).collect();
        let s = trial.len();
        let mut sub = Array2::zeros((s, s));
        for (a, &ja) in trial.iter().enumerate() {
            for (b, &jb) in trial.iter().enumerate() {
                sub[(a, b)] = gram[(ja, jb)];
            }
        }
        let rhs = Array1::from(trial.iter().map(|&ja| z[ja]).collect::<Vec<_>>());
        let sol = match cholesky_solve(&sub, &rhs) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. }) => {
                blocked[j] = true;
                skipped.push(j);
                continue;
            }
            Err(e) => return Err(e),
        };

        blocked[j] = true;
        selected.push(j);
        coeffs = sol.to_vec();
        let mut fit: Array1<T> = Array1::zeros(n);
        for (a, &ja) in selected.iter().enumerate() {
            fit.scaled_add(coeffs[a], &phi.column(ja));
        }
        residual = &instance.x - &fit;
    }

    let mut y_hat: Array1<T> = Array1::zeros(m);
    for (a, &ja) in selected.iter().enumerate() {
        y_hat[ja] = coeffs[a];
    }
    Ok(OmpOutcome {
        y_hat,
        selected,
        skipped,
    })
}

/// Visits each size-`k` combination of `0..m` in lexicographic order.
fn for_each_combination<F: FnMut(&[usize])>(m: usize, k: usize, mut f: F) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        if k == 0 {
            return;
        }
        // Advance to the next combination; done when the first index would
        // overflow its range.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for t in i + 1..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Best support of size at most `k_max` by exhaustive search, each candidate
/// fitted with the regularized amplitude estimator at the given deviations.
/// Ties in residual keep the smaller, then lexicographically earlier,
/// support. Hard-capped at `m <= 20`, `k_max <= 4`.
pub fn exhaustive_oracle<T: Scalar>(
    instance: &ProblemInstance<T>,
    k_max: usize,
    sigma_r: T,
    sigma_e: T,
) -> Result<(Vec<usize>, Array1<T>)> {
    let dict = &instance.dictionary;
    let m = dict.m();
    if m > 20 {
        return Err(Error::SizeLimit {
            name: "m",
            max: 20,
            found: m,
        });
    }
    if k_max > 4 {
        return Err(Error::SizeLimit {
            name: "k_max",
            max: 4,
            found: k_max,
        });
    }
    let phi = dict.phi();
    let mut best_support: Vec<usize> = Vec::new();
    let mut best_y: Array1<T> = Array1::zeros(m);
    let mut best_rss = {
        let r = norm2(&instance.x);
        r * r
    };
    let mut result: Result<()> = Ok(());
    for k in 1..=k_max.min(m) {
        for_each_combination(m, k, |support| {
            if result.is_err() {
                return;
            }
            let mut q: Array1<T> = Array1::zeros(m);
            for &j in support {
                q[j] = T::one();
            }
            match lls_amplitudes(dict, &q, sigma_r, sigma_e, &instance.x) {
                Ok(y) => {
                    let resid = &instance.x - &phi.dot(&y);
                    let rss = {
                        let r = norm2(&resid);
                        r * r
                    };
                    // Strict improvement keeps the earlier (smaller, then
                    // lexicographically first) support on ties.
                    if rss < best_rss {
                        best_rss = rss;
                        best_support = support.to_vec();
                        best_y = y;
                    }
                }
                Err(e) => result = Err(e),
            }
        });
    }
    result?;
    Ok((best_support, best_y))
}
