//! Signal model: Bernoulli-Gaussian priors, dictionaries with cached derived
//! operators, seeded instance synthesis, and instance serialization.
//!
//! # Overview
//! An observation is modeled as `x = phi * y + e` where `phi` is an
//! overcomplete matrix with unit-norm columns (atoms), `y` is sparse, and
//! `e` is white Gaussian noise. Sparsity follows the spiky model: each
//! coefficient is inactive (exactly zero) with probability `p`, and active
//! with amplitude drawn from `N(0, sigma_r^2)`.
//!
//! All sampling is deterministic per seed: the generator is ChaCha8 seeded
//! from a `u64`, Gaussians come from the Marsaglia polar transform evaluated
//! in `f64`, and draw order is documented on each sampler. See
//! [`crate::seeding`] for the child-seed derivation used by multi-stream
//! callers.
//!
//! # Example
//! ```
//! use sparse_bht::model::{sample_dictionary, sample_spiky, synthesize, SpikyPrior};
//!
//! let dict = sample_dictionary::<f64>(16, 32, 7).unwrap();
//! let prior = SpikyPrior::new(0.9, 1.0).unwrap();
//! let (y, _q, _r) = sample_spiky(&prior, 32, 8).unwrap();
//! let inst = synthesize(dict, &y, 0.01, 9).unwrap();
//! assert_eq!(inst.x.len(), 16);
//! ```

use std::io::{Read, Write};
use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm_sq, norm2, pseudo_inverse};
use crate::scalar::Scalar;

/// Bernoulli-Gaussian prior: a coefficient is inactive (zero) with
/// probability `p`, otherwise drawn from `N(0, sigma_r^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikyPrior<T> {
    /// Inactivity probability; sparse regimes have `p` close to 1.
    pub p: T,
    /// Standard deviation of active amplitudes.
    pub sigma_r: T,
}

impl<T: Scalar> SpikyPrior<T> {
    /// Validates `0 < p < 1` and `sigma_r > 0`. Emits a one-time process
    /// warning when `p <= 0.5`, since the model presumes a sparse regime;
    /// such priors are accepted.
    pub fn new(p: T, sigma_r: T) -> Result<Self> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("inactivity probability must lie in (0,1), got {p}"),
            });
        }
        if !(sigma_r > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "sigma_r",
                reason: format!("amplitude deviation must be positive, got {sigma_r}"),
            });
        }
        if p <= T::from_f64_lossy(0.5) {
            static WARNED: std::sync::Once = std::sync::Once::new();
            WARNED.call_once(|| {
                eprintln!(
                    "warning: spiky prior with p <= 0.5 is outside the sparse regime \
                     the solvers are designed for"
                );
            });
        }
        Ok(SpikyPrior { p, sigma_r })
    }

    /// True when the prior is in the sparse regime the solvers assume.
    pub fn is_sparse_regime(&self) -> bool {
        self.p > T::from_f64_lossy(0.5)
    }
}

/// Operators derived from a dictionary, computed once and cached.
#[derive(Debug, Clone)]
pub struct Derived<T> {
    /// Gram matrix `phi^T phi` (m x m, symmetric, unit diagonal).
    pub gram: Array2<T>,
    /// Rank-revealing Moore-Penrose pseudoinverse of `phi` (m x n).
    pub pseudo_inverse: Array2<T>,
    /// Minimum-norm reconstruction error operator `-I + pinv(phi) * phi`
    /// (m x m); its column norms measure how far each atom is from the row
    /// space projection.
    pub psi: Array2<T>,
    /// Combined correlation/backprojection operator `2 phi^T - pinv(phi)`
    /// (m x n).
    pub l_op: Array2<T>,
    /// Numerical rank of `phi` at relative tolerance 1e-10.
    pub rank: usize,
    /// Cross-correlation aggregate `||gram||_F^2 / m - 1`, the mean squared
    /// off-diagonal mass per atom.
    pub beta: T,
}

/// Overcomplete dictionary with unit-norm atoms and lazily cached derived
/// operators.
///
/// Construction validates shape and column norms; `derived()` computes the
/// Gram matrix, pseudoinverse, and companion operators exactly once, also
/// under concurrent first access.
#[derive(Debug)]
pub struct Dictionary<T> {
    phi: Array2<T>,
    derived: OnceLock<Derived<T>>,
}

impl<T: Scalar> Clone for Dictionary<T> {
    fn clone(&self) -> Self {
        let cell = OnceLock::new();
        // Preserve the computed cache so clones do not refactor.
        if let Some(d) = self.derived.get() {
            let _ = cell.set(d.clone());
        }
        Dictionary {
            phi: self.phi.clone(),
            derived: cell,
        }
    }
}

impl<T: Scalar> Dictionary<T> {
    /// Wraps a matrix as a dictionary.
    ///
    /// Requires `0 < n <= m` and unit-norm columns within a small tolerance;
    /// the strictly overcomplete case `n < m` is the intended regime (the
    /// samplers enforce it), while square orthonormal dictionaries are
    /// admitted for diagnostics and tests.
    pub fn new(phi: Array2<T>) -> Result<Self> {
        let (n, m) = phi.dim();
        if n == 0 || m == 0 || n > m {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: format!("need 0 < n <= m, got {n} x {m}"),
            });
        }
        let tol = T::from_f64_lossy(1e-10).max(T::epsilon() * T::from_f64_lossy(100.0));
        for j in 0..m {
            let norm = norm2(&phi.column(j).to_owned());
            if !norm.is_finite() || (norm - T::one()).abs() > tol {
                return Err(Error::InvalidParameter {
                    name: "phi",
                    reason: format!("column {j} has norm {norm}, expected 1"),
                });
            }
        }
        Ok(Dictionary {
            phi,
            derived: OnceLock::new(),
        })
    }

    /// Signal length (rows).
    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// Atom count (columns).
    pub fn m(&self) -> usize {
        self.phi.ncols()
    }

    /// The underlying matrix.
    pub fn phi(&self) -> &Array2<T> {
        &self.phi
    }

    /// Column `j` as a view.
    pub fn atom(&self, j: usize) -> ndarray::ArrayView1<'_, T> {
        self.phi.column(j)
    }

    /// Derived operators, computed on first use and cached (race-free).
    pub fn derived(&self) -> &Derived<T> {
        self.derived.get_or_init(|| {
            let phi = &self.phi;
            let (n, m) = phi.dim();
            let gram = phi.t().dot(phi);
            let (pinv, rank) = pseudo_inverse(phi, T::from_f64_lossy(1e-10))
                .expect("pseudoinverse of a validated dictionary");
            let mut psi = pinv.dot(phi);
            for i in 0..m {
                psi[(i, i)] -= T::one();
            }
            let mut l_op = phi.t().to_owned();
            l_op.mapv_inplace(|v| v + v);
            l_op -= &pinv;
            let beta = frobenius_norm_sq(&gram) / T::from_usize_lossy(m) - T::one();
            let _ = n;
            Derived {
                gram,
                pseudo_inverse: pinv,
                psi,
                l_op,
                rank,
                beta,
            }
        })
    }
}

/// Ground truth attached to a synthesized instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    /// Sparse coefficient vector, `y = q .* r`.
    pub y: Array1<T>,
    /// Binary activity vector (entries exactly 0 or 1).
    pub q: Array1<T>,
    /// Amplitude vector; coincides with `y` on the support.
    pub r: Array1<T>,
    /// Additive noise realization.
    pub e: Array1<T>,
    /// Noise standard deviation used at synthesis.
    pub sigma_e: T,
}

/// A synthesized or loaded problem: observation plus optional ground truth.
#[derive(Debug)]
pub struct ProblemInstance<T> {
    pub dictionary: Dictionary<T>,
    pub x: Array1<T>,
    pub truth: Option<GroundTruth<T>>,
    /// Seed recorded at synthesis (the noise-stream seed) or load time.
    pub seed: u64,
}

impl<T: Scalar> Clone for ProblemInstance<T> {
    fn clone(&self) -> Self {
        ProblemInstance {
            dictionary: self.dictionary.clone(),
            x: self.x.clone(),
            truth: self.truth.clone(),
            seed: self.seed,
        }
    }
}

/// One Gaussian pair via the Marsaglia polar transform, evaluated in `f64`.
fn polar_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return (u * f, v * f);
        }
    }
}

/// Fills a slice with standard Gaussians; pairs are drawn in order and the
/// second half of a final odd pair is discarded.
pub(crate) fn fill_gaussian<T: Scalar, R: Rng>(rng: &mut R, out: &mut [T]) {
    let mut i = 0;
    while i < out.len() {
        let (g0, g1) = polar_pair(rng);
        out[i] = T::from_f64_lossy(g0);
        i += 1;
        if i < out.len() {
            out[i] = T::from_f64_lossy(g1);
            i += 1;
        }
    }
}

/// Samples a dictionary with i.i.d. uniform `[-1, 1]` entries and unit-norm
/// columns.
///
/// Columns are drawn in order, `n` entries each; an all-zero draw (a
/// probability-zero event, guarded anyway) is redrawn in place so the
/// normalization is always well defined. Deterministic per seed.
pub fn sample_dictionary<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<Dictionary<T>> {
    if n == 0 || n >= m {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need 0 < n < m, got n = {n}, m = {m}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = Array2::zeros((n, m));
    for j in 0..m {
        loop {
            let mut norm_sq = 0.0f64;
            let mut col = vec![0.0f64; n];
            for c in col.iter_mut() {
                *c = 2.0 * rng.random::<f64>() - 1.0;
                norm_sq += *c * *c;
            }
            if norm_sq > 0.0 {
                let inv = 1.0 / norm_sq.sqrt();
                for (i, c) in col.iter().enumerate() {
                    phi[(i, j)] = T::from_f64_lossy(c * inv);
                }
                break;
            }
        }
    }
    Dictionary::new(phi)
}

/// The orthonormal `m x m` type-II discrete cosine transform matrix.
///
/// Row `k`, column `t` holds `sqrt(2/m) * cos(pi (2t+1) k / (2m))`, with the
/// first row scaled by `1/sqrt(2)`; rows are orthonormal.
pub fn dct_matrix<T: Scalar>(m: usize) -> Array2<T> {
    let mut d = Array2::zeros((m, m));
    let mf = m as f64;
    let scale = (2.0 / mf).sqrt();
    for k in 0..m {
        let row_scale = if k == 0 {
            scale / 2.0f64.sqrt()
        } else {
            scale
        };
        for t in 0..m {
            let angle = std::f64::consts::PI * (2.0 * t as f64 + 1.0) * k as f64 / (2.0 * mf);
            d[(k, t)] = T::from_f64_lossy(row_scale * angle.cos());
        }
    }
    d
}

/// Samples a compressed-sensing dictionary: a standard-normal measurement
/// matrix times the orthonormal DCT basis, columns normalized.
///
/// The Gaussian matrix is filled column by column. A zero product column is
/// a probability-zero event and reported as an error.
pub fn sample_dct_cs_dictionary<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<Dictionary<T>> {
    if n == 0 || n >= m {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need 0 < n < m, got n = {n}, m = {m}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = Array2::<T>::zeros((n, m));
    for j in 0..m {
        let mut col = vec![T::zero(); n];
        fill_gaussian(&mut rng, &mut col);
        for i in 0..n {
            gamma[(i, j)] = col[i];
        }
    }
    let d = dct_matrix::<T>(m);
    let mut phi = gamma.dot(&d);
    for j in 0..m {
        let norm = norm2(&phi.column(j).to_owned());
        if !(norm > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: format!("mixed column {j} vanished"),
            });
        }
        let inv = T::one() / norm;
        phi.column_mut(j).mapv_inplace(|v| v * inv);
    }
    Dictionary::new(phi)
}

/// Samples coefficients from the spiky prior: returns `(y, q, r)` with
/// `y = q .* r`.
///
/// Draw order: `m` activity uniforms first (active when the uniform is below
/// `1 - p`), then `m` Gaussian amplitudes. Deterministic per seed.
pub fn sample_spiky<T: Scalar>(
    prior: &SpikyPrior<T>,
    m: usize,
    seed: u64,
) -> Result<(Array1<T>, Array1<T>, Array1<T>)> {
    let prior = SpikyPrior::new(prior.p, prior.sigma_r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active_prob = 1.0 - prior.p.to_f64_lossy();
    let mut q = Array1::zeros(m);
    for i in 0..m {
        if rng.random::<f64>() < active_prob {
            q[i] = T::one();
        }
    }
    let mut r = vec![T::zero(); m];
    fill_gaussian(&mut rng, &mut r);
    let r = Array1::from(r) * prior.sigma_r;
    let y = &q * &r;
    Ok((y, q, r))
}

/// Samples a fixed-amplitude support: exactly `k` distinct uniformly chosen
/// indices set to `amplitude`, the rest zero. Returns `(y, q)`.
pub fn sample_fixed_support<T: Scalar>(
    m: usize,
    k: usize,
    amplitude: T,
    seed: u64,
) -> Result<(Array1<T>, Array1<T>)> {
    if k == 0 || k >= m {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need 0 < k < m, got k = {k}, m = {m}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, m, k);
    let mut y = Array1::zeros(m);
    let mut q = Array1::zeros(m);
    for idx in chosen {
        y[idx] = amplitude;
        q[idx] = T::one();
    }
    Ok((y, q))
}

/// Synthesizes an observation `x = phi * y + e` with `e ~ N(0, sigma_e^2 I)`
/// and attaches the ground truth.
///
/// The truth records `q` as the indicator of nonzero `y` and `r = y`
/// (amplitudes off the support are not retained). With `sigma_e = 0` the
/// observation is exact.
pub fn synthesize<T: Scalar>(
    dict: Dictionary<T>,
    y: &Array1<T>,
    sigma_e: T,
    seed: u64,
) -> Result<ProblemInstance<T>> {
    if y.len() != dict.m() {
        return Err(Error::DimMismatch {
            context: "synthesize coefficients",
            expected: dict.m(),
            found: y.len(),
        });
    }
    if sigma_e < T::zero() {
        return Err(Error::InvalidParameter {
            name: "sigma_e",
            reason: format!("noise deviation must be nonnegative, got {sigma_e}"),
        });
    }
    let n = dict.n();
    let mut e = vec![T::zero(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill_gaussian(&mut rng, &mut e);
    let e = Array1::from(e) * sigma_e;
    let x = dict.phi().dot(y) + &e;
    let q = y.mapv(|v| if v != T::zero() { T::one() } else { T::zero() });
    let truth = GroundTruth {
        y: y.clone(),
        q,
        r: y.clone(),
        e,
        sigma_e,
    };
    Ok(ProblemInstance {
        dictionary: dict,
        x,
        truth: Some(truth),
        seed,
    })
}

/// Log-probability of a binary activity vector under independent
/// inactivity probability `p`: `n_active ln(1-p) + (m - n_active) ln(p)`.
pub fn prior_log_probability<T: Scalar>(q: &Array1<T>, p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("need 0 < p < 1 for finite log-probability, got {p}"),
        });
    }
    let mut active = 0usize;
    for (i, &v) in q.iter().enumerate() {
        if v == T::one() {
            active += 1;
        } else if v != T::zero() {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("entry {i} is {v}, expected 0 or 1"),
            });
        }
    }
    let inactive = q.len() - active;
    Ok(T::from_usize_lossy(active) * (T::one() - p).ln()
        + T::from_usize_lossy(inactive) * p.ln())
}

// --- instance container ------------------------------------------------

const MAGIC: &[u8; 4] = b"SBHT";
const VERSION: u16 = 1;
const FLAG_TRUTH: u16 = 1;

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Writes an instance in the versioned little-endian container format.
///
/// Layout (all integers little-endian):
/// magic `"SBHT"`, version `u16`, flags `u16` (bit 0: truth present),
/// `n: u32`, `m: u32`, `seed: u64`, `phi` as `n*m` `f64` row-major, `x` as
/// `n` `f64`; when truth is present: `y` (`m` `f64`), `q` (`m` bytes, 0/1),
/// `r` (`m` `f64`), `e` (`n` `f64`), `sigma_e` (`f64`). Values are stored in
/// `f64` regardless of the working precision.
pub fn write_instance<T: Scalar, W: Write>(w: &mut W, inst: &ProblemInstance<T>) -> Result<()> {
    let n = inst.dictionary.n();
    let m = inst.dictionary.m();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let flags = if inst.truth.is_some() { FLAG_TRUTH } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(m as u32).to_le_bytes())?;
    w.write_all(&inst.seed.to_le_bytes())?;
    for i in 0..n {
        for j in 0..m {
            put_f64(w, inst.dictionary.phi()[(i, j)].to_f64_lossy())?;
        }
    }
    for i in 0..n {
        put_f64(w, inst.x[i].to_f64_lossy())?;
    }
    if let Some(t) = &inst.truth {
        for i in 0..m {
            put_f64(w, t.y[i].to_f64_lossy())?;
        }
        let qbytes: Vec<u8> = t
            .q
            .iter()
            .map(|&v| if v == T::zero() { 0u8 } else { 1u8 })
            .collect();
        w.write_all(&qbytes)?;
        for i in 0..m {
            put_f64(w, t.r[i].to_f64_lossy())?;
        }
        for i in 0..n {
            put_f64(w, t.e[i].to_f64_lossy())?;
        }
        put_f64(w, t.sigma_e.to_f64_lossy())?;
    }
    Ok(())
}

/// Serializes an instance to an in-memory byte vector (see
/// [`write_instance`] for the layout). Useful for content hashing.
pub fn instance_bytes<T: Scalar>(inst: &ProblemInstance<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_instance(&mut buf, inst).expect("in-memory serialization cannot fail");
    buf
}

/// Reads an instance written by [`write_instance`], casting stored `f64`
/// values into the working precision.
pub fn read_instance<T: Scalar, R: Read>(r: &mut R) -> Result<ProblemInstance<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version}"
        )));
    }
    r.read_exact(&mut b2)?;
    let flags = u16::from_le_bytes(b2);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let m = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    if n == 0 || m == 0 || n > m {
        return Err(Error::Format(format!("bad dimensions {n} x {m}")));
    }
    let mut phi = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            phi[(i, j)] = T::from_f64_lossy(get_f64(r)?);
        }
    }
    let mut x = Array1::zeros(n);
    for i in 0..n {
        x[i] = T::from_f64_lossy(get_f64(r)?);
    }
    let truth = if flags & FLAG_TRUTH != 0 {
        let mut y = Array1::zeros(m);
        for i in 0..m {
            y[i] = T::from_f64_lossy(get_f64(r)?);
        }
        let mut qbytes = vec![0u8; m];
        r.read_exact(&mut qbytes)?;
        let q = Array1::from(
            qbytes
                .iter()
                .map(|&b| if b == 0 { T::zero() } else { T::one() })
                .collect::<Vec<_>>(),
        );
        let mut rr = Array1::zeros(m);
        for i in 0..m {
            rr[i] = T::from_f64_lossy(get_f64(r)?);
        }
        let mut e = Array1::zeros(n);
        for i in 0..n {
            e[i] = T::from_f64_lossy(get_f64(r)?);
        }
        let sigma_e = T::from_f64_lossy(get_f64(r)?);
        Some(GroundTruth {
            y,
            q,
            r: rr,
            e,
            sigma_e,
        })
    } else {
        None
    };
    Ok(ProblemInstance {
        dictionary: Dictionary::new(phi)?,
        x,
        truth,
        seed,
    })
}
