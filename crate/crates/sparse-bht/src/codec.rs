//! Real-field block code with sparse-recovery error correction.
//!
//! # Overview
//! Messages of length `msg_len` are encoded by a random tall generator
//! matrix into codewords of length `codeword_len`. The channel adds sparse
//! impulse errors and dense background noise. Because a parity-check matrix
//! `h_pc` annihilates every codeword, the syndrome `h_pc * received`
//! depends only on the channel corruption, turning error correction into a
//! sparse-recovery problem with `h_pc` (column-normalized) as the
//! dictionary. Subtracting the recovered impulses and projecting through
//! the generator's pseudo-inverse yields the decoded message.
//!
//! # Example
//! ```
//! use ndarray::Array1;
//! use sparse_bht::codec::{decode, encode, make_code};
//! use sparse_bht::operators::min_l2_solution;
//!
//! let code = make_code::<f64>(8, 16, 42).unwrap();
//! let s = Array1::linspace(0.0, 1.0, 8);
//! let received = encode(&code, &s).unwrap(); // clean channel
//! let s_hat = decode(&received, &code, |inst| min_l2_solution(&inst.dictionary, &inst.x)).unwrap();
//! assert!((&s_hat - &s).iter().all(|d| d.abs() < 1e-10));
//! ```

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{norm2, thin_svd};
use crate::model::{fill_gaussian, sample_spiky, Dictionary, ProblemInstance, SpikyPrior};
use crate::scalar::Scalar;
use crate::seeding::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A generated code: generator, parity check, and cached pseudo-inverse.
#[derive(Debug, Clone)]
pub struct CodeSpec<T> {
    /// Generator, `codeword_len x msg_len`, entries uniform in [-1, 1].
    pub g: Array2<T>,
    /// Parity check, `(codeword_len - msg_len) x codeword_len`; rows are an
    /// orthonormal basis of the left null space of `g`.
    pub h_pc: Array2<T>,
    /// Pseudo-inverse of `g`, `msg_len x codeword_len`.
    pub g_pinv: Array2<T>,
    /// Seed that produced `g` (after any internal resampling).
    pub seed: u64,
}

impl<T> CodeSpec<T> {
    pub fn msg_len(&self) -> usize {
        self.g.ncols()
    }

    pub fn codeword_len(&self) -> usize {
        self.g.nrows()
    }
}

/// One channel draw: what was added to the codeword.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    /// Sparse impulse errors over the codeword.
    pub impulse_errors: Array1<T>,
    /// Dense background noise.
    pub background: Array1<T>,
}

/// Builds a random code. The generator is resampled with a derived seed up
/// to three times if it comes out rank-deficient; a persistent deficiency
/// is an error.
pub fn make_code<T: Scalar>(msg_len: usize, codeword_len: usize, seed: u64) -> Result<CodeSpec<T>> {
    if msg_len == 0 {
        return Err(Error::InvalidParameter {
            name: "msg_len",
            reason: "must be positive".into(),
        });
    }
    if msg_len >= codeword_len {
        return Err(Error::InvalidParameter {
            name: "codeword_len",
            reason: format!("need msg_len < codeword_len for redundancy, got {msg_len} >= {codeword_len}"),
        });
    }
    let mut last_rank = 0;
    for attempt in 0..3u64 {
        let attempt_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, attempt)
        };
        if let Some(code) = try_make_code(msg_len, codeword_len, attempt_seed, &mut last_rank)? {
            return Ok(code);
        }
    }
    Err(Error::RankDeficient {
        rank: last_rank,
        rows: msg_len,
    })
}

/// One generation attempt; `None` means the draw was degenerate.
fn try_make_code<T: Scalar>(
    msg_len: usize,
    codeword_len: usize,
    seed: u64,
    last_rank: &mut usize,
) -> Result<Option<CodeSpec<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g: Array2<T> = Array2::zeros((codeword_len, msg_len));
    // Column-wise draws, mirroring the dictionary sampler's stream layout.
    for j in 0..msg_len {
        for i in 0..codeword_len {
            g[(i, j)] = T::from_f64_lossy(2.0 * rng.random::<f64>() - 1.0);
        }
    }

    let svd = thin_svd(&g)?;
    let tol = T::from_f64_lossy(1e-10) * svd.sigma[0];
    let rank = svd.sigma.iter().filter(|&&s| s > tol).count();
    *last_rank = rank;
    if rank < msg_len {
        return Ok(None);
    }

    // g_pinv = V diag(1/sigma) U^T.
    let mut vs = svd.v.clone();
    for k in 0..msg_len {
        let inv = T::one() / svd.sigma[k];
        for r in 0..msg_len {
            vs[(r, k)] = vs[(r, k)] * inv;
        }
    }
    let g_pinv = vs.dot(&svd.u.t());

    let Some(h_pc) = left_null_basis(&svd.u, codeword_len) else {
        return Ok(None);
    };
    // The construction guarantees annihilation up to roundoff; treat a
    // violation as a degenerate draw.
    let hg = h_pc.dot(&g);
    let worst = hg.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if worst > T::from_f64_lossy(1e-10) {
        return Ok(None);
    }

    Ok(Some(CodeSpec {
        g,
        h_pc,
        g_pinv,
        seed,
    }))
}

/// Orthonormal basis of the orthogonal complement of `u`'s columns,
/// returned as rows. Extends the column span with re-orthogonalized
/// identity vectors; `None` if the extension stalls.
fn left_null_basis<T: Scalar>(u: &Array2<T>, dim: usize) -> Option<Array2<T>> {
    let span = u.ncols();
    let want = dim - span;
    let mut basis: Vec<Array1<T>> = (0..span).map(|k| u.column(k).to_owned()).collect();
    let mut extra: Vec<Array1<T>> = Vec::with_capacity(want);
    let keep_tol = T::from_f64_lossy(1e-8);
    for i in 0..dim {
        if extra.len() == want {
            break;
        }
        let mut v: Array1<T> = Array1::zeros(dim);
        v[i] = T::one();
        // Two projection passes keep the result orthogonal to working
        // precision even when e_i is nearly inside the span.
        for _ in 0..2 {
            for b in &basis {
                let proj = v.dot(b);
                v.scaled_add(-proj, b);
            }
        }
        let nv = norm2(&v);
        if nv > keep_tol {
            v /= nv;
            basis.push(v.clone());
            extra.push(v);
        }
    }
    if extra.len() != want {
        return None;
    }
    let mut h = Array2::zeros((want, dim));
    for (r, v) in extra.iter().enumerate() {
        h.row_mut(r).assign(v);
    }
    Some(h)
}

/// Encodes a message: `g * s`.
pub fn encode<T: Scalar>(code: &CodeSpec<T>, s: &Array1<T>) -> Result<Array1<T>> {
    if s.len() != code.msg_len() {
        return Err(Error::DimMismatch {
            context: "encode message",
            expected: code.msg_len(),
            found: s.len(),
        });
    }
    Ok(code.g.dot(s))
}

/// Applies the channel: sparse impulse errors drawn from the prior plus
/// dense background noise of deviation `sigma_v`.
pub fn corrupt<T: Scalar>(
    codeword: &Array1<T>,
    prior: &SpikyPrior<T>,
    sigma_v: T,
    seed: u64,
) -> Result<(Array1<T>, ChannelRealization<T>)> {
    if !(sigma_v >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "sigma_v",
            reason: "background deviation must be nonnegative".into(),
        });
    }
    let len = codeword.len();
    let (impulse, _, _) = sample_spiky(prior, len, derive_seed(seed, 1))?;
    let mut background: Array1<T> = Array1::zeros(len);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    fill_gaussian(&mut rng, background.as_slice_mut().expect("contiguous"));
    background *= sigma_v;
    let received = codeword + &impulse + &background;
    Ok((
        received,
        ChannelRealization {
            impulse_errors: impulse,
            background,
        },
    ))
}

/// Column-normalized decoding dictionary built from the parity check, plus
/// the per-column norms needed to undo the scaling on recovered
/// coefficients. Build once and reuse across blocks via
/// [`decode_with_dictionary`].
pub fn decoder_dictionary<T: Scalar>(code: &CodeSpec<T>) -> Result<(Dictionary<T>, Array1<T>)> {
    let h = &code.h_pc;
    let m = h.ncols();
    let mut norms: Array1<T> = Array1::zeros(m);
    let mut normalized = h.clone();
    for j in 0..m {
        let nj = norm2(&h.column(j).to_owned());
        if nj == T::zero() {
            return Err(Error::ZeroNorm("parity-check column in decoder dictionary"));
        }
        norms[j] = nj;
        let mut col = normalized.column_mut(j);
        col /= nj;
    }
    Ok((Dictionary::new(normalized)?, norms))
}

/// Decodes one received block with a prepared decoding dictionary.
///
/// The solver closure sees the syndrome as the observation and the
/// normalized parity check as the dictionary; its coefficient estimate is
/// rescaled back to impulse-error units, subtracted from the received
/// block, and projected to message space. Solver errors propagate (callers
/// processing streams annotate them with the block index).
pub fn decode_with_dictionary<T, F>(
    received: &Array1<T>,
    code: &CodeSpec<T>,
    dict: &Dictionary<T>,
    col_norms: &Array1<T>,
    solve: F,
) -> Result<Array1<T>>
where
    T: Scalar,
    F: Fn(&ProblemInstance<T>) -> Result<Array1<T>>,
{
    let cw = code.codeword_len();
    if received.len() != cw {
        return Err(Error::DimMismatch {
            context: "decode received block",
            expected: cw,
            found: received.len(),
        });
    }
    let syndrome = code.h_pc.dot(received);
    let instance = ProblemInstance {
        dictionary: dict.clone(),
        x: syndrome,
        truth: None,
        seed: code.seed,
    };
    let y_hat = solve(&instance)?;
    if y_hat.len() != cw {
        return Err(Error::DimMismatch {
            context: "decode solver output",
            expected: cw,
            found: y_hat.len(),
        });
    }
    let e_hat: Array1<T> = y_hat
        .iter()
        .zip(col_norms.iter())
        .map(|(&v, &nj)| v / nj)
        .collect();
    let corrected = received - &e_hat;
    Ok(code.g_pinv.dot(&corrected))
}

/// Decodes one received block, building the decoding dictionary on the
/// fly. For streams of blocks, build it once with [`decoder_dictionary`]
/// and call [`decode_with_dictionary`] instead.
pub fn decode<T, F>(received: &Array1<T>, code: &CodeSpec<T>, solve: F) -> Result<Array1<T>>
where
    T: Scalar,
    F: Fn(&ProblemInstance<T>) -> Result<Array1<T>>,
{
    let (dict, norms) = decoder_dictionary(code)?;
    decode_with_dictionary(received, code, &dict, &norms, solve)
}
