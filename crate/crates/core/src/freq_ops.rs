//! Per-frequency structural operators for a controller matrix `G1`.
//!
//! For a frequency `omega` and block size `n`, the operator `J` is the
//! `n x n` block upper bidiagonal matrix with diagonal blocks
//! `i omega - G1` and identity superdiagonal blocks. Its kernel encodes the
//! Jordan chains of `G1` at `i omega`: a stacked kernel vector
//! `(z_n, ..., z_1)` satisfies `(i omega - G1) z_1 = 0` and
//! `(G1 - i omega) z_l = z_{l-1}`. Jordan structure is queried only through
//! rank sequences of powers, never via a full Jordan decomposition.

use ndarray::{Array2, ArrayView2};
use ndarray_linalg::c64;

use crate::error::{CoreError, Result};
use crate::linalg::{nullspace, rank_rel};

/// Default relative singular-value threshold for rank/kernel decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Structural data of one frequency: the operator `J`, an orthonormal kernel
/// basis, and the rank sequence `r_j = rank((i omega - G1)^j)` for
/// `j = 0 ..= n + 1`.
#[derive(Debug, Clone)]
pub struct FrequencyBlock {
    pub k: i64,
    pub omega: f64,
    pub n: usize,
    pub j: Array2<c64>,
    pub ker_basis: Array2<c64>,
    pub rank_sequence: Vec<usize>,
    pub tol: f64,
}

/// `i omega I - G1` as a dense matrix.
pub fn shifted(g1: &ArrayView2<c64>, omega: f64) -> Array2<c64> {
    let dim = g1.nrows();
    let mut m = g1.mapv(|z| -z);
    for i in 0..dim {
        m[(i, i)] += c64::new(0.0, omega);
    }
    m
}

/// Block upper bidiagonal operator: diagonal `i omega - G1`, identity
/// superdiagonal, `n >= 1` blocks.
pub fn build_j(g1: &Array2<c64>, omega: f64, n: usize) -> Result<Array2<c64>> {
    if n == 0 {
        return Err(CoreError::EmptyBlock);
    }
    if g1.nrows() != g1.ncols() {
        return Err(CoreError::DimensionMismatch {
            context: "G1 must be square".into(),
            expected: g1.nrows(),
            found: g1.ncols(),
        });
    }
    let dim = g1.nrows();
    let diag = shifted(&g1.view(), omega);
    let mut j = Array2::zeros((n * dim, n * dim));
    for b in 0..n {
        for r in 0..dim {
            for c in 0..dim {
                j[(b * dim + r, b * dim + c)] = diag[(r, c)];
            }
            if b + 1 < n {
                j[(b * dim + r, (b + 1) * dim + r)] = c64::new(1.0, 0.0);
            }
        }
    }
    Ok(j)
}

/// Orthonormal basis of the numerical nullspace of `M` (columns); the
/// nullspace is `{x : ||Mx|| <= tol * ||M|| * ||x||}` realized by
/// singular-value thresholding.
pub fn kernel_basis(m: &Array2<c64>, tol: f64) -> Array2<c64> {
    nullspace(m, tol)
}

/// Entry `n-1` (0-based) is the number of Jordan blocks of `G1` at
/// eigenvalue `i omega` with size `>= n`, computed as `r_{n-1} - r_n` from
/// the rank sequence of powers of `i omega - G1`.
pub fn jordan_chain_counts(g1: &Array2<c64>, omega: f64, max_len: usize, tol: f64) -> Vec<usize> {
    let ranks = rank_sequence(g1, omega, max_len, tol);
    (0..max_len).map(|i| ranks[i] - ranks[i + 1]).collect()
}

/// `r_j = rank((i omega - G1)^j)` for `j = 0 ..= max_pow`.
pub fn rank_sequence(g1: &Array2<c64>, omega: f64, max_pow: usize, tol: f64) -> Vec<usize> {
    let dim = g1.nrows();
    let shifted = shifted(&g1.view(), omega);
    let mut ranks = Vec::with_capacity(max_pow + 1);
    ranks.push(dim); // rank of the identity
    let mut power = Array2::<c64>::eye(dim);
    for _ in 1..=max_pow {
        power = power.dot(&shifted);
        // ranks are nonincreasing in the power; clamp against numerical noise
        let r = rank_rel(&power, tol).min(*ranks.last().unwrap());
        ranks.push(r);
    }
    ranks
}

/// Bundle `J`, its kernel basis, and the rank sequence for one frequency.
pub fn frequency_block(
    g1: &Array2<c64>,
    k: i64,
    omega: f64,
    n: usize,
    tol: f64,
) -> Result<FrequencyBlock> {
    let j = build_j(g1, omega, n)?;
    let ker_basis = kernel_basis(&j, tol);
    let rank_sequence = rank_sequence(g1, omega, n + 1, tol);
    Ok(FrequencyBlock {
        k,
        omega,
        n,
        j,
        ker_basis,
        rank_sequence,
        tol,
    })
}
