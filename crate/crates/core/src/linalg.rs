//! Dense complex linear-algebra helpers shared across the crate.
//!
//! Everything here is a thin, deterministic wrapper over LAPACK via
//! `ndarray-linalg`; thresholds are always passed in or documented rather
//! than hidden.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{c64, Eig, Inverse, OperationNorm, Solve, SVD};

use crate::error::Result;

/// Largest singular value; 0 for matrices with an empty axis.
pub fn op_norm(a: &Array2<c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let (_, s, _) = a.svd(false, false).expect("svd of a finite matrix");
    s.iter().copied().fold(0.0, f64::max)
}

/// Singular values in descending order (empty for empty matrices).
pub fn singular_values(a: &Array2<c64>) -> Result<Array1<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Array1::zeros(0));
    }
    let (_, s, _) = a.svd(false, false)?;
    Ok(s)
}

/// 2-norm condition number; `INFINITY` when the smallest singular value is 0.
pub fn cond2(a: &Array2<c64>) -> Result<f64> {
    let s = singular_values(a)?;
    if s.is_empty() {
        return Ok(1.0);
    }
    let max = s[0];
    let min = s[s.len() - 1];
    if min == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(max / min)
    }
}

/// Numerical rank: number of singular values above `tol * sigma_max`.
pub fn rank_rel(a: &Array2<c64>, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = singular_values(a).expect("svd of a finite matrix");
    let smax = s[0];
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * smax).count()
}

/// Orthonormal basis of the numerical nullspace {x : sigma-components below
/// `tol * sigma_max`}; returned as columns. The zero matrix yields a full
/// orthonormal basis of the domain.
pub fn nullspace(a: &Array2<c64>, tol: f64) -> Array2<c64> {
    let n = a.ncols();
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    if a.nrows() == 0 {
        return Array2::eye(n);
    }
    let (_, s, vh) = a.svd(false, true).expect("svd of a finite matrix");
    let vh = vh.expect("requested V^H");
    let smax = s.iter().copied().fold(0.0, f64::max);
    let rank = if smax == 0.0 {
        0
    } else {
        s.iter().filter(|&&x| x > tol * smax).count()
    };
    let null_dim = n - rank;
    let mut basis = Array2::zeros((n, null_dim));
    for j in 0..null_dim {
        // nullspace vectors are the trailing columns of V = (V^H)^H
        let row = vh.row(rank + j);
        for i in 0..n {
            basis[(i, j)] = row[i].conj();
        }
    }
    basis
}

/// Minimum-norm least-squares solve via SVD with an explicit residual.
pub struct LeastSquares {
    pub solution: Array1<c64>,
    /// Euclidean norm of `A x - b`.
    pub residual: f64,
    pub sigma_max: f64,
    /// Smallest singular value counted over all `ncols` directions
    /// (0 when the matrix has fewer singular values than columns).
    pub sigma_min: f64,
}

pub fn lstsq_svd(a: &Array2<c64>, b: &Array1<c64>) -> Result<LeastSquares> {
    let n = a.ncols();
    if n == 0 {
        return Ok(LeastSquares {
            solution: Array1::zeros(0),
            residual: b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            sigma_max: 0.0,
            sigma_min: 0.0,
        });
    }
    let (u, s, vh) = a.svd(true, true)?;
    let u = u.expect("requested U");
    let vh = vh.expect("requested V^H");
    let smax = s.iter().copied().fold(0.0, f64::max);
    // pseudo-inverse cutoff: strictly numerical, far below any rank tolerance
    let cutoff = 1e-14 * smax;
    let mut x = Array1::<c64>::zeros(n);
    for (i, &sigma) in s.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            let uh_b: c64 = u.column(i).iter().zip(b.iter()).map(|(ui, bi)| ui.conj() * bi).sum();
            let coeff = uh_b / sigma;
            for j in 0..n {
                x[j] += vh[(i, j)].conj() * coeff;
            }
        }
    }
    let r = a.dot(&x) - b;
    let sigma_min = if s.len() >= n { s[s.len() - 1] } else { 0.0 };
    Ok(LeastSquares {
        solution: x,
        residual: r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        sigma_max: smax,
        sigma_min,
    })
}

/// LU solve of a square system.
pub fn solve(a: &Array2<c64>, b: &Array1<c64>) -> Result<Array1<c64>> {
    Ok(a.solve(b)?)
}

pub fn inv(a: &Array2<c64>) -> Result<Array2<c64>> {
    Ok(a.inv()?)
}

/// How a matrix exponential was realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpmMethod {
    /// diagonalization `V exp(D) V^{-1}`, used when `cond2(V)` is moderate
    Eigendecomposition,
    /// Pade(13) scaling and squaring
    ScalingSquaring,
}

impl ExpmMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExpmMethod::Eigendecomposition => "eigendecomposition",
            ExpmMethod::ScalingSquaring => "scaling-squaring",
        }
    }
}

/// Condition-number gate for the eigendecomposition route of `matrix_exp`.
pub const EXPM_COND_GATE: f64 = 1e8;

/// Matrix exponential `exp(M)`. Diagonalization is used when the eigenvector
/// matrix is well conditioned (`cond2 < 1e8`), otherwise Pade scaling and
/// squaring; the route taken is returned so callers can log it.
pub fn matrix_exp(m: &Array2<c64>) -> Result<(Array2<c64>, ExpmMethod)> {
    if let Ok((vals, vecs)) = m.eig() {
        if let Ok(cond) = cond2(&vecs) {
            if cond.is_finite() && cond < EXPM_COND_GATE {
                let vinv = vecs.inv()?;
                let mut scaled = vecs.clone();
                for (j, &lambda) in vals.iter().enumerate() {
                    let e = lambda.exp();
                    scaled.column_mut(j).mapv_inplace(|z| z * e);
                }
                return Ok((scaled.dot(&vinv), ExpmMethod::Eigendecomposition));
            }
        }
    }
    Ok((expm_pade(m)?, ExpmMethod::ScalingSquaring))
}

/// Pade(13) scaling-and-squaring exponential (Higham's coefficients).
fn expm_pade(a: &Array2<c64>) -> Result<Array2<c64>> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;

    let n = a.nrows();
    let norm = a.opnorm_one()?;
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = c64::new((0.5f64).powi(s), 0.0);
    let a = a.mapv(|z| z * scale);

    let eye: Array2<c64> = Array2::eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let u_inner = &a6 * B[13] + &a4 * B[11] + &a2 * B[9];
    let u_poly = a6.dot(&u_inner) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &eye * B[1];
    let u = a.dot(&u_poly);
    let v_inner = &a6 * B[12] + &a4 * B[10] + &a2 * B[8];
    let v = a6.dot(&v_inner) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &eye * B[0];

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs.inv()?.dot(&rhs);
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Block-diagonal assembly from square or rectangular blocks.
pub fn blockdiag(blocks: &[ArrayView2<c64>]) -> Array2<c64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Array2::zeros((rows, cols));
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                out[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// `I_n (x) a`: block diagonal with `n` copies of `a`.
pub fn identity_kron(n: usize, a: &Array2<c64>) -> Array2<c64> {
    let views: Vec<ArrayView2<c64>> = (0..n).map(|_| a.view()).collect();
    blockdiag(&views)
}

pub fn hstack(parts: &[ArrayView2<c64>]) -> Array2<c64> {
    concatenate(Axis(1), parts).expect("row counts agree")
}

pub fn vstack(parts: &[ArrayView2<c64>]) -> Array2<c64> {
    concatenate(Axis(0), parts).expect("column counts agree")
}

pub fn max_abs(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &Array1<c64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
