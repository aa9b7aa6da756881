//! Plant representation by spectral data.
//!
//! A plant `(A, B, C, D)` is stored as real eigenvalues `lambda_0 > lambda_1
//! > ...` together with mode coefficients of the input and output
//! functionals: `input_modes[(m, j)] = <b_j, phi_m>` and
//! `output_modes[(i, m)] = phi_m(xi_i)` for point evaluations. Unbounded
//! inputs/outputs (boundary control, point observation) need nothing beyond
//! these coefficients. Resolvents and transfer values are truncated series
//! with closed-form tail estimates.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::report::{matrix_from_rows, matrix_to_rows, ComplexScalar};

/// Eigenfunction family attached to a plant for profile projections and
/// surface reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    /// `phi_0 = 1`, `phi_m(xi) = sqrt(2) cos(m pi xi)` on `[0, 1]`.
    NeumannCosine,
}

impl BasisFamily {
    pub fn eval(&self, m: usize, xi: f64) -> f64 {
        match self {
            BasisFamily::NeumannCosine => {
                if m == 0 {
                    1.0
                } else {
                    std::f64::consts::SQRT_2 * (m as f64 * PI * xi).cos()
                }
            }
        }
    }
}

/// Transfer-function sample with a truncation-error estimate.
#[derive(Debug, Clone)]
pub struct TransferSample {
    pub lambda: c64,
    /// `p x m` truncated transfer value `C R(lambda, A) B + D`
    pub value: Array2<c64>,
    /// entrywise bound on the dropped-tail contribution; `INFINITY` when the
    /// crude tail estimate does not converge at this point
    pub tail_bound: f64,
}

/// Immutable spectral plant model.
#[derive(Debug, Clone)]
pub struct ModalPlant {
    eigenvalues: Array1<f64>,
    input_modes: Array2<c64>,  // N x m
    output_modes: Array2<c64>, // p x N
    feedthrough: Array2<c64>,  // p x m
    tail_constant: f64,
    admissibility: Array1<f64>, // per input column: sum |beta|^2 / |lambda|
    basis: Option<BasisFamily>,
}

/// Relative guard for resolvent evaluations: points within
/// `1e-12 * (|lambda| + 1)` of an eigenvalue are rejected.
pub const RESOLVENT_GUARD: f64 = 1e-12;

/// Initial plant state, either as mode coefficients or as a spatial profile
/// to be projected (requires an attached basis family).
pub enum InitialState<'a> {
    Coefficients(Array1<c64>),
    Profile(&'a dyn Fn(f64) -> f64),
}

impl ModalPlant {
    pub fn new(
        eigenvalues: Array1<f64>,
        input_modes: Array2<c64>,
        output_modes: Array2<c64>,
        feedthrough: Array2<c64>,
        tail_constant: f64,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(CoreError::InvalidConfig("plant needs at least one mode".into()));
        }
        for w in eigenvalues.windows(2) {
            if !(w[0] > w[1]) {
                return Err(CoreError::EigenvalueOrder);
            }
        }
        if input_modes.nrows() != n {
            return Err(CoreError::DimensionMismatch {
                context: "input_modes rows".into(),
                expected: n,
                found: input_modes.nrows(),
            });
        }
        if output_modes.ncols() != n {
            return Err(CoreError::DimensionMismatch {
                context: "output_modes columns".into(),
                expected: n,
                found: output_modes.ncols(),
            });
        }
        let p = output_modes.nrows();
        let m = input_modes.ncols();
        if feedthrough.nrows() != p || feedthrough.ncols() != m {
            return Err(CoreError::DimensionMismatch {
                context: "feedthrough shape".into(),
                expected: p * m,
                found: feedthrough.nrows() * feedthrough.ncols(),
            });
        }
        let mut max_product: f64 = 0.0;
        for mode in 0..n {
            for i in 0..p {
                for j in 0..m {
                    let prod = (output_modes[(i, mode)] * input_modes[(mode, j)]).norm();
                    max_product = max_product.max(prod);
                }
            }
        }
        if tail_constant + 1e-12 < max_product {
            return Err(CoreError::InvalidConfig(format!(
                "tail_constant {tail_constant} is below the largest retained \
                 coefficient product {max_product}"
            )));
        }
        let mut admissibility = Array1::zeros(m);
        for j in 0..m {
            admissibility[j] = (0..n)
                .map(|mode| {
                    input_modes[(mode, j)].norm_sqr() / eigenvalues[mode].abs().max(f64::MIN_POSITIVE)
                })
                .sum();
        }
        Ok(ModalPlant {
            eigenvalues,
            input_modes,
            output_modes,
            feedthrough,
            tail_constant,
            admissibility,
            basis: None,
        })
    }

    pub fn with_basis(mut self, basis: BasisFamily) -> Self {
        self.basis = Some(basis);
        self
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_modes.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_modes.nrows()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn input_modes(&self) -> &Array2<c64> {
        &self.input_modes
    }

    pub fn output_modes(&self) -> &Array2<c64> {
        &self.output_modes
    }

    pub fn feedthrough(&self) -> &Array2<c64> {
        &self.feedthrough
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// Per-input admissibility surrogate `sum_m |beta_{m,j}|^2 / |lambda_m|`
    /// over the retained modes (recorded, never gated on).
    pub fn admissibility(&self) -> &Array1<f64> {
        &self.admissibility
    }

    pub fn basis(&self) -> Option<BasisFamily> {
        self.basis
    }

    pub fn basis_eval(&self, m: usize, xi: f64) -> Result<f64> {
        let basis = self.basis.ok_or(CoreError::MissingBasis)?;
        Ok(basis.eval(m, xi))
    }

    /// Componentwise resolvent weights `1 / (lambda - lambda_m)` with the
    /// singularity guard applied.
    fn resolvent_weights(&self, lambda: c64) -> Result<Array1<c64>> {
        let guard = RESOLVENT_GUARD * (lambda.norm() + 1.0);
        let mut min_dist = f64::INFINITY;
        let mut nearest = self.eigenvalues[0];
        for &ev in self.eigenvalues.iter() {
            let dist = (lambda - c64::new(ev, 0.0)).norm();
            if dist < min_dist {
                min_dist = dist;
                nearest = ev;
            }
        }
        if min_dist <= guard {
            return Err(CoreError::SingularResolvent {
                lambda,
                eigenvalue: nearest,
                dist: min_dist,
            });
        }
        Ok(self
            .eigenvalues
            .mapv(|ev| (lambda - c64::new(ev, 0.0)).finv()))
    }

    /// `R(lambda, A) x`: componentwise division by `lambda - lambda_m`.
    pub fn resolvent_apply(&self, lambda: c64, x: &Array1<c64>) -> Result<Array1<c64>> {
        if x.len() != self.n_modes() {
            return Err(CoreError::DimensionMismatch {
                context: "modal vector length".into(),
                expected: self.n_modes(),
                found: x.len(),
            });
        }
        let w = self.resolvent_weights(lambda)?;
        Ok(x * &w)
    }

    /// Closed-form overestimate of `sum_{m >= N} 1 / |lambda - lambda_m|`
    /// for the dropped modes, assuming the heat-type family
    /// `lambda_m = -m^2 pi^2 - 1` from mode `N` on.
    ///
    /// For `Re lambda + 1 > 0` the integral comparison
    /// `sum_{m>=N} 1/(x + m^2 pi^2) <= (1/(pi sqrt(x))) (pi/2 - atan(N pi / sqrt(x)))`
    /// with `x = Re lambda + 1` is used. Elsewhere the crude estimate
    /// `1/(m^2 pi^2 + 1 - |lambda|)` is summed via `sum 1/m^2`; it diverges
    /// (returns `INFINITY`) once `|lambda|` reaches `N^2 pi^2 + 1`.
    pub fn tail_sum_bound(&self, lambda: c64) -> f64 {
        let n = self.n_modes() as f64;
        let x = lambda.re + 1.0;
        if x > 0.0 {
            let sx = x.sqrt();
            (1.0 / (PI * sx)) * (PI / 2.0 - (n * PI / sx).atan())
        } else {
            let abs = lambda.norm();
            let shrink = ((abs - 1.0) / (n * n * PI * PI)).max(0.0);
            if shrink >= 1.0 {
                return f64::INFINITY;
            }
            let sum_inv_m2 = if self.n_modes() >= 2 {
                1.0 / (n - 1.0)
            } else {
                PI * PI / 6.0
            };
            sum_inv_m2 / (PI * PI * (1.0 - shrink))
        }
    }

    /// Truncated transfer value `P(lambda) = C R(lambda, A) B + D` with a
    /// tail estimate `tail_constant * tail_sum_bound(lambda)`.
    pub fn transfer(&self, lambda: c64) -> Result<TransferSample> {
        let w = self.resolvent_weights(lambda)?;
        let p = self.n_outputs();
        let m = self.n_inputs();
        let mut value = self.feedthrough.clone();
        for mode in 0..self.n_modes() {
            let weight = w[mode];
            for i in 0..p {
                let ci = self.output_modes[(i, mode)] * weight;
                for j in 0..m {
                    value[(i, j)] += ci * self.input_modes[(mode, j)];
                }
            }
        }
        Ok(TransferSample {
            lambda,
            value,
            tail_bound: self.tail_constant * self.tail_sum_bound(lambda),
        })
    }

    /// Analytic bound on `||P(lambda)||`:
    /// `tail_constant * (sum_{m<N} 1/|lambda - lambda_m| + tail)`.
    pub fn transfer_norm_bound(&self, lambda: c64) -> Result<f64> {
        let _ = self.resolvent_weights(lambda)?;
        let retained: f64 = self
            .eigenvalues
            .iter()
            .map(|&ev| 1.0 / (lambda - c64::new(ev, 0.0)).norm())
            .sum();
        Ok(self.tail_constant * retained + self.tail_constant * self.tail_sum_bound(lambda))
    }

    /// Lazily applied block-triangular resolvent at `i omega` for a size-`n`
    /// Jordan block: block `(r, s)` is `(-1)^{s-r} R(i omega, A)^{s-r+1}`.
    pub fn block_resolvent(&self, omega: f64, n: usize) -> Result<BlockResolvent<'_>> {
        if n == 0 {
            return Err(CoreError::EmptyBlock);
        }
        let lambda = c64::new(0.0, omega);
        let weights = self.resolvent_weights(lambda)?;
        Ok(BlockResolvent {
            plant: self,
            weights,
            n,
        })
    }

    /// Dense `(n p) x (n m)` block transfer matrix at `i omega`: diagonal
    /// blocks `P(i omega)`, superdiagonal-`d` blocks
    /// `(-1)^d C R(i omega, A)^{d+1} B` (no feedthrough off the diagonal).
    pub fn block_transfer(&self, omega: f64, n: usize) -> Result<Array2<c64>> {
        if n == 0 {
            return Err(CoreError::EmptyBlock);
        }
        let lambda = c64::new(0.0, omega);
        let w = self.resolvent_weights(lambda)?;
        let p = self.n_outputs();
        let m = self.n_inputs();
        // level d >= 0: C R^{d+1} B with sign (-1)^d
        let mut levels: Vec<Array2<c64>> = Vec::with_capacity(n);
        let mut wpow = w.clone();
        for d in 0..n {
            let mut level: Array2<c64> = Array2::zeros((p, m));
            for mode in 0..self.n_modes() {
                let weight = wpow[mode];
                for i in 0..p {
                    let ci = self.output_modes[(i, mode)] * weight;
                    for j in 0..m {
                        level[(i, j)] += ci * self.input_modes[(mode, j)];
                    }
                }
            }
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            levels.push(level.mapv(|z| z * sign));
            if d + 1 < n {
                wpow = &wpow * &w;
            }
        }
        let mut out = Array2::zeros((n * p, n * m));
        for r in 0..n {
            for s in r..n {
                let level = &levels[s - r];
                for i in 0..p {
                    for j in 0..m {
                        out[(r * p + i, s * m + j)] = level[(i, j)];
                    }
                }
                if r == s {
                    for i in 0..p {
                        for j in 0..m {
                            out[(r * p + i, s * m + j)] += self.feedthrough[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Mode coefficients of an initial state: passthrough for coefficient
    /// data, composite-Simpson projection (4097 points on `[0, 1]`) for a
    /// spatial profile.
    pub fn project_initial_state(&self, x0: InitialState<'_>) -> Result<Array1<c64>> {
        match x0 {
            InitialState::Coefficients(c) => {
                if c.len() != self.n_modes() {
                    return Err(CoreError::DimensionMismatch {
                        context: "initial coefficient length".into(),
                        expected: self.n_modes(),
                        found: c.len(),
                    });
                }
                Ok(c)
            }
            InitialState::Profile(f) => {
                let basis = self.basis.ok_or(CoreError::MissingBasis)?;
                const POINTS: usize = 4097; // even interval count for Simpson
                let h = 1.0 / (POINTS - 1) as f64;
                let samples: Vec<f64> = (0..POINTS).map(|i| f(i as f64 * h)).collect();
                let mut coeffs = Array1::zeros(self.n_modes());
                for m in 0..self.n_modes() {
                    let mut acc = 0.0;
                    for (i, &fx) in samples.iter().enumerate() {
                        let weight = if i == 0 || i == POINTS - 1 {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        acc += weight * fx * basis.eval(m, i as f64 * h);
                    }
                    coeffs[m] = c64::new(acc * h / 3.0, 0.0);
                }
                Ok(coeffs)
            }
        }
    }
}

/// See [`ModalPlant::block_resolvent`].
pub struct BlockResolvent<'a> {
    plant: &'a ModalPlant,
    weights: Array1<c64>,
    n: usize,
}

impl BlockResolvent<'_> {
    pub fn block_count(&self) -> usize {
        self.n
    }

    /// Apply to a stacked vector of `n` modal components (positions follow
    /// the caller's chain convention; block `(r, s)` couples position `s`
    /// into position `r` for `s >= r`).
    pub fn apply(&self, stacked: &Array1<c64>) -> Result<Array1<c64>> {
        let nm = self.plant.n_modes();
        if stacked.len() != self.n * nm {
            return Err(CoreError::DimensionMismatch {
                context: "stacked modal vector length".into(),
                expected: self.n * nm,
                found: stacked.len(),
            });
        }
        let mut out = Array1::zeros(self.n * nm);
        for s in 0..self.n {
            let mut y: Array1<c64> =
                Array1::from_iter((0..nm).map(|i| stacked[s * nm + i]));
            // apply R once per level; level j contributes to row s - j
            for j in 0..=s {
                y = &y * &self.weights;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let r = s - j;
                for i in 0..nm {
                    out[r * nm + i] += y[i] * sign;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantSpec {
    eigenvalues: Vec<f64>,
    input_modes: Vec<Vec<ComplexScalar>>,
    output_modes: Vec<Vec<ComplexScalar>>,
    feedthrough: Vec<Vec<ComplexScalar>>,
}

impl Serialize for ModalPlant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlantSpec {
            eigenvalues: self.eigenvalues.to_vec(),
            input_modes: matrix_to_rows(&self.input_modes),
            output_modes: matrix_to_rows(&self.output_modes),
            feedthrough: matrix_to_rows(&self.feedthrough),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModalPlant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let spec = PlantSpec::deserialize(d)?;
        let eigenvalues = Array1::from_vec(spec.eigenvalues);
        let input_modes =
            matrix_from_rows(&spec.input_modes).ok_or_else(|| D::Error::custom("ragged input_modes"))?;
        let output_modes = matrix_from_rows(&spec.output_modes)
            .ok_or_else(|| D::Error::custom("ragged output_modes"))?;
        let feedthrough = matrix_from_rows(&spec.feedthrough)
            .ok_or_else(|| D::Error::custom("ragged feedthrough"))?;
        // default tail constant: the largest retained coefficient product
        let mut tail_constant: f64 = 0.0;
        for mode in 0..eigenvalues.len().min(input_modes.nrows()) {
            for i in 0..output_modes.nrows() {
                for j in 0..input_modes.ncols() {
                    tail_constant =
                        tail_constant.max((output_modes[(i, mode)] * input_modes[(mode, j)]).norm());
                }
            }
        }
        ModalPlant::new(eigenvalues, input_modes, output_modes, feedthrough, tail_constant)
            .map_err(D::Error::custom)
    }
}
