//! Block-diagonal signal generator on a finite truncation.
//!
//! The generator `S` acts on a direct sum of Jordan blocks: block `k` has
//! frequency `omega_k` and size `n_k`, with basis states `phi_k^1, ...,
//! phi_k^{n_k}` satisfying `S phi_k^1 = i omega_k phi_k^1` and
//! `S phi_k^l = i omega_k phi_k^l + phi_k^{l-1}` for `l >= 2`. States are
//! stored as flat complex coefficient vectors; the `(k, l) <-> flat index`
//! map is fixed by the block order given at construction.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One Jordan block of the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoBlock {
    /// integer label (conventionally an index into the frequency lattice)
    pub k: i64,
    /// frequency in rad/s
    pub omega: f64,
    /// block size (Jordan chain length), >= 1
    pub n: usize,
}

/// Immutable signal generator over a finite block list.
#[derive(Debug, Clone)]
pub struct Exosystem {
    blocks: Vec<ExoBlock>,
    alpha: f64,
    n_s: usize,
    m_s: f64,
    offsets: Vec<usize>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExosystemSpec {
    blocks: Vec<ExoBlock>,
    alpha: f64,
}

impl Serialize for Exosystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExosystemSpec {
            blocks: self.blocks.clone(),
            alpha: self.alpha,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exosystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ExosystemSpec::deserialize(d)?;
        Exosystem::new(spec.blocks, spec.alpha).map_err(serde::de::Error::custom)
    }
}

impl Exosystem {
    /// Build a generator from a block list and a smoothness index.
    ///
    /// Rejects duplicate block labels or frequencies, empty blocks, and
    /// negative `alpha`. The growth constant `M_S = e` is valid for every
    /// truncation: each block of the group action is an upper-triangular
    /// Toeplitz matrix whose entries `t^j / j!` sum to at most
    /// `e * (|t|^{n_S - 1} + 1)` in operator norm.
    pub fn new(blocks: Vec<ExoBlock>, alpha: f64) -> Result<Self> {
        if alpha < 0.0 {
            return Err(CoreError::NegativeAlpha(alpha));
        }
        if blocks.is_empty() {
            return Err(CoreError::InvalidConfig(
                "exosystem needs at least one block".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.n == 0 {
                return Err(CoreError::EmptyBlock);
            }
            for other in &blocks[..i] {
                if other.omega == b.omega {
                    return Err(CoreError::DuplicateFrequency(b.omega));
                }
                if other.k == b.k {
                    return Err(CoreError::InvalidConfig(format!(
                        "block label {} appears twice",
                        b.k
                    )));
                }
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in &blocks {
            offsets.push(dim);
            dim += b.n;
        }
        let n_s = blocks.iter().map(|b| b.n).max().unwrap();
        Ok(Exosystem {
            blocks,
            alpha,
            n_s,
            m_s: std::f64::consts::E,
            offsets,
            dim,
        })
    }

    pub fn blocks(&self) -> &[ExoBlock] {
        &self.blocks
    }

    /// Flat dimension of the truncation (sum of block sizes).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Uniform bound on the block sizes.
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Growth constant: `||T_S(t)|| <= M_S (|t|^{n_S} + 1)` for all real t.
    pub fn m_s(&self) -> f64 {
        self.m_s
    }

    fn block_index(&self, k: i64) -> Result<usize> {
        self.blocks
            .iter()
            .position(|b| b.k == k)
            .ok_or(CoreError::UnknownBlock(k))
    }

    /// (flat offset, block) for a label.
    pub fn block_at(&self, k: i64) -> Result<(usize, &ExoBlock)> {
        let i = self.block_index(k)?;
        Ok((self.offsets[i], &self.blocks[i]))
    }

    /// Basis state `phi_k^l` (`l` is 1-based, `1 <= l <= n_k`).
    pub fn basis_state(&self, k: i64, l: usize) -> Result<Array1<c64>> {
        let (off, b) = self.block_at(k)?;
        if l == 0 || l > b.n {
            return Err(CoreError::DimensionMismatch {
                context: format!("chain index l for block {k}"),
                expected: b.n,
                found: l,
            });
        }
        let mut v = Array1::zeros(self.dim);
        v[off + l - 1] = c64::new(1.0, 0.0);
        Ok(v)
    }

    /// Dense matrix of the generator `S` (block diagonal, Jordan blocks).
    pub fn s_matrix(&self) -> Array2<c64> {
        let mut s = Array2::zeros((self.dim, self.dim));
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            for l in 0..b.n {
                s[(off + l, off + l)] = c64::new(0.0, b.omega);
                if l + 1 < b.n {
                    // S phi^{l+1} = i omega phi^{l+1} + phi^l
                    s[(off + l, off + l + 1)] = c64::new(1.0, 0.0);
                }
            }
        }
        s
    }

    /// Group action `T_S(t) v0`, computed blockwise in closed form:
    /// component `(k, j)` of the output is
    /// `e^{i omega_k t} * sum_{l >= j} v0[(k,l)] t^{l-j} / (l-j)!`.
    ///
    /// Total in `t`; panics only if `v0` has the wrong length (state
    /// invariant violation).
    pub fn group_action(&self, v0: &Array1<c64>, t: f64) -> Array1<c64> {
        assert_eq!(v0.len(), self.dim, "exosystem state length");
        let mut out = Array1::zeros(self.dim);
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let rot = c64::new(0.0, b.omega * t).exp();
            for j in 1..=b.n {
                let mut acc = c64::new(0.0, 0.0);
                let mut weight = 1.0; // t^{l-j}/(l-j)! built incrementally
                for l in j..=b.n {
                    acc += v0[off + l - 1] * weight;
                    weight *= t / (l - j + 1) as f64;
                }
                out[off + j - 1] = rot * acc;
            }
        }
        out
    }

    /// Scale-space norm `sqrt(sum_k (1 + omega_k^2)^alpha ||P_k v||^2)`.
    pub fn alpha_norm(&self, v: &Array1<c64>, alpha: f64) -> Result<f64> {
        if alpha < 0.0 {
            return Err(CoreError::NegativeAlpha(alpha));
        }
        assert_eq!(v.len(), self.dim, "exosystem state length");
        let mut total = 0.0;
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let w = (1.0 + b.omega * b.omega).powf(alpha);
            let block_sq: f64 = (0..b.n).map(|l| v[off + l].norm_sqr()).sum();
            total += w * block_sq;
        }
        Ok(total.sqrt())
    }

    /// Orthogonal projection onto block `k` (zeroes all other components).
    pub fn project_pk(&self, v: &Array1<c64>, k: i64) -> Result<Array1<c64>> {
        let (off, b) = self.block_at(k)?;
        assert_eq!(v.len(), self.dim, "exosystem state length");
        let mut out = Array1::zeros(self.dim);
        for l in 0..b.n {
            out[off + l] = v[off + l];
        }
        Ok(out)
    }

    /// Basis states of block `k` in descending chain order:
    /// `[phi_k^{n_k}, ..., phi_k^1]`.
    pub fn phi_stack(&self, k: i64) -> Result<Vec<Array1<c64>>> {
        let (_, b) = self.block_at(k)?;
        (1..=b.n).rev().map(|l| self.basis_state(k, l)).collect()
    }

    /// Disturbance and reference signal at time `t`:
    /// `w = E T_S(t) v0`, `y_ref = -F T_S(t) v0`.
    pub fn exo_signal(
        &self,
        e_mat: &Array2<c64>,
        f_mat: &Array2<c64>,
        v0: &Array1<c64>,
        t: f64,
    ) -> Result<(Array1<c64>, Array1<c64>)> {
        for (name, m) in [("E", e_mat), ("F", f_mat)] {
            if m.ncols() != self.dim {
                return Err(CoreError::DimensionMismatch {
                    context: format!("{name} columns"),
                    expected: self.dim,
                    found: m.ncols(),
                });
            }
        }
        let v = self.group_action(v0, t);
        let w = e_mat.dot(&v);
        let y_ref = f_mat.dot(&v).mapv(|z| -z);
        Ok((w, y_ref))
    }

    /// Search for an initial state whose output `Q T_S(t) v0` does not decay.
    ///
    /// `Q T_S(t) phi_k^m` expands into polynomial-in-`t` coefficients
    /// `Q phi_k^{m-j}`, so the output decays for every initial state exactly
    /// when all those coefficients vanish, i.e. `Q = 0`. If some entry of `Q`
    /// exceeds `tol`, the top chain state `phi_k^{n_k}` of the first block
    /// with a nonzero column is returned: its orbit excites every coefficient
    /// `Q phi_k^l` of that block. Returns `None` when `max |Q_ij| <= tol`.
    ///
    /// `horizon` only controls a diagnostic sampling check in debug builds;
    /// the coefficient criterion is authoritative.
    pub fn nondecay_witness(
        &self,
        q: &Array2<c64>,
        horizon: f64,
        tol: f64,
    ) -> Result<Option<Array1<c64>>> {
        if q.ncols() != self.dim {
            return Err(CoreError::DimensionMismatch {
                context: "Q columns".into(),
                expected: self.dim,
                found: q.ncols(),
            });
        }
        let max_entry = q.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max_entry <= tol {
            return Ok(None);
        }
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let block_nonzero = (0..b.n).any(|l| {
                (0..q.nrows()).any(|r| q[(r, off + l)].norm() > tol)
            });
            if block_nonzero {
                let witness = self.basis_state(b.k, b.n)?;
                #[cfg(debug_assertions)]
                {
                    // diagnostic only: sampled sup stays visibly nonzero
                    let mut t = 0.0;
                    let mut sup: f64 = 0.0;
                    while t <= horizon.max(1.0) {
                        let out = q.dot(&self.group_action(&witness, t));
                        sup = sup.max(crate::linalg::vec_norm(&out));
                        t = if t == 0.0 { 1.0 } else { t * 2.0 };
                    }
                    debug_assert!(sup > tol / 2.0, "witness orbit unexpectedly small");
                }
                let _ = horizon;
                return Ok(Some(witness));
            }
        }
        // max entry exceeded tol, so some block column must have too
        unreachable!("nonzero Q without a nonzero block column");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_norm;
    use approx::assert_abs_diff_eq;

    fn two_block_exo() -> Exosystem {
        Exosystem::new(
            vec![
                ExoBlock { k: 0, omega: 1.0, n: 1 },
                ExoBlock { k: 1, omega: 2.0, n: 1 },
            ],
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn rotation_of_a_single_mode_by_half_turn_flips_sign() {
        let exo = Exosystem::new(vec![ExoBlock { k: 0, omega: 1.0, n: 1 }], 0.0).unwrap();
        let v0 = exo.basis_state(0, 1).unwrap();
        let v = exo.group_action(&v0, std::f64::consts::PI);
        assert!((v[0] - c64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn chain_term_appears_linearly_in_time_at_zero_frequency() {
        let exo = Exosystem::new(vec![ExoBlock { k: 0, omega: 0.0, n: 2 }], 0.0).unwrap();
        let v0 = exo.basis_state(0, 2).unwrap();
        let v = exo.group_action(&v0, 3.0);
        // T(t) phi^2 = phi^2 + t phi^1
        assert!((v[0] - c64::new(3.0, 0.0)).norm() < 1e-12);
        assert!((v[1] - c64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn group_action_at_time_zero_is_identity() {
        let exo = Exosystem::new(
            vec![
                ExoBlock { k: -1, omega: -0.7, n: 3 },
                ExoBlock { k: 4, omega: 1.3, n: 2 },
            ],
            1.0,
        )
        .unwrap();
        let mut v0 = Array1::zeros(exo.dim());
        for (i, z) in v0.iter_mut().enumerate() {
            *z = c64::new(i as f64 + 0.5, -(i as f64));
        }
        let v = exo.group_action(&v0, 0.0);
        assert!(vec_norm(&(&v - &v0)) < 1e-15);
    }

    #[test]
    fn alpha_norm_weights_a_unit_mode_by_its_frequency() {
        let exo = Exosystem::new(vec![ExoBlock { k: 0, omega: 1.0, n: 1 }], 1.0).unwrap();
        let v = exo.basis_state(0, 1).unwrap();
        assert_abs_diff_eq!(
            exo.alpha_norm(&v, 1.0).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn alpha_norm_on_two_unit_blocks_matches_hand_value() {
        // weights (1+1)^2 = 4 and (1+4)^2 = 25 on unit coefficients
        let exo = two_block_exo();
        let v = Array1::from_elem(2, c64::new(1.0, 0.0));
        assert_abs_diff_eq!(
            exo.alpha_norm(&v, 2.0).unwrap(),
            29.0f64.sqrt(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            exo.alpha_norm(&v, 2.0).unwrap(),
            5.3851648071345037,
            epsilon = 1e-14
        );
    }

    #[test]
    fn alpha_zero_is_the_euclidean_norm() {
        let exo = two_block_exo();
        let v = Array1::from_vec(vec![c64::new(3.0, 0.0), c64::new(0.0, -4.0)]);
        assert_abs_diff_eq!(exo.alpha_norm(&v, 0.0).unwrap(), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let exo = two_block_exo();
        let v = Array1::zeros(2);
        assert!(matches!(
            exo.alpha_norm(&v, -0.5),
            Err(CoreError::NegativeAlpha(_))
        ));
        assert!(matches!(
            Exosystem::new(vec![ExoBlock { k: 0, omega: 0.0, n: 1 }], -1.0),
            Err(CoreError::NegativeAlpha(_))
        ));
    }

    #[test]
    fn projection_fixes_own_block_and_kills_others() {
        let exo = two_block_exo();
        let v0 = exo.basis_state(0, 1).unwrap();
        let same = exo.project_pk(&v0, 0).unwrap();
        let other = exo.project_pk(&v0, 1).unwrap();
        assert!(vec_norm(&(&same - &v0)) < 1e-15);
        assert!(vec_norm(&other) < 1e-15);
        let twice = exo.project_pk(&same, 0).unwrap();
        assert!(vec_norm(&(&twice - &same)) < 1e-15);
    }

    #[test]
    fn unknown_block_label_is_an_error() {
        let exo = two_block_exo();
        let v = Array1::zeros(2);
        assert!(matches!(
            exo.project_pk(&v, 7),
            Err(CoreError::UnknownBlock(7))
        ));
    }

    #[test]
    fn phi_stack_is_in_descending_chain_order() {
        let exo = Exosystem::new(vec![ExoBlock { k: 2, omega: 0.5, n: 3 }], 0.0).unwrap();
        let stack = exo.phi_stack(2).unwrap();
        assert_eq!(stack.len(), 3);
        assert!((stack[0][2] - c64::new(1.0, 0.0)).norm() < 1e-15); // phi^3
        assert!((stack[1][1] - c64::new(1.0, 0.0)).norm() < 1e-15); // phi^2
        assert!((stack[2][0] - c64::new(1.0, 0.0)).norm() < 1e-15); // phi^1
    }

    #[test]
    fn constant_reference_signal_from_a_zero_frequency_mode() {
        let exo = Exosystem::new(vec![ExoBlock { k: 0, omega: 0.0, n: 1 }], 0.0).unwrap();
        let e = Array2::zeros((1, 1));
        let f = Array2::from_shape_vec((2, 1), vec![c64::new(-0.2, 0.0), c64::new(-0.6, 0.0)])
            .unwrap();
        let v0 = Array1::from_elem(1, c64::new(1.0, 0.0));
        for t in [0.0, 1.7, 30.0] {
            let (w, y_ref) = exo.exo_signal(&e, &f, &v0, t).unwrap();
            assert!(vec_norm(&w) < 1e-15);
            assert!((y_ref[0] - c64::new(0.2, 0.0)).norm() < 1e-14);
            assert!((y_ref[1] - c64::new(0.6, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_rotation_reference_at_quarter_period() {
        let exo = Exosystem::new(vec![ExoBlock { k: 1, omega: 1.0, n: 1 }], 0.0).unwrap();
        let e = Array2::zeros((1, 1));
        let f = Array2::from_elem((1, 1), c64::new(-1.0, 0.0));
        let v0 = Array1::from_elem(1, c64::new(1.0, 0.0));
        let (_, y_ref) = exo
            .exo_signal(&e, &f, &v0, std::f64::consts::FRAC_PI_2)
            .unwrap();
        assert!((y_ref[0] - c64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn exo_signal_rejects_mismatched_operator_widths() {
        let exo = two_block_exo();
        let e = Array2::zeros((1, 3));
        let f = Array2::zeros((1, 2));
        let v0 = Array1::zeros(2);
        assert!(matches!(
            exo.exo_signal(&e, &f, &v0, 0.0),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_q_has_no_witness() {
        let exo = two_block_exo();
        let q = Array2::zeros((2, 2));
        assert!(exo.nondecay_witness(&q, 100.0, 1e-12).unwrap().is_none());
    }

    #[test]
    fn identity_q_on_a_rotation_block_is_witnessed_by_the_eigenstate() {
        let exo = Exosystem::new(vec![ExoBlock { k: 0, omega: 1.0, n: 1 }], 0.0).unwrap();
        let q = Array2::eye(1);
        let w = exo.nondecay_witness(&q, 100.0, 1e-12).unwrap().unwrap();
        assert!((w[0] - c64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_nonzero_column_on_a_chain_block_yields_the_top_chain_state() {
        let exo = Exosystem::new(vec![ExoBlock { k: 5, omega: 0.0, n: 2 }], 0.0).unwrap();
        // nonzero column only at (k=5, l=1); the returned top state phi^2
        // feeds that coordinate linearly in t
        let mut q = Array2::<c64>::zeros((1, 2));
        q[(0, 0)] = c64::new(1.0, 0.0);
        let w = exo.nondecay_witness(&q, 64.0, 1e-12).unwrap().unwrap();
        let top = exo.basis_state(5, 2).unwrap();
        assert!(vec_norm(&(&w - &top)) < 1e-15);
        // the orbit really grows like t
        let out = q.dot(&exo.group_action(&w, 8.0));
        assert!(vec_norm(&out) > 1.0);
    }

    #[test]
    fn duplicate_frequencies_are_rejected() {
        assert!(matches!(
            Exosystem::new(
                vec![
                    ExoBlock { k: 0, omega: 1.0, n: 1 },
                    ExoBlock { k: 1, omega: 1.0, n: 2 },
                ],
                0.0,
            ),
            Err(CoreError::DuplicateFrequency(_))
        ));
    }

    #[test]
    fn s_matrix_realizes_the_chain_action() {
        let exo = Exosystem::new(vec![ExoBlock { k: 0, omega: 2.0, n: 2 }], 0.0).unwrap();
        let s = exo.s_matrix();
        let phi2 = exo.basis_state(0, 2).unwrap();
        let s_phi2 = s.dot(&phi2);
        // S phi^2 = i*omega*phi^2 + phi^1
        assert!((s_phi2[1] - c64::new(0.0, 2.0)).norm() < 1e-15);
        assert!((s_phi2[0] - c64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip_preserves_blocks_and_alpha() {
        let exo = Exosystem::new(
            vec![
                ExoBlock { k: -2, omega: -2.0, n: 2 },
                ExoBlock { k: 3, omega: 3.0, n: 1 },
            ],
            1.5,
        )
        .unwrap();
        let text = serde_json::to_string(&exo).unwrap();
        let back: Exosystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back.dim(), exo.dim());
        assert_eq!(back.alpha(), exo.alpha());
        assert_eq!(back.blocks()[0].k, -2);
        assert_eq!(back.blocks()[1].n, 1);
    }

    #[test]
    fn unknown_json_keys_are_rejected() {
        let text = r#"{"blocks":[{"k":0,"omega":0.0,"n":1}],"alpha":0.0,"extra":1}"#;
        assert!(serde_json::from_str::<Exosystem>(text).is_err());
    }
}
