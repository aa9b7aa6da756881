//! Dynamic error-feedback controllers `(G1, G2, K)` and the three
//! internal-model verifiers:
//!
//! 1. chain counting on `G1` ("p-copy": at each generator frequency, the
//!    kernel of `i omega_k - G1` has dimension >= p and carries >= p
//!    independent Jordan chains of length >= n_k),
//! 2. range/kernel conditions on `(G1, G2)`,
//! 3. invertibility of the block transfer map restricted to `ker(J_k)`.
//!
//! Under closed-loop stability the three verdicts coincide; the verifiers
//! are deliberately independent code paths so tests can cross-check them.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::exosystem::Exosystem;
use crate::freq_ops::{frequency_block, kernel_basis, rank_sequence, shifted};
use crate::linalg::{hstack, identity_kron, rank_rel};
use crate::modal_plant::ModalPlant;
use crate::report::{matrix_from_rows, matrix_to_rows, ComplexScalar};

/// Immutable controller data.
#[derive(Debug, Clone)]
pub struct Controller {
    g1: Array2<c64>,
    g2: Array2<c64>,
    k_gain: Array2<c64>,
    structure: String,
}

impl Controller {
    pub fn new(
        g1: Array2<c64>,
        g2: Array2<c64>,
        k_gain: Array2<c64>,
        structure: impl Into<String>,
    ) -> Result<Self> {
        if g1.nrows() != g1.ncols() {
            return Err(CoreError::DimensionMismatch {
                context: "G1 must be square".into(),
                expected: g1.nrows(),
                found: g1.ncols(),
            });
        }
        if g2.nrows() != g1.nrows() {
            return Err(CoreError::DimensionMismatch {
                context: "G2 rows".into(),
                expected: g1.nrows(),
                found: g2.nrows(),
            });
        }
        if k_gain.ncols() != g1.nrows() {
            return Err(CoreError::DimensionMismatch {
                context: "K columns".into(),
                expected: g1.nrows(),
                found: k_gain.ncols(),
            });
        }
        Ok(Controller {
            g1,
            g2,
            k_gain,
            structure: structure.into(),
        })
    }

    pub fn g1(&self) -> &Array2<c64> {
        &self.g1
    }

    pub fn g2(&self) -> &Array2<c64> {
        &self.g2
    }

    pub fn k_gain(&self) -> &Array2<c64> {
        &self.k_gain
    }

    pub fn structure(&self) -> &str {
        &self.structure
    }

    pub fn dim_z(&self) -> usize {
        self.g1.nrows()
    }

    /// number of plant outputs the controller consumes (columns of G2)
    pub fn n_outputs(&self) -> usize {
        self.g2.ncols()
    }

    /// number of plant inputs the controller drives (rows of K)
    pub fn n_inputs(&self) -> usize {
        self.k_gain.nrows()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSpec {
    #[serde(rename = "G1")]
    g1: Vec<Vec<ComplexScalar>>,
    #[serde(rename = "G2")]
    g2: Vec<Vec<ComplexScalar>>,
    #[serde(rename = "K")]
    k: Vec<Vec<ComplexScalar>>,
    structure: String,
}

impl Serialize for Controller {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ControllerSpec {
            g1: matrix_to_rows(&self.g1),
            g2: matrix_to_rows(&self.g2),
            k: matrix_to_rows(&self.k_gain),
            structure: self.structure.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Controller {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let spec = ControllerSpec::deserialize(d)?;
        let g1 = matrix_from_rows(&spec.g1).ok_or_else(|| D::Error::custom("ragged G1"))?;
        let g2 = matrix_from_rows(&spec.g2).ok_or_else(|| D::Error::custom("ragged G2"))?;
        let k = matrix_from_rows(&spec.k).ok_or_else(|| D::Error::custom("ragged K"))?;
        Controller::new(g1, g2, k, spec.structure).map_err(D::Error::custom)
    }
}

/// Per-frequency verdict record. Each verifier fills only its own field;
/// [`InternalModelReport::merge`] combines reports from different verifiers.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyVerdict {
    pub k: i64,
    pub omega: f64,
    pub n: usize,
    pub pcopy_pass: Option<bool>,
    pub gcond_pass: Option<(bool, bool, bool)>,
    pub restricted_invertible: Option<bool>,
    pub details: String,
}

impl FrequencyVerdict {
    fn blank(k: i64, omega: f64, n: usize) -> Self {
        FrequencyVerdict {
            k,
            omega,
            n,
            pcopy_pass: None,
            gcond_pass: None,
            restricted_invertible: None,
            details: String::new(),
        }
    }
}

/// Verifier output: per-frequency records plus overall conjunctions.
#[derive(Debug, Clone, Serialize)]
pub struct InternalModelReport {
    pub tol: f64,
    pub per_frequency: Vec<FrequencyVerdict>,
    pub pcopy_overall: Option<bool>,
    pub gcond_overall: Option<bool>,
    pub restricted_overall: Option<bool>,
}

impl InternalModelReport {
    fn from_records(tol: f64, per_frequency: Vec<FrequencyVerdict>) -> Self {
        let fold = |f: &dyn Fn(&FrequencyVerdict) -> Option<bool>| -> Option<bool> {
            let mut all = true;
            for rec in &per_frequency {
                match f(rec) {
                    Some(v) => all &= v,
                    None => return None,
                }
            }
            Some(all)
        };
        let pcopy_overall = fold(&|r| r.pcopy_pass);
        let gcond_overall = fold(&|r| r.gcond_pass.map(|(a, b, c)| a && b && c));
        let restricted_overall = fold(&|r| r.restricted_invertible);
        InternalModelReport {
            tol,
            per_frequency,
            pcopy_overall,
            gcond_overall,
            restricted_overall,
        }
    }

    /// Combine records from different verifiers over the same frequencies.
    pub fn merge(mut self, other: InternalModelReport) -> Result<InternalModelReport> {
        if self.per_frequency.len() != other.per_frequency.len() {
            return Err(CoreError::DimensionMismatch {
                context: "merged report length".into(),
                expected: self.per_frequency.len(),
                found: other.per_frequency.len(),
            });
        }
        for (a, b) in self.per_frequency.iter_mut().zip(other.per_frequency) {
            if a.k != b.k {
                return Err(CoreError::UnknownBlock(b.k));
            }
            a.pcopy_pass = a.pcopy_pass.or(b.pcopy_pass);
            a.gcond_pass = a.gcond_pass.or(b.gcond_pass);
            a.restricted_invertible = a.restricted_invertible.or(b.restricted_invertible);
            if !b.details.is_empty() {
                if !a.details.is_empty() {
                    a.details.push_str("; ");
                }
                a.details.push_str(&b.details);
            }
        }
        Ok(InternalModelReport::from_records(
            self.tol,
            self.per_frequency,
        ))
    }

    /// `Some(verdict)` when all three verifiers ran and agree, else `None`.
    pub fn consensus(&self) -> Option<bool> {
        match (
            self.pcopy_overall,
            self.gcond_overall,
            self.restricted_overall,
        ) {
            (Some(a), Some(b), Some(c)) if a == b && b == c => Some(a),
            _ => None,
        }
    }
}

/// Chain-counting internal-model check: at each generator frequency the
/// controller's `G1` must hold at least `p` independent Jordan chains of
/// length `>= n_k` (counted via rank sequences).
pub fn check_p_copy(
    ctrl: &Controller,
    exo: &Exosystem,
    p: usize,
    tol: f64,
) -> InternalModelReport {
    let mut records = Vec::new();
    for b in exo.blocks() {
        let ranks = rank_sequence(ctrl.g1(), b.omega, b.n, tol);
        let kernel_dim = ranks[0] - ranks[1];
        let long_chains = ranks[b.n - 1] - ranks[b.n];
        let pass = kernel_dim >= p && long_chains >= p;
        let mut rec = FrequencyVerdict::blank(b.k, b.omega, b.n);
        rec.pcopy_pass = Some(pass);
        rec.details = format!(
            "kernel dim {kernel_dim}, chains of length >= {}: {long_chains}, need {p}",
            b.n
        );
        records.push(rec);
    }
    InternalModelReport::from_records(tol, records)
}

/// Range/kernel conditions on `(G1, G2)` per generator frequency:
/// (i)   `ran(i omega - G1) inter ran(G2) = {0}`,
/// (ii)  `ker(G2) = {0}`,
/// (iii) `ker((i omega - G1)^{n_k - 1}) subset ran(i omega - G1)`
///       (vacuous for `n_k = 1`).
pub fn check_g_conditions(ctrl: &Controller, exo: &Exosystem, tol: f64) -> InternalModelReport {
    let p = ctrl.n_outputs();
    let rank_g2 = rank_rel(ctrl.g2(), tol);
    let mut records = Vec::new();
    for b in exo.blocks() {
        let a_shift = shifted(&ctrl.g1().view(), b.omega);
        let rank_shift = rank_rel(&a_shift, tol);
        let joint = hstack(&[a_shift.view(), ctrl.g2().view()]);
        let cond_i = rank_rel(&joint, tol) == rank_shift + rank_g2;
        let cond_ii = rank_g2 == p;
        let cond_iii = if b.n == 1 {
            true
        } else {
            let mut power = Array2::<c64>::eye(ctrl.dim_z());
            for _ in 0..(b.n - 1) {
                power = power.dot(&a_shift);
            }
            let kb = kernel_basis(&power, tol);
            if kb.ncols() == 0 {
                true
            } else {
                rank_rel(&hstack(&[a_shift.view(), kb.view()]), tol) == rank_shift
            }
        };
        let mut rec = FrequencyVerdict::blank(b.k, b.omega, b.n);
        rec.gcond_pass = Some((cond_i, cond_ii, cond_iii));
        rec.details = format!(
            "rank(i w - G1) = {rank_shift}, rank(G2) = {rank_g2}, joint rank test {}",
            if cond_i { "clean" } else { "overlapping ranges" }
        );
        records.push(rec);
    }
    InternalModelReport::from_records(tol, records)
}

/// Block transfer map restricted to `ker(J_k)`, with rank verdicts.
#[derive(Debug, Clone)]
pub struct RestrictedMap {
    /// `(n_k p) x d` matrix of the restriction
    pub matrix: Array2<c64>,
    /// orthonormal basis of `ker(J_k)` the restriction was computed in
    pub kernel_basis: Array2<c64>,
    /// kernel dimension `d` of `J_k`
    pub kernel_dim: usize,
    pub injective: bool,
    pub surjective: bool,
    pub invertible: bool,
}

/// Restriction of `blocktransfer(i omega_k) * blockdiag(K)` to `ker(J_k)`.
pub fn restricted_pk(
    ctrl: &Controller,
    plant: &ModalPlant,
    exo: &Exosystem,
    k: i64,
    tol: f64,
) -> Result<RestrictedMap> {
    if plant.n_inputs() != ctrl.n_inputs() {
        return Err(CoreError::DimensionMismatch {
            context: "controller K rows vs plant inputs".into(),
            expected: plant.n_inputs(),
            found: ctrl.n_inputs(),
        });
    }
    if plant.n_outputs() != ctrl.n_outputs() {
        return Err(CoreError::DimensionMismatch {
            context: "controller G2 columns vs plant outputs".into(),
            expected: plant.n_outputs(),
            found: ctrl.n_outputs(),
        });
    }
    let (_, block) = exo.block_at(k)?;
    let fb = frequency_block(ctrl.g1(), k, block.omega, block.n, tol)?;
    let p_tilde = plant.block_transfer(block.omega, block.n)?;
    let k_all = identity_kron(block.n, ctrl.k_gain());
    let matrix = p_tilde.dot(&k_all).dot(&fb.ker_basis);
    let d = fb.ker_basis.ncols();
    let target = block.n * plant.n_outputs();
    let rank = rank_rel(&matrix, tol);
    Ok(RestrictedMap {
        matrix,
        kernel_basis: fb.ker_basis,
        kernel_dim: d,
        injective: rank == d,
        surjective: rank == target,
        invertible: rank == d && rank == target && d == target,
    })
}

/// Restricted-map verifier across all generator frequencies.
pub fn check_restricted(
    ctrl: &Controller,
    plant: &ModalPlant,
    exo: &Exosystem,
    tol: f64,
) -> Result<InternalModelReport> {
    let mut records = Vec::new();
    for b in exo.blocks() {
        let rm = restricted_pk(ctrl, plant, exo, b.k, tol)?;
        let mut rec = FrequencyVerdict::blank(b.k, b.omega, b.n);
        rec.restricted_invertible = Some(rm.invertible);
        rec.details = format!(
            "restriction is {} x {}, injective {}, surjective {}",
            rm.matrix.nrows(),
            rm.kernel_dim,
            rm.injective,
            rm.surjective
        );
        records.push(rec);
    }
    Ok(InternalModelReport::from_records(tol, records))
}

/// Gain data for [`build_p_copy_controller`].
pub struct PCopyGains {
    pub g2: Array2<c64>,
    pub k_gain: Array2<c64>,
}

/// Controller whose `G1` carries `p` copies of every generator block
/// (a Jordan block at `i omega_k` of size `n_k` each); `G2` and `K` are
/// taken from `gains`.
pub fn build_p_copy_controller(
    exo: &Exosystem,
    p: usize,
    gains: PCopyGains,
) -> Result<Controller> {
    if p == 0 {
        return Err(CoreError::InvalidConfig("p-copy needs p >= 1".into()));
    }
    let dim_z: usize = p * exo.dim();
    let mut g1 = Array2::zeros((dim_z, dim_z));
    let mut off = 0;
    for b in exo.blocks() {
        for _copy in 0..p {
            for l in 0..b.n {
                g1[(off + l, off + l)] = c64::new(0.0, b.omega);
                if l + 1 < b.n {
                    g1[(off + l, off + l + 1)] = c64::new(1.0, 0.0);
                }
            }
            off += b.n;
        }
    }
    if gains.g2.nrows() != dim_z || gains.g2.ncols() != p {
        return Err(CoreError::DimensionMismatch {
            context: "p-copy G2 shape".into(),
            expected: dim_z * p,
            found: gains.g2.nrows() * gains.g2.ncols(),
        });
    }
    if gains.k_gain.ncols() != dim_z {
        return Err(CoreError::DimensionMismatch {
            context: "p-copy K columns".into(),
            expected: dim_z,
            found: gains.k_gain.ncols(),
        });
    }
    Controller::new(g1, gains.g2, gains.k_gain, "p-copy")
}

/// Parameters for [`build_g_structured_controller`]: a stabilizer part `Z1`
/// coupled by `R1, R2, R3, K1`, and two generator copies driven through
/// vectors `g1, g2` and read by `K2`. Contract is structural only; the
/// stabilizing parameters default to zero in [`GStructuredParams::structural`].
pub struct GStructuredParams {
    pub dim_z1: usize,
    pub g1_coeffs: Array1<c64>,
    pub g2_coeffs: Array1<c64>,
    pub r1: Array2<c64>,
    pub r2: Array2<c64>,
    pub r3: Array2<c64>,
    pub k1: Array2<c64>,
    pub k2: Array2<c64>,
}

impl GStructuredParams {
    /// Zero stabilizers: pure internal-model structure with `m` inputs.
    pub fn structural(
        exo: &Exosystem,
        dim_z1: usize,
        g1_coeffs: Array1<c64>,
        g2_coeffs: Array1<c64>,
        m_inputs: usize,
    ) -> Self {
        let dw = exo.dim();
        GStructuredParams {
            dim_z1,
            g1_coeffs,
            g2_coeffs,
            r1: Array2::zeros((dim_z1, dim_z1)),
            r2: Array2::zeros((dim_z1, 2 * dw)),
            r3: Array2::zeros((dim_z1, 2)),
            k1: Array2::zeros((m_inputs, dim_z1)),
            k2: Array2::zeros((m_inputs, 2 * dw)),
        }
    }
}

/// Two-copy structured controller on `Z = Z1 x W x W`:
/// `G1 = [[R1, R2], [0, diag(S, S)]]`, `G2 = [R3; diag(g1, g2)]`,
/// `K = (K1, K2)`. Returns hypothesis warnings for any generator block on
/// which a `g` vector has no coefficient.
pub fn build_g_structured_controller(
    exo: &Exosystem,
    params: GStructuredParams,
) -> Result<(Controller, Vec<String>)> {
    let dw = exo.dim();
    let z1 = params.dim_z1;
    for (name, v) in [("g1", &params.g1_coeffs), ("g2", &params.g2_coeffs)] {
        if v.len() != dw {
            return Err(CoreError::DimensionMismatch {
                context: format!("{name} coefficient length"),
                expected: dw,
                found: v.len(),
            });
        }
    }
    for (name, m, rows, cols) in [
        ("R1", &params.r1, z1, z1),
        ("R2", &params.r2, z1, 2 * dw),
        ("R3", &params.r3, z1, 2),
        ("K1", &params.k1, params.k1.nrows(), z1),
        ("K2", &params.k2, params.k1.nrows(), 2 * dw),
    ] {
        if m.nrows() != rows || m.ncols() != cols {
            return Err(CoreError::DimensionMismatch {
                context: format!("{name} shape"),
                expected: rows * cols,
                found: m.nrows() * m.ncols(),
            });
        }
    }

    let dim_z = z1 + 2 * dw;
    let s = exo.s_matrix();
    let mut g1 = Array2::zeros((dim_z, dim_z));
    for i in 0..z1 {
        for j in 0..z1 {
            g1[(i, j)] = params.r1[(i, j)];
        }
        for j in 0..2 * dw {
            g1[(i, z1 + j)] = params.r2[(i, j)];
        }
    }
    for copy in 0..2 {
        for i in 0..dw {
            for j in 0..dw {
                g1[(z1 + copy * dw + i, z1 + copy * dw + j)] = s[(i, j)];
            }
        }
    }

    let mut g2 = Array2::zeros((dim_z, 2));
    for i in 0..z1 {
        for j in 0..2 {
            g2[(i, j)] = params.r3[(i, j)];
        }
    }
    for i in 0..dw {
        g2[(z1 + i, 0)] = params.g1_coeffs[i];
        g2[(z1 + dw + i, 1)] = params.g2_coeffs[i];
    }

    let m_inputs = params.k1.nrows();
    let mut k = Array2::zeros((m_inputs, dim_z));
    for i in 0..m_inputs {
        for j in 0..z1 {
            k[(i, j)] = params.k1[(i, j)];
        }
        for j in 0..2 * dw {
            k[(i, z1 + j)] = params.k2[(i, j)];
        }
    }

    let mut warnings = Vec::new();
    for (off, b) in exo.blocks().iter().map(|b| (exo.block_at(b.k).unwrap().0, b)) {
        for (name, coeffs) in [("g1", &params.g1_coeffs), ("g2", &params.g2_coeffs)] {
            let block_norm: f64 = (0..b.n).map(|l| coeffs[off + l].norm_sqr()).sum();
            if block_norm == 0.0 {
                warnings.push(format!(
                    "{name} has no coefficient on block k={} (omega {}); the \
                     range-condition hypothesis fails there",
                    b.k, b.omega
                ));
            }
        }
    }

    let ctrl = Controller::new(g1, g2, k, "g-structured")?;
    Ok((ctrl, warnings))
}
