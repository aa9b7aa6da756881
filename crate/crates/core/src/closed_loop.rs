//! Closed-loop assembly and everything that runs on the assembled system:
//! spectral queries, semigroup propagation, sector-based stability scans,
//! stiff linear ODE simulation, and a feedback factorization identity check.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::solve::LUFactorized;
use ndarray_linalg::{c64, Eig, FactorizeInto, Solve};
use rayon::prelude::*;
use serde::Serialize;

use crate::controller::Controller;
use crate::error::{CoreError, Result};
use crate::exosystem::Exosystem;
use crate::linalg::{
    cond2, hstack, inv, matrix_exp, max_abs, op_norm, singular_values, vstack,
    EXPM_COND_GATE,
};
use crate::modal_plant::ModalPlant;

pub use crate::linalg::ExpmMethod;

/// Relative singular-value threshold of the sector scan: a grid point counts
/// as (numerically) singular when `sigma_min(S(lambda)) / max(1, |lambda|)`
/// falls below this.
pub const SECTOR_SINGULAR_TOL: f64 = 0.05;

/// Relative step-doubling tolerance of [`simulate_ode`].
pub const SIM_TOL: f64 = 1e-8;

/// Refinement-level cap of [`simulate_ode`].
pub const SIM_MAX_LEVELS: usize = 12;

struct EigRoute {
    vecs: Array2<c64>,
    vinv: Array2<c64>,
    cond: f64,
}

/// Extended system
/// `x_e' = A_e x_e + B_e v`, `y = C_e x_e`, `e = C_e x_e + D_e v`
/// over the state `x_e = (x, z)` (plant modes, then controller state).
pub struct ClosedLoopSystem {
    a_e: Array2<c64>,
    b_e: Array2<c64>,
    c_e: Array2<c64>,
    d_e: Array2<c64>,
    n_plant: usize,
    dim_z: usize,
    eigenvalues: Array1<c64>,
    spectral_abscissa: f64,
    eig_route: Option<EigRoute>,
}

impl ClosedLoopSystem {
    /// Assemble the extended system from plant spectral data, a controller,
    /// and the disturbance/reference injections `E` (modes x dim W) and `F`
    /// (outputs x dim W):
    ///
    /// ```text
    /// A_e = [ diag(lambda)  B K            ]    B_e = [ E    ]
    ///       [ G2 C          G1 + G2 D K    ]          [ G2 F ]
    /// C_e = [ C  D K ]                           D_e = F
    /// ```
    pub fn assemble(
        plant: &ModalPlant,
        ctrl: &Controller,
        e_mat: &Array2<c64>,
        f_mat: &Array2<c64>,
    ) -> Result<Self> {
        let n = plant.n_modes();
        let p = plant.n_outputs();
        let m = plant.n_inputs();
        let dz = ctrl.dim_z();
        if ctrl.n_inputs() != m {
            return Err(CoreError::DimensionMismatch {
                context: "controller K rows vs plant inputs".into(),
                expected: m,
                found: ctrl.n_inputs(),
            });
        }
        if ctrl.n_outputs() != p {
            return Err(CoreError::DimensionMismatch {
                context: "controller G2 columns vs plant outputs".into(),
                expected: p,
                found: ctrl.n_outputs(),
            });
        }
        if e_mat.nrows() != n {
            return Err(CoreError::DimensionMismatch {
                context: "E rows vs plant modes".into(),
                expected: n,
                found: e_mat.nrows(),
            });
        }
        if f_mat.nrows() != p {
            return Err(CoreError::DimensionMismatch {
                context: "F rows vs plant outputs".into(),
                expected: p,
                found: f_mat.nrows(),
            });
        }
        if e_mat.ncols() != f_mat.ncols() {
            return Err(CoreError::DimensionMismatch {
                context: "E columns vs F columns".into(),
                expected: e_mat.ncols(),
                found: f_mat.ncols(),
            });
        }

        let dim = n + dz;
        let bk = plant.input_modes().dot(ctrl.k_gain()); // n x dz
        let g2c = ctrl.g2().dot(plant.output_modes()); // dz x n
        let dk = plant.feedthrough().dot(ctrl.k_gain()); // p x dz
        let g1_eff = ctrl.g1() + &ctrl.g2().dot(&dk); // dz x dz

        let mut a_e = Array2::zeros((dim, dim));
        for (i, &ev) in plant.eigenvalues().iter().enumerate() {
            a_e[(i, i)] = c64::new(ev, 0.0);
        }
        for i in 0..n {
            for j in 0..dz {
                a_e[(i, n + j)] = bk[(i, j)];
            }
        }
        for i in 0..dz {
            for j in 0..n {
                a_e[(n + i, j)] = g2c[(i, j)];
            }
            for j in 0..dz {
                a_e[(n + i, n + j)] = g1_eff[(i, j)];
            }
        }

        let b_e = vstack(&[e_mat.view(), ctrl.g2().dot(f_mat).view()]);
        let c_e = hstack(&[plant.output_modes().view(), dk.view()]);
        let d_e = f_mat.clone();

        let (eigenvalues, vecs) = a_e.eig()?;
        let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let cond = cond2(&vecs)?;
        let eig_route = if cond.is_finite() && cond < EXPM_COND_GATE {
            Some(EigRoute {
                vinv: inv(&vecs)?,
                vecs,
                cond,
            })
        } else {
            None
        };

        Ok(ClosedLoopSystem {
            a_e,
            b_e,
            c_e,
            d_e,
            n_plant: n,
            dim_z: dz,
            eigenvalues,
            spectral_abscissa,
            eig_route,
        })
    }

    pub fn a_e(&self) -> &Array2<c64> {
        &self.a_e
    }

    pub fn b_e(&self) -> &Array2<c64> {
        &self.b_e
    }

    pub fn c_e(&self) -> &Array2<c64> {
        &self.c_e
    }

    pub fn d_e(&self) -> &Array2<c64> {
        &self.d_e
    }

    pub fn n_plant(&self) -> usize {
        self.n_plant
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    pub fn dim(&self) -> usize {
        self.n_plant + self.dim_z
    }

    pub fn eigenvalues(&self) -> &Array1<c64> {
        &self.eigenvalues
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.spectral_abscissa
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_abscissa < 0.0
    }

    /// Route [`Self::propagate`] takes, fixed at assembly time.
    pub fn expm_method(&self) -> ExpmMethod {
        if self.eig_route.is_some() {
            ExpmMethod::Eigendecomposition
        } else {
            ExpmMethod::ScalingSquaring
        }
    }

    /// Condition number of the eigenvector matrix when the diagonalization
    /// route is active.
    pub fn eig_cond(&self) -> Option<f64> {
        self.eig_route.as_ref().map(|r| r.cond)
    }

    /// Distance from `lambda` to the closed-loop spectrum.
    pub fn spectral_distance(&self, lambda: c64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&mu| (lambda - mu).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Semigroup action `exp(A_e t) x`.
    pub fn propagate(&self, x: &Array1<c64>, t: f64) -> Result<Array1<c64>> {
        if x.len() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                context: "extended state length".into(),
                expected: self.dim(),
                found: x.len(),
            });
        }
        match &self.eig_route {
            Some(route) => {
                let mut coeffs = route.vinv.dot(x);
                for (c, &mu) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
                    *c *= (mu * t).exp();
                }
                Ok(route.vecs.dot(&coeffs))
            }
            None => {
                let (e, _) = matrix_exp(&self.a_e.mapv(|z| z * t))?;
                Ok(e.dot(x))
            }
        }
    }

    /// Dense `exp(A_e t)`.
    pub fn transition_matrix(&self, t: f64) -> Result<Array2<c64>> {
        match &self.eig_route {
            Some(route) => {
                let mut scaled = route.vecs.clone();
                for (j, &mu) in self.eigenvalues.iter().enumerate() {
                    let e = (mu * t).exp();
                    scaled.column_mut(j).mapv_inplace(|z| z * e);
                }
                Ok(scaled.dot(&route.vinv))
            }
            None => Ok(matrix_exp(&self.a_e.mapv(|z| z * t))?.0),
        }
    }
}

fn schur_from_transfer(ctrl: &Controller, lambda: c64, p_value: &Array2<c64>) -> Array2<c64> {
    let dz = ctrl.dim_z();
    let mut s = ctrl.g2().dot(p_value).dot(ctrl.k_gain()).mapv(|z| -z);
    for i in 0..dz {
        s[(i, i)] += lambda;
    }
    &s - ctrl.g1()
}

/// Schur complement of the plant block in `lambda I - A_e`:
/// `S(lambda) = lambda I - G1 - G2 P(lambda) K` on the controller state
/// space. For `lambda` in the plant's resolvent set, `lambda I - A_e` is
/// invertible exactly when `S(lambda)` is.
pub fn schur_complement(
    plant: &ModalPlant,
    ctrl: &Controller,
    lambda: c64,
) -> Result<Array2<c64>> {
    if ctrl.n_inputs() != plant.n_inputs() || ctrl.n_outputs() != plant.n_outputs() {
        return Err(CoreError::DimensionMismatch {
            context: "controller vs plant input/output counts".into(),
            expected: plant.n_inputs() + plant.n_outputs(),
            found: ctrl.n_inputs() + ctrl.n_outputs(),
        });
    }
    let transfer = plant.transfer(lambda)?;
    Ok(schur_from_transfer(ctrl, lambda, &transfer.value))
}

/// One scanned grid point.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub re: f64,
    pub im: f64,
    /// `sigma_min(S(lambda)) / max(1, |lambda|)`; 0 when the Schur
    /// complement could not be formed because `lambda` hit a plant pole
    pub rel_sv: f64,
}

/// Result of [`sector_scan`].
#[derive(Debug, Clone, Serialize)]
pub struct SectorScanResult {
    pub delta: f64,
    pub radius: f64,
    /// scanned grid with per-point normalized minimum singular values
    pub grid: Vec<ScanPoint>,
    pub min_rel_sv: f64,
    /// grid point attaining `min_rel_sv` (re, im)
    pub argmin: (f64, f64),
    pub singular_tol: f64,
    /// `max (||G1|| + ||G2|| bound(lambda) ||K||) / |lambda|` over samples
    /// with `|lambda| >= radius` in the sector; must be `< 1` for the
    /// large-`|lambda|` argument to close
    pub q_estimate: f64,
    pub q_samples: usize,
    pub tail_warnings: Vec<String>,
    /// no scanned point came within `singular_tol` of singular
    pub exterior_clear: bool,
    pub q_contractive: bool,
    /// `exterior_clear && q_contractive`
    pub verdict: bool,
}

/// Build the scan grid: two boundary rays of the shifted sector, the closing
/// arc of radius `radius`, and a polar interior fill.
fn sector_grid(delta: f64, radius: f64, density: usize) -> Vec<c64> {
    let mut grid = Vec::new();
    let theta = 3.0 * std::f64::consts::PI / 4.0;
    // ray length until the arc |lambda| = radius is reached:
    // |_-delta + s e^{i theta}|^2 = radius^2 with cos(theta) = -1/sqrt(2)
    let s_star = (radius * radius - 0.5 * delta * delta).sqrt()
        - delta / std::f64::consts::SQRT_2;
    for sign in [1.0, -1.0] {
        let dir = c64::new(theta.cos(), sign * theta.sin());
        for j in 1..=density {
            let s = s_star * j as f64 / density as f64;
            grid.push(c64::new(-delta, 0.0) + dir * s);
        }
    }
    // closing arc between the two ray endpoints
    let tip = c64::new(-delta, 0.0) + c64::new(theta.cos(), theta.sin()) * s_star;
    let phi_star = tip.im.atan2(tip.re).abs();
    for j in 0..density {
        let phi = -phi_star + 2.0 * phi_star * j as f64 / (density - 1).max(1) as f64;
        grid.push(c64::new(radius * phi.cos(), radius * phi.sin()));
    }
    // interior fill: 65 angles (odd, so the real axis is included), a few
    // radii per angle, polar around the sector vertex -delta
    let n_angles = 65;
    let n_radii = (density / 32).max(1);
    for a in 0..n_angles {
        let ang = -theta + 2.0 * theta * a as f64 / (n_angles - 1) as f64;
        // distance from -delta to the arc along direction ang
        let disc = radius * radius - delta * delta * ang.sin() * ang.sin();
        let s_b = delta * ang.cos() + disc.sqrt();
        for j in 1..=n_radii {
            let s = s_b * j as f64 / (n_radii + 1) as f64;
            grid.push(c64::new(-delta + s * ang.cos(), s * ang.sin()));
        }
    }
    grid
}

/// Scan the truncated closed loop for spectrum inside the shifted sector
/// `{|arg(lambda + delta)| <= 3 pi / 4, |lambda| <= radius}` via the Schur
/// complement, and estimate the contraction factor `q` governing the sector
/// part beyond `radius`. `density` is the number of points per boundary ray
/// and per arc (512 in the shipped configurations).
pub fn sector_scan(
    plant: &ModalPlant,
    ctrl: &Controller,
    delta: f64,
    radius: f64,
    density: usize,
) -> Result<SectorScanResult> {
    if !(delta >= 0.0) || !(radius > delta) || density < 2 {
        return Err(CoreError::InvalidConfig(format!(
            "sector scan needs 0 <= delta < radius and density >= 2, \
             got delta={delta}, radius={radius}, density={density}"
        )));
    }
    if ctrl.n_inputs() != plant.n_inputs() || ctrl.n_outputs() != plant.n_outputs() {
        return Err(CoreError::DimensionMismatch {
            context: "controller vs plant input/output counts".into(),
            expected: plant.n_inputs() + plant.n_outputs(),
            found: ctrl.n_inputs() + ctrl.n_outputs(),
        });
    }
    let grid = sector_grid(delta, radius, density);
    let scanned: Vec<(ScanPoint, Option<String>)> = grid
        .par_iter()
        .map(|&lambda| {
            let scale = lambda.norm().max(1.0);
            match plant.transfer(lambda) {
                Ok(sample) => {
                    let s = schur_from_transfer(ctrl, lambda, &sample.value);
                    let sv = singular_values(&s).expect("svd of a finite matrix");
                    let min_sv = sv.iter().copied().fold(f64::INFINITY, f64::min);
                    let rel = if sv.is_empty() { f64::INFINITY } else { min_sv / scale };
                    let warn = (!sample.tail_bound.is_finite()).then(|| {
                        format!(
                            "tail estimate diverges at lambda = {:.6e}{:+.6e}i",
                            lambda.re, lambda.im
                        )
                    });
                    (
                        ScanPoint {
                            re: lambda.re,
                            im: lambda.im,
                            rel_sv: rel,
                        },
                        warn,
                    )
                }
                Err(_) => (
                    ScanPoint {
                        re: lambda.re,
                        im: lambda.im,
                        rel_sv: 0.0,
                    },
                    Some(format!(
                        "grid point {:.6e}{:+.6e}i hit a plant pole; treated as singular",
                        lambda.re, lambda.im
                    )),
                ),
            }
        })
        .collect();

    let mut tail_warnings = Vec::new();
    let mut min_rel_sv = f64::INFINITY;
    let mut argmin = (f64::NAN, f64::NAN);
    let mut points = Vec::with_capacity(scanned.len());
    for (pt, warn) in scanned {
        if pt.rel_sv < min_rel_sv {
            min_rel_sv = pt.rel_sv;
            argmin = (pt.re, pt.im);
        }
        if let Some(w) = warn {
            if tail_warnings.len() < 8 {
                tail_warnings.push(w);
            }
        }
        points.push(pt);
    }

    // contraction estimate on the unbounded part: q(lambda) decays like
    // 1/|lambda| along every sector direction, so its supremum over
    // {|lambda| >= radius} sits on the inner rim; sample rings
    // |lambda + delta| = rho for rho in {1, 1.5, 2} * radius restricted to
    // |lambda| >= radius
    let g1_norm = op_norm(ctrl.g1());
    let g2_norm = op_norm(ctrl.g2());
    let k_norm = op_norm(ctrl.k_gain());
    let theta = 3.0 * std::f64::consts::PI / 4.0;
    let mut q_points = Vec::new();
    let ring_density = (density / 4).max(8);
    for factor in [1.0, 1.5, 2.0] {
        let rho = radius * factor;
        for j in 0..ring_density {
            let ang = -theta + 2.0 * theta * j as f64 / (ring_density - 1) as f64;
            let lambda = c64::new(-delta + rho * ang.cos(), rho * ang.sin());
            if lambda.norm() >= radius {
                q_points.push(lambda);
            }
        }
    }
    let q_samples = q_points.len();
    let mut q_estimate: f64 = 0.0;
    for lambda in q_points {
        match plant.transfer_norm_bound(lambda) {
            Ok(bound) => {
                let q = (g1_norm + g2_norm * bound * k_norm) / lambda.norm();
                q_estimate = q_estimate.max(q);
            }
            Err(_) => {
                q_estimate = f64::INFINITY;
                if tail_warnings.len() < 8 {
                    tail_warnings.push(format!(
                        "transfer bound unavailable at lambda = {:.6e}{:+.6e}i",
                        lambda.re, lambda.im
                    ));
                }
            }
        }
    }

    let exterior_clear = min_rel_sv >= SECTOR_SINGULAR_TOL;
    let q_contractive = q_estimate < 1.0;
    Ok(SectorScanResult {
        delta,
        radius,
        grid: points,
        min_rel_sv,
        argmin,
        singular_tol: SECTOR_SINGULAR_TOL,
        q_estimate,
        q_samples,
        tail_warnings,
        exterior_clear,
        q_contractive,
        verdict: exterior_clear && q_contractive,
    })
}

/// Simulated trajectory on a caller-supplied output grid.
pub struct Trajectory {
    pub times: Vec<f64>,
    /// extended states, one row per output time
    pub states: Array2<c64>,
    /// `y = C_e x_e`
    pub outputs: Array2<c64>,
    /// `e = C_e x_e + D_e v`
    pub errors: Array2<c64>,
    /// exosystem states `v(t)`
    pub exo_states: Array2<c64>,
    /// human-readable description of the integrator run
    pub integrator: String,
}

/// Simulate `x_e' = A_e x_e + B_e T_S(t) v0` from `x_e(0) = xe0` on
/// `t_grid` (which must start at 0 and be strictly increasing).
///
/// Integrator: implicit trapezoid with per-level step halving and pointwise
/// Richardson extrapolation; levels are refined until two successive
/// extrapolants agree to `SIM_TOL` in relative max norm, or
/// [`CoreError::AccuracyCap`] after [`SIM_MAX_LEVELS`] levels. The implicit
/// step factors `I - (h/2) A_e` once per distinct step size.
pub fn simulate_ode(
    cl: &ClosedLoopSystem,
    exo: &Exosystem,
    xe0: &Array1<c64>,
    v0: &Array1<c64>,
    t_grid: &[f64],
) -> Result<Trajectory> {
    let dim = cl.dim();
    if xe0.len() != dim {
        return Err(CoreError::DimensionMismatch {
            context: "initial extended state length".into(),
            expected: dim,
            found: xe0.len(),
        });
    }
    if v0.len() != exo.dim() {
        return Err(CoreError::DimensionMismatch {
            context: "initial exosystem state length".into(),
            expected: exo.dim(),
            found: v0.len(),
        });
    }
    if cl.b_e.ncols() != exo.dim() {
        return Err(CoreError::DimensionMismatch {
            context: "B_e columns vs exosystem dimension".into(),
            expected: exo.dim(),
            found: cl.b_e.ncols(),
        });
    }
    if t_grid.is_empty() {
        return Err(CoreError::InvalidConfig("empty time grid".into()));
    }
    if t_grid[0] != 0.0 {
        return Err(CoreError::InvalidConfig("time grid must start at 0".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CoreError::InvalidConfig(
                "time grid must be strictly increasing".into(),
            ));
        }
    }

    let rows = t_grid.len();
    let finish = |states: Array2<c64>, integrator: String| -> Trajectory {
        let p = cl.c_e.nrows();
        let mut outputs = Array2::zeros((rows, p));
        let mut errors = Array2::zeros((rows, p));
        let mut exo_states = Array2::zeros((rows, exo.dim()));
        for (r, &t) in t_grid.iter().enumerate() {
            let x = states.row(r).to_owned();
            let v = exo.group_action(v0, t);
            let y = cl.c_e.dot(&x);
            let e = &y + &cl.d_e.dot(&v);
            for i in 0..p {
                outputs[(r, i)] = y[i];
                errors[(r, i)] = e[i];
            }
            for i in 0..exo.dim() {
                exo_states[(r, i)] = v[i];
            }
        }
        Trajectory {
            times: t_grid.to_vec(),
            states,
            outputs,
            errors,
            exo_states,
            integrator,
        }
    };

    if rows == 1 {
        let mut states = Array2::zeros((1, dim));
        states.row_mut(0).assign(xe0);
        return Ok(finish(states, "none (single time point)".into()));
    }

    let min_dt = t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let h0 = 0.5 * min_dt;
    let base_steps: Vec<usize> = t_grid
        .windows(2)
        .map(|w| ((w[1] - w[0]) / h0).ceil() as usize)
        .collect();

    let forcing = |t: f64| -> Array1<c64> { cl.b_e.dot(&exo.group_action(v0, t)) };

    let run_level = |level: usize| -> Result<Array2<c64>> {
        let mut factors: HashMap<u64, LUFactorized<ndarray::OwnedRepr<c64>>> = HashMap::new();
        let mut states = Array2::zeros((rows, dim));
        states.row_mut(0).assign(xe0);
        let mut x = xe0.clone();
        for (i, w) in t_grid.windows(2).enumerate() {
            let m = base_steps[i] << level;
            let h = (w[1] - w[0]) / m as f64;
            let lu = match factors.entry(h.to_bits()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let mut lhs = cl.a_e.mapv(|z| z * (-0.5 * h));
                    for d in 0..dim {
                        lhs[(d, d)] += 1.0;
                    }
                    e.insert(lhs.factorize_into()?)
                }
            };
            let mut f_left = forcing(w[0]);
            for step in 0..m {
                let t_right = if step + 1 == m {
                    w[1]
                } else {
                    w[0] + (step + 1) as f64 * h
                };
                let f_right = forcing(t_right);
                let rhs = &x + &((cl.a_e.dot(&x) + &f_left + &f_right).mapv(|z| z * (0.5 * h)));
                x = lu.solve(&rhs)?;
                f_left = f_right;
            }
            states.row_mut(i + 1).assign(&x);
        }
        Ok(states)
    };

    let mut prev_raw = run_level(0)?;
    let mut prev_extrap: Option<Array2<c64>> = None;
    for level in 1..=SIM_MAX_LEVELS {
        let raw = run_level(level)?;
        // one step-doubling Richardson sweep: trapezoid error is O(h^2)
        let extrap = (&raw.mapv(|z| z * 4.0) - &prev_raw).mapv(|z| z / 3.0);
        if let Some(prev) = &prev_extrap {
            let diff = max_abs(&(&extrap - prev));
            let scale = 1.0 + max_abs(&extrap);
            if diff / scale < SIM_TOL {
                let integrator = format!(
                    "implicit trapezoid + Richardson, levels 0..={level}, base step {h0:.3e}"
                );
                return Ok(finish(extrap, integrator));
            }
        }
        prev_raw = raw;
        prev_extrap = Some(extrap);
    }
    Err(CoreError::AccuracyCap("simulate_ode refinement".into()))
}

/// Result of [`feedback_factorization_check`].
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    /// largest max-norm residual of the identity over the checked points
    pub max_residual: f64,
    pub points_checked: usize,
    /// points skipped because `||P_G(lambda) P(lambda)|| >= 1`, with the
    /// offending norm
    pub skipped: Vec<((f64, f64), f64)>,
}

/// Verify the triangular factorization of `(I - P_hat(lambda))^{-1}` for the
/// off-diagonal feedback pairing of plant transfer `P` and controller
/// transfer `P_G(lambda) = K R(lambda, G1) G2`:
///
/// ```text
/// inv([I, -P; -P_G, I]) = [I, P; 0, I] [I, 0; 0, inv(I - P_G P)] [I, 0; P_G, I]
/// ```
///
/// Points where `||P_G P|| >= 1` are reported as skipped rather than checked
/// (the Neumann argument behind the identity needs the contraction).
pub fn feedback_factorization_check(
    plant: &ModalPlant,
    ctrl: &Controller,
    lambda_grid: &[c64],
) -> Result<FactorizationReport> {
    let p = plant.n_outputs();
    let m = plant.n_inputs();
    if ctrl.n_inputs() != m || ctrl.n_outputs() != p {
        return Err(CoreError::DimensionMismatch {
            context: "controller vs plant input/output counts".into(),
            expected: m + p,
            found: ctrl.n_inputs() + ctrl.n_outputs(),
        });
    }
    let dz = ctrl.dim_z();
    let mut max_residual: f64 = 0.0;
    let mut skipped = Vec::new();
    let mut points_checked = 0;
    for &lambda in lambda_grid {
        let p_val = plant.transfer(lambda)?.value; // p x m
        let mut shift = ctrl.g1().mapv(|z| -z);
        for d in 0..dz {
            shift[(d, d)] += lambda;
        }
        let r_g1 = inv(&shift)?;
        let p_g = ctrl.k_gain().dot(&r_g1).dot(ctrl.g2()); // m x p
        let contraction = op_norm(&p_g.dot(&p_val));
        if contraction >= 1.0 {
            skipped.push(((lambda.re, lambda.im), contraction));
            continue;
        }
        let dim = p + m;
        // I - P_hat = [I, -P; -P_G, I] in the (output, input) block order
        let mut lhs = Array2::<c64>::eye(dim);
        for i in 0..p {
            for j in 0..m {
                lhs[(i, p + j)] = -p_val[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..p {
                lhs[(p + i, j)] = -p_g[(i, j)];
            }
        }
        let direct = inv(&lhs)?;

        let mut upper = Array2::<c64>::eye(dim);
        for i in 0..p {
            for j in 0..m {
                upper[(i, p + j)] = p_val[(i, j)];
            }
        }
        let mut lower = Array2::<c64>::eye(dim);
        for i in 0..m {
            for j in 0..p {
                lower[(p + i, j)] = p_g[(i, j)];
            }
        }
        let core = inv(&(Array2::<c64>::eye(m) - p_g.dot(&p_val)))?;
        let mut middle = Array2::<c64>::eye(dim);
        for i in 0..m {
            for j in 0..m {
                middle[(p + i, p + j)] = core[(i, j)];
            }
        }
        let factored = upper.dot(&middle).dot(&lower);
        max_residual = max_residual.max(max_abs(&(&direct - &factored)));
        points_checked += 1;
    }
    Ok(FactorizationReport {
        max_residual,
        points_checked,
        skipped,
    })
}
