//! Shared fixtures for the integration suites: seeded random exosystems,
//! modal plants, and rejection-sampled stable internal-model loops.
//!
//! Everything is driven by a caller-supplied `ChaCha8Rng` so each suite is
//! reproducible from its seed alone.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use outreg_core::linalg::{blockdiag, op_norm};
use outreg_core::{
    build_p_copy_controller, c64, ClosedLoopSystem, Controller, ExoBlock, Exosystem, ModalPlant,
    PCopyGains,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c_rand(r: &mut ChaCha8Rng) -> c64 {
    c64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

pub fn c_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<c64> {
    Array2::from_shape_fn((rows, cols), |_| c_rand(r) * scale)
}

pub fn c_vector(r: &mut ChaCha8Rng, len: usize, scale: f64) -> Array1<c64> {
    Array1::from_shape_fn(len, |_| c_rand(r) * scale)
}

/// Random block list with distinct frequencies, total dimension <= `max_dim`.
pub fn random_exosystem(r: &mut ChaCha8Rng, max_dim: usize, allow_chains: bool) -> Exosystem {
    let pool = [0.0, 0.7, -1.1, 1.3, 2.1, -2.6];
    let mut order: Vec<usize> = (0..pool.len()).collect();
    for i in 0..order.len() {
        let j = r.gen_range(i..order.len());
        order.swap(i, j);
    }
    let mut blocks = Vec::new();
    let mut budget = max_dim;
    let want = r.gen_range(1..=2usize);
    for &idx in order.iter() {
        if blocks.len() == want || budget == 0 {
            break;
        }
        let n = if allow_chains && budget >= 2 && r.gen_bool(0.4) {
            2
        } else {
            1
        };
        blocks.push(ExoBlock {
            k: idx as i64,
            omega: pool[idx],
            n,
        });
        budget -= n;
    }
    Exosystem::new(blocks, 0.0).expect("random exosystem is valid")
}

/// Diagonal modal plant with `p` inputs and outputs, real negative distinct
/// eigenvalues, and complex coefficient matrices.
pub fn random_plant(r: &mut ChaCha8Rng, n_modes: usize, p: usize) -> ModalPlant {
    let eig = Array1::from_shape_fn(n_modes, |i| -0.3 - 0.5 * i as f64 - r.gen_range(0.0..0.2));
    let input = c_matrix(r, n_modes, p, 1.0);
    let output = c_matrix(r, p, n_modes, 1.0);
    let d = Array2::zeros((p, p));
    ModalPlant::new(eig, input, output, d, 10.0).expect("random plant is valid")
}

/// Stable closed loop whose controller carries an exact p-copy internal model.
pub struct ImInstance {
    pub plant: ModalPlant,
    pub exo: Exosystem,
    pub ctrl: Controller,
    pub e_mat: Array2<c64>,
    pub f_mat: Array2<c64>,
    pub cl: ClosedLoopSystem,
    pub p: usize,
    pub attempts: usize,
}

pub const STABILITY_MARGIN: f64 = 0.01;
pub const RESONANCE_MARGIN: f64 = 0.02;

/// Rejection-sample gains until the loop is stable with margin and every
/// `i omega_k` is safely inside the resolvent set of `A_e`.
///
/// Configurations are limited to those random output feedback can actually
/// stabilize at a workable rate: `p = 1` with any block shapes, or `p = 2`
/// with a single length-1 block (random gains almost never stabilize Jordan
/// chains replicated twice, so those shapes appear only in negative tests).
pub fn random_im_instance(r: &mut ChaCha8Rng) -> ImInstance {
    for attempt in 0usize..60_000 {
        let p = if r.gen_bool(0.35) { 2 } else { 1 };
        let (max_exo_dim, allow_chains) = if p == 2 { (1, false) } else { (3, true) };
        let exo = random_exosystem(r, max_exo_dim, allow_chains);
        let n_plant = r.gen_range(1..=3usize);
        let plant = random_plant(r, n_plant, p);
        let dim_z = p * exo.dim();
        let scale = [0.5, 0.3, 0.8][attempt % 3];
        let gains = PCopyGains {
            g2: c_matrix(r, dim_z, p, scale),
            k_gain: c_matrix(r, p, dim_z, scale),
        };
        let ctrl = build_p_copy_controller(&exo, p, gains).expect("p-copy dims line up");
        let e_mat = c_matrix(r, n_plant, exo.dim(), 1.0);
        let f_mat = c_matrix(r, p, exo.dim(), 1.0);
        let cl = ClosedLoopSystem::assemble(&plant, &ctrl, &e_mat, &f_mat)
            .expect("assembly dims line up");
        if cl.spectral_abscissa() > -STABILITY_MARGIN {
            continue;
        }
        if exo
            .blocks()
            .iter()
            .any(|b| cl.spectral_distance(c64::new(0.0, b.omega)) < RESONANCE_MARGIN)
        {
            continue;
        }
        return ImInstance {
            plant,
            exo,
            ctrl,
            e_mat,
            f_mat,
            cl,
            p,
            attempts: attempt + 1,
        };
    }
    panic!("rejection sampling exhausted 60000 attempts; seed or scales need retuning");
}

/// Same exosystem shape with every frequency shifted, so the controller's
/// internal model no longer matches any block.
pub fn detuned_exosystem(exo: &Exosystem, shift: f64) -> Exosystem {
    let blocks = exo
        .blocks()
        .iter()
        .map(|b| ExoBlock {
            k: b.k,
            omega: b.omega + shift,
            n: b.n,
        })
        .collect();
    Exosystem::new(blocks, exo.alpha()).expect("shifted exosystem is valid")
}

fn jordan(omega: f64, n: usize) -> Array2<c64> {
    let mut j = Array2::zeros((n, n));
    for i in 0..n {
        j[(i, i)] = c64::new(0.0, omega);
        if i + 1 < n {
            j[(i, i + 1)] = c64::new(1.0, 0.0);
        }
    }
    j
}

/// Internal model with only `copies` repetitions of each block (deficient
/// when `copies < p`), paired with random gains of the full output width.
pub fn under_copied_controller(
    r: &mut ChaCha8Rng,
    exo: &Exosystem,
    copies: usize,
    p: usize,
    m: usize,
) -> Controller {
    let mut parts = Vec::new();
    for b in exo.blocks() {
        for _ in 0..copies {
            parts.push(jordan(b.omega, b.n));
        }
    }
    let views: Vec<_> = parts.iter().map(|m| m.view()).collect();
    let g1 = blockdiag(&views);
    let dim_z = g1.nrows();
    let g2 = c_matrix(r, dim_z, p, 0.7);
    let k = c_matrix(r, m, dim_z, 0.7);
    Controller::new(g1, g2, k, format!("{copies}-copy internal model")).expect("dims line up")
}

/// p-copy frequencies without the chain couplings: same spectrum as the true
/// internal model but diagonalizable, so every chain has length 1.
pub fn diagonalized_controller(
    r: &mut ChaCha8Rng,
    exo: &Exosystem,
    p: usize,
    m: usize,
) -> Controller {
    let dim_z = p * exo.dim();
    let mut g1 = Array2::zeros((dim_z, dim_z));
    let mut at = 0;
    for b in exo.blocks() {
        for _ in 0..p * b.n {
            g1[(at, at)] = c64::new(0.0, b.omega);
            at += 1;
        }
    }
    let g2 = c_matrix(r, dim_z, p, 0.7);
    let k = c_matrix(r, m, dim_z, 0.7);
    Controller::new(g1, g2, k, "diagonalized frequency copies").expect("dims line up")
}

/// Arbitrary stable extended system for the Sylvester solver: no internal
/// model, stability by spectral shift instead of rejection.
pub struct SylvesterFixture {
    pub a_e: Array2<c64>,
    pub b_e: Array2<c64>,
    pub c_e: Array2<c64>,
    pub d_e: Array2<c64>,
    pub exo: Exosystem,
}

pub fn random_sylvester_fixture(r: &mut ChaCha8Rng) -> SylvesterFixture {
    let dim = r.gen_range(2..=8usize);
    let mut a_e = c_matrix(r, dim, dim, 1.0);
    // spectrum lies in the disk of radius ||M|| centered at -||M|| - 0.05,
    // so Re <= -0.05 and every i omega is at distance >= 0.05
    let shift = c64::new(op_norm(&a_e) + 0.05, 0.0);
    for i in 0..dim {
        a_e[(i, i)] -= shift;
    }
    let exo = random_exosystem(r, 3, true);
    let p = r.gen_range(1..=2usize);
    let b_e = c_matrix(r, dim, exo.dim(), 1.0);
    let c_e = c_matrix(r, p, dim, 1.0);
    let d_e = c_matrix(r, p, exo.dim(), 1.0);
    SylvesterFixture {
        a_e,
        b_e,
        c_e,
        d_e,
        exo,
    }
}
