//! Closed-loop assembly, simulation cross-checks, Schur-complement geometry,
//! and the factorization identity on randomized loops.

mod common;

use common::{c_vector, random_im_instance, rng};
use ndarray::{Array1, Array2};
use outreg_core::linalg::{op_norm, singular_values, vec_norm};
use outreg_core::{
    c64, closed_loop_state_formula, feedback_factorization_check, schur_complement, sector_scan,
    simulate_ode, solve_sylvester, ClosedLoopSystem, Controller, ModalPlant,
};

#[test]
fn ode_and_closed_form_trajectories_agree() {
    let mut r = rng(0x31);
    let grid = [0.0, 0.4, 1.1, 2.5];
    for trial in 0..8 {
        let inst = random_im_instance(&mut r);
        let sol = solve_sylvester(&inst.cl, &inst.exo).unwrap();
        let xe0 = c_vector(&mut r, inst.cl.dim(), 1.0);
        let v0 = c_vector(&mut r, inst.exo.dim(), 1.0);
        let traj = simulate_ode(&inst.cl, &inst.exo, &xe0, &v0, &grid).unwrap();
        for (row, &t) in grid.iter().enumerate() {
            let (xe, e) =
                closed_loop_state_formula(&inst.cl, &sol, &inst.exo, &xe0, &v0, t).unwrap();
            let sim_x = traj.states.row(row).to_owned();
            let sim_e = traj.errors.row(row).to_owned();
            let xgap = vec_norm(&(&sim_x - &xe)) / (1.0 + vec_norm(&xe));
            let egap = vec_norm(&(&sim_e - &e)) / (1.0 + vec_norm(&e));
            assert!(xgap <= 1e-6, "trial {trial} t={t}: state gap {xgap}");
            assert!(egap <= 1e-6, "trial {trial} t={t}: error gap {egap}");
        }
    }
}

#[test]
fn silent_exosystem_reduces_the_simulation_to_pure_decay() {
    let mut r = rng(0x32);
    let inst = random_im_instance(&mut r);
    let xe0 = c_vector(&mut r, inst.cl.dim(), 1.0);
    let v0 = Array1::zeros(inst.exo.dim());
    let grid = [0.0, 0.8, 2.0];
    let traj = simulate_ode(&inst.cl, &inst.exo, &xe0, &v0, &grid).unwrap();
    for (row, &t) in grid.iter().enumerate() {
        let free = inst.cl.propagate(&xe0, t).unwrap();
        let gap = vec_norm(&(&traj.states.row(row).to_owned() - &free));
        assert!(gap <= 1e-7 * (1.0 + vec_norm(&free)), "gap {gap} at t={t}");
    }
}

#[test]
fn transition_matrices_compose_over_time() {
    let mut r = rng(0x33);
    for _ in 0..5 {
        let inst = random_im_instance(&mut r);
        let t1 = 0.7;
        let t2 = 1.9;
        let joint = inst.cl.transition_matrix(t1 + t2).unwrap();
        let staged = inst
            .cl
            .transition_matrix(t1)
            .unwrap()
            .dot(&inst.cl.transition_matrix(t2).unwrap());
        let gap = op_norm(&(&joint - &staged));
        assert!(gap <= 1e-9 * (1.0 + op_norm(&joint)), "semigroup gap {gap}");
    }
}

#[test]
fn schur_complement_collapses_on_the_closed_loop_spectrum() {
    let mut r = rng(0x34);
    let mut checked = 0;
    while checked < 6 {
        let inst = random_im_instance(&mut r);
        // pick the slowest eigenvalue, guarding against plant-spectrum overlap
        // where the complement is undefined
        let lambda = *inst
            .cl
            .eigenvalues()
            .iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .unwrap();
        let clear = inst
            .plant
            .eigenvalues()
            .iter()
            .all(|&ev| (lambda - c64::new(ev, 0.0)).norm() > 1e-3);
        if !clear {
            continue;
        }
        checked += 1;
        let s = schur_complement(&inst.plant, &inst.ctrl, lambda).unwrap();
        let sv = singular_values(&s).unwrap();
        let smallest = sv[sv.len() - 1];
        assert!(
            smallest <= 1e-6 * (1.0 + op_norm(&s)),
            "Schur complement kept rank at an eigenvalue: min sv {smallest}"
        );
    }
}

#[test]
fn unstable_plant_pole_on_the_arc_is_reported_by_the_scan() {
    // one growing mode, unit feedback: the extended matrix [[1, 1], [1, 0]]
    // has the golden ratio as an eigenvalue; the scan radius is set exactly
    // there so the arc samples walk over the singularity
    let plant = ModalPlant::new(
        ndarray::arr1(&[1.0]),
        Array2::from_elem((1, 1), c64::new(1.0, 0.0)),
        Array2::from_elem((1, 1), c64::new(1.0, 0.0)),
        Array2::zeros((1, 1)),
        2.0,
    )
    .unwrap();
    let ctrl = Controller::new(
        Array2::zeros((1, 1)),
        Array2::from_elem((1, 1), c64::new(1.0, 0.0)),
        Array2::from_elem((1, 1), c64::new(1.0, 0.0)),
        "unit feedback",
    )
    .unwrap();
    let golden = 0.5 * (1.0 + 5.0f64.sqrt());
    let scan = sector_scan(&plant, &ctrl, 0.025, golden, 2048).unwrap();
    assert!(!scan.exterior_clear, "min rel sv {}", scan.min_rel_sv);
    assert!(!scan.verdict);
    // scan verdict bookkeeping stays consistent
    assert_eq!(scan.verdict, scan.exterior_clear && scan.q_contractive);
    let (re, im) = scan.argmin;
    assert!(
        (c64::new(re, im) - c64::new(golden, 0.0)).norm() <= 0.05,
        "argmin ({re}, {im}) is not near the unstable eigenvalue"
    );
}

#[test]
fn factorization_identity_holds_on_random_loops() {
    let mut r = rng(0x36);
    for trial in 0..10 {
        let inst = random_im_instance(&mut r);
        let grid: Vec<c64> = (0..12)
            .map(|i| c64::new(3.0 + 2.0 * (i / 4) as f64, -3.0 + 2.0 * (i % 4) as f64))
            .collect();
        let report = feedback_factorization_check(&inst.plant, &inst.ctrl, &grid).unwrap();
        assert_eq!(
            report.points_checked + report.skipped.len(),
            grid.len(),
            "trial {trial}: accounting is off"
        );
        if report.skipped.is_empty() {
            assert!(
                report.max_residual <= 1e-10,
                "trial {trial}: residual {}",
                report.max_residual
            );
        }
    }
}

#[test]
fn block_diagonal_loop_keeps_the_component_spectra() {
    let mut r = rng(0x37);
    let inst = random_im_instance(&mut r);
    let dim_z = inst.ctrl.dim_z();
    let quiet = Controller::new(
        inst.ctrl.g1().clone(),
        Array2::zeros((dim_z, inst.p)),
        Array2::zeros((inst.p, dim_z)),
        "decoupled",
    )
    .unwrap();
    let cl = ClosedLoopSystem::assemble(&inst.plant, &quiet, &inst.e_mat, &inst.f_mat).unwrap();
    for &ev in inst.plant.eigenvalues() {
        let d = cl.spectral_distance(c64::new(ev, 0.0));
        assert!(d <= 1e-9, "plant mode {ev} drifted by {d}");
    }
    for b in inst.exo.blocks() {
        let d = cl.spectral_distance(c64::new(0.0, b.omega));
        assert!(d <= 1e-9, "controller mode at omega {} drifted by {d}", b.omega);
    }
}
