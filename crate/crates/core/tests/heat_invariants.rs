//! Benchmark-level invariants for the boundary-controlled heat loop:
//! truncation honesty of P(0), exact regulation, robustness to plant-data
//! perturbations, and a deliberately deficient controller.

mod common;

use common::{c_matrix, rng};
use ndarray::{arr2, Array1, Array2};
use outreg_core::freq_ops::RANK_TOL;
use outreg_core::linalg::vec_norm;
use outreg_core::{
    c64, check_g_conditions, check_p_copy, check_restricted, constant_reference_setup,
    per_frequency_fixed_point, robustness_equations, robustness_report, simulate_ode,
    solve_sylvester, ClosedLoopSystem, Controller, ModalPlant,
};

/// 2000-mode truncation of P(0), computed by an independent script; the
/// closed form sums the same series exactly.
fn dense_reference_p0() -> Array2<f64> {
    arr2(&[
        [1.0349931527667273, 0.90465683694259313],
        [0.88767840479048454, 1.0726603943368416],
    ])
}

fn closed_form_p0() -> Array2<f64> {
    arr2(&[
        [1.0349931422442415, 0.90465680783337266],
        [0.88767841683882898, 1.0726604460065212],
    ])
}

#[test]
fn truncated_p0_sits_within_its_tail_bound_of_the_dense_reference() {
    let setup = constant_reference_setup(31).unwrap();
    let dense = dense_reference_p0();
    let exact = closed_form_p0();
    for i in 0..2 {
        for j in 0..2 {
            let here = setup.p0[(i, j)].re;
            assert!(setup.p0[(i, j)].im.abs() <= 1e-15);
            let to_dense = (here - dense[(i, j)]).abs();
            let to_exact = (here - exact[(i, j)]).abs();
            assert!(
                to_dense <= setup.p0_tail,
                "entry ({i},{j}): gap {to_dense} vs tail {}",
                setup.p0_tail
            );
            assert!(to_exact <= setup.p0_tail);
        }
    }
    // the dense truncation is far inside the 31-mode tail allowance
    let mut dense_vs_exact = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            dense_vs_exact = dense_vs_exact.max((dense[(i, j)] - exact[(i, j)]).abs());
        }
    }
    assert!(dense_vs_exact <= 1e-7);
}

#[test]
fn benchmark_regulator_equations_hold_to_solver_precision() {
    let setup = constant_reference_setup(31).unwrap();
    let cl = ClosedLoopSystem::assemble(
        &setup.plant,
        &setup.controller,
        &setup.e_mat,
        &setup.f_mat,
    )
    .unwrap();
    let sol = solve_sylvester(&cl, &setup.exo).unwrap();
    assert!(sol.max_residual() <= 1e-10, "residual {}", sol.max_residual());
    assert!(
        sol.max_regulation_residual() <= 1e-8,
        "regulation residual {}",
        sol.max_regulation_residual()
    );
    assert!(sol.path_disagreement <= 1e-10);
}

#[test]
fn random_data_perturbations_keep_the_per_frequency_system_solvable() {
    let setup = constant_reference_setup(31).unwrap();
    let mut r = rng(0x41);
    for round in 0..20 {
        let e_new = c_matrix(&mut r, 31, 1, 1.0);
        let f_new = c_matrix(&mut r, 2, 1, 1.0);
        let entry = robustness_equations(
            &setup.controller,
            &setup.plant,
            &e_new,
            &f_new,
            &setup.exo,
            0,
            1e-8,
        )
        .unwrap();
        assert!(entry.solvable, "round {round}: unsolvable");
        let (_, residual) = per_frequency_fixed_point(
            &setup.controller,
            &setup.plant,
            &e_new,
            &f_new,
            &setup.exo,
            0,
            1e-8,
        )
        .unwrap();
        assert!(
            residual <= 1e-8 * (1.0 + entry.rhs_norm),
            "round {round}: fixed-point residual {residual}"
        );
    }
}

#[test]
fn five_percent_eigenvalue_drift_preserves_stability_and_tracking() {
    let setup = constant_reference_setup(31).unwrap();
    let drifted_eigs = setup.plant.eigenvalues().mapv(|ev| 0.95 * ev);
    let drifted = ModalPlant::new(
        drifted_eigs,
        setup.plant.input_modes().clone(),
        setup.plant.output_modes().clone(),
        setup.plant.feedthrough().clone(),
        setup.plant.tail_constant(),
    )
    .unwrap();
    // same controller, no re-tuning
    let cl =
        ClosedLoopSystem::assemble(&drifted, &setup.controller, &setup.e_mat, &setup.f_mat)
            .unwrap();
    assert!(
        cl.spectral_abscissa() < 0.0,
        "drifted loop went unstable: {}",
        cl.spectral_abscissa()
    );
    let sol = solve_sylvester(&cl, &setup.exo).unwrap();
    assert!(
        sol.max_regulation_residual() <= 1e-8,
        "drifted regulation residual {}",
        sol.max_regulation_residual()
    );
    // setpoint still reached from rest
    let grid: Vec<f64> = (0..=120).map(|i| 0.25 * i as f64).collect();
    let xe0 = Array1::zeros(cl.dim());
    let v0 = Array1::from_elem(1, c64::new(1.0, 0.0));
    let traj = simulate_ode(&cl, &setup.exo, &xe0, &v0, &grid).unwrap();
    let last = traj.errors.nrows() - 1;
    let efinal = vec_norm(&traj.errors.row(last).to_owned());
    assert!(efinal <= 1e-2, "drifted final error {efinal}");
}

#[test]
fn single_copy_controller_fails_the_verifiers_and_a_concrete_right_hand_side() {
    let setup = constant_reference_setup(31).unwrap();
    let g1 = Array2::zeros((1, 1));
    let g2 = arr2(&[[c64::new(0.2, 0.0), c64::new(0.2, 0.0)]]);
    let k = arr2(&[[c64::new(0.7, 0.0)], [c64::new(-0.4, 0.0)]]);
    let ctrl = Controller::new(g1, g2, k, "one copy for two outputs").unwrap();

    let pcopy = check_p_copy(&ctrl, &setup.exo, 2, RANK_TOL).pcopy_overall.unwrap();
    let gcond = check_g_conditions(&ctrl, &setup.exo, RANK_TOL).gcond_overall.unwrap();
    let restricted = check_restricted(&ctrl, &setup.plant, &setup.exo, RANK_TOL)
        .unwrap()
        .restricted_overall
        .unwrap();
    assert!(!pcopy && !gcond && !restricted);

    // a right-hand side orthogonal to the one-dimensional range P(0) K
    let u = setup.p0.dot(&arr2(&[[c64::new(0.7, 0.0)], [c64::new(-0.4, 0.0)]]));
    let f_bad = arr2(&[[-u[(1, 0)].conj()], [u[(0, 0)].conj()]]);
    let e_zero = Array2::zeros((31, 1));
    let entry =
        robustness_equations(&ctrl, &setup.plant, &e_zero, &f_bad, &setup.exo, 0, 1e-8).unwrap();
    assert!(!entry.solvable, "orthogonal data should not be solvable");
    let report =
        robustness_report(&ctrl, &setup.plant, &e_zero, &f_bad, &setup.exo, 1e-8).unwrap();
    assert!(!report.robust);
}
