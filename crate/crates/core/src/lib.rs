//! Numerical machinery for robust output regulation on truncated modal models.
//!
//! The crate represents a signal generator (exosystem) as a finite list of
//! Jordan blocks at frequencies `i*omega_k`, a distributed-parameter plant by
//! its spectral data (eigenvalues plus input/output mode coefficients), and a
//! dynamic error-feedback controller by matrices `(G1, G2, K)`. On top of
//! these it provides:
//!
//! * block Sylvester / regulator equation solvers with per-column residuals,
//! * three equivalent internal-model verifiers (Jordan-chain counting,
//!   range/kernel conditions on `(G1, G2)`, and invertibility of a restricted
//!   frequency-domain map),
//! * robustness checks that solve the per-frequency regulator system for
//!   perturbed plant data,
//! * closed-loop assembly, sector-based stability scans, stiff linear ODE
//!   simulation, and a feedback factorization identity check,
//! * a full reproduction of a boundary-controlled 1-D heat benchmark.
//!
//! All operations are pure and all shared types are immutable after
//! construction, so read-only use from parallel workers is safe.

pub mod closed_loop;
pub mod controller;
pub mod error;
pub mod exosystem;
pub mod freq_ops;
pub mod heat_bench;
pub mod linalg;
pub mod modal_plant;
pub mod regulator;
pub mod report;

pub use closed_loop::{
    feedback_factorization_check, schur_complement, sector_scan, simulate_ode, ClosedLoopSystem,
    ExpmMethod, FactorizationReport, SectorScanResult, Trajectory,
};
pub use controller::{
    build_g_structured_controller, build_p_copy_controller, check_g_conditions, check_p_copy,
    check_restricted, restricted_pk, Controller, FrequencyVerdict, GStructuredParams,
    InternalModelReport, PCopyGains, RestrictedMap,
};
pub use error::{CoreError, Result};
pub use exosystem::{ExoBlock, Exosystem};
pub use freq_ops::{build_j, frequency_block, jordan_chain_counts, kernel_basis, FrequencyBlock};
pub use heat_bench::{
    build_heat_plant, constant_reference_setup, periodic_reference_setup, run_constant_tracking,
    run_stability_scan, ConstantReferenceSetup, ConstantTrackingRun, FigureBundle, HeatConfig,
    PeriodicReferenceSetup, StabilityScanRun,
};
pub use modal_plant::{BasisFamily, InitialState, ModalPlant, TransferSample};
pub use regulator::{
    closed_loop_state_formula, per_frequency_fixed_point, regulation_constraint,
    robustness_equations, robustness_report, solve_sylvester, RobustnessEntry, RobustnessReport,
    SylvesterSolution,
};

/// Complex scalar used throughout: `Complex<f64>`.
pub use ndarray_linalg::c64;
