//! Command-line front end: JSON config in, JSON/CSV reports out.
//!
//! Exit codes: 0 pass, 1 analytic check failed, 2 configuration error,
//! 3 numerical failure. Reports are written with a fixed 17-significant-digit
//! float format, so identical configs and seeds produce byte-identical files.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use outreg_core::report::{matrix_to_rows, sigma_csv, to_json_17, trajectory_csv, vector_from_entries};
use outreg_core::{
    c64, check_g_conditions, check_p_copy, check_restricted, periodic_reference_setup,
    robustness_report, run_constant_tracking, run_stability_scan, sector_scan, simulate_ode,
    solve_sylvester, ClosedLoopSystem, CoreError, InternalModelReport,
};

use config::RunConfig;

/// default tolerance for rank decisions and robustness gates
const CHECK_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "outreg",
    version,
    about = "Regulator synthesis and verification on truncated modal models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration document (defaults to the heat benchmark)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// directory reports are written into
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// cap on worker threads (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// seed for randomized sweeps (overrides the config)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// check tolerance (overrides the config)
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the internal-model property three independent ways
    CheckIm,
    /// Solve the regulator equations; write report.json and sigma.csv
    Solve,
    /// Integrate the closed loop; write report.json and trajectory.csv
    Simulate,
    /// Scan the resolvent over the stability sector; write scan.json
    Scan,
    /// Re-solve the regulator system under perturbed data; write robust.json
    Robust,
    /// Run the heat benchmark; write figure data and reports
    HeatBench,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Check(String),
    Core(CoreError),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Check(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                CoreError::RequirementFailed { .. } => 1,
                CoreError::Resonance { .. }
                | CoreError::SingularSystem { .. }
                | CoreError::SingularResolvent { .. }
                | CoreError::AccuracyCap(_)
                | CoreError::Linalg(_) => 3,
                _ => 2,
            },
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }

    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };

    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let tol = cli.tol.or(cfg.tol).unwrap_or(CHECK_TOL);
    std::fs::create_dir_all(&cli.out)?;

    match cli.command {
        Command::CheckIm => cmd_check_im(&cfg, &cli.out, tol),
        Command::Solve => cmd_solve(&cfg, &cli.out),
        Command::Simulate => cmd_simulate(&cfg, &cli.out),
        Command::Scan => cmd_scan(&cfg, &cli.out),
        Command::Robust => cmd_robust(&cfg, &cli.out, seed, tol),
        Command::HeatBench => cmd_heat_bench(&cfg, &cli.out),
    }
}

fn write_report(dir: &Path, name: &str, json: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), json)?;
    Ok(())
}

#[derive(Serialize)]
struct ImCliReport {
    tol: f64,
    p: usize,
    report: InternalModelReport,
    agree: bool,
    pass: bool,
    failing: Vec<&'static str>,
}

fn cmd_check_im(cfg: &RunConfig, out: &Path, tol: f64) -> Result<String, CliError> {
    let a = cfg.assemble()?;
    let p = a.plant.n_outputs();

    let pcopy = check_p_copy(&a.ctrl, &a.exo, p, tol);
    let gcond = check_g_conditions(&a.ctrl, &a.exo, tol);
    let restricted = check_restricted(&a.ctrl, &a.plant, &a.exo, tol)?;

    let mut failing = Vec::new();
    if pcopy.pcopy_overall != Some(true) {
        failing.push("p-copy chains");
    }
    if gcond.gcond_overall != Some(true) {
        failing.push("G-conditions");
    }
    if restricted.restricted_overall != Some(true) {
        failing.push("restricted map");
    }

    let report = pcopy.merge(gcond)?.merge(restricted)?;
    let agree = report.consensus().is_some();
    let pass = report.consensus() == Some(true);
    let frequencies = report.per_frequency.len();

    let cli_report = ImCliReport {
        tol,
        p,
        report,
        agree,
        pass,
        failing: failing.clone(),
    };
    write_report(out, "im_report.json", &to_json_17(&cli_report)?)?;

    if pass {
        let noun = if frequencies == 1 { "frequency" } else { "frequencies" };
        Ok(format!(
            "check-im: pass ({frequencies} {noun}, 3 verifiers agree)"
        ))
    } else if failing.is_empty() {
        Err(CliError::Check(
            "internal model check failed: verifiers disagree".into(),
        ))
    } else {
        Err(CliError::Check(format!(
            "internal model check failed: {}",
            failing.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct SolveCliReport {
    labels: Vec<(i64, usize)>,
    residuals: Vec<f64>,
    regulation_residuals: Vec<f64>,
    max_residual: f64,
    max_regulation_residual: f64,
    path_disagreement: f64,
    series_diagnostic: f64,
    a_e_norm: f64,
    sigma: Vec<Vec<outreg_core::report::ComplexScalar>>,
}

fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let a = cfg.assemble()?;
    let cl = ClosedLoopSystem::assemble(&a.plant, &a.ctrl, &a.e_mat, &a.f_mat)?;
    let sol = solve_sylvester(&cl, &a.exo)?;

    let report = SolveCliReport {
        labels: sol.labels.clone(),
        residuals: sol.residuals.clone(),
        regulation_residuals: sol.regulation_residuals.clone(),
        max_residual: sol.max_residual(),
        max_regulation_residual: sol.max_regulation_residual(),
        path_disagreement: sol.path_disagreement,
        series_diagnostic: sol.series_diagnostic,
        a_e_norm: sol.a_e_norm,
        sigma: matrix_to_rows(&sol.sigma),
    };
    write_report(out, "report.json", &to_json_17(&report)?)?;
    write_report(out, "sigma.csv", &sigma_csv(&sol.sigma))?;

    Ok(format!(
        "solve: max residual {:.3e}, max regulation residual {:.3e}",
        report.max_residual, report.max_regulation_residual
    ))
}

#[derive(Serialize)]
struct SimulateCliReport<'a> {
    samples: usize,
    t_final: f64,
    integrator: &'a str,
    final_state_norm: f64,
    final_error_norm: f64,
}

fn row_norm(m: &Array2<c64>, r: usize) -> f64 {
    m.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let a = cfg.assemble()?;
    let cl = ClosedLoopSystem::assemble(&a.plant, &a.ctrl, &a.e_mat, &a.f_mat)?;
    let sim = cfg.simulation.clone().unwrap_or_default();
    let times = config::time_grid(sim.t_span, sim.dt_output)?;

    let xe0 = match &sim.xe0 {
        Some(entries) => vector_from_entries(entries),
        None => Array1::zeros(cl.dim()),
    };
    let v0 = match &sim.v0 {
        Some(entries) => vector_from_entries(entries),
        None => {
            let mut v = Array1::zeros(a.exo.dim());
            v[0] = c64::new(1.0, 0.0);
            v
        }
    };

    let traj = simulate_ode(&cl, &a.exo, &xe0, &v0, &times)?;
    let last = traj.times.len() - 1;
    let report = SimulateCliReport {
        samples: traj.times.len(),
        t_final: traj.times[last],
        integrator: &traj.integrator,
        final_state_norm: row_norm(&traj.states, last),
        final_error_norm: row_norm(&traj.errors, last),
    };
    write_report(out, "report.json", &to_json_17(&report)?)?;
    write_report(out, "trajectory.csv", &trajectory_csv(&traj))?;

    Ok(format!(
        "simulate: {} samples to t = {}, final error norm {:.3e}",
        report.samples, report.t_final, report.final_error_norm
    ))
}

fn cmd_scan(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let a = cfg.assemble()?;
    let spec = cfg.scan.clone().unwrap_or_default();
    let result = sector_scan(&a.plant, &a.ctrl, spec.delta, spec.radius, spec.density)?;
    write_report(out, "scan.json", &to_json_17(&result)?)?;

    let summary = format!(
        "scan: verdict {} (min rel sv {:.3e} at ({:.3}, {:.3}), q = {:.3})",
        result.verdict, result.min_rel_sv, result.argmin.0, result.argmin.1, result.q_estimate
    );
    if result.verdict {
        Ok(summary)
    } else {
        Err(CliError::Check(format!("sector {summary}")))
    }
}

#[derive(Serialize)]
struct RobustDraw {
    draw: usize,
    report: outreg_core::RobustnessReport,
}

#[derive(Serialize)]
struct RobustCliReport {
    seed: u64,
    scale: f64,
    tol: f64,
    draws: Vec<RobustDraw>,
    all_solvable: bool,
    all_robust: bool,
}

fn perturbed(base: &Array2<c64>, scale: f64, rng: &mut ChaCha8Rng) -> Array2<c64> {
    let mut m = base.clone();
    for entry in m.iter_mut() {
        let re = rng.gen_range(-1.0..1.0);
        let im = rng.gen_range(-1.0..1.0);
        *entry += scale * c64::new(re, im);
    }
    m
}

fn cmd_robust(cfg: &RunConfig, out: &Path, seed: u64, tol: f64) -> Result<String, CliError> {
    let a = cfg.assemble()?;
    let spec = cfg.robust.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut draws = Vec::with_capacity(spec.perturbations);
    for draw in 0..spec.perturbations {
        let e_pert = perturbed(&a.e_mat, spec.scale, &mut rng);
        let f_pert = perturbed(&a.f_mat, spec.scale, &mut rng);
        let report = robustness_report(&a.ctrl, &a.plant, &e_pert, &f_pert, &a.exo, tol)?;
        draws.push(RobustDraw { draw, report });
    }

    let all_solvable = draws
        .iter()
        .all(|d| d.report.entries.iter().all(|e| e.solvable));
    let all_robust = draws.iter().all(|d| d.report.robust);
    let total = draws.len();

    let report = RobustCliReport {
        seed,
        scale: spec.scale,
        tol,
        draws,
        all_solvable,
        all_robust,
    };
    write_report(out, "robust.json", &to_json_17(&report)?)?;

    if all_solvable {
        Ok(format!(
            "robust: {total}/{total} perturbations solvable at every frequency"
        ))
    } else {
        Err(CliError::Check(
            "robustness check failed: unsolvable frequency under perturbed data".into(),
        ))
    }
}

#[derive(Serialize)]
struct HeatScanReport {
    abscissa: f64,
    spectrum_in_sector: Vec<(f64, f64)>,
    scan: outreg_core::SectorScanResult,
}

fn cmd_heat_bench(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let heat = cfg.heat.clone().unwrap_or_default();
    let periodic = cfg.periodic.clone().unwrap_or_default();

    let run = run_constant_tracking(&heat)?;
    let scan = run_stability_scan(&heat)?;

    let constant_dir = out.join("heat").join("constant");
    run.bundle.write(&constant_dir)?;
    let scan_report = HeatScanReport {
        abscissa: scan.abscissa,
        spectrum_in_sector: scan.spectrum_in_sector.clone(),
        scan: scan.scan.clone(),
    };
    write_report(&constant_dir, "scan.json", &to_json_17(&scan_report)?)?;

    let dw = 2 * periodic.k_exo as usize + 1;
    let g1 = Array1::from_elem(dw, c64::new(periodic.g1_scale, 0.0));
    let g2 = Array1::from_elem(dw, c64::new(periodic.g2_scale, 0.0));
    let setup = periodic_reference_setup(periodic.k_exo, &g1, &g2, None)?;
    let periodic_dir = out.join("heat").join("periodic");
    std::fs::create_dir_all(&periodic_dir)?;
    std::fs::write(
        periodic_dir.join("structure_report.json"),
        setup.structure_report()?,
    )?;

    let y_gap = (run.y_final[0] - run.y_ref[0])
        .hypot(run.y_final[1] - run.y_ref[1]);
    let pass = run.ratio <= 0.1 && y_gap <= 1e-2 && scan.scan.verdict;
    let summary = format!(
        "heat-bench: error ratio {:.3e}, output gap {:.3e}, scan verdict {}, reports under {}",
        run.ratio,
        y_gap,
        scan.scan.verdict,
        out.join("heat").display()
    );
    if pass {
        Ok(summary)
    } else {
        Err(CliError::Check(summary))
    }
}
