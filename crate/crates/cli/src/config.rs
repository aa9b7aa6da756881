//! JSON run-configuration schema and its assembly into core objects.
//!
//! Every section is optional; whatever is missing falls back to the
//! boundary-heat benchmark, so a bare `outreg <command>` exercises the
//! built-in example end to end. Unknown keys anywhere in the document are
//! rejected so that a typo cannot silently change a run.

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use outreg_core::report::{matrix_from_rows, ComplexScalar};
use outreg_core::{
    build_p_copy_controller, c64, constant_reference_setup, Controller, ExoBlock, Exosystem,
    HeatConfig, ModalPlant, PCopyGains,
};

use crate::CliError;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub plant: Option<PlantSource>,
    pub exosystem: Option<ExoSpec>,
    pub controller: Option<ControllerSource>,
    pub data: Option<DataSpec>,
    pub simulation: Option<SimSpec>,
    pub scan: Option<ScanSpec>,
    pub robust: Option<RobustSpec>,
    pub heat: Option<HeatConfig>,
    pub periodic: Option<PeriodicSpec>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// Plant section: the string `"heat"`, or exactly one of
/// `{"heat": {...}} | {"file": path} | {"inline": {...}}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PlantSource {
    Preset(String),
    Detail(PlantDetail),
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PlantDetail {
    pub heat: Option<HeatPlantSpec>,
    pub file: Option<PathBuf>,
    pub inline: Option<InlinePlant>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPlantSpec {
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
}

fn default_n_modes() -> usize {
    31
}

/// Spectral plant data. `input_modes` has one row per mode (columns are
/// inputs), `output_modes` one row per output (columns are modes);
/// `feedthrough` defaults to zero. Complex entries are written as a bare
/// number or an `[re, im]` pair.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlinePlant {
    pub eigenvalues: Vec<f64>,
    pub input_modes: Vec<Vec<ComplexScalar>>,
    pub output_modes: Vec<Vec<ComplexScalar>>,
    #[serde(default)]
    pub feedthrough: Option<Vec<Vec<ComplexScalar>>>,
    pub tail_constant: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoSpec {
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub k: i64,
    pub omega: f64,
    pub n: usize,
}

/// Controller section: the string `"heat"`, or exactly one of
/// `{"inline": {g1, g2, k}} | {"p_copy": {g2, k}}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ControllerSource {
    Preset(String),
    Detail(ControllerDetail),
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerDetail {
    pub inline: Option<InlineController>,
    pub p_copy: Option<PCopySpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineController {
    pub g1: Vec<Vec<ComplexScalar>>,
    pub g2: Vec<Vec<ComplexScalar>>,
    pub k: Vec<Vec<ComplexScalar>>,
}

/// Gains for the exact p-copy builder; `p` is taken from the plant outputs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PCopySpec {
    pub g2: Vec<Vec<ComplexScalar>>,
    pub k: Vec<Vec<ComplexScalar>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub e: Option<Vec<Vec<ComplexScalar>>>,
    pub f: Option<Vec<Vec<ComplexScalar>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    /// must start at 0; `[0, 0]` produces a single-row trajectory
    pub t_span: (f64, f64),
    pub dt_output: f64,
    pub xe0: Option<Vec<ComplexScalar>>,
    /// initial exosystem state, default `(1, 0, ..., 0)`
    pub v0: Option<Vec<ComplexScalar>>,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            t_span: (0.0, 30.0),
            dt_output: 0.1,
            xe0: None,
            v0: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSpec {
    pub delta: f64,
    pub radius: f64,
    pub density: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            delta: 0.025,
            radius: 4.0,
            density: 512,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustSpec {
    pub perturbations: usize,
    /// amplitude of the uniform complex perturbation added to `(E, F)`
    pub scale: f64,
}

impl Default for RobustSpec {
    fn default() -> Self {
        RobustSpec {
            perturbations: 20,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicSpec {
    /// frequency truncation: blocks at `omega = -k_exo ..= k_exo`
    pub k_exo: i64,
    pub g1_scale: f64,
    pub g2_scale: f64,
}

impl Default for PeriodicSpec {
    fn default() -> Self {
        PeriodicSpec {
            k_exo: 5,
            g1_scale: 1.0,
            g2_scale: 1.0,
        }
    }
}

/// Core objects a subcommand operates on.
pub struct Assembled {
    pub plant: ModalPlant,
    pub exo: Exosystem,
    pub ctrl: Controller,
    pub e_mat: Array2<c64>,
    pub f_mat: Array2<c64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn rows_to_matrix(rows: &[Vec<ComplexScalar>], what: &str) -> Result<Array2<c64>, CliError> {
    matrix_from_rows(rows)
        .ok_or_else(|| config_err(format!("{what} must be a non-ragged, non-empty matrix")))
}

fn inline_to_plant(spec: &InlinePlant) -> Result<ModalPlant, CliError> {
    let eig = Array1::from_vec(spec.eigenvalues.clone());
    let b = rows_to_matrix(&spec.input_modes, "plant.input_modes")?;
    let c = rows_to_matrix(&spec.output_modes, "plant.output_modes")?;
    let d = match &spec.feedthrough {
        Some(rows) => rows_to_matrix(rows, "plant.feedthrough")?,
        None => Array2::zeros((c.nrows(), b.ncols())),
    };
    Ok(ModalPlant::new(eig, b, c, d, spec.tail_constant)?)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("config rejected: {e}")))
    }

    /// Mode count used by the heat preset fallbacks.
    fn heat_modes(&self) -> usize {
        match &self.plant {
            Some(PlantSource::Detail(d)) => {
                if let Some(h) = &d.heat {
                    return h.n_modes;
                }
            }
            _ => {}
        }
        self.heat.as_ref().map_or(31, |h| h.n_modes)
    }

    fn plant_is_heat_preset(&self) -> Result<bool, CliError> {
        match &self.plant {
            None => Ok(true),
            Some(PlantSource::Preset(name)) if name == "heat" => Ok(true),
            Some(PlantSource::Preset(name)) => {
                Err(config_err(format!("unknown plant preset '{name}'")))
            }
            Some(PlantSource::Detail(d)) => {
                let given =
                    usize::from(d.heat.is_some()) + usize::from(d.file.is_some()) + usize::from(d.inline.is_some());
                if given != 1 {
                    return Err(config_err(
                        "plant must give exactly one of heat | file | inline",
                    ));
                }
                Ok(d.heat.is_some())
            }
        }
    }

    /// Build plant, exosystem, controller and `(E, F)` data, filling any
    /// missing section from the heat benchmark when the plant is the heat
    /// preset. Explicit plants must spell out the remaining sections.
    pub fn assemble(&self) -> Result<Assembled, CliError> {
        let heat_plant = self.plant_is_heat_preset()?;
        let setup = if heat_plant {
            Some(constant_reference_setup(self.heat_modes())?)
        } else {
            None
        };

        let plant = match (&self.plant, setup.as_ref()) {
            (_, Some(s)) => s.plant.clone(),
            (Some(PlantSource::Detail(d)), None) => {
                if let Some(path) = &d.file {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        config_err(format!("cannot read plant file {}: {e}", path.display()))
                    })?;
                    let spec: InlinePlant = serde_json::from_str(&text)
                        .map_err(|e| config_err(format!("plant file rejected: {e}")))?;
                    inline_to_plant(&spec)?
                } else {
                    inline_to_plant(d.inline.as_ref().expect("validated above"))?
                }
            }
            _ => unreachable!("heat presets are handled through the setup"),
        };

        let exo = match &self.exosystem {
            Some(spec) => {
                let blocks = spec
                    .blocks
                    .iter()
                    .map(|b| ExoBlock {
                        k: b.k,
                        omega: b.omega,
                        n: b.n,
                    })
                    .collect();
                Exosystem::new(blocks, spec.alpha)?
            }
            None => match setup.as_ref() {
                Some(s) => s.exo.clone(),
                None => return Err(config_err("exosystem is required for an explicit plant")),
            },
        };

        let ctrl = match &self.controller {
            Some(ControllerSource::Preset(name)) if name == "heat" => match setup.as_ref() {
                Some(s) => s.controller.clone(),
                None => {
                    return Err(config_err(
                        "controller preset 'heat' requires the heat plant preset",
                    ))
                }
            },
            Some(ControllerSource::Preset(name)) => {
                return Err(config_err(format!("unknown controller preset '{name}'")))
            }
            Some(ControllerSource::Detail(d)) => {
                match (&d.inline, &d.p_copy) {
                    (Some(inline), None) => Controller::new(
                        rows_to_matrix(&inline.g1, "controller.g1")?,
                        rows_to_matrix(&inline.g2, "controller.g2")?,
                        rows_to_matrix(&inline.k, "controller.k")?,
                        "configured gains",
                    )?,
                    (None, Some(pc)) => build_p_copy_controller(
                        &exo,
                        plant.n_outputs(),
                        PCopyGains {
                            g2: rows_to_matrix(&pc.g2, "controller.p_copy.g2")?,
                            k_gain: rows_to_matrix(&pc.k, "controller.p_copy.k")?,
                        },
                    )?,
                    _ => {
                        return Err(config_err(
                            "controller must give exactly one of inline | p_copy",
                        ))
                    }
                }
            }
            None => match setup.as_ref() {
                Some(s) => s.controller.clone(),
                None => return Err(config_err("controller is required for an explicit plant")),
            },
        };

        let data = self.data.as_ref();
        let e_mat = match data.and_then(|d| d.e.as_ref()) {
            Some(rows) => rows_to_matrix(rows, "data.e")?,
            None => match setup.as_ref() {
                Some(s) => s.e_mat.clone(),
                None => Array2::zeros((plant.n_modes(), exo.dim())),
            },
        };
        let f_mat = match data.and_then(|d| d.f.as_ref()) {
            Some(rows) => rows_to_matrix(rows, "data.f")?,
            None => match setup.as_ref() {
                Some(s) => s.f_mat.clone(),
                None => Array2::zeros((plant.n_outputs(), exo.dim())),
            },
        };

        Ok(Assembled {
            plant,
            exo,
            ctrl,
            e_mat,
            f_mat,
        })
    }
}

/// Output-time grid for a simulation: `t0, t0 + dt, ...` closing exactly at
/// `t1`; a degenerate span yields the single time `t0`.
pub fn time_grid(t_span: (f64, f64), dt: f64) -> Result<Vec<f64>, CliError> {
    let (t0, t1) = t_span;
    if t0 != 0.0 {
        return Err(config_err("simulation.t_span must start at 0"));
    }
    if !(t1 >= t0) {
        return Err(config_err("simulation.t_span must be nondecreasing"));
    }
    if t1 == t0 {
        return Ok(vec![t0]);
    }
    if !(dt > 0.0) {
        return Err(config_err("simulation.dt_output must be positive"));
    }
    let mut times = vec![t0];
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * dt;
        if t >= t1 - 1e-12 {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(t1);
    Ok(times)
}
