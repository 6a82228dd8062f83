use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControlParams, NoiseModel};
use crate::error::{Error, Result};
use crate::levels::{effective_params, AtomicData, BeamParams, EffectiveParams};

pub const SCHEMA_VERSION: u32 = 1;

const PAPER_NOISE_TOML: &str = include_str!("../../presets/paper-noise.toml");

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    PrepareSix,
    RotationSweep,
    ArbitraryAxis,
    QptGates,
    Fringe,
    StarkReport,
}

impl Recipe {
    pub const ALL: [Recipe; 6] = [
        Recipe::PrepareSix,
        Recipe::RotationSweep,
        Recipe::ArbitraryAxis,
        Recipe::QptGates,
        Recipe::Fringe,
        Recipe::StarkReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::PrepareSix => "prepare_six",
            Recipe::RotationSweep => "rotation_sweep",
            Recipe::ArbitraryAxis => "arbitrary_axis",
            Recipe::QptGates => "qpt_gates",
            Recipe::Fringe => "fringe",
            Recipe::StarkReport => "stark_report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rotation axis of a sweep; `N` is `(1, 1, 1)/√3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    X,
    Y,
    Z,
    N,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::X => "x",
            SweepAxis::Y => "y",
            SweepAxis::Z => "z",
            SweepAxis::N => "n",
        }
    }

    pub fn vector(self) -> [f64; 3] {
        let s = 1.0 / 3f64.sqrt();
        match self {
            SweepAxis::X => [1.0, 0.0, 0.0],
            SweepAxis::Y => [0.0, 1.0, 0.0],
            SweepAxis::Z => [0.0, 0.0, 1.0],
            SweepAxis::N => [s, s, s],
        }
    }
}

/// How detector counts are produced from outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Counting {
    /// Binomial draws.
    #[default]
    Sampled,
    /// Expected values, rounded to whole counts for tomography.
    Expected,
}

/// Named noise setting with the control choices it was calibrated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisePreset {
    pub name: String,
    pub noise: NoiseModel,
    /// `false` decouples `|s_aux⟩` from the Raman drive.
    pub aux_coupled: bool,
    /// Raman Rabi frequency, Hz; overrides the value computed from the beam.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    /// Calibration record, kept for provenance only.
    #[serde(default, skip_serializing)]
    pub calibration: Option<toml::Table>,
}

impl NoisePreset {
    pub const NAMES: [&'static str; 2] = ["paper-noise", "none"];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper-noise" => Self::from_toml(PAPER_NOISE_TOML),
            "none" => Ok(Self::none()),
            other => Err(config_err(format!(
                "unknown preset {other:?} (expected one of {:?})",
                Self::NAMES
            ))),
        }
    }

    /// Noiseless pipeline with the auxiliary level decoupled.
    pub fn none() -> Self {
        Self {
            name: "none".into(),
            noise: NoiseModel::default(),
            aux_coupled: false,
            rabi_hz: None,
            calibration: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: NoisePreset = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        p.noise.validate()?;
        Ok(p)
    }
}

/// Beam and field, or a direct override of the effective parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    #[serde(default = "BeamParams::reference")]
    pub beam: BeamParams,
    #[serde(default = "default_b0")]
    pub b0_t: f64,
    /// Atomic data file; the bundled table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic_data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveParams>,
}

/// Field giving a 180 kHz Larmor frequency, tesla.
fn default_b0() -> f64 {
    1.285_714_285_714_285_7e-5
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            beam: BeamParams::reference(),
            b0_t: default_b0(),
            atomic_data: None,
            effective: None,
        }
    }
}

impl PhysicalConfig {
    pub fn atomic_data(&self) -> Result<AtomicData> {
        match &self.atomic_data {
            Some(path) => AtomicData::load(path).map_err(|e| match e {
                Error::Io(io) => config_err(format!("atomic data {}: {io}", path.display())),
                other => other,
            }),
            None => Ok(AtomicData::bundled()),
        }
    }

    pub fn effective_params(&self) -> Result<EffectiveParams> {
        match self.effective {
            Some(p) => Ok(p),
            None => effective_params(&self.beam, &self.atomic_data()?, self.b0_t),
        }
    }
}

/// Explicit control choices; each overrides the preset and the physics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub larmor_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_coupled: Option<bool>,
}

/// One experiment run. Loaded from TOML (or JSON, for echoed configs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub recipe: Recipe,
    pub seed: u64,
    pub shots_per_basis: u64,
    #[serde(default)]
    pub counting: Counting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub physical: PhysicalConfig,
    #[serde(default)]
    pub control: ControlOverrides,
    /// Rotation angles `θ` of `exp(-iθ n·σ)`; the recipe default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_grid: Option<Vec<f64>>,
    /// Sweep axes for `rotation_sweep`; x, y and z when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<SweepAxis>>,
    #[serde(default = "default_herald_shots")]
    pub herald_shots: usize,
    #[serde(default = "default_evolution_shots")]
    pub evolution_shots: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

fn default_herald_shots() -> usize {
    400
}
fn default_evolution_shots() -> usize {
    400
}
fn default_bootstrap() -> usize {
    200
}
fn default_mc_samples() -> usize {
    10_000
}

/// `0, π/12, …, 11π/12`
pub fn default_angle_grid() -> Vec<f64> {
    (0..12).map(|k| k as f64 * PI / 12.0).collect()
}

impl ExperimentConfig {
    /// Defaults for `recipe` under the frozen paper-noise preset.
    pub fn new(recipe: Recipe, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            recipe,
            seed,
            shots_per_basis: 3000,
            counting: Counting::Sampled,
            preset: Some("paper-noise".into()),
            noise: None,
            physical: PhysicalConfig::default(),
            control: ControlOverrides::default(),
            angle_grid: None,
            axes: None,
            herald_shots: default_herald_shots(),
            evolution_shots: default_evolution_shots(),
            bootstrap_resamples: default_bootstrap(),
            mc_samples: default_mc_samples(),
            output_path: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.shots_per_basis == 0 {
            return Err(config_err("shots_per_basis must be at least 1"));
        }
        if self.herald_shots == 0 || self.evolution_shots == 0 || self.mc_samples == 0 {
            return Err(config_err(
                "herald_shots, evolution_shots and mc_samples must be at least 1",
            ));
        }
        if self.bootstrap_resamples < 2 {
            return Err(config_err("bootstrap_resamples must be at least 2"));
        }
        if let Some(grid) = &self.angle_grid {
            if grid.is_empty() {
                return Err(config_err("angle_grid must not be empty"));
            }
            if grid.iter().any(|a| !a.is_finite()) {
                return Err(config_err("angle_grid entries must be finite"));
            }
        }
        if let Some(axes) = &self.axes {
            if axes.is_empty() {
                return Err(config_err("axes must not be empty"));
            }
        }
        if self.preset.is_some() && self.noise.is_some() {
            return Err(config_err("give either preset or noise, not both"));
        }
        if let Some(name) = &self.preset {
            NoisePreset::by_name(name)?;
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(|e| config_err(e.to_string()))?;
        }
        for v in [self.control.rabi_hz, self.control.larmor_hz].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err("control frequencies must be positive"));
            }
        }
        if !(self.physical.b0_t >= 0.0 && self.physical.b0_t.is_finite()) {
            return Err(config_err("b0_t must be non-negative"));
        }
        self.physical.beam.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn angles(&self) -> Vec<f64> {
        self.angle_grid.clone().unwrap_or_else(default_angle_grid)
    }

    pub fn noise_preset(&self) -> Result<NoisePreset> {
        match (&self.preset, &self.noise) {
            (Some(name), _) => NoisePreset::by_name(name),
            (None, Some(noise)) => Ok(NoisePreset {
                name: "custom".into(),
                noise: *noise,
                aux_coupled: true,
                rabi_hz: None,
                calibration: None,
            }),
            (None, None) => Ok(NoisePreset::none()),
        }
    }

    /// Resolves physics, preset and overrides into the numbers a recipe uses.
    pub fn resolve(&self) -> Result<Setup> {
        self.validate()?;
        let preset = self.noise_preset()?;
        let effective = self.physical.effective_params()?;
        let hz = 2.0 * PI;
        let rabi = self
            .control
            .rabi_hz
            .or(preset.rabi_hz)
            .map(|f| hz * f)
            .unwrap_or(effective.rabi_qubit);
        let larmor = self
            .control
            .larmor_hz
            .map(|f| hz * f)
            .unwrap_or(effective.zeeman_down_up);
        let aux_coupled = self.control.aux_coupled.unwrap_or(preset.aux_coupled);
        let control = ControlParams {
            rabi_rad_s: rabi,
            larmor_rad_s: larmor,
            aux_detuning_rad_s: effective.aux_splitting,
            // the aux transition keeps its computed ratio to the qubit transition
            aux_rabi_rad_s: Some(if aux_coupled {
                if effective.rabi_qubit > 0.0 {
                    rabi * effective.rabi_aux / effective.rabi_qubit
                } else {
                    rabi
                }
            } else {
                0.0
            }),
        };
        Ok(Setup {
            recipe_index: self.recipe.index(),
            seed: self.seed,
            preset: preset.name,
            noise: preset.noise,
            control,
            effective,
            counting: self.counting,
            shots_per_basis: self.shots_per_basis,
            herald_shots: self.herald_shots,
            evolution_shots: self.evolution_shots,
            bootstrap_resamples: self.bootstrap_resamples,
            mc_samples: self.mc_samples,
        })
    }
}

/// Resolved run parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setup {
    #[serde(skip)]
    pub recipe_index: u64,
    pub seed: u64,
    pub preset: String,
    pub noise: NoiseModel,
    pub control: ControlParams,
    pub effective: EffectiveParams,
    pub counting: Counting,
    pub shots_per_basis: u64,
    pub herald_shots: usize,
    pub evolution_shots: usize,
    pub bootstrap_resamples: usize,
    pub mc_samples: usize,
}

impl Setup {
    /// Seed for a work item, keyed by recipe and a path of indices.
    pub fn seed_for(&self, path: &[u64]) -> u64 {
        crate::rng::derive_path(crate::rng::derive_seed(self.seed, self.recipe_index), path)
    }

    pub fn require_control(&self) -> Result<()> {
        if !(self.control.rabi_rad_s > 0.0) || !(self.control.larmor_rad_s > 0.0) {
            return Err(config_err(
                "recipe needs positive Rabi and Larmor frequencies (check beam power and b0_t)",
            ));
        }
        Ok(())
    }
}
