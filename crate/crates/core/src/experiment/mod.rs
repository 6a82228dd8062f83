//! End-to-end recipes: herald, rotate, read out, tomograph, report.
//!
//! Every recipe validates its configuration before computing anything and
//! returns a [`RunReport`] that depends only on the configuration, so two runs
//! with the same seed serialize to identical bytes whatever the thread count.

mod config;
mod recipes;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::levels::AnchorCheck;

pub use config::{
    default_angle_grid, ControlOverrides, Counting, ExperimentConfig, NoisePreset, PhysicalConfig, Recipe, Setup,
    SweepAxis, SCHEMA_VERSION,
};
pub use recipes::{
    gate_set, run_fringe, run_prepare_six, run_qpt_gates, run_rotation_sweep, run_stark_report, FringeCurve,
    FringeReport, GateResult, GateSpec, PrepareSixReport, QptReport, StarkReport, StateResult, SweepCurve, SweepPoint,
    SweepReport,
};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub crate_version: &'static str,
    pub atomic_data_version: String,
    pub setup: Setup,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "recipe")]
pub enum RecipeResults {
    PrepareSix(PrepareSixReport),
    RotationSweep(SweepReport),
    ArbitraryAxis(SweepReport),
    QptGates(QptReport),
    Fringe(FringeReport),
    StarkReport(StarkReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub results: RecipeResults,
}

/// Runs the recipe named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let setup = cfg.resolve()?;
    let results = match cfg.recipe {
        Recipe::PrepareSix => RecipeResults::PrepareSix(run_prepare_six(cfg)?),
        Recipe::RotationSweep => RecipeResults::RotationSweep(run_rotation_sweep(cfg)?),
        Recipe::ArbitraryAxis => RecipeResults::ArbitraryAxis(run_rotation_sweep(cfg)?),
        Recipe::QptGates => RecipeResults::QptGates(run_qpt_gates(cfg)?),
        Recipe::Fringe => RecipeResults::Fringe(run_fringe(cfg)?),
        Recipe::StarkReport => RecipeResults::StarkReport(run_stark_report(cfg)?),
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        provenance: Provenance {
            seed: cfg.seed,
            crate_version: env!("CARGO_PKG_VERSION"),
            atomic_data_version: cfg.physical.atomic_data()?.version,
            setup,
        },
        results,
    })
}

impl RunReport {
    /// Pretty JSON; fails if any number is NaN or infinite.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        check_finite(&value, "$")?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    /// Anchor checks of a stark report; empty for other recipes.
    pub fn anchors(&self) -> &[AnchorCheck] {
        match &self.results {
            RecipeResults::StarkReport(r) => &r.anchors,
            _ => &[],
        }
    }

    pub fn sweep_curves(&self) -> &[SweepCurve] {
        match &self.results {
            RecipeResults::RotationSweep(r) | RecipeResults::ArbitraryAxis(r) => &r.curves,
            _ => &[],
        }
    }
}

/// serde_json turns non-finite floats into `null`; reports never contain `null`
/// otherwise, so any `null` marks a non-finite number.
fn check_finite(v: &serde_json::Value, path: &str) -> Result<()> {
    use serde_json::Value;
    match v {
        Value::Null => Err(invalid(format!("non-finite value at {path}"))),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, x)| check_finite(x, &format!("{path}[{i}]"))),
        Value::Object(map) => map
            .iter()
            .try_for_each(|(k, x)| check_finite(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

/// Sweep curve as CSV: `angle_rad, s_x, s_y, s_z, fidelity, fidelity_std`.
pub fn write_sweep_csv<W: Write>(curve: &SweepCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_rad", "s_x", "s_y", "s_z", "fidelity", "fidelity_std"])?;
    for p in &curve.points {
        w.write_record(
            [
                p.angle_rad,
                p.state.stokes.x,
                p.state.stokes.y,
                p.state.stokes.z,
                p.state.fidelity,
                p.state.fidelity_std,
            ]
            .iter()
            .map(|x| format!("{x:.10}")),
        )?;
    }
    w.flush().map_err(Error::Io)
}

/// Writes the report JSON to `path` and one `<stem>_<axis>.csv` per sweep curve
/// beside it. Returns every path written.
pub fn write_outputs(report: &RunReport, path: &Path) -> Result<Vec<std::path::PathBuf>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, report.to_json()?)?;
    let mut written = vec![path.to_path_buf()];
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    for curve in report.sweep_curves() {
        let csv_path = path.with_file_name(format!("{stem}_{}.csv", curve.axis.name()));
        write_sweep_csv(curve, std::fs::File::create(&csv_path)?)?;
        written.push(csv_path);
    }
    Ok(written)
}
