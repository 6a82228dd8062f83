//! `spinwave`: runs the experiment recipes and the standalone tools.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 optimizer
//! non-convergence, 3 a reference anchor failed in `stark_report`. Failures
//! print one JSON object on stderr; wall time also goes to stderr so that
//! reports stay byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spinwave::control::{compile_rotation_with, evolve, ControlParams, PulseSpec, RotationSpec};
use spinwave::experiment::{self, ExperimentConfig, NoisePreset, Recipe};
use spinwave::herald::{prepare_heralded, readout_map};
use spinwave::qlin::{stokes_from_rho, Cardinal};
use spinwave::tomo::{
    bootstrap_state_error, mle_state, process_fidelity, qpt_mle, read_counts_csv, ProcessTomographySet,
};
use spinwave::Error;

#[derive(Parser)]
#[command(
    name = "spinwave",
    version,
    about = "Spinwave qubit control and tomography simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML (or echoed JSON) experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; sweep curves go beside it as `<stem>_<axis>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise preset, replacing any noise settings in the config.
    #[arg(long, value_parser = NoisePreset::NAMES)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Herald and tomograph the six cardinal states.
    PrepareSix(RunArgs),
    /// Rotation sweeps about x, y and z.
    RotationSweep(RunArgs),
    /// Rotation sweep about (1, 1, 1)/√3.
    ArbitraryAxis(RunArgs),
    /// Process tomography of the Pauli and Hadamard gates.
    QptGates(RunArgs),
    /// Raman pulse-area fringes.
    Fringe(RunArgs),
    /// Light shifts, Rabi frequencies and anchor checks.
    StarkReport(RunArgs),
    /// Reconstruct states (and the process, given all six cardinal inputs) from a counts CSV.
    Reconstruct {
        counts: PathBuf,
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a rotation exp(-iθ n·σ) into a pulse schedule.
    Compile {
        #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["NX", "NY", "NZ"])]
        axis: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        angle: f64,
        #[arg(long, default_value_t = 190e3)]
        rabi_hz: f64,
        #[arg(long, default_value_t = 180e3)]
        larmor_hz: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a pulse schedule on a heralded state cos θ|s_↓⟩ + sin θ e^{iφ}|s_↑⟩.
    Simulate {
        schedule: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long, value_parser = NoisePreset::NAMES, default_value = "none")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        shots: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Error(Error),
    Anchors,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let outcome = dispatch(cli.command);
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Anchors) => {
            eprintln!(
                "{}",
                json!({"error": "anchor_failure", "message": "one or more reference anchors failed"})
            );
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            let (kind, code) = match &e {
                Error::NonConvergence(_) => ("non_convergence", 2),
                Error::Config(_) => ("config", 1),
                _ => ("invalid_input", 1),
            };
            eprintln!("{}", json!({"error": kind, "message": e.to_string()}));
            ExitCode::from(code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::PrepareSix(a) => run_recipe(Recipe::PrepareSix, a),
        Command::RotationSweep(a) => run_recipe(Recipe::RotationSweep, a),
        Command::ArbitraryAxis(a) => run_recipe(Recipe::ArbitraryAxis, a),
        Command::QptGates(a) => run_recipe(Recipe::QptGates, a),
        Command::Fringe(a) => run_recipe(Recipe::Fringe, a),
        Command::StarkReport(a) => run_recipe(Recipe::StarkReport, a),
        Command::Reconstruct {
            counts,
            bootstrap,
            seed,
            out,
        } => Ok(reconstruct(&counts, bootstrap, seed, out)?),
        Command::Compile {
            axis,
            angle,
            rabi_hz,
            larmor_hz,
            out,
        } => {
            let spec = RotationSpec::normalized([axis[0], axis[1], axis[2]], angle)?;
            let params = ControlParams::ideal(hz(rabi_hz), hz(larmor_hz));
            let pulses = compile_rotation_with(&spec, &params)?;
            Ok(emit(
                &serde_json::to_value(pulses).map_err(Error::from)?,
                out.as_deref(),
            )?)
        }
        Command::Simulate {
            schedule,
            theta,
            phi,
            preset,
            seed,
            shots,
            out,
        } => Ok(simulate(&schedule, theta, phi, &preset, seed, shots, out)?),
    }
}

fn hz(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * f
}

fn load_config(recipe: Recipe, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(recipe, 0),
    };
    if cfg.recipe != recipe {
        return Err(Error::Config(format!(
            "config is for recipe {}, not {recipe}",
            cfg.recipe
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(preset) = &args.preset {
        cfg.preset = Some(preset.clone());
        cfg.noise = None;
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_recipe(recipe: Recipe, args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(recipe, &args)?;
    let report = experiment::run(&cfg)?;
    match &cfg.output_path {
        Some(path) => {
            for p in experiment::write_outputs(&report, Path::new(path))? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(report.to_json()?.as_bytes()).map_err(Error::from)?;
        }
    }
    if report.anchors().iter().any(|a| !a.pass) {
        return Err(Failure::Anchors);
    }
    Ok(())
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn reconstruct(counts: &Path, bootstrap: usize, seed: u64, out: Option<PathBuf>) -> Result<(), Error> {
    let file = std::fs::File::open(counts)?;
    let groups = read_counts_csv(file)?;
    let mut states = Vec::new();
    for (i, (label, input)) in groups.iter().enumerate() {
        let est = mle_state(input)?;
        let boot = bootstrap_state_error(input, bootstrap, spinwave::rng::derive_seed(seed, i as u64))?;
        states.push(json!({
            "input_label": label,
            "rho": est.rho,
            "stokes": stokes_from_rho(&est.rho)?,
            "log_likelihood": est.log_likelihood,
            "fidelity_std": boot.fidelity_std,
            "diagnostics": est.diagnostics,
        }));
    }
    let mut report = json!({ "states": states });
    let cardinal: BTreeMap<Cardinal, _> = groups
        .iter()
        .filter_map(|(l, input)| Cardinal::parse(l).map(|c| (c, input.clone())))
        .collect();
    if cardinal.len() == 6 {
        let est = qpt_mle(&ProcessTomographySet::new(cardinal)?, true)?;
        let identity = process_fidelity(&est.chi, &spinwave::tomo::ProcessMatrix::identity())?;
        report["process"] = json!({ "estimate": est, "fidelity_to_identity": identity });
    }
    emit(&report, out.as_deref())
}

fn simulate(
    schedule: &Path,
    theta: f64,
    phi: f64,
    preset: &str,
    seed: u64,
    shots: usize,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let text = std::fs::read_to_string(schedule)?;
    let pulses: Vec<PulseSpec> = serde_json::from_str(&text)?;
    let noise = NoisePreset::by_name(preset)?.noise;
    let prep = prepare_heralded(theta, phi, noise.idler_misalignment_rad, shots, seed)?;
    let rho = evolve(
        &prep.rho.embed(3)?,
        &pulses,
        &noise,
        shots,
        spinwave::rng::derive_seed(seed, 1),
    )?;
    let readout = readout_map(&rho)?;
    emit(
        &json!({
            "final_state": rho,
            "aux_population": rho.population(2),
            "readout": readout.polarization,
            "readout_stokes": stokes_from_rho(&readout.polarization)?,
            "detected_fraction": readout.detected_fraction,
        }),
        out.as_deref(),
    )
}
