use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Counting, ExperimentConfig, Recipe, Setup, SweepAxis};
use crate::control::{compile_rotation_with, evolve, sequence_unitary, PulseSpec, RotationSpec};
use crate::error::{invalid, Result};
use crate::herald::{prepare_heralded_with, readout_map, target_idler_polarization, HeraldRecord, JonesVector};
use crate::levels::{anchor_checks, AnchorCheck, EffectiveParams};
use crate::qlin::{
    gate_overlap, state_fidelity, stokes_from_rho, Cardinal, ComplexMatrix, DensityMatrix, StokesVector,
};
use crate::tomo::{
    average_fidelity_from_process, bootstrap_state_error, fringe_analysis, mle_state, monte_carlo_average_fidelity,
    outcome_probability, process_fidelity, qpt_mle, simulate_counts, simulate_tomography, Basis, Diagnostics,
    FringePoint, FringeResult, McFidelity, MeasurementRecord, ProcessEstimate, ProcessMatrix, ProcessTomographySet,
    TomographyInput,
};

// seed-path stages of one work item
const HERALD: u64 = 0;
const EVOLVE: u64 = 1;
const COUNTS: u64 = 2;
const BOOTSTRAP: u64 = 3;
const MONTE_CARLO: u64 = 4;

/// Points of a fringe sweep over one period of pulse area.
const FRINGE_POINTS: usize = 24;

/// Tomography outcome for one state.
#[derive(Debug, Clone, Serialize)]
pub struct StateResult {
    pub label: String,
    pub rho: DensityMatrix,
    pub stokes: StokesVector,
    pub fidelity: f64,
    /// Bootstrap spread of the reconstructed state.
    pub fidelity_std: f64,
    pub counts: Vec<MeasurementRecord>,
    pub diagnostics: Diagnostics,
}

struct Tomographed {
    rho: DensityMatrix,
    input: TomographyInput,
    diagnostics: Diagnostics,
    spread: f64,
}

impl Tomographed {
    fn result(&self, label: impl Into<String>, fidelity: f64) -> Result<StateResult> {
        Ok(StateResult {
            label: label.into(),
            stokes: stokes_from_rho(&self.rho)?,
            rho: self.rho.clone(),
            fidelity,
            fidelity_std: self.spread,
            counts: self.input.records().to_vec(),
            diagnostics: self.diagnostics.clone(),
        })
    }
}

fn path(base: &[u64], stage: u64) -> Vec<u64> {
    let mut p = base.to_vec();
    p.push(stage);
    p
}

fn herald(setup: &Setup, pol: &JonesVector, item: &[u64]) -> Result<DensityMatrix> {
    let seed = setup.seed_for(&path(item, HERALD));
    Ok(prepare_heralded_with(pol, setup.noise.idler_misalignment_rad, setup.herald_shots, seed)?.rho)
}

/// Runs `pulses` on a heralded qubit state; returns the read-out polarization
/// state and the population left in `|s_aux⟩`.
fn operate(setup: &Setup, rho: &DensityMatrix, pulses: &[PulseSpec], item: &[u64]) -> Result<(DensityMatrix, f64)> {
    let seed = setup.seed_for(&path(item, EVOLVE));
    let out = evolve(&rho.embed(3)?, pulses, &setup.noise, setup.evolution_shots, seed)?;
    let readout = readout_map(&out)?;
    Ok((readout.polarization, (1.0 - readout.detected_fraction).max(0.0)))
}

fn tomograph(setup: &Setup, rho: &DensityMatrix, item: &[u64]) -> Result<Tomographed> {
    let bg = setup.noise.background_rate;
    let input = match setup.counting {
        Counting::Sampled => simulate_tomography(rho, setup.shots_per_basis, bg, setup.seed_for(&path(item, COUNTS)))?,
        Counting::Expected => TomographyInput::expected(rho, setup.shots_per_basis, bg)?,
    };
    let est = mle_state(&input)?;
    let boot = bootstrap_state_error(
        &input,
        setup.bootstrap_resamples,
        setup.seed_for(&path(item, BOOTSTRAP)),
    )?;
    Ok(Tomographed {
        rho: est.rho,
        input,
        diagnostics: est.diagnostics,
        spread: boot.fidelity_std,
    })
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn cardinal_polarization(c: Cardinal) -> Result<JonesVector> {
    let (theta, phi) = c.angles();
    target_idler_polarization(theta, phi)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrepareSixReport {
    pub states: Vec<StateResult>,
    pub herald: Vec<HeraldRecord>,
    pub mean_fidelity: f64,
    /// Standard deviation of the six fidelities.
    pub fidelity_sd: f64,
}

/// Heralds, tomographs and scores the six cardinal states.
pub fn run_prepare_six(cfg: &ExperimentConfig) -> Result<PrepareSixReport> {
    let setup = cfg.resolve()?;
    let states: Vec<StateResult> = Cardinal::ALL
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let item = [i as u64];
            let rho = herald(&setup, &cardinal_polarization(c)?, &item)?;
            let t = tomograph(&setup, &rho, &item)?;
            let f = crate::qlin::pure_fidelity(&t.rho, &c.state())?;
            t.result(c.label(), f)
        })
        .collect::<Result<_>>()?;
    let herald = Cardinal::ALL
        .iter()
        .map(|c| {
            let (t, p) = c.angles();
            HeraldRecord::ideal(t, p)
        })
        .collect::<Result<_>>()?;
    let (mean_fidelity, fidelity_sd) = mean_and_sd(&states.iter().map(|s| s.fidelity).collect::<Vec<_>>());
    Ok(PrepareSixReport {
        states,
        herald,
        mean_fidelity,
        fidelity_sd,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    /// `θ` of `exp(-iθ n·σ)`; the Bloch rotation angle is `2θ`.
    pub angle_rad: f64,
    pub pulses: Vec<PulseSpec>,
    pub state: StateResult,
    /// Ideal rotation applied to the reconstructed initial state.
    pub theory_stokes: StokesVector,
    /// Population left in `|s_aux⟩`, lost to readout.
    pub leakage: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCurve {
    pub axis: SweepAxis,
    pub axis_vector: [f64; 3],
    pub initial: StateResult,
    pub points: Vec<SweepPoint>,
    pub mean_fidelity: f64,
    pub fidelity_sd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub curves: Vec<SweepCurve>,
}

/// Initial state for each sweep axis: `|s_↓⟩` for Raman rotations, the
/// `|H⟩`-heralded state for Larmor rotations, and `cos(3π/8)|s_↓⟩ + sin(3π/8)|s_↑⟩`
/// for the tilted axis.
fn sweep_initial(axis: SweepAxis) -> Result<(String, JonesVector)> {
    Ok(match axis {
        SweepAxis::X | SweepAxis::Y => ("down".into(), target_idler_polarization(0.0, 0.0)?),
        SweepAxis::Z => ("idler_H".into(), JonesVector::horizontal()),
        SweepAxis::N => ("cos3pi8".into(), target_idler_polarization(3.0 * PI / 8.0, 0.0)?),
    })
}

/// Ideal heralded state for an analyser setting.
fn ideal_heralded(pol: &JonesVector) -> Result<DensityMatrix> {
    Ok(crate::herald::project_idler(&crate::herald::atom_photon_state(), pol)?
        .0
        .density())
}

/// Rotation sweeps about x, y, z or the tilted axis; `arbitrary_axis` always
/// sweeps the tilted axis.
pub fn run_rotation_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let setup = cfg.resolve()?;
    setup.require_control()?;
    let axes = match cfg.recipe {
        Recipe::ArbitraryAxis => vec![SweepAxis::N],
        _ => cfg
            .axes
            .clone()
            .unwrap_or_else(|| vec![SweepAxis::X, SweepAxis::Y, SweepAxis::Z]),
    };
    let angles = cfg.angles();
    let curves = axes
        .iter()
        .map(|&axis| sweep_curve(&setup, axis, &angles))
        .collect::<Result<_>>()?;
    Ok(SweepReport { curves })
}

fn sweep_curve(setup: &Setup, axis: SweepAxis, angles: &[f64]) -> Result<SweepCurve> {
    let a = axis as u64;
    let (label, pol) = sweep_initial(axis)?;
    let prepared = herald(setup, &pol, &[a, 0])?;
    let initial = tomograph(setup, &prepared, &[a, 0])?;
    let f0 = state_fidelity(&initial.rho, &ideal_heralded(&pol)?)?;
    let points: Vec<SweepPoint> = angles
        .par_iter()
        .enumerate()
        .map(|(k, &angle)| {
            let item = [a, 1 + k as u64];
            let spec = RotationSpec::new(axis.vector(), angle)?;
            let pulses = compile_rotation_with(&spec, &setup.control)?;
            let (out, leakage) = operate(setup, &prepared, &pulses, &item)?;
            let t = tomograph(setup, &out, &item)?;
            let expected = initial.rho.evolve(&spec.unitary())?;
            let f = state_fidelity(&t.rho, &expected)?;
            Ok(SweepPoint {
                angle_rad: angle,
                pulses,
                state: t.result(format!("{}_{k}", axis.name()), f)?,
                theory_stokes: stokes_from_rho(&expected)?,
                leakage,
            })
        })
        .collect::<Result<_>>()?;
    let (mean_fidelity, fidelity_sd) = mean_and_sd(&points.iter().map(|p| p.state.fidelity).collect::<Vec<_>>());
    Ok(SweepCurve {
        axis,
        axis_vector: axis.vector(),
        initial: initial.result(label, f0)?,
        points,
        mean_fidelity,
        fidelity_sd,
    })
}

/// Target gate and the rotations (time order) that realize it.
#[derive(Debug, Clone, Serialize)]
pub struct GateSpec {
    pub name: &'static str,
    pub rotations: Vec<RotationSpec>,
    pub target: ComplexMatrix,
}

/// Pauli gates as half-turn rotations; the Hadamard as a quarter turn about
/// y followed by a half turn about z.
pub fn gate_set() -> Vec<GateSpec> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = ComplexMatrix::from_rows([
        [num_complex::Complex64::new(h, 0.0), num_complex::Complex64::new(h, 0.0)],
        [
            num_complex::Complex64::new(h, 0.0),
            num_complex::Complex64::new(-h, 0.0),
        ],
    ]);
    let half = |axis: [f64; 3]| RotationSpec { axis, angle: FRAC_PI_2 };
    vec![
        GateSpec {
            name: "sigma_x",
            rotations: vec![half([1.0, 0.0, 0.0])],
            target: crate::qlin::pauli(1),
        },
        GateSpec {
            name: "sigma_y",
            rotations: vec![half([0.0, 1.0, 0.0])],
            target: crate::qlin::pauli(2),
        },
        GateSpec {
            name: "sigma_z",
            rotations: vec![half([0.0, 0.0, 1.0])],
            target: crate::qlin::pauli(3),
        },
        GateSpec {
            name: "hadamard",
            rotations: vec![
                RotationSpec {
                    axis: [0.0, 1.0, 0.0],
                    angle: -FRAC_PI_4,
                },
                half([0.0, 0.0, 1.0]),
            ],
            target: hadamard,
        },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct GateResult {
    pub gate: &'static str,
    pub pulses: Vec<PulseSpec>,
    /// `|tr(U†V)|/2` between the compiled sequence and the target.
    pub compiled_overlap: f64,
    pub estimate: ProcessEstimate,
    pub process_fidelity: f64,
    /// `(2 F_proc + 1)/3`.
    pub average_fidelity_formula: f64,
    /// Mean over the six inputs of the fidelity between the output and the
    /// ideal gate applied to the reconstructed input.
    pub average_fidelity_measured: f64,
    pub average_fidelity_measured_std: f64,
    pub average_fidelity_monte_carlo: McFidelity,
    /// `measured ≥ formula − 3σ`.
    pub measured_not_below_formula: bool,
    pub outputs: Vec<StateResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QptReport {
    pub inputs: Vec<StateResult>,
    pub gates: Vec<GateResult>,
    pub mean_process_fidelity: f64,
}

/// Process tomography of the Pauli gates and the Hadamard gate.
///
/// The fit assigns each output to the ideal cardinal input it was heralded
/// for, so preparation errors count against the process.
pub fn run_qpt_gates(cfg: &ExperimentConfig) -> Result<QptReport> {
    let setup = cfg.resolve()?;
    setup.require_control()?;
    let prepared: Vec<DensityMatrix> = Cardinal::ALL
        .par_iter()
        .enumerate()
        .map(|(i, &c)| herald(&setup, &cardinal_polarization(c)?, &[0, i as u64]))
        .collect::<Result<_>>()?;
    let inputs: Vec<Tomographed> = prepared
        .par_iter()
        .enumerate()
        .map(|(i, rho)| tomograph(&setup, rho, &[0, i as u64]))
        .collect::<Result<_>>()?;
    let gates = gate_set()
        .iter()
        .enumerate()
        .map(|(g, gate)| qpt_gate(&setup, gate, 1 + g as u64, &prepared, &inputs))
        .collect::<Result<Vec<_>>>()?;
    let input_results = Cardinal::ALL
        .iter()
        .zip(&inputs)
        .map(|(c, t)| t.result(c.label(), crate::qlin::pure_fidelity(&t.rho, &c.state())?))
        .collect::<Result<_>>()?;
    let mean_process_fidelity = gates.iter().map(|g| g.process_fidelity).sum::<f64>() / gates.len() as f64;
    Ok(QptReport {
        inputs: input_results,
        gates,
        mean_process_fidelity,
    })
}

fn qpt_gate(
    setup: &Setup,
    gate: &GateSpec,
    g: u64,
    prepared: &[DensityMatrix],
    inputs: &[Tomographed],
) -> Result<GateResult> {
    let mut pulses = Vec::new();
    for r in &gate.rotations {
        pulses.extend(compile_rotation_with(r, &setup.control)?);
    }
    let compiled_overlap = gate_overlap(&sequence_unitary(&pulses)?, &gate.target);
    if (compiled_overlap - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{} compiles to overlap {compiled_overlap}", gate.name)));
    }
    let outputs: Vec<Tomographed> = prepared
        .par_iter()
        .enumerate()
        .map(|(i, rho)| {
            let item = [g, i as u64];
            let (out, _) = operate(setup, rho, &pulses, &item)?;
            tomograph(setup, &out, &item)
        })
        .collect::<Result<_>>()?;
    let data: BTreeMap<Cardinal, TomographyInput> = Cardinal::ALL
        .iter()
        .zip(&outputs)
        .map(|(&c, t)| (c, t.input.clone()))
        .collect();
    let estimate = qpt_mle(&ProcessTomographySet::new(data)?, true)?;
    let ideal = ProcessMatrix::from_unitary(&gate.target)?;
    let f_proc = process_fidelity(&estimate.chi, &ideal)?;

    let mut fids = Vec::with_capacity(6);
    let mut var = 0.0;
    let mut output_results = Vec::with_capacity(6);
    for ((c, input), out) in Cardinal::ALL.iter().zip(inputs).zip(&outputs) {
        let f = state_fidelity(&out.rho, &input.rho.evolve(&gate.target)?)?;
        fids.push(f);
        var += out.spread.powi(2) + input.spread.powi(2);
        output_results.push(out.result(format!("{}_{}", gate.name, c.label()), f)?);
    }
    let measured = fids.iter().sum::<f64>() / 6.0;
    let measured_std = var.sqrt() / 6.0;
    let formula = average_fidelity_from_process(f_proc)?;
    let mc = monte_carlo_average_fidelity(
        &estimate.chi,
        &gate.target,
        setup.mc_samples,
        setup.seed_for(&[g, 99, MONTE_CARLO]),
    )?;
    Ok(GateResult {
        gate: gate.name,
        pulses,
        compiled_overlap,
        process_fidelity: f_proc,
        average_fidelity_formula: formula,
        average_fidelity_measured: measured,
        average_fidelity_measured_std: measured_std,
        average_fidelity_monte_carlo: mc,
        measured_not_below_formula: measured >= formula - 3.0 * measured_std,
        estimate,
        outputs: output_results,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FringeCurve {
    pub initial: String,
    pub rotation_axis: SweepAxis,
    pub measured_basis: Basis,
    /// Sweep angle is the Bloch rotation angle (Raman pulse area).
    pub points: Vec<FringePoint>,
    pub analysis: FringeResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct FringeReport {
    pub curves: Vec<FringeCurve>,
    pub min_max_min_ratio: f64,
    pub mean_visibility: f64,
    pub any_ratio_capped: bool,
}

/// Raman pulse-area sweeps: `|s_↓⟩` rotated about x and read in Z, and the
/// `|H⟩`-heralded state rotated about y and read in X. Counts per point are
/// `shots_per_basis`.
pub fn run_fringe(cfg: &ExperimentConfig) -> Result<FringeReport> {
    let setup = cfg.resolve()?;
    setup.require_control()?;
    let recipes = [
        ("down", target_idler_polarization(0.0, 0.0)?, SweepAxis::X, Basis::Z),
        ("idler_H", JonesVector::horizontal(), SweepAxis::Y, Basis::X),
    ];
    let curves = recipes
        .iter()
        .enumerate()
        .map(|(ci, (label, pol, axis, basis))| {
            let ci = ci as u64;
            let prepared = herald(&setup, pol, &[ci, 0])?;
            let points: Vec<FringePoint> = (0..FRINGE_POINTS)
                .into_par_iter()
                .map(|k| {
                    let area = TAU * k as f64 / FRINGE_POINTS as f64;
                    let item = [ci, 1 + k as u64];
                    let spec = RotationSpec::new(axis.vector(), area / 2.0)?;
                    let pulses = compile_rotation_with(&spec, &setup.control)?;
                    let (out, _) = operate(&setup, &prepared, &pulses, &item)?;
                    let counts = fringe_counts(&setup, &out, *basis, &item)?;
                    Ok(FringePoint { angle: area, counts })
                })
                .collect::<Result<_>>()?;
            Ok(FringeCurve {
                initial: (*label).into(),
                rotation_axis: *axis,
                measured_basis: *basis,
                analysis: fringe_analysis(&points)?,
                points,
            })
        })
        .collect::<Result<Vec<FringeCurve>>>()?;
    let min_ratio = curves
        .iter()
        .map(|c| c.analysis.max_min_ratio)
        .fold(f64::INFINITY, f64::min);
    let mean_visibility = curves.iter().map(|c| c.analysis.visibility).sum::<f64>() / curves.len() as f64;
    Ok(FringeReport {
        any_ratio_capped: curves.iter().any(|c| c.analysis.ratio_capped),
        min_max_min_ratio: min_ratio,
        mean_visibility,
        curves,
    })
}

fn fringe_counts(setup: &Setup, rho: &DensityMatrix, basis: Basis, item: &[u64]) -> Result<[f64; 2]> {
    let n = setup.shots_per_basis;
    Ok(match setup.counting {
        Counting::Expected => {
            let p = outcome_probability(rho, basis, setup.noise.background_rate)?;
            [n as f64 * p, n as f64 * (1.0 - p)]
        }
        Counting::Sampled => {
            let seed = setup.seed_for(&path(item, COUNTS));
            let r = simulate_counts(rho, basis, n, setup.noise.background_rate, seed)?;
            [r.n_plus as f64, r.n_minus as f64]
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StarkReport {
    pub effective: EffectiveParams,
    pub anchors: Vec<AnchorCheck>,
    pub all_pass: bool,
}

/// Effective parameters with their reference-anchor checks.
pub fn run_stark_report(cfg: &ExperimentConfig) -> Result<StarkReport> {
    cfg.validate()?;
    let effective = cfg.physical.effective_params()?;
    let anchors = anchor_checks(&effective);
    Ok(StarkReport {
        all_pass: anchors.iter().all(|a| a.pass),
        effective,
        anchors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::experiment::run;

    fn ideal(recipe: Recipe) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(recipe, 11);
        cfg.preset = Some("none".into());
        cfg.counting = Counting::Expected;
        cfg.shots_per_basis = 1_000_000;
        cfg.bootstrap_resamples = 4;
        cfg.mc_samples = 200;
        cfg
    }

    #[test]
    fn gate_set_compiles_exactly() {
        let params = crate::control::ControlParams::ideal(2.0 * PI * 190e3, 2.0 * PI * 180e3);
        for g in gate_set() {
            let mut pulses = Vec::new();
            for r in &g.rotations {
                pulses.extend(compile_rotation_with(r, &params).unwrap());
            }
            let u = sequence_unitary(&pulses).unwrap();
            assert!((gate_overlap(&u, &g.target) - 1.0).abs() < 1e-12, "{}", g.name);
        }
    }

    #[test]
    fn noiseless_x_sweep_follows_rotation() {
        let mut cfg = ideal(Recipe::RotationSweep);
        cfg.axes = Some(vec![SweepAxis::X]);
        let report = run_rotation_sweep(&cfg).unwrap();
        for p in &report.curves[0].points {
            let s = p.state.stokes;
            let a = 2.0 * p.angle_rad;
            assert!(
                (s.z - a.cos()).abs() < 1e-6 && (s.y + a.sin()).abs() < 1e-6 && s.x.abs() < 1e-6,
                "{s:?} at {a}"
            );
            assert!((p.state.fidelity - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn noiseless_prepare_six() {
        let report = run_prepare_six(&ideal(Recipe::PrepareSix)).unwrap();
        assert!(report.mean_fidelity > 0.999);
    }

    #[test]
    fn noiseless_fringe_has_full_visibility() {
        let report = run_fringe(&ideal(Recipe::Fringe)).unwrap();
        for c in &report.curves {
            assert!((c.analysis.visibility - 1.0).abs() < 1e-6, "{:?}", c.analysis);
        }
        assert!(report.any_ratio_capped);
    }

    #[test]
    fn stark_report_examples() {
        let report = run_stark_report(&ExperimentConfig::new(Recipe::StarkReport, 0)).unwrap();
        assert!(report.all_pass);
        let mut cfg = ExperimentConfig::new(Recipe::StarkReport, 0);
        cfg.physical.beam.power_w = 0.0;
        let r = run_stark_report(&cfg).unwrap();
        assert_eq!(r.effective.rabi_qubit, 0.0);
        assert!(!r.all_pass);
        assert!(run(&cfg).unwrap().to_json().is_ok());
        cfg.physical.beam.detuning_rad_s = PI * 816.656e6;
        assert!(matches!(run_stark_report(&cfg), Err(Error::Resonant(_))));
        cfg.physical.atomic_data = Some("/nonexistent/atoms.json".into());
        assert!(matches!(run_stark_report(&cfg), Err(Error::Config(_))));
    }
}
