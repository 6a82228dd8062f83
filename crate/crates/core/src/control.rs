//! Larmor and Raman rotations, pulse compilation and three-level evolution.
//!
//! Conventions:
//! * Larmor hold of duration `t`: `diag(e^{iω_L t}, 1)` on `(|s_↓⟩, |s_↑⟩)`. Up to a
//!   global phase this is `exp(+i (ω_L t / 2) σz)`, i.e. a Bloch rotation about z by
//!   `-ω_L t`.
//! * Raman pulse: `[[cos φ, -i e^{iφ_R} sin φ], [-i e^{-iφ_R} sin φ, cos φ]]` with
//!   `φ = Ω_R t / 2`, equal to `exp(-i φ (cos a σx + sin a σy))` for `a = -φ_R`.
//! * [`RotationSpec`] angles follow `R_n(θ) = exp(-i θ n·σ)`: a Bloch rotation by `2θ`.
//!
//! On the three-level space `(|s_↓⟩, |s_↑⟩, |s_aux⟩)` the auxiliary level sits at
//! `m_F = +2`, opposite to `|s_↓⟩` at `m_F = -2` relative to `|s_↑⟩` at `m_F = 0`, so a
//! Larmor hold applies `e^{-iω_L t}` to it.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qlin::{hermitian_eig, matrix_exp_i, pauli, ComplexMatrix, DensityMatrix};
use crate::rng::substream;

/// Tolerance on `‖axis‖ = 1`.
pub const AXIS_TOL: f64 = 1e-12;
/// Axes with `|n_z|` below this are treated as equatorial (single Raman pulse).
const EQUATORIAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseKind {
    LarmorHold,
    RamanPulse,
}

/// One control segment.
///
/// `aux_rabi_rad_s` is the Rabi frequency of the `|s_↑⟩ ↔ |s_aux⟩` Raman
/// transition; when absent it equals `rabi_rad_s`, and `Some(0.0)` decouples
/// the auxiliary level entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub duration_s: f64,
    #[serde(default)]
    pub rabi_rad_s: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub larmor_rad_s: f64,
    #[serde(default)]
    pub aux_detuning_rad_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_rabi_rad_s: Option<f64>,
}

impl PulseSpec {
    pub fn larmor(duration_s: f64, larmor_rad_s: f64) -> Self {
        Self {
            kind: PulseKind::LarmorHold,
            duration_s,
            rabi_rad_s: 0.0,
            phase_rad: 0.0,
            larmor_rad_s,
            aux_detuning_rad_s: 0.0,
            aux_rabi_rad_s: None,
        }
    }

    pub fn raman(duration_s: f64, rabi_rad_s: f64, phase_rad: f64) -> Self {
        Self {
            kind: PulseKind::RamanPulse,
            duration_s,
            rabi_rad_s,
            phase_rad,
            larmor_rad_s: 0.0,
            aux_detuning_rad_s: 0.0,
            aux_rabi_rad_s: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.duration_s,
            self.rabi_rad_s,
            self.phase_rad,
            self.larmor_rad_s,
            self.aux_detuning_rad_s,
            self.aux_rabi_rad_s.unwrap_or(0.0),
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(invalid("pulse fields must be finite"));
        }
        if self.duration_s < 0.0 {
            return Err(invalid(format!("negative pulse duration {}", self.duration_s)));
        }
        if self.rabi_rad_s < 0.0 || self.aux_rabi_rad_s.is_some_and(|r| r < 0.0) {
            return Err(invalid("negative Rabi frequency"));
        }
        Ok(())
    }

    pub fn aux_rabi(&self) -> f64 {
        self.aux_rabi_rad_s.unwrap_or(self.rabi_rad_s)
    }
}

/// Target rotation `exp(-i angle n·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub axis: [f64; 3],
    pub angle: f64,
}

impl RotationSpec {
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > AXIS_TOL || !angle.is_finite() {
            return Err(invalid(format!("rotation axis norm {norm} is not 1")));
        }
        Ok(Self { axis, angle })
    }

    /// Normalizes `axis` first; fails on a zero axis.
    pub fn normalized(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("rotation axis must be non-zero"));
        }
        Self::new(axis.map(|a| a / norm), angle)
    }

    /// Axis and angle of a 2×2 unitary, up to global phase.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        check_unitary_2x2(u)?;
        let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
        let v = u.scale(det.sqrt().inv());
        // v = cos θ I - i sin θ n·σ
        let c = 0.5 * (v[(0, 0)] + v[(1, 1)]).re;
        let nx_s = -0.5 * (v[(0, 1)] + v[(1, 0)]).im;
        let ny_s = 0.5 * (v[(1, 0)] - v[(0, 1)]).re;
        let nz_s = -0.5 * (v[(0, 0)] - v[(1, 1)]).im;
        let s = (nx_s * nx_s + ny_s * ny_s + nz_s * nz_s).sqrt();
        if s < 1e-15 {
            return Self::new([0.0, 0.0, 1.0], if c >= 0.0 { 0.0 } else { PI });
        }
        Self::new([nx_s / s, ny_s / s, nz_s / s], s.atan2(c))
    }

    /// `cos θ I - i sin θ n·σ`
    pub fn unitary(&self) -> ComplexMatrix {
        let [nx, ny, nz] = self.axis;
        let (s, c) = self.angle.sin_cos();
        let n_sigma = &(&pauli(1).scale_real(nx) + &pauli(2).scale_real(ny)) + &pauli(3).scale_real(nz);
        &ComplexMatrix::identity(2).scale_real(c) - &n_sigma.scale(Complex64::new(0.0, s))
    }
}

/// Quasi-static noise: one draw per shot, constant during the shot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Gaussian fractional error of every Rabi frequency.
    pub rabi_fractional_sigma: f64,
    /// Gaussian jitter of the Larmor frequency, rad/s.
    pub larmor_sigma: f64,
    /// Uncorrelated counts per outcome channel, per heralded count.
    pub background_rate: f64,
    /// Standard deviation of the idler analyser misalignment, rad.
    pub idler_misalignment_rad: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let f = [
            self.rabi_fractional_sigma,
            self.larmor_sigma,
            self.background_rate,
            self.idler_misalignment_rad,
        ];
        if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("noise parameters must be finite and non-negative"));
        }
        Ok(())
    }

    /// True when evolution is deterministic.
    pub fn is_coherent(&self) -> bool {
        self.rabi_fractional_sigma == 0.0 && self.larmor_sigma == 0.0
    }
}

/// `u = e^{iδ} R_z(α) R_y(β) R_z(γ)` with the Larmor-form `R_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl EulerAngles {
    pub fn unitary(&self) -> ComplexMatrix {
        let rz = |a: f64| ComplexMatrix::from_diagonal(&[Complex64::from_polar(1.0, a), Complex64::new(1.0, 0.0)]);
        let (s, c) = (self.beta / 2.0).sin_cos();
        let ry = ComplexMatrix::from_rows([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ]);
        (&(&rz(self.alpha) * &ry) * &rz(self.gamma)).scale(Complex64::from_polar(1.0, self.delta))
    }
}

fn check_unitary_2x2(u: &ComplexMatrix) -> Result<()> {
    if u.dim() != 2 {
        return Err(Error::DimensionMismatch(2, u.dim()));
    }
    let dev = u.unitary_deviation();
    if dev > 1e-9 {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

/// Wraps into `(-π, π]`.
fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn check_duration(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("pulse duration must be non-negative, got {t}")));
    }
    Ok(())
}

/// Larmor rotation `diag(e^{iω_L t_L}, 1)`.
pub fn r_z(t_l: f64, omega_l: f64) -> Result<ComplexMatrix> {
    check_duration(t_l)?;
    Ok(ComplexMatrix::from_diagonal(&[
        Complex64::from_polar(1.0, omega_l * t_l),
        Complex64::new(1.0, 0.0),
    ]))
}

/// Raman rotation with pulse area `Ω_R t_R` and beam phase `φ_R`.
pub fn r_n(t_r: f64, omega_r: f64, phi_r: f64) -> Result<ComplexMatrix> {
    check_duration(t_r)?;
    let (s, c) = (omega_r * t_r / 2.0).sin_cos();
    let mi = Complex64::new(0.0, -1.0);
    Ok(ComplexMatrix::from_rows([
        [Complex64::new(c, 0.0), mi * Complex64::from_polar(s, phi_r)],
        [mi * Complex64::from_polar(s, -phi_r), Complex64::new(c, 0.0)],
    ]))
}

/// Euler angles with `β ∈ [0, π]` and the others in `(-π, π]`.
///
/// Degenerate cases fix `γ = 0`.
pub fn zyz_decompose(u: &ComplexMatrix) -> Result<EulerAngles> {
    check_unitary_2x2(u)?;
    let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let beta = 2.0 * u10.norm().atan2(u11.norm());
    let (s, c) = (beta / 2.0).sin_cos();
    let (alpha, gamma, delta) = if s < 1e-12 {
        let delta = u11.arg();
        (u00.arg() - delta, 0.0, delta)
    } else if c < 1e-12 {
        let delta = u10.arg();
        ((-u01).arg() - delta, 0.0, delta)
    } else {
        let delta = u11.arg();
        ((-u01).arg() - delta, u10.arg() - delta, delta)
    };
    Ok(EulerAngles {
        alpha: wrap_pi(alpha),
        beta,
        gamma: wrap_pi(gamma),
        delta: wrap_pi(delta),
    })
}

/// Frequencies shared by every pulse of a compiled sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub rabi_rad_s: f64,
    pub larmor_rad_s: f64,
    #[serde(default)]
    pub aux_detuning_rad_s: f64,
    #[serde(default)]
    pub aux_rabi_rad_s: Option<f64>,
}

impl ControlParams {
    /// Qubit-only control: the auxiliary level is decoupled.
    pub fn ideal(rabi_rad_s: f64, larmor_rad_s: f64) -> Self {
        Self {
            rabi_rad_s,
            larmor_rad_s,
            aux_detuning_rad_s: 0.0,
            aux_rabi_rad_s: Some(0.0),
        }
    }

    fn larmor(&self, phase: f64) -> PulseSpec {
        PulseSpec::larmor(phase.rem_euclid(TAU) / self.larmor_rad_s, self.larmor_rad_s)
    }

    fn raman(&self, area: f64, phase: f64) -> PulseSpec {
        PulseSpec {
            larmor_rad_s: self.larmor_rad_s,
            aux_detuning_rad_s: self.aux_detuning_rad_s,
            aux_rabi_rad_s: self.aux_rabi_rad_s,
            ..PulseSpec::raman(area / self.rabi_rad_s, self.rabi_rad_s, phase)
        }
    }
}

/// Compiles `spec` for an ideal two-level device; see [`compile_rotation_with`].
pub fn compile_rotation(spec: &RotationSpec, omega_r: f64, omega_l: f64) -> Result<Vec<PulseSpec>> {
    compile_rotation_with(spec, &ControlParams::ideal(omega_r, omega_l))
}

/// Pulse sequence (time order) realizing `spec` up to global phase.
///
/// Z axes need one Larmor hold, equatorial axes one Raman pulse, and every
/// other axis a Larmor/Raman-y/Larmor sequence from [`zyz_decompose`]. The
/// Larmor-form `R_z(a)` equals `exp(-i(-a/2)σz)` up to phase, which is where
/// the factor `-2` on z rotations comes from.
pub fn compile_rotation_with(spec: &RotationSpec, params: &ControlParams) -> Result<Vec<PulseSpec>> {
    let spec = RotationSpec::new(spec.axis, spec.angle)?;
    if !(params.rabi_rad_s > 0.0) || !(params.larmor_rad_s > 0.0) {
        return Err(invalid("Rabi and Larmor frequencies must be positive"));
    }
    let [nx, ny, nz] = spec.axis;
    if (nz.abs() - 1.0).abs() <= AXIS_TOL {
        return Ok(vec![params.larmor(-2.0 * spec.angle * nz.signum())]);
    }
    if nz.abs() <= EQUATORIAL_TOL {
        let area = 2.0 * spec.angle.rem_euclid(PI);
        return Ok(vec![params.raman(area, wrap_pi(-ny.atan2(nx)))]);
    }
    let e = zyz_decompose(&spec.unitary())?;
    Ok(vec![
        params.larmor(e.gamma),
        params.raman(e.beta, -FRAC_PI_2),
        params.larmor(e.alpha),
    ])
}

/// Ideal two-level propagator of a sequence (first pulse acts first).
pub fn sequence_unitary(pulses: &[PulseSpec]) -> Result<ComplexMatrix> {
    pulses.iter().try_fold(ComplexMatrix::identity(2), |acc, p| {
        p.validate()?;
        let u = match p.kind {
            PulseKind::LarmorHold => r_z(p.duration_s, p.larmor_rad_s)?,
            PulseKind::RamanPulse => r_n(p.duration_s, p.rabi_rad_s, p.phase_rad)?,
        };
        Ok(&u * &acc)
    })
}

/// Three-level Raman Hamiltonian in rad/s on `(|s_↓⟩, |s_↑⟩, |s_aux⟩)`.
///
/// Both transitions lower `m_F` by two and carry the same beam phase. The
/// qubit two-photon detuning is zero (Stark shift cancels Zeeman splitting).
pub fn qutrit_hamiltonian(pulse: &PulseSpec) -> Result<ComplexMatrix> {
    qutrit_hamiltonian_perturbed(pulse, 1.0, 0.0)
}

/// As [`qutrit_hamiltonian`] with Rabi frequencies scaled by `rabi_factor` and a
/// residual Larmor detuning `d_larmor` left uncompensated by the Stark shift.
fn qutrit_hamiltonian_perturbed(pulse: &PulseSpec, rabi_factor: f64, d_larmor: f64) -> Result<ComplexMatrix> {
    pulse.validate()?;
    if pulse.kind != PulseKind::RamanPulse {
        return Err(invalid("qutrit Hamiltonian requires a Raman pulse"));
    }
    let q = Complex64::from_polar(0.5 * pulse.rabi_rad_s * rabi_factor, pulse.phase_rad);
    let a = Complex64::from_polar(0.5 * pulse.aux_rabi() * rabi_factor, pulse.phase_rad);
    let mut h = ComplexMatrix::zeros(3);
    h[(0, 1)] = q;
    h[(1, 0)] = q.conj();
    h[(1, 2)] = a;
    h[(2, 1)] = a.conj();
    h[(0, 0)] = Complex64::new(-d_larmor, 0.0);
    h[(2, 2)] = Complex64::new(pulse.aux_detuning_rad_s + d_larmor, 0.0);
    Ok(h)
}

fn qutrit_larmor(t: f64, omega: f64) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&[
        Complex64::from_polar(1.0, omega * t),
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, -omega * t),
    ])
}

/// Three-level propagator of a sequence for one noise realization.
pub fn qutrit_sequence_unitary(pulses: &[PulseSpec], rabi_factor: f64, d_larmor: f64) -> Result<ComplexMatrix> {
    pulses.iter().try_fold(ComplexMatrix::identity(3), |acc, p| {
        p.validate()?;
        let u = match p.kind {
            PulseKind::LarmorHold => qutrit_larmor(p.duration_s, p.larmor_rad_s + d_larmor),
            PulseKind::RamanPulse => {
                matrix_exp_i(&qutrit_hamiltonian_perturbed(p, rabi_factor, d_larmor)?, p.duration_s)?
            }
        };
        Ok(&u * &acc)
    })
}

/// Shot-averaged three-level evolution under quasi-static noise.
///
/// Shot `k` draws its Rabi factor and Larmor offset from substream `k` of
/// `seed`; the average is accumulated in shot order so the result does not
/// depend on the thread count. Without Rabi or Larmor noise a single exact
/// propagation is returned regardless of `shots`.
pub fn evolve(
    state: &DensityMatrix,
    pulses: &[PulseSpec],
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    if state.dim() != 3 {
        return Err(Error::DimensionMismatch(3, state.dim()));
    }
    if shots == 0 {
        return Err(invalid("shots must be at least 1"));
    }
    noise.validate()?;
    for p in pulses {
        p.validate()?;
    }
    if pulses.is_empty() {
        return Ok(state.clone());
    }
    if noise.is_coherent() {
        return state.evolve(&qutrit_sequence_unitary(pulses, 1.0, 0.0)?);
    }
    let per_shot: Vec<ComplexMatrix> = (0..shots)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let (rabi_factor, d_larmor) = draw_noise(noise, &mut rng);
            let u = qutrit_sequence_unitary(pulses, rabi_factor, d_larmor)?;
            Ok(state.matrix().conjugate_by(&u))
        })
        .collect::<Result<_>>()?;
    let sum = per_shot.iter().fold(ComplexMatrix::zeros(3), |acc, m| &acc + m);
    Ok(DensityMatrix::from_trusted(sum.scale_real(1.0 / shots as f64)))
}

/// `(Rabi factor, Larmor offset)` for one shot; the factor is clamped at zero.
pub fn draw_noise<R: Rng + ?Sized>(noise: &NoiseModel, rng: &mut R) -> (f64, f64) {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    ((1.0 + noise.rabi_fractional_sigma * a).max(0.0), noise.larmor_sigma * b)
}

/// Largest `|s_aux⟩` population reached from `|s_↑⟩` under a constant Raman drive.
///
/// The propagator is diagonalized once and the population is sampled on
/// `samples` evenly spaced times in `[0, window_s]`.
pub fn peak_aux_population(pulse: &PulseSpec, window_s: f64, samples: usize) -> Result<f64> {
    let h = qutrit_hamiltonian(pulse)?;
    check_duration(window_s)?;
    let (vals, v) = hermitian_eig(&h)?;
    // amplitude on aux: Σ_k V[2,k] conj(V[1,k]) e^{-iλ_k t}
    let weights: Vec<Complex64> = (0..3).map(|k| v[(2, k)] * v[(1, k)].conj()).collect();
    let mut peak: f64 = 0.0;
    for i in 0..=samples {
        let t = window_s * i as f64 / samples.max(1) as f64;
        let amp: Complex64 = (0..3)
            .map(|k| weights[k] * Complex64::from_polar(1.0, -vals[k] * t))
            .sum();
        peak = peak.max(amp.norm_sqr());
    }
    Ok(peak)
}

/// `Ω² / (Ω² + Δ²)`: the peak transfer of a detuned two-level Rabi oscillation.
pub fn two_level_peak(rabi: f64, detuning: f64) -> f64 {
    rabi * rabi / (rabi * rabi + detuning * detuning)
}
