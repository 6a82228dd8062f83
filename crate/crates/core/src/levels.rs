//! Effective Raman parameters from beam, atom and field.
//!
//! The ground manifold is `F = 2` with `|s_↓⟩ = m_F -2`, `|s_↑⟩ = m_F 0` and
//! `|s_aux⟩ = m_F +2`. A single beam with `σ⁺` and `σ⁻` components couples it
//! to the excited hyperfine levels `F' = 1, 2` of the line in the atomic data
//! file; both are far detuned and eliminated adiabatically. Atoms sit at the
//! beam centre, so the field is the Gaussian peak value.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const HBAR: f64 = 1.054_571_817e-34;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const EPSILON_0: f64 = 8.854_187_812_8e-12;
const TESLA_PER_GAUSS: f64 = 1e-4;

/// Bundled atomic data (rubidium-87 D1).
pub const BUNDLED_ATOMIC_DATA: &str = include_str!("../data/rb87_d1.json");

pub const M_DOWN: i32 = -2;
pub const M_UP: i32 = 0;
pub const M_AUX: i32 = 2;

/// Raman beam at the atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub power_w: f64,
    /// `1/e²` intensity radius.
    pub waist_m: f64,
    /// Laser frequency minus the midpoint of the two excited hyperfine levels, rad/s.
    pub detuning_rad_s: f64,
    pub pol_plus_amp: f64,
    pub pol_minus_amp: f64,
    pub pol_rel_phase_rad: f64,
}

impl BeamParams {
    /// 7 mW, 1.9 mm waist, tuned midway between the excited levels,
    /// polarization `√(1/7) σ⁺ + √(6/7) σ⁻`.
    pub fn reference() -> Self {
        Self {
            power_w: 7e-3,
            waist_m: 1.9e-3,
            detuning_rad_s: 0.0,
            pol_plus_amp: (1.0f64 / 7.0).sqrt(),
            pol_minus_amp: (6.0f64 / 7.0).sqrt(),
            pol_rel_phase_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.power_w,
            self.waist_m,
            self.detuning_rad_s,
            self.pol_plus_amp,
            self.pol_minus_amp,
            self.pol_rel_phase_rad,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(invalid("beam parameters must be finite"));
        }
        if self.power_w < 0.0 || !(self.waist_m > 0.0) {
            return Err(invalid("beam power must be non-negative and waist positive"));
        }
        let norm = self.pol_plus_amp.powi(2) + self.pol_minus_amp.powi(2);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("polarization amplitudes not normalized ({norm})")));
        }
        Ok(())
    }

    /// Peak intensity `2P / (π w²)`, W/m².
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power_w / (PI * self.waist_m * self.waist_m)
    }

    /// Peak field amplitude `√(2I / (c ε₀))`, V/m.
    pub fn field_amplitude(&self) -> f64 {
        (2.0 * self.peak_intensity() / (SPEED_OF_LIGHT * EPSILON_0)).sqrt()
    }

    fn pol_amp(&self, q: i32) -> f64 {
        match q {
            1 => self.pol_plus_amp,
            -1 => self.pol_minus_amp,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineSplittings {
    #[serde(rename = "ground")]
    pub ground_hz: f64,
    /// Splitting between the two excited hyperfine levels, upper minus lower.
    #[serde(rename = "excited")]
    pub excited_hz: f64,
}

/// Signed absorption amplitude `⟨F' m+q| d_q |F m⟩` in units of the reduced dipole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgEntry {
    pub m: i32,
    pub f_excited: u32,
    pub q: i32,
    pub amplitude: f64,
}

/// A ground-to-excited transition `(m_F, F', q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub m: i32,
    pub f_excited: u32,
    pub q: i32,
}

impl Transition {
    /// Parses `"m=-2,F'=1,q=+1"` (whitespace and field order are free).
    pub fn parse(label: &str) -> Result<Self> {
        let (mut m, mut f, mut q) = (None, None, None);
        for part in label.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::UnknownTransition(label.to_string()))?;
            let v = v.trim().trim_start_matches('+');
            match k.trim() {
                "m" => m = v.parse::<i32>().ok(),
                "F'" | "F" | "f_excited" => f = v.parse::<u32>().ok(),
                "q" => q = v.parse::<i32>().ok(),
                _ => return Err(Error::UnknownTransition(label.to_string())),
            }
        }
        match (m, f, q) {
            (Some(m), Some(f_excited), Some(q)) => Ok(Self { m, f_excited, q }),
            _ => Err(Error::UnknownTransition(label.to_string())),
        }
    }
}

/// Atomic constants loaded from a versioned data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicData {
    pub version: String,
    pub line: String,
    #[serde(rename = "dipole_Cm")]
    pub dipole_cm: f64,
    #[serde(rename = "hyperfine_splittings_Hz")]
    pub hyperfine_splittings_hz: HyperfineSplittings,
    pub cg_table: Vec<CgEntry>,
    #[serde(rename = "gamma_Hz_per_G")]
    pub gamma_hz_per_g: f64,
    #[serde(default)]
    pub sources: Vec<String>,
}

impl AtomicData {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_ATOMIC_DATA).expect("bundled atomic data is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let data: AtomicData = serde_json::from_str(text)?;
        data.validate()?;
        Ok(data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the sum rule `Σ_{F',q} amplitude² = 1` for every tabulated `m_F`.
    pub fn validate(&self) -> Result<()> {
        if !(self.dipole_cm > 0.0) || !(self.hyperfine_splittings_hz.excited_hz > 0.0) {
            return Err(invalid("atomic data needs a positive dipole and excited splitting"));
        }
        let mut ms: Vec<i32> = self.cg_table.iter().map(|e| e.m).collect();
        ms.sort_unstable();
        ms.dedup();
        for m in ms {
            let s: f64 = self
                .cg_table
                .iter()
                .filter(|e| e.m == m)
                .map(|e| e.amplitude.powi(2))
                .sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("CG sum rule fails for m_F={m}: {s}")));
            }
        }
        Ok(())
    }

    pub fn amplitude(&self, t: &Transition) -> Result<f64> {
        self.cg_table
            .iter()
            .find(|e| e.m == t.m && e.f_excited == t.f_excited && e.q == t.q)
            .map(|e| e.amplitude)
            .ok_or_else(|| Error::UnknownTransition(format!("m={},F'={},q={:+}", t.m, t.f_excited, t.q)))
    }

    fn excited_levels(&self) -> Vec<u32> {
        let mut f: Vec<u32> = self.cg_table.iter().map(|e| e.f_excited).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Single-photon detuning from excited level `f` (laser minus transition), rad/s.
    ///
    /// The two excited levels sit at `∓ splitting/2` around the midpoint.
    pub fn detuning(&self, beam: &BeamParams, f: u32) -> Result<f64> {
        let levels = self.excited_levels();
        let half = PI * self.hyperfine_splittings_hz.excited_hz;
        let offset = if Some(&f) == levels.last() { half } else { -half };
        let d = beam.detuning_rad_s - offset;
        if d.abs() <= 1e-9 * half {
            return Err(Error::Resonant(f));
        }
        Ok(d)
    }

    /// Zeeman coefficient, rad/s per tesla.
    pub fn gyromagnetic_rad_s_per_t(&self) -> f64 {
        2.0 * PI * self.gamma_hz_per_g / TESLA_PER_GAUSS
    }
}

/// Larmor frequency `2π γ B₀` of the `m_F -2 ↔ 0` pair, rad/s.
pub fn zeeman_splitting(b0_t: f64, atoms: &AtomicData) -> Result<f64> {
    if !(b0_t >= 0.0) || !b0_t.is_finite() {
        return Err(invalid("magnetic field must be non-negative"));
    }
    Ok(atoms.gyromagnetic_rad_s_per_t() * b0_t)
}

/// Signed single-photon Rabi frequency of one transition, rad/s.
pub fn single_beam_rabi(beam: &BeamParams, atoms: &AtomicData, transition: &Transition) -> Result<f64> {
    beam.validate()?;
    let amp = atoms.amplitude(transition)?;
    Ok(atoms.dipole_cm * beam.field_amplitude() * amp * beam.pol_amp(transition.q) / HBAR)
}

fn rabi_or_zero(beam: &BeamParams, atoms: &AtomicData, t: Transition) -> Result<f64> {
    match single_beam_rabi(beam, atoms, &t) {
        Err(Error::UnknownTransition(_)) => Ok(0.0),
        other => other,
    }
}

/// `|Σ_F' Ω(m, F', +1) Ω(m+2, F', -1) / (2Δ_F')|` for the Raman pair `m ↔ m+2`.
fn raman_rabi(beam: &BeamParams, atoms: &AtomicData, m: i32) -> Result<f64> {
    let mut sum = 0.0;
    for f in atoms.excited_levels() {
        let up = rabi_or_zero(beam, atoms, Transition { m, f_excited: f, q: 1 })?;
        let down = rabi_or_zero(
            beam,
            atoms,
            Transition {
                m: m + 2,
                f_excited: f,
                q: -1,
            },
        )?;
        sum += up * down / (2.0 * atoms.detuning(beam, f)?);
    }
    Ok(sum.abs())
}

/// Two-photon Rabi frequencies `(|s_↓⟩↔|s_↑⟩, |s_↑⟩↔|s_aux⟩)`, rad/s.
pub fn two_photon_rabi(beam: &BeamParams, atoms: &AtomicData) -> Result<(f64, f64)> {
    beam.validate()?;
    Ok((raman_rabi(beam, atoms, M_DOWN)?, raman_rabi(beam, atoms, M_UP)?))
}

/// Light shift `Σ_{F',q} Ω² / (4Δ_F')` of ground sublevel `m`, rad/s.
pub fn stark_shift(beam: &BeamParams, atoms: &AtomicData, m: i32) -> Result<f64> {
    beam.validate()?;
    let mut shift = 0.0;
    for f in atoms.excited_levels() {
        let delta = atoms.detuning(beam, f)?;
        for q in [-1, 1] {
            let rabi = rabi_or_zero(beam, atoms, Transition { m, f_excited: f, q })?;
            shift += rabi * rabi / (4.0 * delta);
        }
    }
    Ok(shift)
}

/// `(|s_↓⟩, |s_↑⟩, |s_aux⟩)` light shifts, rad/s.
pub fn ac_stark_shifts(beam: &BeamParams, atoms: &AtomicData) -> Result<(f64, f64, f64)> {
    Ok((
        stark_shift(beam, atoms, M_DOWN)?,
        stark_shift(beam, atoms, M_UP)?,
        stark_shift(beam, atoms, M_AUX)?,
    ))
}

/// Constants consumed by the control layer, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub rabi_qubit: f64,
    pub rabi_aux: f64,
    pub stark_down: f64,
    pub stark_up: f64,
    pub stark_aux: f64,
    /// `E(|s_↑⟩) − E(|s_↓⟩)` from the field alone.
    pub zeeman_down_up: f64,
    /// `zeeman_down_up + (stark_aux − stark_up)`.
    pub aux_splitting: f64,
    /// `zeeman_down_up − (stark_down − stark_up)`.
    pub qubit_detuning: f64,
}

impl EffectiveParams {
    /// Residual of the `aux_splitting` decomposition; zero by construction.
    pub fn identity_residual(&self) -> f64 {
        self.aux_splitting - (self.zeeman_down_up + (self.stark_aux - self.stark_up))
    }
}

pub fn effective_params(beam: &BeamParams, atoms: &AtomicData, b0_t: f64) -> Result<EffectiveParams> {
    let (rabi_qubit, rabi_aux) = two_photon_rabi(beam, atoms)?;
    let (stark_down, stark_up, stark_aux) = ac_stark_shifts(beam, atoms)?;
    let zeeman = zeeman_splitting(b0_t, atoms)?;
    Ok(EffectiveParams {
        rabi_qubit,
        rabi_aux,
        stark_down,
        stark_up,
        stark_aux,
        zeeman_down_up: zeeman,
        aux_splitting: zeeman + (stark_aux - stark_up),
        qubit_detuning: zeeman - (stark_down - stark_up),
    })
}

/// Field giving a Larmor frequency `omega_l` (rad/s), tesla.
pub fn field_for_larmor(omega_l: f64, atoms: &AtomicData) -> f64 {
    omega_l / atoms.gyromagnetic_rad_s_per_t()
}

/// One computed quantity against its reference value (both in Hz).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorCheck {
    pub name: String,
    pub computed_hz: f64,
    pub reference_hz: f64,
    pub rel_tol: f64,
    pub pass: bool,
}

impl AnchorCheck {
    fn new(name: &str, computed_rad_s: f64, reference_hz: f64, rel_tol: f64) -> Self {
        let computed_hz = computed_rad_s / (2.0 * PI);
        Self {
            name: name.to_string(),
            computed_hz,
            reference_hz,
            rel_tol,
            pass: ((computed_hz - reference_hz) / reference_hz).abs() <= rel_tol,
        }
    }
}

/// Measured Raman Rabi frequency, Hz.
pub const MEASURED_RABI_HZ: f64 = 190e3;
/// Upper bound on the reported measured-to-theory ratio.
const RATIO_CAP: f64 = 1e6;

/// Checks against the reference light shifts, Rabi frequency and splittings (±25%),
/// the Zeeman cancellation (|qubit detuning| < 45 kHz) and the
/// measured-to-theory Rabi ratio bracket `[0.6, 1.1]`.
pub fn anchor_checks(p: &EffectiveParams) -> Vec<AnchorCheck> {
    const TOL: f64 = 0.25;
    let mut checks = vec![
        AnchorCheck::new("stark_down", p.stark_down, 40e3, TOL),
        AnchorCheck::new("stark_up", p.stark_up, -140e3, TOL),
        AnchorCheck::new("stark_aux", p.stark_aux, 240e3, TOL),
        AnchorCheck::new("differential_stark", p.stark_down - p.stark_up, 180e3, TOL),
        AnchorCheck::new("zeeman_down_up", p.zeeman_down_up, 180e3, TOL),
        AnchorCheck::new("aux_splitting", p.aux_splitting, 560e3, TOL),
        AnchorCheck::new("rabi_qubit", p.rabi_qubit, 240e3, TOL),
        AnchorCheck::new("rabi_aux", p.rabi_aux, 240e3, TOL),
    ];
    let det_hz = p.qubit_detuning / (2.0 * PI);
    checks.push(AnchorCheck {
        name: "qubit_detuning_below_45kHz".into(),
        computed_hz: det_hz,
        reference_hz: 0.0,
        rel_tol: 0.0,
        pass: det_hz.abs() < 45e3,
    });
    let theory_hz = p.rabi_qubit / (2.0 * PI);
    // capped so a vanishing theory value still serializes as a finite number
    let ratio = if theory_hz > MEASURED_RABI_HZ / RATIO_CAP {
        MEASURED_RABI_HZ / theory_hz
    } else {
        RATIO_CAP
    };
    checks.push(AnchorCheck {
        name: "measured_over_theory_rabi".into(),
        computed_hz: ratio,
        reference_hz: 190.0 / 240.0,
        rel_tol: 0.0,
        pass: (0.6..=1.1).contains(&ratio),
    });
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    const KHZ: f64 = 2.0 * PI * 1e3;

    fn reference_field(atoms: &AtomicData) -> f64 {
        field_for_larmor(180.0 * KHZ, atoms)
    }

    /// `n!` as f64 for the small arguments of angular-momentum algebra.
    fn fact(n: i32) -> f64 {
        assert!(n >= 0, "negative factorial argument {n}");
        (1..=n).map(f64::from).product()
    }

    /// Triangle coefficient with doubled arguments.
    fn tri(a: i32, b: i32, c: i32) -> f64 {
        (fact((a + b - c) / 2) * fact((a - b + c) / 2) * fact((-a + b + c) / 2) / fact((a + b + c) / 2 + 1)).sqrt()
    }

    /// Racah formula for the 3j symbol; all arguments doubled.
    fn three_j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
        if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
            return 0.0;
        }
        if j3 > j1 + j2 || j3 < (j1 - j2).abs() {
            return 0.0;
        }
        let pre = tri(j1, j2, j3)
            * (fact((j1 + m1) / 2)
                * fact((j1 - m1) / 2)
                * fact((j2 + m2) / 2)
                * fact((j2 - m2) / 2)
                * fact((j3 + m3) / 2)
                * fact((j3 - m3) / 2))
            .sqrt();
        let mut sum = 0.0;
        for k in 0..=20 {
            let args = [
                (j3 - j2 + m1) / 2 + k,
                (j3 - j1 - m2) / 2 + k,
                (j1 + j2 - j3) / 2 - k,
                (j1 - m1) / 2 - k,
                (j2 + m2) / 2 - k,
            ];
            if args.iter().any(|&a| a < 0) {
                continue;
            }
            let denom = fact(k) * args.iter().map(|&a| fact(a)).product::<f64>();
            sum += if k % 2 == 0 { 1.0 } else { -1.0 } / denom;
        }
        let phase = if ((j1 - j2 - m3) / 2).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        phase * pre * sum
    }

    /// Racah formula for the 6j symbol `{a b c; d e f}`; all arguments doubled.
    fn six_j(a: i32, b: i32, c: i32, d: i32, e: i32, f: i32) -> f64 {
        let pre = tri(a, b, c) * tri(a, e, f) * tri(d, b, f) * tri(d, e, c);
        let mut sum = 0.0;
        for t in 0..=30 {
            let lower = [(a + b + c) / 2, (a + e + f) / 2, (d + b + f) / 2, (d + e + c) / 2];
            let upper = [(a + b + d + e) / 2, (b + c + e + f) / 2, (c + a + f + d) / 2];
            if lower.iter().any(|&l| t < l) || upper.iter().any(|&u| t > u) {
                continue;
            }
            let denom = lower.iter().map(|&l| fact(t - l)).product::<f64>()
                * upper.iter().map(|&u| fact(u - t)).product::<f64>();
            sum += if t % 2 == 0 { 1.0 } else { -1.0 } * fact(t + 1) / denom;
        }
        pre * sum
    }

    fn sign(n: i32) -> f64 {
        if n.rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `⟨F' m+q| d_q |F=2 m⟩ / ⟨J‖d‖J'⟩` for J = J' = 1/2, I = 3/2.
    fn racah_amplitude(m: i32, fp: i32, q: i32) -> f64 {
        let (j, jp, i, f) = (1, 1, 3, 4); // doubled
        let fp2 = 2 * fp;
        let reduced = sign((fp2 + j + 2 + i) / 2) * (((fp2 + 1) * (j + 1)) as f64).sqrt() * six_j(j, jp, 2, fp2, f, i);
        // ⟨F m| d_{-q} |F' m+q⟩ with Steck's convention, then (-1)^q for the adjoint
        let mp = m + q;
        let emission =
            reduced * sign(fp - 1 + m) * ((f + 1) as f64).sqrt() * three_j(fp2, 2, f, 2 * mp, -2 * q, -2 * m);
        sign(q) * emission
    }

    #[test]
    fn cg_table_matches_racah_oracle() {
        let atoms = AtomicData::bundled();
        let mut count = 0;
        for m in -2i32..=2 {
            for fp in 1..=2 {
                for q in -1..=1 {
                    if (m + q).abs() > fp {
                        continue;
                    }
                    let oracle = racah_amplitude(m, fp, q);
                    let t = Transition {
                        m,
                        f_excited: fp as u32,
                        q,
                    };
                    match atoms.amplitude(&t) {
                        Ok(a) => {
                            assert!((a - oracle).abs() < 1e-12, "{t:?}: {a} vs {oracle}");
                            count += 1;
                        }
                        Err(_) => assert!(oracle.abs() < 1e-12, "{t:?} missing, oracle {oracle}"),
                    }
                }
            }
        }
        assert_eq!(count, atoms.cg_table.len());
    }

    #[test]
    fn sum_rule_enforced_on_load() {
        let mut atoms = AtomicData::bundled();
        atoms.cg_table[0].amplitude *= 1.1;
        let text = serde_json::to_string(&atoms).unwrap();
        assert!(AtomicData::from_json(&text).is_err());
    }

    #[test]
    fn zeeman_examples() {
        let atoms = AtomicData::bundled();
        assert_eq!(zeeman_splitting(0.0, &atoms).unwrap(), 0.0);
        let gauss = zeeman_splitting(1e-4, &atoms).unwrap();
        assert!((gauss / (2.0 * PI * 1.4e6) - 1.0).abs() < 1e-12);
        let b = reference_field(&atoms);
        assert!((b / 1e-4 - 0.1286).abs() < 1e-4);
        assert!(zeeman_splitting(-1.0, &atoms).is_err());
    }

    #[test]
    fn single_beam_scaling() {
        let atoms = AtomicData::bundled();
        let t = Transition::parse("m=-2,F'=1,q=+1").unwrap();
        let mut beam = BeamParams::reference();
        let r1 = single_beam_rabi(&beam, &atoms, &t).unwrap();
        beam.power_w *= 2.0;
        let r2 = single_beam_rabi(&beam, &atoms, &t).unwrap();
        assert!((r2 / r1 - 2f64.sqrt()).abs() < 1e-12);
        beam.power_w = 0.0;
        assert_eq!(single_beam_rabi(&beam, &atoms, &t).unwrap(), 0.0);
        let bogus = Transition {
            m: -2,
            f_excited: 1,
            q: -1,
        };
        assert!(matches!(
            single_beam_rabi(&BeamParams::reference(), &atoms, &bogus),
            Err(Error::UnknownTransition(_))
        ));
        assert!(Transition::parse("F'=1,q=+1").is_err());
    }

    #[test]
    fn reference_beam_anchors() {
        let atoms = AtomicData::bundled();
        let p = effective_params(&BeamParams::reference(), &atoms, reference_field(&atoms)).unwrap();
        for check in anchor_checks(&p) {
            assert!(check.pass, "{check:?}");
        }
        assert_eq!(p.identity_residual(), 0.0);
    }

    #[test]
    fn anchors_stay_finite_without_light() {
        let atoms = AtomicData::bundled();
        let beam = BeamParams {
            power_w: 0.0,
            ..BeamParams::reference()
        };
        let p = effective_params(&beam, &atoms, 0.0).unwrap();
        let checks = anchor_checks(&p);
        assert!(checks.iter().all(|c| c.computed_hz.is_finite()));
        assert!(checks.iter().any(|c| !c.pass));
    }

    #[test]
    fn far_red_detuning_interferes_destructively() {
        let atoms = AtomicData::bundled();
        let mid = two_photon_rabi(&BeamParams::reference(), &atoms).unwrap().0;
        let mut far = BeamParams::reference();
        far.detuning_rad_s = -2.0 * PI * 3e9;
        let red = two_photon_rabi(&far, &atoms).unwrap().0;
        assert!(red < mid);
    }

    #[test]
    fn resonance_rejected() {
        let atoms = AtomicData::bundled();
        let mut beam = BeamParams::reference();
        beam.detuning_rad_s = PI * atoms.hyperfine_splittings_hz.excited_hz;
        assert!(matches!(two_photon_rabi(&beam, &atoms), Err(Error::Resonant(2))));
        assert!(matches!(ac_stark_shifts(&beam, &atoms), Err(Error::Resonant(2))));
        beam.detuning_rad_s = -beam.detuning_rad_s;
        assert!(matches!(ac_stark_shifts(&beam, &atoms), Err(Error::Resonant(1))));
    }

    #[test]
    fn zero_power_zero_field() {
        let atoms = AtomicData::bundled();
        let beam = BeamParams {
            power_w: 0.0,
            ..BeamParams::reference()
        };
        let p = effective_params(&beam, &atoms, 0.0).unwrap();
        let all = [
            p.rabi_qubit,
            p.rabi_aux,
            p.stark_down,
            p.stark_up,
            p.stark_aux,
            p.zeeman_down_up,
            p.aux_splitting,
            p.qubit_detuning,
        ];
        assert!(all.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn power_scaling_laws() {
        let atoms = AtomicData::bundled();
        let base = BeamParams::reference();
        let (s0, r0) = (
            ac_stark_shifts(&base, &atoms).unwrap(),
            two_photon_rabi(&base, &atoms).unwrap(),
        );
        for factor in [0.1, 0.5, 2.0, 7.0] {
            let beam = BeamParams {
                power_w: base.power_w * factor,
                ..base
            };
            let s = ac_stark_shifts(&beam, &atoms).unwrap();
            let r = two_photon_rabi(&beam, &atoms).unwrap();
            assert!(
                (s.0 / s0.0 - factor).abs() < 1e-12
                    && (s.1 / s0.1 - factor).abs() < 1e-12
                    && (s.2 / s0.2 - factor).abs() < 1e-12
            );
            // the two-photon rate is linear in power; single-beam Rabi goes as √P
            assert!((r.0 / r0.0 - factor).abs() < 1e-12 && (r.1 / r0.1 - factor).abs() < 1e-12);
        }
    }

    #[test]
    fn swapped_polarization_matches_direct_evaluation() {
        let atoms = AtomicData::bundled();
        let base = BeamParams::reference();
        let swapped = BeamParams {
            pol_plus_amp: base.pol_minus_amp,
            pol_minus_amp: base.pol_plus_amp,
            ..base
        };
        let (e0, d) = (swapped.field_amplitude(), atoms.dipole_cm);
        for m in [M_DOWN, M_UP, M_AUX] {
            let mut direct = 0.0;
            for e in atoms.cg_table.iter().filter(|e| e.m == m && e.q != 0) {
                let pol = if e.q == 1 {
                    swapped.pol_plus_amp
                } else {
                    swapped.pol_minus_amp
                };
                let rabi = d * e0 * e.amplitude * pol / HBAR;
                direct += rabi * rabi / (4.0 * atoms.detuning(&swapped, e.f_excited).unwrap());
            }
            let s = stark_shift(&swapped, &atoms, m).unwrap();
            assert!((s - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        let s_base = ac_stark_shifts(&base, &atoms).unwrap();
        let s_swap = ac_stark_shifts(&swapped, &atoms).unwrap();
        // m_F and -m_F exchange roles when σ⁺ and σ⁻ swap
        assert!((s_base.0 - s_swap.2).abs() < 1e-9 * s_base.0.abs());
        assert!((s_base.1 - s_swap.1).abs() < 1e-9 * s_base.1.abs());
    }

    #[test]
    fn data_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("spinwave-atoms-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("atoms.json");
        std::fs::write(&path, BUNDLED_ATOMIC_DATA).unwrap();
        assert_eq!(AtomicData::load(&path).unwrap(), AtomicData::bundled());
        assert!(AtomicData::load(&dir.join("missing.json")).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
