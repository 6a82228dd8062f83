//! Atom-photon entanglement, heralded preparation by idler projection, and
//! readout of the spinwave into signal-photon polarization.
//!
//! Circular polarizations are `|σ±⟩ = (|H⟩ ± i|V⟩)/√2`. With this choice the
//! idler analyser setting of [`target_idler_polarization`] heralds exactly
//! `cos θ |s_↓⟩ + sin θ e^{iφ} |s_↑⟩`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qlin::{complex_pairs, ComplexMatrix, DensityMatrix, PureState};
use crate::rng::{substream, SimRng};

/// `|√(2/5)|`: weight of the `|s_↓⟩|σ⁺⟩` branch.
pub const DOWN_AMPLITUDE: f64 = 0.632_455_532_033_675_9;
/// `|√(3/5)|`: weight of the `|s_↑⟩|σ⁻⟩` branch.
pub const UP_AMPLITUDE: f64 = 0.774_596_669_241_483_4;
/// Projections less likely than this are rejected.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-15;
/// Readout with less retrievable population than this is rejected.
pub const MIN_DETECTED_FRACTION: f64 = 1e-12;

/// Photon polarization in the `{H, V}` basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub h: Complex64,
    pub v: Complex64,
}

impl JonesVector {
    pub fn new(h: Complex64, v: Complex64) -> Result<Self> {
        let n = h.norm_sqr() + v.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { h, v })
    }

    pub fn normalized(h: Complex64, v: Complex64) -> Result<Self> {
        let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !(n > 1e-300) {
            return Err(Error::NotNormalized(n * n));
        }
        Self::new(h / n, v / n)
    }

    pub fn horizontal() -> Self {
        Self {
            h: Complex64::new(1.0, 0.0),
            v: Complex64::new(0.0, 0.0),
        }
    }

    pub fn vertical() -> Self {
        Self {
            h: Complex64::new(0.0, 0.0),
            v: Complex64::new(1.0, 0.0),
        }
    }

    pub fn sigma_plus() -> Self {
        Self {
            h: Complex64::new(FRAC_1_SQRT_2, 0.0),
            v: Complex64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    pub fn sigma_minus() -> Self {
        Self {
            h: Complex64::new(FRAC_1_SQRT_2, 0.0),
            v: Complex64::new(0.0, -FRAC_1_SQRT_2),
        }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// Vector orthogonal to `self`.
    pub fn orthogonal(&self) -> Self {
        Self {
            h: -self.v.conj(),
            v: self.h.conj(),
        }
    }

    /// Applies a 2×2 unitary acting on `(H, V)`.
    pub fn transform(&self, u: &ComplexMatrix) -> Result<Self> {
        let out = u.apply(&[self.h, self.v]);
        Self::normalized(out[0], out[1])
    }

    pub fn pairs(&self) -> [[f64; 2]; 2] {
        [[self.h.re, self.h.im], [self.v.re, self.v.im]]
    }
}

/// Amplitudes on `(|s_↓⟩|σ⁺⟩, |s_↓⟩|σ⁻⟩, |s_↑⟩|σ⁺⟩, |s_↑⟩|σ⁻⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    amplitudes: [Complex64; 4],
}

impl JointState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }
}

/// `√(2/5)|s_↓⟩|σ⁺⟩ − √(3/5)|s_↑⟩|σ⁻⟩`
pub fn atom_photon_state() -> JointState {
    let z = Complex64::new(0.0, 0.0);
    JointState {
        amplitudes: [
            Complex64::new((0.4f64).sqrt(), 0.0),
            z,
            z,
            Complex64::new(-(0.6f64).sqrt(), 0.0),
        ],
    }
}

/// Idler analyser setting heralding `cos θ |s_↓⟩ + sin θ e^{iφ} |s_↑⟩`.
pub fn target_idler_polarization(theta: f64, phi: f64) -> Result<JonesVector> {
    let (a, b) = ((0.6f64).sqrt(), (0.4f64).sqrt());
    let c = Complex64::new(a * theta.cos(), 0.0);
    let s = Complex64::from_polar(b * theta.sin(), -phi);
    let h = c - s;
    let v = Complex64::new(0.0, 1.0) * (c + s);
    JonesVector::normalized(h, v).map_err(|_| invalid("degenerate idler polarization"))
}

/// Conditional spinwave after the idler passes an analyser set to `pol`,
/// with the probability of that outcome.
pub fn project_idler(joint: &JointState, pol: &JonesVector) -> Result<(PureState, f64)> {
    let plus = pol.inner(&JonesVector::sigma_plus());
    let minus = pol.inner(&JonesVector::sigma_minus());
    let a = joint.amplitudes();
    let down = plus * a[0] + minus * a[1];
    let up = plus * a[2] + minus * a[3];
    let p = down.norm_sqr() + up.norm_sqr();
    if p < MIN_SUCCESS_PROBABILITY {
        return Err(Error::IncompatibleProjection(p));
    }
    let n = p.sqrt();
    Ok((PureState::new(vec![down / n, up / n])?, p))
}

/// Write-pulse heralding: one Bernoulli trial per pulse, at most one excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldConfig {
    pub herald_probability: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldSample {
    pub count: u64,
    /// Indices of the heralded trials, ascending.
    pub trial_indices: Vec<u64>,
}

/// Bernoulli sampling of heralds, drawn as geometric gaps between successes.
pub fn herald_sampler(cfg: &HeraldConfig) -> Result<HeraldSample> {
    let p = cfg.herald_probability;
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("herald probability {p} outside [0, 1]")));
    }
    let mut indices = Vec::new();
    if p == 1.0 {
        indices.extend(0..cfg.trials);
    } else if p > 0.0 {
        let mut rng = SimRng::seed_from_u64(cfg.seed);
        let gap = Geometric::new(p).map_err(|e| invalid(e.to_string()))?;
        let mut next = 0u64;
        loop {
            next = next.saturating_add(gap.sample(&mut rng));
            if next >= cfg.trials {
                break;
            }
            indices.push(next);
            next += 1;
        }
    }
    Ok(HeraldSample {
        count: indices.len() as u64,
        trial_indices: indices,
    })
}

/// Signal-photon polarization after the read pulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Readout {
    /// Density matrix over `(|σ⁻⟩, |σ⁺⟩)`.
    pub polarization: DensityMatrix,
    /// Retrieved fraction: qubit population times retrieval efficiency.
    pub detected_fraction: f64,
}

/// Read pulse mapping `|s_↓⟩ → |σ⁻⟩` and `|s_↑⟩ → |σ⁺⟩` with perfect efficiency.
pub fn readout_map(spinwave: &DensityMatrix) -> Result<Readout> {
    readout_map_with_efficiency(spinwave, 1.0)
}

/// As [`readout_map`]; `efficiency` scales the detected fraction only, since
/// both spinwave components retrieve equally well.
pub fn readout_map_with_efficiency(spinwave: &DensityMatrix, efficiency: f64) -> Result<Readout> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(invalid("retrieval efficiency outside [0, 1]"));
    }
    if spinwave.dim() > 3 {
        return Err(Error::UnsupportedDimension(spinwave.dim()));
    }
    let block = spinwave.matrix().block(2);
    let qubit_pop = block.trace().re;
    let detected = qubit_pop * efficiency;
    if !(detected >= MIN_DETECTED_FRACTION) {
        return Err(Error::NoRetrievablePopulation(detected.max(0.0)));
    }
    Ok(Readout {
        polarization: DensityMatrix::new(block.scale_real(1.0 / qubit_pop).hermitian_part())?,
        detected_fraction: detected,
    })
}

/// Shot-averaged heralded state under idler analyser misalignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldedPreparation {
    pub rho: DensityMatrix,
    /// Mean herald probability over shots.
    pub success_probability: f64,
}

/// Heralds the target `(θ, φ)`; see [`prepare_heralded_with`].
pub fn prepare_heralded(
    theta: f64,
    phi: f64,
    misalignment_rad: f64,
    shots: usize,
    seed: u64,
) -> Result<HeraldedPreparation> {
    prepare_heralded_with(&target_idler_polarization(theta, phi)?, misalignment_rad, shots, seed)
}

/// Heralds with the idler analyser set to `target`, rotated on the Poincaré
/// sphere by a Gaussian angle (std `misalignment_rad`) about a uniformly
/// random axis, independently per shot. Outcomes are weighted by their
/// herald probability. Shot `k` uses substream `k` of `seed`.
pub fn prepare_heralded_with(
    target: &JonesVector,
    misalignment_rad: f64,
    shots: usize,
    seed: u64,
) -> Result<HeraldedPreparation> {
    let joint = atom_photon_state();
    if misalignment_rad == 0.0 {
        let (psi, p) = project_idler(&joint, target)?;
        return Ok(HeraldedPreparation {
            rho: psi.density(),
            success_probability: p,
        });
    }
    if !(misalignment_rad > 0.0) || shots == 0 {
        return Err(invalid("misalignment must be non-negative and shots at least 1"));
    }
    let per_shot: Vec<(f64, ComplexMatrix)> = (0..shots)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let u = random_poincare_rotation(misalignment_rad, &mut rng);
            let pol = target.transform(&u)?;
            match project_idler(&joint, &pol) {
                Ok((psi, p)) => Ok((p, psi.density().into_matrix().scale_real(p))),
                Err(Error::IncompatibleProjection(_)) => Ok((0.0, ComplexMatrix::zeros(2))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let (mut p_sum, mut acc) = (0.0, ComplexMatrix::zeros(2));
    for (p, m) in &per_shot {
        p_sum += p;
        acc = &acc + m;
    }
    if !(p_sum > 0.0) {
        return Err(Error::IncompatibleProjection(0.0));
    }
    Ok(HeraldedPreparation {
        rho: DensityMatrix::new(acc.scale_real(1.0 / p_sum).hermitian_part())?,
        success_probability: p_sum / shots as f64,
    })
}

/// `exp(-i (ε/2) n·σ)` on `(H, V)` with `ε ~ N(0, σ)` and uniform `n`.
fn random_poincare_rotation<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> ComplexMatrix {
    let eps: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    let mut n = [0.0f64; 3];
    loop {
        for x in n.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            n.iter_mut().for_each(|x| *x /= norm);
            break;
        }
    }
    crate::control::RotationSpec {
        axis: n,
        angle: eps / 2.0,
    }
    .unitary()
}

/// JSON record of one heralded preparation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldRecord {
    pub theta: f64,
    pub phi: f64,
    pub jones: [[f64; 2]; 2],
    pub success_probability: f64,
}

impl HeraldRecord {
    pub fn ideal(theta: f64, phi: f64) -> Result<Self> {
        let pol = target_idler_polarization(theta, phi)?;
        let (_, p) = project_idler(&atom_photon_state(), &pol)?;
        Ok(Self {
            theta,
            phi,
            jones: pol.pairs(),
            success_probability: p,
        })
    }
}

/// Serializes a pure state's amplitudes as `[re, im]` pairs.
pub fn state_pairs(psi: &PureState) -> Vec<[f64; 2]> {
    complex_pairs(psi.amplitudes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlin::{pure_fidelity, stokes_from_rho, Cardinal};
    use std::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn atom_photon_amplitudes() {
        let s = atom_photon_state();
        let a = s.amplitudes();
        assert!((a.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((a[0].re - 0.6325).abs() < 1e-4 && (a[0].re - DOWN_AMPLITUDE).abs() < 1e-15);
        assert!((a[3].re + 0.7746).abs() < 1e-4 && (a[3].re + UP_AMPLITUDE).abs() < 1e-15);
    }

    #[test]
    fn idler_polarization_examples() {
        let p = target_idler_polarization(0.0, 0.0).unwrap();
        assert!((p.inner(&JonesVector::sigma_plus()).norm() - 1.0).abs() < 1e-12);
        let p = target_idler_polarization(PI / 2.0, 0.0).unwrap();
        let expected = JonesVector::new(c(-FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)).unwrap();
        assert!((p.inner(&expected).norm() - 1.0).abs() < 1e-12);
        let (a, b) = ((0.6f64).sqrt(), (0.4f64).sqrt());
        let raw = JonesVector::normalized(c((a - b) / 2f64.sqrt(), 0.0), c(0.0, (a + b) / 2f64.sqrt())).unwrap();
        let p = target_idler_polarization(PI / 4.0, 0.0).unwrap();
        assert!((p.inner(&raw).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circular_projections() {
        let (psi, p) = project_idler(&atom_photon_state(), &JonesVector::sigma_plus()).unwrap();
        assert!((p - 0.4).abs() < 1e-12 && (psi.inner(&PureState::down()).norm() - 1.0).abs() < 1e-12);
        let (psi, p) = project_idler(&atom_photon_state(), &JonesVector::sigma_minus()).unwrap();
        assert!((p - 0.6).abs() < 1e-12 && (psi.inner(&PureState::up()).norm() - 1.0).abs() < 1e-12);
        let only_down = JointState::new([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            project_idler(&only_down, &JonesVector::sigma_minus()),
            Err(Error::IncompatibleProjection(_))
        ));
    }

    #[test]
    fn cardinal_round_trip() {
        for card in Cardinal::ALL {
            let (t, ph) = card.angles();
            let (psi, _) = project_idler(&atom_photon_state(), &target_idler_polarization(t, ph).unwrap()).unwrap();
            assert!((psi.inner(&card.state()).norm_sqr() - 1.0).abs() < 1e-10, "{card:?}");
        }
    }

    #[test]
    fn projection_is_complete() {
        for k in 0..50 {
            let pol = target_idler_polarization(0.1 * k as f64, 0.37 * k as f64).unwrap();
            let (_, p1) = project_idler(&atom_photon_state(), &pol).unwrap();
            let (_, p2) = project_idler(&atom_photon_state(), &pol.orthogonal()).unwrap();
            assert!((p1 + p2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn horizontal_idler_heralds_near_antidiagonal() {
        let (psi, _) = project_idler(&atom_photon_state(), &JonesVector::horizontal()).unwrap();
        let s = stokes_from_rho(&psi.density()).unwrap();
        assert!((s.x + 0.9798).abs() < 1e-3 && s.y.abs() < 1e-12 && (s.z + 0.2).abs() < 1e-12);
    }

    #[test]
    fn sampler_examples() {
        let zero = herald_sampler(&HeraldConfig {
            herald_probability: 0.0,
            trials: 1000,
            seed: 1,
        })
        .unwrap();
        assert_eq!(zero.count, 0);
        let all = herald_sampler(&HeraldConfig {
            herald_probability: 1.0,
            trials: 1000,
            seed: 1,
        })
        .unwrap();
        assert_eq!(all.count, 1000);
        let cfg = HeraldConfig {
            herald_probability: 3e-3,
            trials: 10_000,
            seed: 5,
        };
        assert_eq!(herald_sampler(&cfg).unwrap(), herald_sampler(&cfg).unwrap());
        assert!(herald_sampler(&HeraldConfig {
            herald_probability: 1.5,
            trials: 1,
            seed: 0
        })
        .is_err());
    }

    #[test]
    fn readout_examples() {
        let r = readout_map(&PureState::down().density()).unwrap();
        assert!((r.detected_fraction - 1.0).abs() < 1e-15);
        assert!((r.polarization.population(0) - 1.0).abs() < 1e-15);
        let aux = PureState::basis(3, 2).density();
        assert!(matches!(readout_map(&aux), Err(Error::NoRetrievablePopulation(_))));
        let mixed = ComplexMatrix::from_real_diagonal(&[0.45, 0.45, 0.1]);
        let r = readout_map(&DensityMatrix::new(mixed).unwrap()).unwrap();
        assert!((r.detected_fraction - 0.9).abs() < 1e-12);
        assert!((r.polarization.population(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn readout_preserves_bloch_vector() {
        for k in 0..20 {
            let psi = PureState::from_angles(0.15 * k as f64, 0.3 * k as f64);
            let r = readout_map(&psi.density()).unwrap();
            assert!((pure_fidelity(&r.polarization, &psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn misalignment_mixes_but_keeps_direction() {
        let prep = prepare_heralded(PI / 4.0, 0.0, 0.1, 2000, 3).unwrap();
        let f = pure_fidelity(&prep.rho, &Cardinal::D.state()).unwrap();
        assert!(f < 1.0 && f > 0.98, "{f}");
        assert_eq!(prep, prepare_heralded(PI / 4.0, 0.0, 0.1, 2000, 3).unwrap());
        let ideal = prepare_heralded(0.3, TAU - 0.2, 0.0, 1, 0).unwrap();
        assert!((ideal.rho.purity() - 1.0).abs() < 1e-12);
    }
}
