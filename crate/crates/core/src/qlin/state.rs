use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{hermitian_eig, matrix_sqrt_psd, pauli, ComplexMatrix};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Tolerance on Hermiticity, eigenvalues and trace of a density matrix.
pub const DENSITY_TOL: f64 = 1e-10;
/// Tolerance on the squared norm of a pure state.
pub const NORM_TOL: f64 = 1e-12;

/// Normalized state vector.
///
/// For the qubit the basis is `(|s_↓⟩, |s_↑⟩)`, with `|s_↓⟩` on the +z pole of
/// the Bloch sphere; the auxiliary level is index 2 in three-level states.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::UnsupportedDimension(amplitudes.len()));
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes`; fails on a (numerically) zero vector.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if norm2 < 1e-30 {
            return Err(Error::NotNormalized(norm2));
        }
        let inv = 1.0 / norm2.sqrt();
        Self::new(amplitudes.into_iter().map(|z| z * inv).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    /// `cos θ |s_↓⟩ + sin θ e^{iφ} |s_↑⟩`
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            amplitudes: vec![
                Complex64::new(theta.cos(), 0.0),
                Complex64::from_polar(theta.sin(), phi),
            ],
        }
    }

    pub fn down() -> Self {
        Self::basis(2, 0)
    }

    pub fn up() -> Self {
        Self::basis(2, 1)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn density(&self) -> DensityMatrix {
        let m =
            ComplexMatrix::outer(&self.amplitudes, &self.amplitudes).expect("outer product of a vector with itself");
        DensityMatrix { matrix: m }
    }

    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch(u.dim(), self.dim()));
        }
        Self::normalized(u.apply(&self.amplitudes))
    }
}

/// The six cardinal qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinal {
    #[serde(rename = "down")]
    Down,
    #[serde(rename = "up")]
    Up,
    D,
    A,
    R,
    L,
}

impl Cardinal {
    pub const ALL: [Cardinal; 6] = [
        Cardinal::Down,
        Cardinal::Up,
        Cardinal::D,
        Cardinal::A,
        Cardinal::R,
        Cardinal::L,
    ];

    /// `(θ, φ)` with `|ψ⟩ = cos θ |s_↓⟩ + sin θ e^{iφ} |s_↑⟩`.
    pub fn angles(self) -> (f64, f64) {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
        match self {
            Cardinal::Down => (0.0, 0.0),
            Cardinal::Up => (FRAC_PI_2, 0.0),
            Cardinal::D => (FRAC_PI_4, 0.0),
            Cardinal::A => (FRAC_PI_4, PI),
            Cardinal::R => (FRAC_PI_4, FRAC_PI_2),
            Cardinal::L => (FRAC_PI_4, -FRAC_PI_2),
        }
    }

    pub fn state(self) -> PureState {
        let s = FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let amps = match self {
            Cardinal::Down => vec![c(1.0, 0.0), c(0.0, 0.0)],
            Cardinal::Up => vec![c(0.0, 0.0), c(1.0, 0.0)],
            Cardinal::D => vec![c(s, 0.0), c(s, 0.0)],
            Cardinal::A => vec![c(s, 0.0), c(-s, 0.0)],
            Cardinal::R => vec![c(s, 0.0), c(0.0, s)],
            Cardinal::L => vec![c(s, 0.0), c(0.0, -s)],
        };
        PureState { amplitudes: amps }
    }

    pub fn label(self) -> &'static str {
        match self {
            Cardinal::Down => "down",
            Cardinal::Up => "up",
            Cardinal::D => "D",
            Cardinal::A => "A",
            Cardinal::R => "R",
            Cardinal::L => "L",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        match label.trim() {
            "down" | "↓" | "s_down" => Some(Cardinal::Down),
            "up" | "↑" | "s_up" => Some(Cardinal::Up),
            "D" | "s_D" => Some(Cardinal::D),
            "A" | "s_A" => Some(Cardinal::A),
            "R" | "s_R" => Some(Cardinal::R),
            "L" | "s_L" => Some(Cardinal::L),
            _ => None,
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix of dimension 2, 3 or 4.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let dim = matrix.dim();
        if !(2..=4).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !matrix.is_hermitian(DENSITY_TOL) {
            return Err(Error::NotHermitian(matrix.hermitian_deviation()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let (vals, _) = hermitian_eig(&matrix)?;
        if vals[0] < -DENSITY_TOL {
            return Err(Error::NotPsd(vals[0]));
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    /// Projects an arbitrary Hermitian matrix onto the physical states by
    /// clipping negative eigenvalues and renormalizing.
    pub fn project_physical(m: &ComplexMatrix) -> Result<Self> {
        let (vals, v) = hermitian_eig(m)?;
        let clipped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Ok(Self::maximally_mixed(m.dim()));
        }
        let diag: Vec<f64> = clipped.iter().map(|l| l / total).collect();
        Self::new(ComplexMatrix::from_real_diagonal(&diag).conjugate_by(&v))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// `(I + s·σ) / 2`
    pub fn from_stokes(s: StokesVector) -> Result<Self> {
        let m = &(&ComplexMatrix::identity(2) + &pauli(1).scale_real(s.x))
            + &(&pauli(2).scale_real(s.y) + &pauli(3).scale_real(s.z));
        Self::new(m.scale_real(0.5))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product_re(&self.matrix)
    }

    pub fn population(&self, level: usize) -> f64 {
        self.matrix[(level, level)].re
    }

    /// `U ρ U†`; `u` must be unitary for the result to stay a state.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch(u.dim(), self.dim()));
        }
        Ok(Self {
            matrix: self.matrix.conjugate_by(u).hermitian_part(),
        })
    }

    /// Embeds a qubit state into the three-level space with an empty auxiliary level.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() || dim > 4 {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self {
            matrix: self.matrix.embed(dim),
        })
    }

    /// Convex combination with weights; weights must be non-negative and sum to > 0.
    pub fn mixture(states: &[(f64, DensityMatrix)]) -> Result<Self> {
        let first = states.first().ok_or_else(|| crate::error::invalid("empty mixture"))?;
        let dim = first.1.dim();
        let mut acc = ComplexMatrix::zeros(dim);
        let mut total = 0.0;
        for (w, s) in states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
            acc = &acc + &s.matrix.scale_real(*w);
            total += w;
        }
        if total <= 0.0 {
            return Err(crate::error::invalid("mixture weights sum to zero"));
        }
        Self::new(acc.scale_real(1.0 / total))
    }

    /// Builds from an average that is known to be a state up to rounding.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self {
            matrix: matrix.hermitian_part(),
        }
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(d)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl StokesVector {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Uhlmann fidelity `(tr √(√ρ₁ ρ₂ √ρ₁))²`, clamped to `[0, 1]`.
pub fn state_fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(rho1.dim(), rho2.dim()));
    }
    if rho1.dim() == 2 {
        // closed form for qubits: tr(ρ₁ρ₂) + 2√(det ρ₁ det ρ₂)
        let det = |m: &ComplexMatrix| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re.max(0.0);
        let f = rho1.matrix().trace_product_re(rho2.matrix()) + 2.0 * (det(rho1.matrix()) * det(rho2.matrix())).sqrt();
        return Ok(f.clamp(0.0, 1.0));
    }
    let s = matrix_sqrt_psd(rho1.matrix())?;
    let inner = (&(&s * rho2.matrix()) * &s).hermitian_part();
    let (vals, _) = hermitian_eig(&inner)?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    // eigenvalues at rounding level would contribute their square root
    let root_trace: f64 = vals
        .iter()
        .map(|&l| if l > 1e-14 * top.max(1e-300) { l.sqrt() } else { 0.0 })
        .sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Fidelity of a state with a pure target, `⟨ψ|ρ|ψ⟩`.
pub fn pure_fidelity(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), psi.dim()));
    }
    let v = rho.matrix().apply(psi.amplitudes());
    Ok(psi
        .amplitudes()
        .iter()
        .zip(v)
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        .re
        .clamp(0.0, 1.0))
}

pub fn stokes_from_rho(rho: &DensityMatrix) -> Result<StokesVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(2, rho.dim()));
    }
    let m = rho.matrix();
    Ok(StokesVector {
        x: m.trace_product_re(&pauli(1)),
        y: m.trace_product_re(&pauli(2)),
        z: m.trace_product_re(&pauli(3)),
    })
}

/// Haar-random pure state drawn from `rng`.
pub fn haar_random_state_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PureState> {
    if dim < 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    loop {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(s) = PureState::normalized(v) {
            return Ok(s);
        }
    }
}

/// Haar-random pure state, deterministic in `seed`.
pub fn haar_random_state(dim: usize, seed: u64) -> Result<PureState> {
    haar_random_state_with(dim, &mut substream(seed, 0))
}

/// Haar-random element of U(2).
pub fn haar_random_unitary_with<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    let psi = haar_random_state_with(2, rng).expect("dim 2 is valid");
    let (a, b) = (psi.amplitudes()[0], psi.amplitudes()[1]);
    let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    ComplexMatrix::from_rows([[a, -b.conj()], [b, a.conj()]]).scale(phase)
}
