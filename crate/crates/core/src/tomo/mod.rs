//! Counting statistics, state and process tomography, fidelity metrics and
//! fringe analysis.
//!
//! A measurement in basis `b ∈ {X, Y, Z}` projects onto the `±1` eigenstates of
//! `σ_b`; on the signal photon these are the D/A, R/L and σ⁻/σ⁺ polarization
//! pairs.

mod fringe;
mod io;
mod optimizer;
mod process;
mod state;

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qlin::{pauli, ComplexMatrix, DensityMatrix};
use crate::rng::SimRng;

pub use fringe::{fringe_analysis, FringeFit, FringePoint, FringeResult, RATIO_CAP};
pub use io::{read_counts_csv, write_counts_csv, CountsRow};
pub use optimizer::{minimize, BfgsOptions, Diagnostics, StopReason};
pub use process::{
    average_fidelity_from_process, input_span_rank, monte_carlo_average_fidelity, process_fidelity,
    qpt_linear_inversion, qpt_log_likelihood, qpt_mle, qpt_mle_general, McFidelity, ProcessEstimate, ProcessMatrix,
    ProcessTomographySet, QptOptions,
};
pub use state::{
    bootstrap_state_error, linear_inversion, mle_state, mle_state_from, state_log_likelihood, BootstrapResult,
    LinearInversion, StateEstimate,
};

/// Boundary regularization added to every probability inside a logarithm.
pub const LIKELIHOOD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
            Basis::Z => 2,
        }
    }

    pub fn pauli(self) -> ComplexMatrix {
        pauli(self.index() + 1)
    }

    /// `(I ± σ_b) / 2`
    pub fn projector(self, plus: bool) -> ComplexMatrix {
        let sign = if plus { 1.0 } else { -1.0 };
        (&ComplexMatrix::identity(2) + &self.pauli().scale_real(sign)).scale_real(0.5)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "X" | "x" => Some(Basis::X),
            "Y" | "y" => Some(Basis::Y),
            "Z" | "z" => Some(Basis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::X => "X",
            Basis::Y => "Y",
            Basis::Z => "Z",
        };
        f.write_str(s)
    }
}

/// Counts in one basis; `seed` records the stream that produced simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub basis: Basis,
    pub n_plus: u64,
    pub n_minus: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MeasurementRecord {
    pub fn new(basis: Basis, n_plus: u64, n_minus: u64) -> Self {
        Self {
            basis,
            n_plus,
            n_minus,
            seed: None,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_plus + self.n_minus
    }
}

/// One record per basis, stored in X, Y, Z order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TomographyInput {
    records: [MeasurementRecord; 3],
}

impl TomographyInput {
    pub fn new(records: Vec<MeasurementRecord>) -> Result<Self> {
        if records.len() != 3 {
            return Err(invalid(format!("expected 3 records, got {}", records.len())));
        }
        let mut slots: [Option<MeasurementRecord>; 3] = [None; 3];
        for r in records {
            let slot = &mut slots[r.basis.index()];
            if slot.is_some() {
                return Err(invalid(format!("duplicate basis {}", r.basis)));
            }
            if r.total() == 0 {
                return Err(invalid(format!("basis {} has zero counts", r.basis)));
            }
            *slot = Some(r);
        }
        let records = slots.map(|s| s.expect("three distinct bases fill all slots"));
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MeasurementRecord; 3] {
        &self.records
    }

    pub fn get(&self, basis: Basis) -> &MeasurementRecord {
        &self.records[basis.index()]
    }

    pub fn total(&self) -> u64 {
        self.records.iter().map(|r| r.total()).sum()
    }

    /// Counts equal to `n_per_basis` times the exact outcome probabilities, rounded.
    pub fn expected(rho: &DensityMatrix, n_per_basis: u64, background: f64) -> Result<Self> {
        let records = Basis::ALL
            .iter()
            .map(|&b| {
                let p = outcome_probability(rho, b, background)?;
                let n_plus = (p * n_per_basis as f64).round() as u64;
                Ok(MeasurementRecord::new(b, n_plus, n_per_basis - n_plus.min(n_per_basis)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }
}

impl<'de> Deserialize<'de> for TomographyInput {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            records: Vec<MeasurementRecord>,
        }
        let raw = Raw::deserialize(d)?;
        TomographyInput::new(raw.records).map_err(serde::de::Error::custom)
    }
}

/// `p₊` in `basis`, with `background` uncorrelated counts per outcome channel
/// per signal count: `(p + a) / (1 + 2a)`.
pub fn outcome_probability(rho: &DensityMatrix, basis: Basis, background: f64) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(2, rho.dim()));
    }
    if !(background >= 0.0) || !background.is_finite() {
        return Err(invalid("background rate must be non-negative"));
    }
    let p = rho.matrix().trace_product_re(&basis.projector(true)).clamp(0.0, 1.0);
    Ok((p + background) / (1.0 + 2.0 * background))
}

/// Binomial counts for `n_total` detections in `basis`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    basis: Basis,
    n_total: u64,
    noise_background: f64,
    seed: u64,
) -> Result<MeasurementRecord> {
    if n_total == 0 {
        return Err(invalid("n_total must be at least 1"));
    }
    let p = outcome_probability(rho, basis, noise_background)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let n_plus = Binomial::new(n_total, p)
        .map_err(|e| invalid(e.to_string()))?
        .sample(&mut rng);
    Ok(MeasurementRecord {
        basis,
        n_plus,
        n_minus: n_total - n_plus,
        seed: Some(seed),
    })
}

/// Simulated counts in all three bases; basis `b` uses substream `b` of `seed`.
pub fn simulate_tomography(
    rho: &DensityMatrix,
    n_per_basis: u64,
    noise_background: f64,
    seed: u64,
) -> Result<TomographyInput> {
    let records = Basis::ALL
        .iter()
        .map(|&b| {
            simulate_counts(
                rho,
                b,
                n_per_basis,
                noise_background,
                crate::rng::derive_seed(seed, b.index() as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    TomographyInput::new(records)
}

/// Parameters of a lower-triangular factor: real diagonal, then `(re, im)` of
/// each strictly-lower entry in row-major order.
pub(crate) fn factor_from_params(dim: usize, x: &[f64]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        t[(i, i)] = Complex64::new(x[i], 0.0);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            t[(i, j)] = Complex64::new(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

/// Gradient with respect to the factor parameters of `F(T†T)`, given the
/// Hermitian derivative `g` with `dF = Re tr(g dX)` at `X = T†T`.
pub(crate) fn factor_gradient(t: &ComplexMatrix, g: &ComplexMatrix) -> Vec<f64> {
    let dim = t.dim();
    let m = g * &t.adjoint();
    let mut grad = vec![0.0; dim * dim];
    for i in 0..dim {
        grad[i] = 2.0 * m[(i, i)].re;
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            grad[k] = 2.0 * m[(j, i)].re;
            grad[k + 1] = -2.0 * m[(j, i)].im;
            k += 2;
        }
    }
    grad
}

/// Lower-triangular `T` with `T†T = x` for positive definite `x`.
pub(crate) fn factor_of(x: &ComplexMatrix) -> Result<Vec<f64>> {
    let dim = x.dim();
    // with J the exchange matrix and J x J = L L†, T = J L† J
    let mut jxj = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            jxj[(i, j)] = x[(dim - 1 - i, dim - 1 - j)];
        }
    }
    let chol = nalgebra::Cholesky::new(jxj.hermitian_part().to_nalgebra()).ok_or(Error::NotPsd(0.0))?;
    let l = ComplexMatrix::from_nalgebra(&chol.l());
    let lt = l.adjoint();
    let mut t = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            t[(i, j)] = lt[(dim - 1 - i, dim - 1 - j)];
        }
    }
    let mut params = vec![0.0; dim * dim];
    for i in 0..dim {
        params[i] = t[(i, i)].re;
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            params[k] = t[(i, j)].re;
            params[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    Ok(params)
}
