use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::optimizer::{minimize, BfgsOptions, Diagnostics};
use super::{
    factor_from_params, factor_gradient, factor_of, Basis, MeasurementRecord, TomographyInput, LIKELIHOOD_EPS,
};
use crate::error::{invalid, Result};
use crate::qlin::{hermitian_eig, state_fidelity, ComplexMatrix, DensityMatrix, StokesVector};
use crate::rng::substream;

/// Weight of `I/d` mixed into the starting point so that it is full rank.
const START_MIXING: f64 = 0.02;

/// `ρ̂ = (I + Σ ŝ_i σ_i)/2` from raw frequencies; may be unphysical.
#[derive(Debug, Clone, Serialize)]
pub struct LinearInversion {
    pub matrix: ComplexMatrix,
    pub stokes: StokesVector,
    pub min_eigenvalue: f64,
    pub physical: bool,
}

pub fn linear_inversion(input: &TomographyInput) -> Result<LinearInversion> {
    let s: Vec<f64> = input
        .records()
        .iter()
        .map(|r| {
            if r.total() == 0 {
                return Err(invalid(format!("basis {} has zero counts", r.basis)));
            }
            Ok((r.n_plus as f64 - r.n_minus as f64) / r.total() as f64)
        })
        .collect::<Result<_>>()?;
    let mut m = ComplexMatrix::identity(2);
    for b in Basis::ALL {
        m = &m + &b.pauli().scale_real(s[b.index()]);
    }
    let m = m.scale_real(0.5);
    let (vals, _) = hermitian_eig(&m)?;
    Ok(LinearInversion {
        matrix: m,
        stokes: StokesVector {
            x: s[0],
            y: s[1],
            z: s[2],
        },
        min_eigenvalue: vals[0],
        physical: vals[0] >= 0.0,
    })
}

/// Per-count negative log-likelihood of a qubit state under the binomial model.
pub fn state_log_likelihood(input: &TomographyInput, rho: &DensityMatrix) -> f64 {
    -objective_value(&terms(input), rho.matrix())
}

struct Term {
    projector: ComplexMatrix,
    weight: f64,
}

fn terms(input: &TomographyInput) -> Vec<Term> {
    let total = input.total() as f64;
    let mut out = Vec::with_capacity(6);
    for r in input.records() {
        for (plus, n) in [(true, r.n_plus), (false, r.n_minus)] {
            if n > 0 {
                out.push(Term {
                    projector: r.basis.projector(plus),
                    weight: n as f64 / total,
                });
            }
        }
    }
    out
}

fn objective_value(terms: &[Term], rho: &ComplexMatrix) -> f64 {
    terms
        .iter()
        .map(|t| -t.weight * (rho.trace_product_re(&t.projector) + LIKELIHOOD_EPS).ln())
        .sum()
}

/// Maximum-likelihood estimate with its optimizer record.
#[derive(Debug, Clone, Serialize)]
pub struct StateEstimate {
    pub rho: DensityMatrix,
    /// Per-count log-likelihood at the optimum.
    pub log_likelihood: f64,
    pub diagnostics: Diagnostics,
}

/// Maximum-likelihood state started from the projected linear inversion.
///
/// Near-pure optima sit where the likelihood is quartic in the Cholesky
/// factor, so the optimizer stops a little inside the sphere. The projected
/// linear inversion is exact there (it is the unconstrained optimum when
/// physical), so it replaces the optimizer result when more likely.
pub fn mle_state(input: &TomographyInput) -> Result<StateEstimate> {
    let li = linear_inversion(input)?;
    let start = DensityMatrix::project_physical(&li.matrix)?;
    let mut est = mle_state_from(input, &start, &BfgsOptions::default())?;
    let start_ll = state_log_likelihood(input, &start);
    if start_ll > est.log_likelihood {
        est.rho = start;
        est.log_likelihood = start_ll;
    }
    Ok(est)
}

/// Maximum-likelihood state from an explicit starting point.
///
/// `ρ = T†T / tr(T†T)` with `T` lower triangular keeps every iterate physical.
pub fn mle_state_from(input: &TomographyInput, start: &DensityMatrix, opts: &BfgsOptions) -> Result<StateEstimate> {
    let dim = 2;
    let terms = terms(input);
    let mixed = &start.matrix().scale_real(1.0 - START_MIXING)
        + &ComplexMatrix::identity(dim).scale_real(START_MIXING / dim as f64);
    let x0 = factor_of(&mixed)?;

    let objective = |x: &[f64]| {
        let t = factor_from_params(dim, x);
        let xm = &t.adjoint() * &t;
        let tau = xm.trace().re;
        let rho = xm.scale_real(1.0 / tau);
        let mut g = ComplexMatrix::zeros(dim);
        let mut f = 0.0;
        for term in &terms {
            let p = rho.trace_product_re(&term.projector) + LIKELIHOOD_EPS;
            f -= term.weight * p.ln();
            g = &g - &term.projector.scale_real(term.weight / p);
        }
        let g_rho = g.trace_product_re(&rho);
        // (tr X - 1)² pins the scale of T, which the likelihood leaves free
        f += (tau - 1.0).powi(2);
        let gx = &(&g - &ComplexMatrix::identity(dim).scale_real(g_rho)).scale_real(1.0 / tau)
            + &ComplexMatrix::identity(dim).scale_real(2.0 * (tau - 1.0));
        (f, factor_gradient(&t, &gx))
    };
    let (x, diagnostics) = minimize(objective, x0, opts)?;
    let t = factor_from_params(dim, &x);
    let xm = &t.adjoint() * &t;
    let rho = DensityMatrix::new(xm.scale_real(1.0 / xm.trace().re).hermitian_part())
        .or_else(|_| DensityMatrix::project_physical(&xm))?;
    Ok(StateEstimate {
        log_likelihood: -objective_value(&terms, rho.matrix()),
        rho,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Sample standard deviation of the resampled fidelities to the point estimate.
    pub fidelity_std: f64,
    pub mean_fidelity: f64,
    pub resamples: usize,
}

/// Poisson bootstrap of the fidelity between resampled and point estimates.
///
/// Resample `r` uses substream `r` of `seed`. A resample in which some basis
/// collects no counts is redrawn from the same stream.
pub fn bootstrap_state_error(input: &TomographyInput, resamples: usize, seed: u64) -> Result<BootstrapResult> {
    if resamples < 2 {
        return Err(invalid("bootstrap needs at least 2 resamples"));
    }
    let point = mle_state(input)?.rho;
    let fids: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let resampled = loop {
                let recs: Vec<MeasurementRecord> = input
                    .records()
                    .iter()
                    .map(|rec| MeasurementRecord {
                        basis: rec.basis,
                        n_plus: poisson(rec.n_plus, &mut rng),
                        n_minus: poisson(rec.n_minus, &mut rng),
                        seed: None,
                    })
                    .collect();
                if let Ok(t) = TomographyInput::new(recs) {
                    break t;
                }
            };
            state_fidelity(&mle_state(&resampled)?.rho, &point)
        })
        .collect::<Result<_>>()?;
    let n = fids.len() as f64;
    let mean = fids.iter().sum::<f64>() / n;
    let var = fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BootstrapResult {
        fidelity_std: var.sqrt(),
        mean_fidelity: mean,
        resamples,
    })
}

fn poisson<R: Rng + ?Sized>(mean: u64, rng: &mut R) -> u64 {
    if mean == 0 {
        return 0;
    }
    Poisson::new(mean as f64).expect("positive mean").sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlin::{haar_random_state_with, Cardinal, PureState};
    use crate::rng::derive_seed;
    use crate::tomo::simulate_tomography;

    fn rec(b: Basis, p: u64, m: u64) -> MeasurementRecord {
        MeasurementRecord::new(b, p, m)
    }

    #[test]
    fn linear_inversion_examples() {
        let d = Cardinal::D.state().density();
        let input = TomographyInput::expected(&d, 1_000_000, 0.0).unwrap();
        let li = linear_inversion(&input).unwrap();
        assert!(li.matrix.max_abs_diff(d.matrix()) < 1e-12);
        assert!(li.physical);

        let bad = TomographyInput::new(vec![
            rec(Basis::X, 100, 0),
            rec(Basis::Y, 50, 50),
            rec(Basis::Z, 100, 0),
        ])
        .unwrap();
        let li = linear_inversion(&bad).unwrap();
        assert_eq!(li.stokes.as_array(), [1.0, 0.0, 1.0]);
        assert!(li.min_eigenvalue < 0.0 && !li.physical);
        let mle = mle_state(&bad).unwrap();
        let (vals, _) = hermitian_eig(mle.rho.matrix()).unwrap();
        assert!(vals[0] >= -1e-10);
    }

    #[test]
    fn exact_counts_recover_cardinals() {
        for c in Cardinal::ALL {
            let truth = c.state().density();
            let input = TomographyInput::expected(&truth, 1_000_000_000, 0.0).unwrap();
            let est = mle_state(&input).unwrap();
            let f = state_fidelity(&est.rho, &truth).unwrap();
            assert!(f > 1.0 - 1e-6, "{c:?}: {f} {:?}", est.diagnostics);
        }
    }

    #[test]
    fn agrees_with_physical_linear_inversion() {
        let mut rng = substream(31, 0);
        for _ in 0..20 {
            let psi = haar_random_state_with(2, &mut rng).unwrap().density();
            let w: f64 = rng.random_range(0.1..0.9);
            let rho = DensityMatrix::mixture(&[(w, psi), (1.0 - w, DensityMatrix::maximally_mixed(2))]).unwrap();
            let input = TomographyInput::expected(&rho, 1_000_000_000, 0.0).unwrap();
            let li = linear_inversion(&input).unwrap();
            let est = mle_state(&input).unwrap();
            assert!(est.rho.matrix().max_abs_diff(&li.matrix) < 1e-6);
        }
    }

    #[test]
    fn restarts_agree() {
        let truth = PureState::from_angles(0.4, 1.1).density();
        let input = simulate_tomography(&truth, 500, 0.0, 7).unwrap();
        let reference = mle_state(&input).unwrap().rho;
        let mut rng = substream(32, 0);
        for _ in 0..5 {
            let start = haar_random_state_with(2, &mut rng).unwrap().density();
            let start = DensityMatrix::mixture(&[(0.5, start), (0.5, DensityMatrix::maximally_mixed(2))]).unwrap();
            let est = mle_state_from(&input, &start, &BfgsOptions::default()).unwrap();
            assert!((state_fidelity(&est.rho, &reference).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mle_beats_projected_linear_inversion() {
        let mut rng = substream(33, 0);
        for k in 0..50 {
            let truth = haar_random_state_with(2, &mut rng).unwrap().density();
            let input = simulate_tomography(&truth, 50, 0.0, derive_seed(33, k)).unwrap();
            let li = DensityMatrix::project_physical(&linear_inversion(&input).unwrap().matrix).unwrap();
            let est = mle_state(&input).unwrap();
            assert!(est.log_likelihood >= state_log_likelihood(&input, &li) - 1e-12);
        }
    }

    #[test]
    fn bootstrap_examples() {
        let d = Cardinal::D.state().density();
        let big = TomographyInput::expected(&d, 1_000_000, 0.0).unwrap();
        assert!(bootstrap_state_error(&big, 50, 1).unwrap().fidelity_std < 1e-3);

        // 500 counts in total, split over the three bases
        let small = simulate_tomography(&d, 167, 0.0, 2).unwrap();
        let a = bootstrap_state_error(&small, 200, 3).unwrap();
        assert!((1e-3..1e-2).contains(&a.fidelity_std), "{a:?}");
        assert_eq!(a, bootstrap_state_error(&small, 200, 3).unwrap());
        let larger = simulate_tomography(&d, 1667, 0.0, 2).unwrap();
        assert!(bootstrap_state_error(&larger, 200, 3).unwrap().fidelity_std < a.fidelity_std);
    }
}
