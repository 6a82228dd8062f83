use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::optimizer::{minimize, BfgsOptions, Diagnostics};
use super::{factor_from_params, factor_gradient, factor_of, TomographyInput, LIKELIHOOD_EPS};
use crate::error::{invalid, Error, Result};
use crate::qlin::{hermitian_eig, hermitian_function, pauli, Cardinal, ComplexMatrix, DensityMatrix};
use crate::rng::substream;

/// Trace tolerance for [`process_fidelity`].
pub const TRACE_TOL: f64 = 1e-6;

/// `χ` in the Pauli basis `{I, σx, σy, σz}`: `E(ρ) = Σ χ_ij σ_i ρ σ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    chi: ComplexMatrix,
}

impl Serialize for ProcessMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            chi: &'a ComplexMatrix,
            trace: f64,
            completely_positive: bool,
            trace_preserving: bool,
            tp_residual: f64,
        }
        Repr {
            chi: &self.chi,
            trace: self.trace(),
            completely_positive: self.is_cp(),
            trace_preserving: self.is_tp(),
            tp_residual: self.tp_residual(),
        }
        .serialize(s)
    }
}

impl ProcessMatrix {
    /// Accepts any Hermitian 4×4 matrix; CP and TP are reported, not enforced.
    pub fn new(chi: ComplexMatrix) -> Result<Self> {
        if chi.dim() != 4 {
            return Err(Error::DimensionMismatch(4, chi.dim()));
        }
        if !chi.is_hermitian(1e-9) {
            return Err(Error::NotHermitian(chi.hermitian_deviation()));
        }
        Ok(Self {
            chi: chi.hermitian_part(),
        })
    }

    /// `χ_ij = Σ_k c_ki conj(c_kj)` with `K_k = Σ_i c_ki σ_i`.
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let mut chi = ComplexMatrix::zeros(4);
        for k in kraus {
            if k.dim() != 2 {
                return Err(Error::DimensionMismatch(2, k.dim()));
            }
            let c: Vec<Complex64> = (0..4).map(|i| (&pauli(i) * k).trace() * 0.5).collect();
            chi = &chi + &ComplexMatrix::outer(&c, &c)?;
        }
        Self::new(chi)
    }

    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn identity() -> Self {
        Self::from_unitary(&ComplexMatrix::identity(2)).expect("identity is a valid process")
    }

    /// `ρ ↦ (1-p) ρ + p I/2`
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=4.0 / 3.0).contains(&p) {
            return Err(invalid("depolarizing strength outside [0, 4/3]"));
        }
        Self::new(ComplexMatrix::from_real_diagonal(&[
            1.0 - 0.75 * p,
            0.25 * p,
            0.25 * p,
            0.25 * p,
        ]))
    }

    /// Composition `second ∘ first` of two processes.
    pub fn then(&self, second: &ProcessMatrix) -> Result<Self> {
        let a = self.ptm();
        let b = second.ptm();
        let mut r = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = (0..4).map(|k| b[i][k] * a[k][j]).sum();
            }
        }
        Self::from_ptm(&r)
    }

    pub fn chi(&self) -> &ComplexMatrix {
        &self.chi
    }

    pub fn trace(&self) -> f64 {
        self.chi.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::InvalidTrace(t));
        }
        Ok(Self {
            chi: self.chi.scale_real(1.0 / t),
        })
    }

    pub fn is_cp(&self) -> bool {
        self.chi.is_psd(1e-8)
    }

    /// `‖Σ χ_ij σ_j σ_i − I‖_max`
    pub fn tp_residual(&self) -> f64 {
        let mut acc = ComplexMatrix::zeros(2);
        for i in 0..4 {
            for j in 0..4 {
                let c = self.chi[(i, j)];
                if c.norm() > 0.0 {
                    acc = &acc + &(&pauli(j) * &pauli(i)).scale(c);
                }
            }
        }
        acc.max_abs_diff(&ComplexMatrix::identity(2))
    }

    pub fn is_tp(&self) -> bool {
        self.tp_residual() <= 1e-6
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(2);
        for i in 0..4 {
            let left = &pauli(i) * rho;
            for j in 0..4 {
                let c = self.chi[(i, j)];
                if c.norm() > 0.0 {
                    out = &out + &(&left * &pauli(j)).scale(c);
                }
            }
        }
        out
    }

    /// Pauli transfer matrix `R_kl = tr(σ_k E(σ_l)) / 2`.
    pub fn ptm(&self) -> [[f64; 4]; 4] {
        let mut r = [[0.0; 4]; 4];
        for (l, col) in (0..4).map(|l| (l, self.apply(&pauli(l)))) {
            for (k, row) in r.iter_mut().enumerate() {
                row[l] = 0.5 * (&pauli(k) * &col).trace().re;
            }
        }
        r
    }

    /// Inverts [`ProcessMatrix::ptm`].
    pub fn from_ptm(r: &[[f64; 4]; 4]) -> Result<Self> {
        let b = ptm_chi_map();
        let rhs = nalgebra::DVector::from_fn(16, |idx, _| Complex64::new(r[idx / 4][idx % 4], 0.0));
        let sol = b
            .lu()
            .solve(&rhs)
            .ok_or_else(|| invalid("singular transfer-matrix map"))?;
        let chi = ComplexMatrix::from_vec(4, sol.iter().copied().collect())?;
        Self::new(chi.hermitian_part())
    }
}

/// `B[(k,l),(i,j)] = tr(σ_k σ_i σ_l σ_j) / 2`, so that `vec(R) = B vec(χ)`.
fn ptm_chi_map() -> nalgebra::DMatrix<Complex64> {
    let p: Vec<ComplexMatrix> = (0..4).map(pauli).collect();
    nalgebra::DMatrix::from_fn(16, 16, |row, col| {
        let (k, l) = (row / 4, row % 4);
        let (i, j) = (col / 4, col % 4);
        (&(&(&p[k] * &p[i]) * &p[l]) * &p[j]).trace() * 0.5
    })
}

/// Output-state tomography for the six cardinal inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessTomographySet {
    inputs: BTreeMap<Cardinal, TomographyInput>,
}

impl ProcessTomographySet {
    pub fn new(inputs: BTreeMap<Cardinal, TomographyInput>) -> Result<Self> {
        for c in Cardinal::ALL {
            if !inputs.contains_key(&c) {
                return Err(invalid(format!("missing input state {}", c.label())));
            }
        }
        Ok(Self { inputs })
    }

    pub fn get(&self, c: Cardinal) -> &TomographyInput {
        &self.inputs[&c]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Cardinal, &TomographyInput)> {
        self.inputs.iter()
    }

    /// Pairs each ideal cardinal input state with its output data.
    pub fn with_states(&self) -> Vec<(DensityMatrix, TomographyInput)> {
        self.inputs
            .iter()
            .map(|(c, t)| (c.state().density(), t.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QptOptions {
    pub enforce_tp: bool,
    pub bfgs: BfgsOptions,
    /// Stop the TP outer loop once every constraint component is below this.
    pub tp_tol: f64,
    pub max_outer: usize,
}

impl Default for QptOptions {
    fn default() -> Self {
        Self {
            enforce_tp: false,
            bfgs: BfgsOptions::default(),
            tp_tol: 1e-9,
            max_outer: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessEstimate {
    /// Unit-trace process matrix.
    pub chi: ProcessMatrix,
    /// `tr χ` of the fit before normalization; below 1 for lossy data.
    pub raw_trace: f64,
    pub trace_deficit: f64,
    pub tp_residual: f64,
    pub log_likelihood: f64,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

struct QptTerm {
    k: ComplexMatrix,
    n: f64,
    total: f64,
}

fn qpt_terms(data: &[(DensityMatrix, TomographyInput)]) -> (Vec<QptTerm>, f64) {
    let p: Vec<ComplexMatrix> = (0..4).map(pauli).collect();
    let mut terms = Vec::with_capacity(data.len() * 6);
    let mut n_tot = 0.0;
    for (rho, input) in data {
        for rec in input.records() {
            let total = rec.total() as f64;
            n_tot += total;
            for (plus, n) in [(true, rec.n_plus), (false, rec.n_minus)] {
                let proj = rec.basis.projector(plus);
                // q = Σ χ_ij A_ij = tr(Aᵀ χ), A_ij = tr(Π σ_i ρ σ_j)
                let mut kt = ComplexMatrix::zeros(4);
                for i in 0..4 {
                    let left = &(&proj * &p[i]) * rho.matrix();
                    for j in 0..4 {
                        kt[(j, i)] = (&left * &p[j]).trace();
                    }
                }
                terms.push(QptTerm {
                    k: kt.hermitian_part(),
                    n: n as f64,
                    total,
                });
            }
        }
    }
    (terms, n_tot)
}

fn poisson_objective(terms: &[QptTerm], n_tot: f64, chi: &ComplexMatrix) -> (f64, ComplexMatrix) {
    let mut f = 0.0;
    let mut g = ComplexMatrix::zeros(4);
    for t in terms {
        let q = t.k.trace_product_re(chi).max(0.0);
        f += (t.total * q - t.n * (q + LIKELIHOOD_EPS).ln()) / n_tot;
        g = &g + &t.k.scale_real((t.total - t.n / (q + LIKELIHOOD_EPS)) / n_tot);
    }
    (f, g)
}

/// Per-count Poisson log-likelihood of `chi` (up to a data-only constant).
pub fn qpt_log_likelihood(data: &ProcessTomographySet, chi: &ProcessMatrix) -> f64 {
    let (terms, n_tot) = qpt_terms(&data.with_states());
    -poisson_objective(&terms, n_tot, chi.chi()).0
}

/// Numerical rank of the span of the input states.
pub fn input_span_rank(states: &[DensityMatrix]) -> usize {
    let m = nalgebra::DMatrix::from_fn(states.len(), 4, |r, c| states[r].matrix().trace_product_re(&pauli(c)));
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-8 * top.max(1e-300)).count()
}

/// Least-squares transfer matrix from linear-inversion output states,
/// converted to `χ`; not necessarily CP.
pub fn qpt_linear_inversion(data: &[(DensityMatrix, TomographyInput)]) -> Result<ComplexMatrix> {
    let rows = data.len();
    let mut sin = nalgebra::DMatrix::<f64>::zeros(rows, 4);
    let mut sout = nalgebra::DMatrix::<f64>::zeros(rows, 4);
    for (r, (rho, input)) in data.iter().enumerate() {
        let li = super::linear_inversion(input)?;
        sin[(r, 0)] = 1.0;
        sout[(r, 0)] = 1.0;
        for c in 1..4 {
            sin[(r, c)] = rho.matrix().trace_product_re(&pauli(c));
            sout[(r, c)] = li.stokes.as_array()[c - 1];
        }
    }
    let pinv = sin.pseudo_inverse(1e-10).map_err(|e| invalid(e.to_string()))?;
    let rt = pinv * sout;
    let mut r = [[0.0; 4]; 4];
    for (k, row) in r.iter_mut().enumerate() {
        for (l, v) in row.iter_mut().enumerate() {
            *v = rt[(l, k)];
        }
    }
    Ok(ProcessMatrix::from_ptm(&r)?.chi)
}

/// Six-input maximum-likelihood process tomography.
pub fn qpt_mle(data: &ProcessTomographySet, enforce_tp: bool) -> Result<ProcessEstimate> {
    qpt_mle_general(
        &data.with_states(),
        &QptOptions {
            enforce_tp,
            ..Default::default()
        },
    )
}

/// Maximum-likelihood `χ = T†T` for arbitrary known input states.
///
/// The fit is CP by construction. With `enforce_tp` the trace-preservation
/// equalities are imposed through an augmented Lagrangian; otherwise `χ` is
/// free in scale and the trace deficit is reported.
pub fn qpt_mle_general(data: &[(DensityMatrix, TomographyInput)], opts: &QptOptions) -> Result<ProcessEstimate> {
    if data.is_empty() {
        return Err(invalid("no process tomography data"));
    }
    let mut warnings = Vec::new();
    let states: Vec<DensityMatrix> = data.iter().map(|(s, _)| s.clone()).collect();
    let rank = input_span_rank(&states);
    if rank < 4 {
        warnings.push(format!(
            "input states span only {rank} of 4 operator dimensions; the process is not fully determined"
        ));
    }
    let (terms, n_tot) = qpt_terms(data);

    let start = match qpt_linear_inversion(data) {
        Ok(chi) => project_chi(&chi)?,
        Err(_) => ComplexMatrix::identity(4).scale_real(0.25),
    };
    let mut x = factor_of(&start)?;

    let constraints = tp_constraints();
    let mut lambda = [0.0; 4];
    let mut mu = 10.0;
    let mut last_violation = f64::INFINITY;
    let mut diagnostics;
    let mut outer = 0;
    loop {
        let objective = |p: &[f64]| {
            let t = factor_from_params(4, p);
            let chi = &t.adjoint() * &t;
            let (mut f, mut g) = poisson_objective(&terms, n_tot, &chi);
            if opts.enforce_tp {
                for (k, a) in constraints.iter().enumerate() {
                    let h = a.trace_product_re(&chi) - if k == 0 { 1.0 } else { 0.0 };
                    f += lambda[k] * h + 0.5 * mu * h * h;
                    g = &g + &a.scale_real(lambda[k] + mu * h);
                }
            }
            (f, factor_gradient(&t, &g))
        };
        let (xn, d) = minimize(objective, x, &opts.bfgs)?;
        x = xn;
        diagnostics = d;
        if !opts.enforce_tp {
            break;
        }
        let t = factor_from_params(4, &x);
        let chi = &t.adjoint() * &t;
        let h: Vec<f64> = constraints
            .iter()
            .enumerate()
            .map(|(k, a)| a.trace_product_re(&chi) - if k == 0 { 1.0 } else { 0.0 })
            .collect();
        let violation = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        outer += 1;
        if violation < opts.tp_tol {
            break;
        }
        if outer >= opts.max_outer {
            diagnostics.best = x.clone();
            return Err(Error::NonConvergence(Box::new(diagnostics)));
        }
        for k in 0..4 {
            lambda[k] += mu * h[k];
        }
        if violation > 0.25 * last_violation {
            mu *= 10.0;
        }
        last_violation = violation;
    }

    let t = factor_from_params(4, &x);
    let mut raw = ProcessMatrix::new((&t.adjoint() * &t).hermitian_part())?;
    let mut log_likelihood = -poisson_objective(&terms, n_tot, raw.chi()).0;
    // Noiseless data leave the likelihood too flat for the optimizer to pin χ
    // much below 1e-5. The clipped linear inversion is exact there, so it
    // replaces the fit whenever it is feasible and more likely.
    if let Ok(li) = qpt_linear_inversion(data) {
        let clipped = ProcessMatrix::new(clip_psd(&li)?)?;
        let ll = -poisson_objective(&terms, n_tot, clipped.chi()).0;
        if ll > log_likelihood && (!opts.enforce_tp || clipped.tp_residual() <= opts.tp_tol) {
            raw = clipped;
            log_likelihood = ll;
        }
    }
    let raw_trace = raw.trace();
    let chi = raw.normalized()?;
    Ok(ProcessEstimate {
        tp_residual: raw.tp_residual(),
        chi,
        raw_trace,
        trace_deficit: 1.0 - raw_trace,
        log_likelihood,
        diagnostics,
        warnings,
    })
}

/// `c_k = tr(A_k χ)` are the Pauli components of `Σ χ_ij σ_j σ_i`, with
/// `(A_k)_ji = tr(σ_k σ_j σ_i) / 2`.
fn tp_constraints() -> Vec<ComplexMatrix> {
    let p: Vec<ComplexMatrix> = (0..4).map(pauli).collect();
    (0..4)
        .map(|k| {
            let mut a = ComplexMatrix::zeros(4);
            for i in 0..4 {
                for j in 0..4 {
                    a[(j, i)] = (&(&p[k] * &p[j]) * &p[i]).trace() * 0.5;
                }
            }
            a.hermitian_part()
        })
        .collect()
}

/// Drops the negative part of the spectrum.
fn clip_psd(chi: &ComplexMatrix) -> Result<ComplexMatrix> {
    hermitian_function(&chi.hermitian_part(), |l| Complex64::new(l.max(0.0), 0.0))
}

/// Clips to PSD, restores unit trace and mixes in a little of `I/4`.
fn project_chi(chi: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, v) = hermitian_eig(&chi.hermitian_part())?;
    let clipped: Vec<f64> = vals.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Ok(ComplexMatrix::identity(4).scale_real(0.25));
    }
    let diag: Vec<f64> = clipped.iter().map(|l| 0.98 * l / total + 0.02 / 4.0).collect();
    Ok(ComplexMatrix::from_real_diagonal(&diag).conjugate_by(&v))
}

/// `tr(χ₁χ₂)` for unit-trace process matrices.
pub fn process_fidelity(chi1: &ProcessMatrix, chi2: &ProcessMatrix) -> Result<f64> {
    for c in [chi1, chi2] {
        if (c.trace() - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(c.trace()));
        }
    }
    Ok(chi1.chi().trace_product_re(chi2.chi()).clamp(0.0, 1.0))
}

/// `(d F_proc + 1) / (d + 1)` with `d = 2`.
pub fn average_fidelity_from_process(f_proc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_proc) {
        return Err(invalid(format!("process fidelity {f_proc} outside [0, 1]")));
    }
    Ok((2.0 * f_proc + 1.0) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McFidelity {
    pub mean: f64,
    pub std_error: f64,
    /// Mean over the six cardinal inputs.
    pub cardinal_mean: f64,
    pub samples: usize,
}

/// Mean of `⟨Uψ| E(|ψ⟩⟨ψ|) |Uψ⟩` over Haar-random `ψ`; sample `i` uses
/// substream `i` of `seed`.
pub fn monte_carlo_average_fidelity(
    chi: &ProcessMatrix,
    ideal: &ComplexMatrix,
    samples: usize,
    seed: u64,
) -> Result<McFidelity> {
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    if ideal.dim() != 2 || !ideal.is_unitary(1e-9) {
        return Err(Error::NotUnitary(ideal.unitary_deviation()));
    }
    let r = chi.ptm();
    let u = ProcessMatrix::from_unitary(ideal)?.ptm();
    let fid = |s: [f64; 3]| {
        let v = [1.0, s[0], s[1], s[2]];
        let out: Vec<f64> = (0..4).map(|k| (0..4).map(|l| r[k][l] * v[l]).sum()).collect();
        let tgt: Vec<f64> = (0..4).map(|k| (0..4).map(|l| u[k][l] * v[l]).sum()).collect();
        (0.5 * (out[0] + out[1] * tgt[1] + out[2] * tgt[2] + out[3] * tgt[3])).clamp(0.0, 1.0)
    };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            fid(haar_bloch(&mut rng))
        })
        .collect();
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if samples > 1 {
        values.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let cardinal_mean = [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
    .into_iter()
    .map(fid)
    .sum::<f64>()
        / 6.0;
    Ok(McFidelity {
        mean,
        std_error: (var / n).sqrt(),
        cardinal_mean,
        samples,
    })
}

/// Bloch vector of a Haar-random pure qubit state (uniform on the sphere).
fn haar_bloch<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let psi = crate::qlin::haar_random_state_with(2, rng).expect("dim 2 is valid");
    let (a, b) = (psi.amplitudes()[0], psi.amplitudes()[1]);
    let ab = a.conj() * b;
    [2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()]
}
