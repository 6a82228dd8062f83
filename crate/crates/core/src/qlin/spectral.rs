//! Spectral calculus for small Hermitian matrices.
//!
//! Every matrix function here (exponential, square root) goes through a single
//! eigendecomposition; there are no series expansions or step sizes.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

/// Relative tolerance used to accept a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below `-PSD_SQRT_TOL` are rejected by [`matrix_sqrt_psd`].
pub const PSD_SQRT_TOL: f64 = 1e-8;

/// Eigendecomposition `m = V diag(λ) V†` with `λ` ascending.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotHermitian(m.hermitian_deviation()));
    }
    let eig = SymmetricEigen::new(m.hermitian_part().to_nalgebra());
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    Ok((values, vectors))
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> Complex64) -> Result<ComplexMatrix> {
    let (values, v) = hermitian_eig(m)?;
    let diag: Vec<Complex64> = values.into_iter().map(f).collect();
    Ok(ComplexMatrix::from_diagonal(&diag).conjugate_by(&v))
}

/// Propagator `exp(-i h t)` for a Hermitian generator `h` in rad/s and `t` in seconds.
pub fn matrix_exp_i(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    hermitian_function(h, |lambda| Complex64::from_polar(1.0, -lambda * t))
}

/// Principal square root of a positive semidefinite matrix.
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (values, v) = hermitian_eig(m)?;
    let scale = m.max_abs().max(1.0);
    if values[0] < -PSD_SQRT_TOL * scale {
        return Err(Error::NotPsd(values[0]));
    }
    let diag: Vec<Complex64> = values
        .into_iter()
        .map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0))
        .collect();
    Ok(ComplexMatrix::from_diagonal(&diag).conjugate_by(&v))
}
