//! Complex linear algebra and quantum-state primitives.

mod matrix;
mod spectral;
mod state;

use num_complex::Complex64;

pub use matrix::{complex_pairs, ComplexMatrix};
pub use spectral::{hermitian_eig, hermitian_function, matrix_exp_i, matrix_sqrt_psd, HERMITIAN_TOL, PSD_SQRT_TOL};
pub use state::{
    haar_random_state, haar_random_state_with, haar_random_unitary_with, pure_fidelity, state_fidelity,
    stokes_from_rho, Cardinal, DensityMatrix, PureState, StokesVector, DENSITY_TOL, NORM_TOL,
};

/// Pauli matrix `σ_i` with `σ_0 = I`.
pub fn pauli(i: usize) -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let im = Complex64::new(0.0, 1.0);
    match i {
        0 => ComplexMatrix::identity(2),
        1 => ComplexMatrix::from_rows([[z, one], [one, z]]),
        2 => ComplexMatrix::from_rows([[z, -im], [im, z]]),
        3 => ComplexMatrix::from_rows([[one, z], [z, -one]]),
        _ => panic!("pauli index {i} out of range"),
    }
}

/// Phase-insensitive overlap `|tr(U†V)| / d`; equals 1 iff the gates agree up to global phase.
pub fn gate_overlap(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    (&u.adjoint() * v).trace().norm() / u.dim() as f64
}

/// Max-norm distance after removing the best global phase.
pub fn phase_aligned_distance(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let t = (&u.adjoint() * v).trace();
    let phase = if t.norm() > 0.0 {
        t / t.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    u.scale(phase).max_abs_diff(v)
}
