#![allow(dead_code)]

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use spinwave::qlin::{hermitian_function, Cardinal};
use spinwave::tomo::{ProcessMatrix, ProcessTomographySet, TomographyInput};
use spinwave::{ComplexMatrix, DensityMatrix};

/// Counts large enough that expected-count data act as exact probabilities.
pub const EXACT_N: u64 = 1_000_000_000_000;

pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let data = (0..dim * dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    ComplexMatrix::from_vec(dim, data).unwrap()
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(dim, rng).hermitian_part()
}

/// Random full-rank qubit density matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let g = ginibre(2, rng);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr)).unwrap()
}

/// Random CPTP qubit channel with `rank` Kraus operators, from a Ginibre
/// stack `G = (A_1; ...; A_r)` normalized as `K_k = A_k (G†G)^{-1/2}`.
pub fn random_channel<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> ProcessMatrix {
    let blocks: Vec<ComplexMatrix> = (0..rank).map(|_| ginibre(2, rng)).collect();
    let s = blocks
        .iter()
        .fold(ComplexMatrix::zeros(2), |acc, a| &acc + &(&a.adjoint() * a));
    let inv_sqrt = hermitian_function(&s, |x| Complex64::new(x.powf(-0.5), 0.0)).unwrap();
    let kraus: Vec<ComplexMatrix> = blocks.iter().map(|a| a * &inv_sqrt).collect();
    ProcessMatrix::from_kraus(&kraus).unwrap()
}

/// Exact-probability tomography of `chi` on the six cardinal inputs.
pub fn exact_set(chi: &ProcessMatrix) -> ProcessTomographySet {
    let mut m = BTreeMap::new();
    for c in Cardinal::ALL {
        let out = DensityMatrix::new(chi.apply(c.state().density().matrix()).hermitian_part()).unwrap();
        m.insert(c, TomographyInput::expected(&out, EXACT_N, 0.0).unwrap());
    }
    ProcessTomographySet::new(m).unwrap()
}
