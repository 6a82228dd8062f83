//! Simulation and tomography toolkit for single-qubit control of a spinwave
//! qubit stored in an atomic-ensemble memory.
//!
//! * [`qlin`]: complex matrices, spectral functions, states and fidelities.
//! * [`control`]: Larmor and Raman rotations, pulse compilation, three-level dynamics.
//! * [`herald`]: atom-photon state, idler projection, readout.
//! * [`tomo`]: counting statistics, state and process tomography, fringes.
//! * [`levels`]: Rabi frequencies, light shifts and Zeeman splittings from beam parameters.
//! * [`experiment`]: end-to-end recipes and their reports.
//!
//! Every stochastic routine takes an explicit seed and splits it per work
//! item (see [`rng`]), so results do not depend on the number of threads.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod experiment;
pub mod herald;
pub mod levels;
pub mod qlin;
pub mod rng;
pub mod tomo;

pub use error::{Error, Result};
pub use qlin::{ComplexMatrix, DensityMatrix, PureState, StokesVector};
