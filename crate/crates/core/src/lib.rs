//! Spectral estimation of qubit Hamiltonians from cooled real-time evolution.
//!
//! The crate evolves an initial state under a Hamiltonian given as a weighted
//! sum of Pauli strings, Fourier-transforms the resulting time signal under a
//! Gaussian (or Lorentzian) cooling weight, and reads energy gaps or
//! eigenvalues off the peaks of the transformed curve `C(E)`.
//!
//! Module map:
//!
//! * [`pauli`]: Pauli strings, Hamiltonians, observables, model builders.
//! * [`state`]: statevectors, dense spectra, exact and Trotterized evolution,
//!   expectation values with optional shot noise.
//! * [`estimator`]: cooling functions, time sampling, kernels and the Monte
//!   Carlo / quadrature assembly of `C(E)`.
//! * [`peaks`]: peak detection, matching against references, location
//!   accuracy estimates.
//! * [`budget`]: cutoff and shot-noise error bounds, cutoff sweeps.
//! * [`cli`]: configuration files and the `gapscan` command line driver.

pub mod budget;
pub mod cli;
mod error;
pub mod estimator;
pub mod peaks;
pub mod pauli;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
pub use num_complex::Complex64;
