//! Simulator for the quantum interface between Stokes light and the
//! alignment of a spin-oriented atomic ensemble driven by off-resonant
//! Raman scattering.
//!
//! The linearized Heisenberg dynamics of the interface reduces to a pair of
//! first-order wave equations whose closed-form solution is an integral
//! transform with Bessel kernels: `J`-Bessel for the state-swapping (memory)
//! branch and `I`-Bessel for the amplifying (entanglement) branch.  This
//! crate builds those transforms as discretized transfer matrices, propagates
//! Gaussian covariances through them, and evaluates the quantum-memory and
//! entanglement protocols: spectral variances, readout-mode optimization,
//! fidelities against the classical benchmark, and EPR-type witnesses.
//!
//! Module map:
//! - [`angular`]: exact Clebsch-Gordan / Wigner 6j algebra and the spin
//!   alignment coefficients.
//! - [`bessel`]: the `J0`, `J1`, `I0`, `I1` kernel functions.
//! - [`coupling`]: spectrally dependent coupling constants for a table of
//!   hyperfine lines (87Rb D1 data ships with the crate).
//! - [`propagator`]: transfer-matrix construction, a brute-force PDE
//!   integrator used as an oracle, and commutator-preservation checks.
//! - [`spectral`]: Gaussian states, input covariances, spectra.
//! - [`memory`]: write/store/retrieve protocol and fidelity evaluation.
//! - [`entangle`]: entanglement generation, optimal mode pairs, witnesses.
//! - [`config`], [`output`]: scenario files, CSV/JSON/SVG emission.

pub mod angular;
pub mod bessel;
pub mod config;
pub mod coupling;
pub mod entangle;
pub mod error;
pub mod memory;
pub mod output;
pub mod propagator;
pub mod spectral;

pub use error::{Error, Result};
