//! Simulation and analysis toolkit for a collective atomic-spin quantum battery.
//!
//! The battery state is the per-atom collective Bloch vector of an ensemble of
//! spins in a bias field along `z`. The crate is organised as:
//!
//! * [`spin`]: battery state, rotations, energetics and entropy relations.
//! * [`dynamics`]: pump/relax charging, free evolution, dephasing and FID synthesis.
//! * [`hyperfine`]: the ⁸⁷Rb ground-manifold master equation and its integrator.
//! * [`scan`]: pulse sequences, the coarse-to-fine extremal-energy scan and the
//!   three measurement protocols.
//! * [`tomography`]: noisy readout, FID fitting and Bloch-vector reconstruction.
//!
//! Energies are computed internally in units of the ensemble energy scale
//! `k = ħ γ B₀ N` and converted to joules through [`Energy`].

pub mod dynamics;
pub mod error;
pub mod hyperfine;
pub mod scan;
pub mod spin;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
pub use spin::{BlochState, EnsembleConfig, Rotation};
pub use units::Energy;
