//! Spin-chain quantum battery simulation under local Markovian and Ohmic
//! dephasing.
//!
//! The crate is organised bottom-up:
//!
//! - [`spin_model`]: transverse-field XY Hamiltonian, spectral normalisation,
//!   ground and thermal initial states.
//! - [`channels`]: local jump operators and their (possibly time-dependent)
//!   rate schedules.
//! - [`dynamics`]: the Lindblad generator and a fixed-step RK4 integrator.
//! - [`observables`]: work, instantaneous power, reduced states and
//!   logarithmic negativity.
//! - [`closed_form`]: analytic two-qubit expressions used as independent
//!   oracles for the numerical engine.
//! - [`protocols`]: charging, discharging and the sweep experiments built
//!   on top of everything else.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod closed_form;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod observables;
pub mod protocols;
pub mod spin_model;

pub use channels::{Channel, ChannelSet, JumpKind, RateSchedule};
pub use dynamics::{evolve, lindblad_generator, IntegratorConfig, Trajectory};
pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use observables::{EntanglementSeries, WorkSeries};
pub use spin_model::{DensityMatrix, NormalizedHamiltonian, SpinChainParams};
