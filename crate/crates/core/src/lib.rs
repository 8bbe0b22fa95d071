//! Mean-field simulator and phase-diagram engine for the dissipative Dicke lattice:
//! a chain of lossy resonators, each collectively coupled to an ensemble of
//! two-level atoms, with nearest-neighbour photon hopping and periodic or open
//! boundaries.

pub mod classify;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod spectrum;
pub mod stability;
pub mod steady_state;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{normal_state, BoundaryCondition, LatticeParams, MeanFieldState};
