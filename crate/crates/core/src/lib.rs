//! Multimode Fock-space simulation of measurement-based quantum computing
//! with atomic-ensemble qubits.
//!
//! States live in a sparse occupation-number basis over a [`ModeRegistry`]
//! of collective atomic modes, optical modes and loss ancillas. Linear-optics
//! networks, photon counting with heralding, the entangling protocols that
//! build cluster states, and resource accounting are layered on top.

pub mod correction;
pub mod density;
pub mod detection;
pub mod error;
pub mod optics;
pub mod protocols;
pub mod registry;
pub mod resources;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use registry::{Encoding, LogicalQubit, ModeId, ModeKind, ModeRegistry, QubitId};
pub use state::{Cutoff, MixedState, Occupation, PureState, Truncation, C64};
