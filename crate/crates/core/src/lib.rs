//! Exact simulation of linear-optical photonic gates.
//!
//! Polarization and time-bin encoded photons are held as sparse Fock-space
//! superpositions ([`fock`]), pushed through polarizing beam splitters, wave
//! plates, Pockels cells, delays and switches ([`optics`]), probed with
//! cross-Kerr QND measurements ([`qnd`]), and run through timed circuits
//! with feed-forward and post-selection ([`circuit`]). The [`gates`] module
//! holds the prebuilt CNOT and entangler setups with their verification
//! routines.

pub mod circuit;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod gates;
pub mod optics;
pub mod par;
pub mod qnd;
pub mod sampling;

pub use error::{PhotonicError, Result};
pub use fock::{BasisKet, ModeId, PathId, PhotonicState, Pol, QubitAmplitudes, C64};
