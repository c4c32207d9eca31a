//! Truncated Fock-space simulation of entanglement and nonclassicality
//! witnesses.
//!
//! The crate evolves small open quantum systems (damped qubit pairs, a
//! frequency converter, a Kerr oscillator), evaluates a family of witness
//! functionals along the trajectories, and locates the times where a
//! witness suddenly vanishes or revives. Everything works in a finite
//! photon-number cutoff per mode; the witness values are reported both raw
//! and in a truncated form that clips the classical-side excursions.

pub mod dynamics;
pub mod error;
pub mod events;
pub mod linalg;
pub mod moments;
pub mod states;
pub mod witnesses;

pub use error::{CoreError, Result};
