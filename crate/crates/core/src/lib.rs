//! Density-matrix simulation and training of variational circuits with
//! ancilla-assisted dissipation.

pub mod channels;
pub mod circuits;
pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod hamiltonian;
pub mod optim;
pub mod qmath;
pub mod states;

pub use error::{Error, Result};
