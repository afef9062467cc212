//! Simulation of deterministic bosonic Maxwell's-demon protocols: repeated
//! heralded subtraction of oscillator quanta by linear and two-quantum
//! Jaynes-Cummings coupling to probe qubits, and the charging of a battery
//! qubit by the resulting non-thermal phonon statistics.

pub mod cli;
pub mod dawson;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod jc;
pub mod oracle;
pub mod protocols;
pub mod search;

pub use error::{DemonError, Result};
pub use fock::{FockDistribution, MomentSummary};
pub use jc::{InteractionAngle, OptimumReport, SearchOptions};
pub use protocols::{Protocol, ProtocolTrajectory, Schedule};
