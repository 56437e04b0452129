//! Statistical hybrid quantum-classical Ehrenfest dynamics for a two-level
//! quantum subsystem coupled to one classical degree of freedom.
//!
//! The crate covers microstate dynamics, Monte Carlo ensembles, the exact
//! quantum-moment hierarchy, its maximum-entropy closure and the grid
//! evolution of the resulting effective equation.

pub mod config;
pub mod ehrenfest;
pub mod ensemble;
pub mod evolution;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hierarchy;
pub mod io;
pub mod maxent;
pub mod oracle;
pub mod pauli;
pub mod scenario;

pub use error::{Error, Result};
