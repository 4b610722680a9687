//! Quantum Cramér-Rao bounds for simultaneous multiphase estimation with
//! NOON-like probe states, and a Fock-basis simulator for preparing them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fock_states;
pub mod optical_sim;
pub mod param_solver;
pub mod qcrb;
pub mod reports;

pub use error::{Error, Result};
