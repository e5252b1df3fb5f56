//! Classical simulation of verifiable fault-tolerant measurement-based
//! quantum computation.
//!
//! A prover hands the verifier `2k+1` copies of a two-colorable graph state.
//! The verifier tests `2k` of them with single-qubit Pauli measurements and
//! computes on the last one. This crate executes that protocol in the Pauli
//! frame on a three-dimensional cluster lattice, decides membership of the
//! observed deviations in the correctable set (surface-code matching plus a
//! concatenated Reed-Muller fault recursion), and evaluates the closed-form
//! detectability and acceptability bounds for comparison with Monte Carlo.

pub mod bounds;
pub mod decode;
pub mod error;
pub mod experiment;
pub mod f2core;
pub mod lattice;
pub mod noise;
pub mod protocol;
pub mod rmcode;
pub mod rng;

pub use error::{Error, Result};
