//! Bit-packed F₂ algebra, bipartite graph states and Pauli-frame tests.
//!
//! Everything here works on error classes rather than amplitudes: a block's
//! state is the Pauli error it carries, and all test measurements are
//! stabilizer measurements whose statistics are reproduced exactly.

mod bitvec;
mod graph;
mod matrix;
mod pauli;

pub use bitvec::BitVec;
pub use graph::{check_stabilizer_identities, Color, GraphState};
pub use matrix::BinaryMatrix;
pub use pauli::{
    deviation, deviation_b, deviation_w, sample_test_outcomes, test_statistic, Basis, MeasurementRecord,
    PauliError, TestKind,
};
