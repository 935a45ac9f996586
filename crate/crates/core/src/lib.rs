//! Quantum kernels evaluated on simulated star-topology spin registers.
//!
//! Classical inputs are encoded as collective ancilla rotations around a
//! fixed entangler; unitary inputs are lifted onto the (A, B) pairs of a
//! double-layered star. The kernel is the normalized Frobenius inner product
//! of the resulting central-spin feature operators.

pub mod linalg;
pub mod register;
pub mod parallel;
pub mod kernel;
pub mod learners;
pub mod entangle;
pub mod datasets;
pub mod experiment;
