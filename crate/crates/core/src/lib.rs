//! Numerical laboratory for measurement-powered quantum Szilard engines.
//!
//! A cycle couples a working system `S` to a demon memory `D` through an
//! energy-conserving premeasurement, objectifies the record, applies
//! record-conditioned feedback on `S` and a weight `W` (optionally with a
//! thermal reservoir `R`), and finally erases the demon. Every work, heat and
//! entropy quantity of the cycle is reported, together with the three
//! classical-engine features: repeatable measurement, weight-entropy
//! invariance and strictly positive work.

pub mod engine;
pub mod error;
pub mod feedback;
pub mod measurement;
pub mod qop;
pub mod random;
pub mod thermo;

pub use error::{Error, Result};
