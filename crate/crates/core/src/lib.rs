//! Weak-supervision label engine.
//!
//! Heuristic functions are written over domain-specific primitives in a small
//! expression language ([`dsl`]). Their dependency structure is recovered from
//! the source alone ([`analysis`]), a factor graph over the latent class,
//! primitives and heuristic outputs is built from it ([`model`]), its weights
//! are fit without ground truth ([`learn`]) and probabilistic labels are
//! emitted. [`baselines`] and [`sim`] hold the comparison labelers and the
//! synthetic benchmark.

pub mod analysis;
pub mod baselines;
pub mod dsl;
pub mod learn;
pub mod model;
pub mod pipeline;
pub mod sim;
