//! Probabilistic amplitude shaping with rate-loss-aware sequential source models.
//!
//! The crate is organised around a single abstraction, [`source::ConditionalModel`]:
//! a finite-memory next-symbol law over unsigned QAM amplitudes. Everything else
//! consumes it:
//!
//! * [`constellation`] builds Gray-labelled square QAM and Maxwell–Boltzmann marginals.
//! * [`source`] holds table models, their stationary law, entropy rate and the
//!   ideal-matcher rate loss.
//! * [`matchers`] maps bits to amplitudes: arithmetic distribution matching (ADM)
//!   driven by a conditional model, and enumerative sphere shaping (ESS).
//! * [`channel`] simulates a single-span fiber: RRC pulse shaping, split-step
//!   Fourier propagation, a first-order perturbation surrogate and CD compensation.
//! * [`metrics`] demaps to LLRs and estimates the bit-metric AIR net of rate loss.
//! * [`training`] fits table models to the rate-loss-aware objective through the
//!   perturbation surrogate with straight-through Gumbel-Softmax sampling.
//! * [`selection`] is the sequence-selection baseline on top of ESS.
//!
//! Monte Carlo loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod constellation;
pub mod error;
pub mod matchers;
pub mod metrics;
pub mod par;
pub mod rng;
pub mod selection;
pub mod source;
pub mod training;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex<f64>;
