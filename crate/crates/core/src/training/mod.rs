//! Rate-loss-aware training of table source models through the perturbation
//! surrogate channel.
//!
//! Gradients combine two paths. The sample path runs from the demapper loss
//! back through the channel to the relaxed Gumbel-Softmax samples
//! (straight-through). The source path covers everything that depends on the
//! model's stationary law (demapper prior, power normalization, marginal
//! entropy, rate loss, KL to the Maxwell–Boltzmann target); it is
//! differentiated exactly through the stationary equations.

mod gradcheck;
mod gumbel;
mod objective;
mod pipeline;
mod source_grad;
mod train;

pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use gumbel::{gumbel_softmax_sample, random_logits, straight_through_backward, GumbelSample};
pub use objective::{evaluate, loss_l, loss_lpp, sample_batch, Batch, LossBreakdown};
pub use pipeline::{DemapperSettings, Surrogate, TrainSetup};
pub use source_grad::{logit_gradient, softmax_chain, table_gradient, SourceGrad, SourceState};
pub use train::{train, Objective, TrainConfig, TrainRecord, TrainTrace, TRACE_CSV_HEADER};
