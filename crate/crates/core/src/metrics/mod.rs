//! Mismatched Gaussian demapping and bit-metric achievable rates.
//!
//! Transmitted points for a symbol prior `p` are the constellation grid
//! rescaled to unit average energy under `p`; received symbols are expected
//! in the same normalized units.

mod air;
mod demap;

pub use air::{
    bce_bits, estimate_air, results_csv_header, AirReport, RateLossSource, RateTerms,
    BOOTSTRAP_BLOCK,
};
pub use demap::{
    demap_points, estimate_noise_variance, gaussian_demap, shaped_points, LlrFrame, LLR_CLAMP,
};
