//! Single-channel, single-polarization fiber link.
//!
//! Time inside the channel is measured in symbol periods and power in watts.
//! Fields follow `∂A/∂z = -α/2 A - j β2/2 ∂²A/∂t² + j γ |A|² A`; with the
//! inverse FFT as synthesis, the linear step multiplies bin `ω` by
//! `exp((j β2/2 ω² - α/2) h)`.

mod config;
mod fft;
mod frame;
mod kernel;
mod perturbation;
mod rrc;
mod ssfm;

pub use config::{FiberConfig, StepPolicy, PLANCK, SPEED_OF_LIGHT};
pub use frame::{dbm_to_watts, read_iq, watts_to_dbm, write_iq, ComplexFrame, IQ_MAGIC};
pub use kernel::{kernel_from_fiber, kernel_from_fiber_with, KernelPulse, PerturbationKernel};
pub use perturbation::{awgn, nonlinear_term, nonlinear_term_backward, perturbation_channel};
pub use rrc::{rrc_matched, rrc_peak, rrc_shape, Rrc};
pub use ssfm::{cd_compensate, ssfm_propagate, step_boundaries};

/// Received symbols after RRC → SSFM → CD compensation → matched filter,
/// normalized back by the launch amplitude.
pub fn transmit_ssfm(
    symbols: &[crate::C64],
    cfg: &FiberConfig,
    launch_power_dbm: f64,
    seed: u64,
) -> crate::Result<Vec<crate::C64>> {
    let tx = rrc_shape(symbols, cfg, launch_power_dbm);
    let rx = ssfm_propagate(&tx, cfg, seed)?;
    let cd = cd_compensate(&rx, cfg);
    Ok(rrc_matched(&cd, cfg))
}
