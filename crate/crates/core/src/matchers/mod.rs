//! Distribution matchers: bits in, shaped amplitudes out.

mod adm;
mod bits;
mod ess;
mod frame;
mod rateloss;

pub use adm::{adm_decode, adm_encode, AdmCoder, FREQ_BITS, PROB_FLOOR};
pub use bits::BitStream;
pub use ess::{ess_build, ess_find_emax, EssCoder, EssTarget};
pub use frame::{read_frame, write_frame, MatchedFrame, FRAME_MAGIC};
pub use rateloss::{
    measure_rate_loss_adm, measure_rate_loss_adm_with, rate_loss_csv, RateLossPoint,
};
