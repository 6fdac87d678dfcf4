//! Root-raised-cosine pulse shaping on cyclic frames.

use super::fft::FftPair;
use super::{dbm_to_watts, ComplexFrame, FiberConfig};
use crate::C64;

/// Raised-cosine spectrum at frequency `f` in units of the symbol rate.
pub(crate) fn raised_cosine(f: f64, rolloff: f64) -> f64 {
    let f = f.abs();
    let lo = 0.5 * (1.0 - rolloff);
    let hi = 0.5 * (1.0 + rolloff);
    if f <= lo {
        1.0
    } else if f > hi {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI / rolloff * (f - lo)).cos())
    }
}

/// Peak of the unit-energy RRC impulse response.
pub fn rrc_peak(rolloff: f64) -> f64 {
    1.0 - rolloff + 4.0 * rolloff / std::f64::consts::PI
}

/// Frequency-domain RRC filter for a frame of `symbols` symbols.
pub struct Rrc {
    symbols: usize,
    os: usize,
    /// `os · sqrt(RC(f))` per FFT bin.
    response: Vec<f64>,
}

impl Rrc {
    pub fn new(symbols: usize, oversampling: usize, rolloff: f64) -> Self {
        let n = symbols * oversampling;
        let response = (0..n)
            .map(|k| {
                let kk = if k <= n / 2 {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                let f = kk * oversampling as f64 / n as f64;
                oversampling as f64 * raised_cosine(f, rolloff).sqrt()
            })
            .collect();
        Self {
            symbols,
            os: oversampling,
            response,
        }
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Upsamples and filters; unit-power symbols give unit mean sample power.
    pub fn shape(&self, symbols: &[C64]) -> Vec<C64> {
        assert_eq!(symbols.len(), self.symbols, "frame length mismatch");
        let n = self.symbols * self.os;
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for (i, s) in symbols.iter().enumerate() {
            buf[i * self.os] = *s;
        }
        let mut fft = FftPair::new(n);
        fft.forward(&mut buf);
        for (v, h) in buf.iter_mut().zip(&self.response) {
            *v *= *h;
        }
        fft.inverse(&mut buf);
        buf
    }

    /// Matched filter and downsampling; inverse of [`Rrc::shape`] on a transparent channel.
    pub fn matched(&self, samples: &[C64]) -> Vec<C64> {
        let n = self.symbols * self.os;
        assert_eq!(samples.len(), n, "frame length mismatch");
        let mut buf = samples.to_vec();
        let mut fft = FftPair::new(n);
        fft.forward(&mut buf);
        let inv_os = 1.0 / self.os as f64;
        for (v, h) in buf.iter_mut().zip(&self.response) {
            *v *= *h * inv_os;
        }
        fft.inverse(&mut buf);
        buf.into_iter().step_by(self.os).collect()
    }
}

/// Pulse-shapes unit-power symbols at the given launch power.
pub fn rrc_shape(symbols: &[C64], cfg: &FiberConfig, launch_power_dbm: f64) -> ComplexFrame {
    let rrc = Rrc::new(symbols.len(), cfg.oversampling, cfg.rrc_rolloff);
    let amp = dbm_to_watts(launch_power_dbm).sqrt();
    let samples = rrc.shape(symbols).into_iter().map(|s| s * amp).collect();
    ComplexFrame {
        samples,
        sample_rate_ghz: cfg.sample_rate_ghz(),
        launch_power_dbm,
    }
}

/// Matched filter, downsampling, and normalization by the frame's launch amplitude.
pub fn rrc_matched(frame: &ComplexFrame, cfg: &FiberConfig) -> Vec<C64> {
    let symbols = frame.samples.len() / cfg.oversampling;
    let rrc = Rrc::new(symbols, cfg.oversampling, cfg.rrc_rolloff);
    let inv = 1.0 / dbm_to_watts(frame.launch_power_dbm).sqrt();
    rrc.matched(&frame.samples)
        .into_iter()
        .map(|s| s * inv)
        .collect()
}
