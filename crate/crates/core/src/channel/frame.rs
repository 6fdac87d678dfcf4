//! Complex baseband frames and their binary export.
//!
//! Binary layout (little endian): magic `PASIQ001`, `u64` sample count,
//! `f64` sample rate (GHz), `f64` launch power (dBm), then interleaved
//! `f64` re/im pairs.

use crate::error::{Error, Result};
use crate::C64;

pub const IQ_MAGIC: &[u8; 8] = b"PASIQ001";

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFrame {
    pub samples: Vec<C64>,
    pub sample_rate_ghz: f64,
    pub launch_power_dbm: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

impl ComplexFrame {
    pub fn mean_power_w(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean_power_dbm(&self) -> f64 {
        watts_to_dbm(self.mean_power_w())
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.re.is_finite() && s.im.is_finite())
    }
}

pub fn write_iq(frame: &ComplexFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 16 * frame.samples.len());
    out.extend_from_slice(IQ_MAGIC);
    out.extend_from_slice(&(frame.samples.len() as u64).to_le_bytes());
    out.extend_from_slice(&frame.sample_rate_ghz.to_le_bytes());
    out.extend_from_slice(&frame.launch_power_dbm.to_le_bytes());
    for s in &frame.samples {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

pub fn read_iq(bytes: &[u8]) -> Result<ComplexFrame> {
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(i..i + 8)
            .map(|s| s.try_into().unwrap())
            .ok_or_else(|| Error::Format("truncated IQ file".into()))
    };
    if &word(0)? != IQ_MAGIC {
        return Err(Error::Format("bad IQ magic".into()));
    }
    let n = u64::from_le_bytes(word(8)?) as usize;
    let sample_rate_ghz = f64::from_le_bytes(word(16)?);
    let launch_power_dbm = f64::from_le_bytes(word(24)?);
    if bytes.len() != 32 + 16 * n {
        return Err(Error::Format("IQ payload length mismatch".into()));
    }
    let samples = (0..n)
        .map(|i| {
            let o = 32 + 16 * i;
            Ok(C64::new(
                f64::from_le_bytes(word(o)?),
                f64::from_le_bytes(word(o + 8)?),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(ComplexFrame {
        samples,
        sample_rate_ghz,
        launch_power_dbm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iq_roundtrip() {
        let f = ComplexFrame {
            samples: (0..10)
                .map(|i| C64::new(i as f64, -0.5 * i as f64))
                .collect(),
            sample_rate_ghz: 200.0,
            launch_power_dbm: 3.5,
        };
        let b = write_iq(&f);
        assert_eq!(read_iq(&b).unwrap(), f);
        assert!(read_iq(&b[..b.len() - 1]).is_err());
    }

    #[test]
    fn dbm_conversions() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((watts_to_dbm(dbm_to_watts(-7.3)) + 7.3).abs() < 1e-12);
    }
}
