use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward/inverse plan pair; `inverse` is normalized by `1/n`.
pub(crate) struct FftPair {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    n: usize,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            fwd,
            inv,
            scratch: vec![C64::new(0.0, 0.0); len],
            n,
        }
    }

    pub fn forward(&mut self, x: &mut [C64]) {
        self.fwd.process_with_scratch(x, &mut self.scratch);
    }

    pub fn inverse(&mut self, x: &mut [C64]) {
        self.inv.process_with_scratch(x, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Angular frequency of each FFT bin in rad per unit time, for sample spacing `dt`.
pub(crate) fn angular_bins(n: usize, dt: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let kk = if k <= n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            };
            2.0 * std::f64::consts::PI * kk / (n as f64 * dt)
        })
        .collect()
}
