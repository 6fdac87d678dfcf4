//! Split-step Fourier propagation over one amplified span.

use super::fft::{angular_bins, FftPair};
use super::{ComplexFrame, FiberConfig, StepPolicy};
use crate::error::{Error, Result};
use crate::C64;
use rand_distr::{Distribution, StandardNormal};

/// Step boundaries `0 = z_0 < … < z_K = L` in km. Logarithmic spacing gives every
/// step the same effective length, so the nonlinear phase per step is uniform.
pub fn step_boundaries(cfg: &FiberConfig, mean_power_w: f64) -> Result<Vec<f64>> {
    let l = cfg.span_length_km;
    let leff = cfg.effective_length_km();
    let total_phase = cfg.gamma_per_w_km * mean_power_w * leff;
    let steps = match cfg.steps {
        StepPolicy::Adaptive {
            max_phase_rad,
            min_steps,
        } => ((total_phase / max_phase_rad).ceil() as usize).max(min_steps),
        StepPolicy::Fixed {
            steps,
            max_phase_rad,
        } => {
            let per_step = total_phase / steps as f64;
            if per_step > max_phase_rad {
                return Err(Error::config(format!(
                    "step too coarse: nonlinear phase {per_step:.3e} rad per step exceeds {max_phase_rad:.3e} rad; \
                     need at least {} steps",
                    (total_phase / max_phase_rad).ceil()
                )));
            }
            steps
        }
    };
    let alpha = cfg.alpha_per_km();
    let mut z: Vec<f64> = (0..=steps)
        .map(|i| {
            let frac = i as f64 / steps as f64;
            if alpha == 0.0 {
                frac * l
            } else {
                -(1.0 - frac * (1.0 - (-alpha * l).exp())).ln() / alpha
            }
        })
        .collect();
    z[steps] = l;
    Ok(z)
}

fn dispersion_factors(omega: &[f64], beta2: f64, alpha: f64, h: f64) -> Vec<C64> {
    omega
        .iter()
        .map(|w| C64::new(-0.5 * alpha * h, 0.5 * beta2 * w * w * h).exp())
        .collect()
}

fn check_rate(frame: &ComplexFrame, cfg: &FiberConfig) -> Result<()> {
    let expected = cfg.sample_rate_ghz();
    if (frame.sample_rate_ghz - expected).abs() > 1e-9 * expected {
        return Err(Error::usage(format!(
            "frame sample rate {} GHz does not match config {} GHz",
            frame.sample_rate_ghz, expected
        )));
    }
    Ok(())
}

/// Symmetric split-step propagation followed by the EDFA (gain equal to span loss)
/// and lumped ASE noise at the EDFA.
pub fn ssfm_propagate(frame: &ComplexFrame, cfg: &FiberConfig, seed: u64) -> Result<ComplexFrame> {
    cfg.validate()?;
    check_rate(frame, cfg)?;
    let n = frame.samples.len();
    let z = step_boundaries(cfg, frame.mean_power_w())?;
    let alpha = cfg.alpha_per_km();
    let beta2 = cfg.beta2_symbols();
    let gamma = cfg.gamma_per_w_km;
    let omega = angular_bins(n, 1.0 / cfg.oversampling as f64);
    let mut fft = FftPair::new(n);
    let mut a = frame.samples.clone();

    let lin = |a: &mut Vec<C64>, fft: &mut FftPair, h: f64| {
        if h == 0.0 {
            return;
        }
        fft.forward(a);
        for (v, f) in a
            .iter_mut()
            .zip(dispersion_factors(&omega, beta2, alpha, h))
        {
            *v *= f;
        }
        fft.inverse(a);
    };

    // Adjacent half steps are merged into a single linear operator.
    let h: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
    lin(&mut a, &mut fft, 0.5 * h[0]);
    for i in 0..h.len() {
        if gamma != 0.0 {
            for v in a.iter_mut() {
                *v *= C64::from_polar(1.0, gamma * v.norm_sqr() * h[i]);
            }
        }
        let next = if i + 1 < h.len() { h[i + 1] } else { 0.0 };
        lin(&mut a, &mut fft, 0.5 * (h[i] + next));
    }

    if cfg.edfa {
        let g = (0.5 * alpha * cfg.span_length_km).exp();
        a.iter_mut().for_each(|v| *v *= g);
        if cfg.ase_noise {
            let var = cfg.ase_psd() * cfg.sample_rate_ghz() * 1e9;
            let sd = (0.5 * var).sqrt();
            let mut rng = crate::rng::stream(seed, "ase");
            for v in a.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += C64::new(sd * re, sd * im);
            }
        }
    }

    Ok(ComplexFrame {
        samples: a,
        sample_rate_ghz: frame.sample_rate_ghz,
        launch_power_dbm: frame.launch_power_dbm,
    })
}

/// Exact inverse of the span's accumulated dispersion; attenuation is untouched.
pub fn cd_compensate(frame: &ComplexFrame, cfg: &FiberConfig) -> ComplexFrame {
    let n = frame.samples.len();
    let omega = angular_bins(n, 1.0 / cfg.oversampling as f64);
    let mut fft = FftPair::new(n);
    let mut a = frame.samples.clone();
    fft.forward(&mut a);
    let f = dispersion_factors(&omega, -cfg.beta2_symbols(), 0.0, cfg.span_length_km);
    for (v, f) in a.iter_mut().zip(f) {
        *v *= f;
    }
    fft.inverse(&mut a);
    ComplexFrame {
        samples: a,
        sample_rate_ghz: frame.sample_rate_ghz,
        launch_power_dbm: frame.launch_power_dbm,
    }
}
