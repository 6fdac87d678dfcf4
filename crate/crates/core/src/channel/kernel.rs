//! First-order regular-perturbation coefficients for a single span.
//!
//! `C[k,l] = ∫_0^L e^{-αz} Σ_τ g_z*(τ) g_z(τ-k) g_z(τ-l) g_z*(τ-k-l) dτ dz`
//! where `g_z` is the unit-energy pulse after dispersion over distance `z`
//! and τ runs in symbol periods. The τ sum is taken on a fine grid and the
//! z integral by composite Simpson.

use super::fft::{angular_bins, FftPair};
use super::rrc::raised_cosine;
use super::FiberConfig;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelPulse {
    /// The transmitted root-raised-cosine pulse.
    #[default]
    Rrc,
    /// Gaussian pulse with the RMS bandwidth of the raised cosine.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationKernel {
    k_mem: usize,
    /// Row-major over `k, l ∈ -K..=K`, in km.
    coeffs: Vec<C64>,
    gamma_per_w_km: f64,
}

impl PerturbationKernel {
    pub fn from_coeffs(k_mem: usize, coeffs: Vec<C64>, gamma_per_w_km: f64) -> Result<Self> {
        let w = 2 * k_mem + 1;
        if coeffs.len() != w * w {
            return Err(Error::usage(format!(
                "kernel table needs {} entries, got {}",
                w * w,
                coeffs.len()
            )));
        }
        Ok(Self {
            k_mem,
            coeffs,
            gamma_per_w_km,
        })
    }

    pub fn zeros(k_mem: usize, gamma_per_w_km: f64) -> Self {
        let w = 2 * k_mem + 1;
        Self {
            k_mem,
            coeffs: vec![C64::new(0.0, 0.0); w * w],
            gamma_per_w_km,
        }
    }

    pub fn k_mem(&self) -> usize {
        self.k_mem
    }

    pub fn width(&self) -> usize {
        2 * self.k_mem + 1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_per_w_km
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn get(&self, k: isize, l: isize) -> C64 {
        let km = self.k_mem as isize;
        assert!(k.abs() <= km && l.abs() <= km, "kernel index out of range");
        self.coeffs[((k + km) as usize) * self.width() + (l + km) as usize]
    }

    /// Same coefficients with γ multiplied by `s`; `s = 0` gives a linear channel.
    pub fn with_gamma_scale(&self, s: f64) -> Self {
        Self {
            gamma_per_w_km: self.gamma_per_w_km * s,
            ..self.clone()
        }
    }

    /// Restriction to a smaller memory.
    pub fn truncated(&self, k_mem: usize) -> Self {
        let k_mem = k_mem.min(self.k_mem);
        let km = k_mem as isize;
        let coeffs = (-km..=km)
            .flat_map(|k| (-km..=km).map(move |l| (k, l)))
            .map(|(k, l)| self.get(k, l))
            .collect();
        Self {
            k_mem,
            coeffs,
            gamma_per_w_km: self.gamma_per_w_km,
        }
    }

    /// `j γ P` for launch power `P`: the coefficient of the nonlinear term in
    /// normalized units (received symbols divided by `√P`).
    pub fn normalized_coefficient(&self, launch_power_w: f64) -> C64 {
        C64::new(0.0, self.gamma_per_w_km * launch_power_w)
    }

    /// Fraction of `Σ|C|²` inside `max(|k|,|l|) ≤ K` for `K = 0..=K_mem`.
    pub fn energy_profile(&self) -> Vec<f64> {
        let km = self.k_mem as isize;
        let mut shell = vec![0.0; self.k_mem + 1];
        for k in -km..=km {
            for l in -km..=km {
                shell[k.unsigned_abs().max(l.unsigned_abs())] += self.get(k, l).norm_sqr();
            }
        }
        let total: f64 = shell.iter().sum();
        let mut acc = 0.0;
        shell
            .iter()
            .map(|s| {
                acc += s;
                if total > 0.0 {
                    acc / total
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Smallest `K` holding at least `fraction` of the kernel energy.
    pub fn effective_memory(&self, fraction: f64) -> usize {
        self.energy_profile()
            .iter()
            .position(|&e| e >= fraction - 1e-15)
            .unwrap_or(self.k_mem)
    }
}

/// Kernel for the configured fiber with the transmitted RRC pulse.
pub fn kernel_from_fiber(cfg: &FiberConfig, k_mem: usize) -> Result<PerturbationKernel> {
    kernel_from_fiber_with(cfg, k_mem, KernelPulse::Rrc, Execution::default())
}

pub fn kernel_from_fiber_with(
    cfg: &FiberConfig,
    k_mem: usize,
    pulse: KernelPulse,
    exec: Execution,
) -> Result<PerturbationKernel> {
    cfg.validate()?;
    if k_mem == 0 {
        return Err(Error::domain("K_mem must be at least 1"));
    }
    let os = 4usize;
    let beta2 = cfg.beta2_symbols();
    let length = cfg.span_length_km;
    let spread = beta2.abs() * length * 2.0 * std::f64::consts::PI * (1.0 + cfg.rrc_rolloff);
    let symbols = (2.0 * (spread + 2.0 * k_mem as f64 + 48.0)).ceil() as usize;
    let n = symbols.next_power_of_two() * os;
    let omega = angular_bins(n, 1.0 / os as f64);
    let spectrum = pulse_spectrum(&omega, os, cfg.rrc_rolloff, pulse);

    let intervals = (2.0 * (length / 0.5 / 2.0).ceil()) as usize;
    let dz = length / intervals as f64;
    let alpha = cfg.alpha_per_km();
    let w = 2 * k_mem + 1;
    let km = k_mem as isize;
    let dtau = 1.0 / os as f64;

    let slices: Vec<Vec<C64>> = exec.map(intervals + 1, |iz| {
        let z = iz as f64 * dz;
        let mut g: Vec<C64> = spectrum
            .iter()
            .zip(&omega)
            .map(|(s, w)| s * C64::new(0.0, 0.5 * beta2 * w * w * z).exp())
            .collect();
        FftPair::new(n).inverse(&mut g);
        let shift = |t: usize, m: isize| -> C64 {
            g[(t as isize - m * os as isize).rem_euclid(n as isize) as usize]
        };
        let mut out = vec![C64::new(0.0, 0.0); w * w];
        for k in -km..=km {
            for l in k..=km {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..n {
                    acc += g[t].conj() * shift(t, k) * shift(t, l) * shift(t, k + l).conj();
                }
                let v = acc * dtau;
                out[((k + km) as usize) * w + (l + km) as usize] = v;
                out[((l + km) as usize) * w + (k + km) as usize] = v;
            }
        }
        let weight = if iz == 0 || iz == intervals {
            1.0
        } else if iz % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let scale = weight * dz / 3.0 * (-alpha * z).exp();
        out.iter_mut().for_each(|v| *v *= scale);
        out
    });

    let mut coeffs = vec![C64::new(0.0, 0.0); w * w];
    for s in &slices {
        for (c, v) in coeffs.iter_mut().zip(s) {
            *c += v;
        }
    }
    PerturbationKernel::from_coeffs(k_mem, coeffs, cfg.gamma_per_w_km)
}

/// Pulse spectrum per bin, scaled so the time samples are `h(n/os)` with
/// `Σ|h|²/os = 1`.
fn pulse_spectrum(omega: &[f64], os: usize, rolloff: f64, pulse: KernelPulse) -> Vec<C64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let rc: Vec<f64> = omega
        .iter()
        .map(|w| raised_cosine(w / two_pi, rolloff))
        .collect();
    let amp: Vec<f64> = match pulse {
        KernelPulse::Rrc => rc.iter().map(|r| r.sqrt()).collect(),
        KernelPulse::Gaussian => {
            let norm: f64 = rc.iter().sum();
            let var_f = omega
                .iter()
                .zip(&rc)
                .map(|(w, r)| (w / two_pi).powi(2) * r)
                .sum::<f64>()
                / norm;
            // |H(f)|² ∝ exp(-f²/(2σ²)) with σ² the raised-cosine frequency variance.
            omega
                .iter()
                .map(|w| (-(w / two_pi).powi(2) / (4.0 * var_f)).exp())
                .collect()
        }
    };
    let n = omega.len() as f64;
    let energy: f64 = amp.iter().map(|a| a * a).sum::<f64>() / n / os as f64;
    let scale = (1.0 / energy).sqrt();
    amp.into_iter().map(|a| C64::new(a * scale, 0.0)).collect()
}
