use crate::error::{Error, Result};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    /// Logarithmic steps; the count is the smallest that keeps the mean-power
    /// nonlinear phase per step at or below `max_phase_rad`, floored at `min_steps`.
    Adaptive {
        max_phase_rad: f64,
        min_steps: usize,
    },
    /// Fixed number of logarithmic steps; refused when a step would exceed
    /// `max_phase_rad`.
    Fixed { steps: usize, max_phase_rad: f64 },
}

/// Link and transceiver parameters. Units are in the field names.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberConfig {
    pub span_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_per_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub noise_figure_db: f64,
    pub center_wavelength_nm: f64,
    pub symbol_rate_gbd: f64,
    pub rrc_rolloff: f64,
    pub oversampling: usize,
    pub steps: StepPolicy,
    /// EDFA restores the span loss at the end of the fiber.
    pub edfa: bool,
    /// ASE noise added at the EDFA (only with `edfa`).
    pub ase_noise: bool,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            span_length_km: 205.0,
            attenuation_db_per_km: 0.2,
            dispersion_ps_per_nm_km: 17.0,
            gamma_per_w_km: 1.3,
            noise_figure_db: 5.0,
            center_wavelength_nm: 1550.0,
            symbol_rate_gbd: 50.0,
            rrc_rolloff: 0.1,
            oversampling: 4,
            steps: StepPolicy::Adaptive {
                max_phase_rad: 3e-3,
                min_steps: 100,
            },
            edfa: true,
            ase_noise: true,
        }
    }
}

impl FiberConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            (
                "dispersion_ps_per_nm_km",
                self.dispersion_ps_per_nm_km.abs(),
            ),
            ("gamma_per_w_km", self.gamma_per_w_km),
            ("noise_figure_db", self.noise_figure_db),
            ("rrc_rolloff", self.rrc_rolloff),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{name} must be finite and nonnegative"
                )));
            }
        }
        for (name, v) in [
            ("span_length_km", self.span_length_km),
            ("center_wavelength_nm", self.center_wavelength_nm),
            ("symbol_rate_gbd", self.symbol_rate_gbd),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.rrc_rolloff > 1.0 {
            return Err(Error::config("rrc_rolloff must be at most 1"));
        }
        if (self.oversampling as f64) < 2.0 * (1.0 + self.rrc_rolloff) {
            return Err(Error::config(format!(
                "oversampling {} below 2(1+rolloff) = {}",
                self.oversampling,
                2.0 * (1.0 + self.rrc_rolloff)
            )));
        }
        match self.steps {
            StepPolicy::Adaptive {
                max_phase_rad,
                min_steps,
            } if max_phase_rad > 0.0 && min_steps > 0 => {}
            StepPolicy::Fixed {
                steps,
                max_phase_rad,
            } if steps > 0 && max_phase_rad > 0.0 => {}
            _ => return Err(Error::config("invalid step policy")),
        }
        Ok(())
    }

    /// Attenuation in 1/km (field, not power, is `exp(-α z / 2)`).
    pub fn alpha_per_km(&self) -> f64 {
        self.attenuation_db_per_km * std::f64::consts::LN_10 / 10.0
    }

    /// Group-velocity dispersion β2 in ps²/km.
    pub fn beta2_ps2_per_km(&self) -> f64 {
        let c_nm_per_ps = SPEED_OF_LIGHT * 1e-3;
        -self.dispersion_ps_per_nm_km * self.center_wavelength_nm.powi(2)
            / (2.0 * std::f64::consts::PI * c_nm_per_ps)
    }

    /// β2 in symbol-period² per km.
    pub fn beta2_symbols(&self) -> f64 {
        let t_ps = 1000.0 / self.symbol_rate_gbd;
        self.beta2_ps2_per_km() / (t_ps * t_ps)
    }

    pub fn sample_rate_ghz(&self) -> f64 {
        self.symbol_rate_gbd * self.oversampling as f64
    }

    pub fn span_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.span_length_km
    }

    pub fn effective_length_km(&self) -> f64 {
        let a = self.alpha_per_km();
        if a == 0.0 {
            self.span_length_km
        } else {
            (1.0 - (-a * self.span_length_km).exp()) / a
        }
    }

    /// One-sided ASE power spectral density per polarization at the EDFA output, W/Hz.
    pub fn ase_psd(&self) -> f64 {
        let g = 10f64.powf(self.span_loss_db() / 10.0);
        if g <= 1.0 {
            return 0.0;
        }
        let nf = 10f64.powf(self.noise_figure_db / 10.0);
        let n_sp = (nf - 1.0 / g) / (2.0 * (1.0 - 1.0 / g));
        let nu = SPEED_OF_LIGHT / (self.center_wavelength_nm * 1e-9);
        n_sp * PLANCK * nu * (g - 1.0)
    }

    /// ASE noise power in the signal band (symbol rate), W.
    pub fn ase_power_in_band(&self) -> f64 {
        self.ase_psd() * self.symbol_rate_gbd * 1e9
    }

    /// Linear SNR after matched filtering predicted from ASE alone.
    pub fn predicted_snr(&self, launch_power_dbm: f64) -> f64 {
        super::dbm_to_watts(launch_power_dbm) / self.ase_power_in_band()
    }
}
