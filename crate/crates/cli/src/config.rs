//! Experiment configuration: one TOML file per experiment, flat `key = value`
//! pairs under section headers, physical units spelled out in key names.
//! Every key has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use pas_core::channel::{FiberConfig, KernelPulse, StepPolicy};
use pas_core::selection::{SelectionConfig, SelectionMetric};
use pas_core::training::{GradCheckConfig, Objective, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; `--seed` overrides it.
    pub seed: u64,
    pub constellation: ConstellationSection,
    pub fiber: FiberSection,
    pub kernel: KernelSection,
    pub ess: EssSection,
    pub selection: SelectionSection,
    pub train: TrainSection,
    pub rateloss: RateLossSection,
    pub airsweep: AirSweepSection,
    pub gradcheck: GradCheckSection,
    pub adm_roundtrip: AdmRoundtripSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            constellation: ConstellationSection::default(),
            fiber: FiberSection::default(),
            kernel: KernelSection::default(),
            ess: EssSection::default(),
            selection: SelectionSection::default(),
            train: TrainSection::default(),
            rateloss: RateLossSection::default(),
            airsweep: AirSweepSection::default(),
            gradcheck: GradCheckSection::default(),
            adm_roundtrip: AdmRoundtripSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationSection {
    pub order: usize,
}

impl Default for ConstellationSection {
    fn default() -> Self {
        Self { order: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub span_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_per_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub noise_figure_db: f64,
    pub center_wavelength_nm: f64,
    pub symbol_rate_gbd: f64,
    pub rrc_rolloff: f64,
    pub oversampling: usize,
    /// `"adaptive"` or `"fixed"`.
    pub step_policy: String,
    pub max_nonlinear_phase_rad: f64,
    pub min_steps: usize,
    /// Step count for the fixed policy.
    pub steps: usize,
    pub edfa: bool,
    pub ase_noise: bool,
}

impl Default for FiberSection {
    fn default() -> Self {
        let f = FiberConfig::default();
        let (max_phase, min_steps) = match f.steps {
            StepPolicy::Adaptive {
                max_phase_rad,
                min_steps,
            } => (max_phase_rad, min_steps),
            StepPolicy::Fixed {
                steps,
                max_phase_rad,
            } => (max_phase_rad, steps),
        };
        Self {
            span_length_km: f.span_length_km,
            attenuation_db_per_km: f.attenuation_db_per_km,
            dispersion_ps_per_nm_km: f.dispersion_ps_per_nm_km,
            gamma_per_w_km: f.gamma_per_w_km,
            noise_figure_db: f.noise_figure_db,
            center_wavelength_nm: f.center_wavelength_nm,
            symbol_rate_gbd: f.symbol_rate_gbd,
            rrc_rolloff: f.rrc_rolloff,
            oversampling: f.oversampling,
            step_policy: "adaptive".into(),
            max_nonlinear_phase_rad: max_phase,
            min_steps,
            steps: min_steps,
            edfa: f.edfa,
            ase_noise: f.ase_noise,
        }
    }
}

impl FiberSection {
    pub fn to_core(&self) -> CliResult<FiberConfig> {
        let steps = match self.step_policy.as_str() {
            "adaptive" => StepPolicy::Adaptive {
                max_phase_rad: self.max_nonlinear_phase_rad,
                min_steps: self.min_steps,
            },
            "fixed" => StepPolicy::Fixed {
                steps: self.steps,
                max_phase_rad: self.max_nonlinear_phase_rad,
            },
            other => {
                return Err(CliError::Config(format!(
                    "fiber.step_policy must be \"adaptive\" or \"fixed\", got \"{other}\""
                )))
            }
        };
        let cfg = FiberConfig {
            span_length_km: self.span_length_km,
            attenuation_db_per_km: self.attenuation_db_per_km,
            dispersion_ps_per_nm_km: self.dispersion_ps_per_nm_km,
            gamma_per_w_km: self.gamma_per_w_km,
            noise_figure_db: self.noise_figure_db,
            center_wavelength_nm: self.center_wavelength_nm,
            symbol_rate_gbd: self.symbol_rate_gbd,
            rrc_rolloff: self.rrc_rolloff,
            oversampling: self.oversampling,
            steps,
            edfa: self.edfa,
            ase_noise: self.ase_noise,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Kernel half-width `K` in symbols.
    pub memory_symbols: usize,
    /// `"rrc"` or `"gaussian"`.
    pub pulse: String,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            memory_symbols: 16,
            pulse: "rrc".into(),
        }
    }
}

impl KernelSection {
    pub fn pulse(&self) -> CliResult<KernelPulse> {
        match self.pulse.as_str() {
            "rrc" => Ok(KernelPulse::Rrc),
            "gaussian" => Ok(KernelPulse::Gaussian),
            other => Err(CliError::Config(format!(
                "kernel.pulse must be \"rrc\" or \"gaussian\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EssSection {
    /// Amplitudes per ESS block.
    pub blocklength: usize,
    /// Target shaping rate `k/N`.
    pub shaping_rate_bits_per_1d: f64,
}

impl Default for EssSection {
    fn default() -> Self {
        Self {
            blocklength: 32,
            shaping_rate_bits_per_1d: 1.93,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub blocklength_symbols: usize,
    pub candidates: usize,
    /// `"nlin-proxy"` or `"constant"`.
    pub metric: String,
    pub metric_memory_symbols: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let s = SelectionConfig::default();
        Self {
            blocklength_symbols: s.blocklength,
            candidates: s.candidates,
            metric: s.metric.as_str().into(),
            metric_memory_symbols: s.metric_memory,
        }
    }
}

impl SelectionSection {
    pub fn to_core(&self) -> CliResult<SelectionConfig> {
        let cfg = SelectionConfig {
            blocklength: self.blocklength_symbols,
            candidates: self.candidates,
            metric: SelectionMetric::parse(&self.metric)?,
            metric_memory: self.metric_memory_symbols,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// `"L"` or `"Lpp"`.
    pub objective: String,
    pub memory: usize,
    pub lambda: f64,
    pub temperature_start: f64,
    pub temperature_end: f64,
    pub batch: usize,
    pub sequence_length: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub steps: usize,
    pub launch_power_dbm: f64,
    pub max_grad_norm: f64,
    /// Standard deviation of the random initial logits.
    pub init_spread: f64,
    /// Entropy of the Maxwell–Boltzmann target of the KL term.
    pub mb_entropy_bits_per_1d: f64,
    /// Fixed demapper noise variance (relative to launch power); 0 estimates it per batch.
    pub demapper_noise_variance: f64,
    /// Where the trained model goes; empty derives it from `--out`.
    pub model_out: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            objective: "Lpp".into(),
            memory: 1,
            lambda: 20.0,
            temperature_start: t.temperature_start,
            temperature_end: t.temperature_end,
            batch: t.batch,
            sequence_length: t.sequence_length,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            steps: t.steps,
            launch_power_dbm: 8.0,
            max_grad_norm: t.max_grad_norm,
            init_spread: 0.3,
            mb_entropy_bits_per_1d: 1.93,
            demapper_noise_variance: 0.0,
            model_out: String::new(),
        }
    }
}

pub fn parse_objective(s: &str) -> CliResult<Objective> {
    match s {
        "L" => Ok(Objective::L),
        "Lpp" | "L++" => Ok(Objective::Lpp),
        other => Err(CliError::Config(format!(
            "objective must be \"L\" or \"Lpp\", got \"{other}\""
        ))),
    }
}

impl TrainSection {
    pub fn to_core(&self, seed: u64) -> CliResult<TrainConfig> {
        let cfg = TrainConfig {
            objective: parse_objective(&self.objective)?,
            lambda: self.lambda,
            temperature_start: self.temperature_start,
            temperature_end: self.temperature_end,
            batch: self.batch,
            sequence_length: self.sequence_length,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            steps: self.steps,
            seed,
            launch_power_dbm: self.launch_power_dbm,
            max_grad_norm: self.max_grad_norm,
        };
        cfg.validate()?;
        if self.memory > 3 {
            return Err(CliError::Config("train.memory must be at most 3".into()));
        }
        if !(self.init_spread >= 0.0) || !(self.demapper_noise_variance >= 0.0) {
            return Err(CliError::Config(
                "train.init_spread and train.demapper_noise_variance must be nonnegative".into(),
            ));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateLossSection {
    pub model_path: String,
    pub payload_bits: Vec<usize>,
    pub trials: usize,
}

impl Default for RateLossSection {
    fn default() -> Self {
        Self {
            model_path: String::new(),
            payload_bits: vec![128, 256, 512, 1024, 2048, 4096],
            trials: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirSweepSection {
    /// Any of `uniform`, `ess`, `ess+sel`, `seq-npas`, `seq-npas++`.
    pub schemes: Vec<String>,
    pub launch_powers_dbm: Vec<f64>,
    pub symbols_per_frame: usize,
    pub frames: usize,
    /// Trained model for `seq-npas`; empty trains one with objective L.
    pub seq_npas_model: String,
    /// Trained model for `seq-npas++`; empty trains one with objective Lpp.
    pub seq_npas_pp_model: String,
}

impl Default for AirSweepSection {
    fn default() -> Self {
        Self {
            schemes: ["uniform", "ess", "ess+sel", "seq-npas", "seq-npas++"]
                .map(String::from)
                .to_vec(),
            launch_powers_dbm: vec![-2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            symbols_per_frame: 8192,
            frames: 2,
            seq_npas_model: String::new(),
            seq_npas_pp_model: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    /// Constellation of the tiny instance (16 gives 4 unsigned symbols).
    pub order: usize,
    pub memory: usize,
    pub sequence_length: usize,
    pub lambda: f64,
    pub finite_difference_step: f64,
    pub launch_power_dbm: f64,
    pub demapper_noise_variance: f64,
    pub kernel_memory_symbols: usize,
    pub init_spread: f64,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        let g = GradCheckConfig::default();
        Self {
            order: 16,
            memory: 1,
            sequence_length: 5,
            lambda: g.lambda,
            finite_difference_step: g.step,
            launch_power_dbm: 6.0,
            demapper_noise_variance: 0.08,
            kernel_memory_symbols: 2,
            init_spread: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmRoundtripSection {
    /// Model to drive the matcher; empty uses a Maxwell–Boltzmann i.i.d. model.
    pub model_path: String,
    pub payload_bits: Vec<usize>,
    pub trials: usize,
    /// Entropy of the fallback Maxwell–Boltzmann model.
    pub mb_entropy_bits_per_1d: f64,
    /// Optional frame file holding the first encoded payload.
    pub frame_out: String,
}

impl Default for AdmRoundtripSection {
    fn default() -> Self {
        Self {
            model_path: String::new(),
            payload_bits: vec![64, 2048],
            trials: 10000,
            mb_entropy_bits_per_1d: 1.93,
            frame_out: String::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Resolves a path from the config relative to the config file's directory.
pub fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let p = Path::new(p);
    match base.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(
            ExperimentConfig::parse("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn emit_parse_is_idempotent() {
        let text = "seed = 9\n[fiber]\nspan_length_km = 80.0\n[airsweep]\nschemes = [\"ess\"]\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let once = cfg.emit();
        let twice = ExperimentConfig::parse(&once).unwrap().emit();
        assert_eq!(once, twice);
        assert_eq!(ExperimentConfig::parse(&once).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(matches!(
            ExperimentConfig::parse("[fiber]\nspan_km = 3\n"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("[fiber]\nspan_length_km = \"far\"\n"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn sections_convert() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.fiber.to_core().unwrap(), FiberConfig::default());
        assert_eq!(cfg.selection.to_core().unwrap(), SelectionConfig::default());
        assert_eq!(cfg.train.to_core(1).unwrap().objective, Objective::Lpp);
        let mut bad = cfg.fiber.clone();
        bad.step_policy = "random".into();
        assert!(bad.to_core().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let p = resolve(Some(Path::new("/a/b/exp.toml")), "m.model");
        assert_eq!(p, PathBuf::from("/a/b/m.model"));
        assert_eq!(resolve(None, "m.model"), PathBuf::from("m.model"));
        assert_eq!(
            resolve(Some(Path::new("/a/exp.toml")), "/x"),
            PathBuf::from("/x")
        );
    }
}
