//! Experiment configuration: defaults, flat key=value files, flag overrides.

use kfh_core::reconstruct::ReconstructionConfig;
use kfh_core::spdc::OpticalParams;
use std::fmt;
use std::path::Path;

/// Everything a command needs, assembled from defaults, an optional config
/// file, and command-line overrides (in that order).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Pixels per transverse axis per particle; the subspace dimension is
    /// its square.
    pub side: usize,
    /// Requested measurement count before deduplication.
    pub measurements: usize,
    pub seed: u64,
    /// Pump wavelength, meters.
    pub pump_wavelength: f64,
    /// Crystal length, meters.
    pub crystal_length: f64,
    /// Pump intensity standard deviation, meters.
    pub pump_sigma: f64,
    /// Coincidence rate, counts per second.
    pub flux: f64,
    /// Integration time per displayed pattern combination, seconds.
    pub t_proj: f64,
    /// Correlation widths of the synthetic source, in pixel-pitch units.
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub pixel_pitch: f64,
    pub max_iterations: usize,
    pub min_iterations: usize,
    pub hard_threshold_step: f64,
    pub initial_constant: Option<f64>,
    pub wavelet_levels: usize,
    pub use_marginals: bool,
    pub noiseless: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let recon = ReconstructionConfig::default();
        Self {
            side: 16,
            measurements: 1000,
            seed: 1,
            pump_wavelength: 325e-9,
            crystal_length: 1e-3,
            pump_sigma: 3e-4,
            flux: 1.6e4,
            t_proj: 2.0,
            sigma_plus: 4.0,
            sigma_minus: 0.75,
            pixel_pitch: 1.0,
            max_iterations: recon.max_iterations,
            min_iterations: recon.min_iterations,
            hard_threshold_step: recon.hard_threshold_step,
            initial_constant: recon.initial_constant,
            wavelet_levels: recon.wavelet_levels,
            use_marginals: recon.use_marginal_mask,
            noiseless: false,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Merge a flat `key = value` file into this configuration. Lines may
    /// be empty or start with `#`; unknown keys are rejected.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    number + 1
                ))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("{}:{}: {}", path.display(), number + 1, e.0)))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| ConfigError(format!("bad value for {key}: {e}")))
        }
        match key {
            "side" => self.side = parse(key, value)?,
            "measurements" => self.measurements = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "pump_wavelength" => self.pump_wavelength = parse(key, value)?,
            "crystal_length" => self.crystal_length = parse(key, value)?,
            "pump_sigma" => self.pump_sigma = parse(key, value)?,
            "flux" => self.flux = parse(key, value)?,
            "t_proj" => self.t_proj = parse(key, value)?,
            "sigma_plus" => self.sigma_plus = parse(key, value)?,
            "sigma_minus" => self.sigma_minus = parse(key, value)?,
            "pixel_pitch" => self.pixel_pitch = parse(key, value)?,
            "max_iterations" => self.max_iterations = parse(key, value)?,
            "min_iterations" => self.min_iterations = parse(key, value)?,
            "hard_threshold_step" => self.hard_threshold_step = parse(key, value)?,
            "initial_constant" => self.initial_constant = Some(parse(key, value)?),
            "wavelet_levels" => self.wavelet_levels = parse(key, value)?,
            "use_marginals" => self.use_marginals = parse(key, value)?,
            "noiseless" => self.noiseless = parse(key, value)?,
            other => return Err(ConfigError(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.side < 2 || !self.side.is_power_of_two() {
            return Err(ConfigError(format!(
                "side must be a power of two >= 2, got {}",
                self.side
            )));
        }
        if self.measurements == 0 {
            return Err(ConfigError("measurements must be positive".into()));
        }
        self.optical_params()
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        self.reconstruction_config()
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        if !(self.sigma_plus > 0.0 && self.sigma_minus > 0.0 && self.pixel_pitch > 0.0) {
            return Err(ConfigError(
                "sigma_plus, sigma_minus and pixel_pitch must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn optical_params(&self) -> OpticalParams {
        OpticalParams {
            lambda_p: self.pump_wavelength,
            l_z: self.crystal_length,
            sigma_p: self.pump_sigma,
            flux: self.flux,
            t_proj: self.t_proj,
        }
    }

    pub fn reconstruction_config(&self) -> ReconstructionConfig {
        ReconstructionConfig {
            max_iterations: self.max_iterations,
            min_iterations: self.min_iterations,
            hard_threshold_step: self.hard_threshold_step,
            initial_constant: self.initial_constant,
            wavelet_levels: self.wavelet_levels,
            use_marginal_mask: self.use_marginals,
        }
    }
}
