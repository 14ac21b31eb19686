//! Run configuration: a single JSON document shared by every subcommand.
//!
//! Unknown keys are rejected at every level so a typo fails loudly instead of
//! silently falling back to a default.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use qsim_core::circuit::HeaterCalibration;
use qsim_core::experiment::NoiseModel;
use qsim_core::ring::RingParams;

use crate::{usage, CmdResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Config format version; this build reads 1.
    pub schema: u32,
    /// Default RNG seed, overridden by QSIM_SEED and --seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Default output directory, overridden by --out.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// One ring per pumped source; defaults to three calibrated copies.
    #[serde(default = "default_sources")]
    pub sources: Vec<RingParams>,
    #[serde(default)]
    pub heater: HeaterConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub pump: PumpConfig,
    #[serde(default)]
    pub counts: CountConfig,
}

fn default_sources() -> Vec<RingParams> {
    vec![RingParams::calibrated(); 3]
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeaterConfig {
    /// Electrical power for a 2π phase shift, mW.
    pub mw_per_two_pi: f64,
}

impl Default for HeaterConfig {
    fn default() -> Self {
        HeaterConfig {
            mw_per_two_pi: HeaterCalibration::default().mw_per_two_pi,
        }
    }
}

impl HeaterConfig {
    pub fn calibration(&self) -> HeaterCalibration {
        HeaterCalibration {
            mw_per_two_pi: self.mw_per_two_pi,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpConfig {
    /// Relative pump amplitude per source; the state builder normalizes.
    pub splitting: [f64; 3],
    /// Pump phases on the first two paths, radians; the third is the
    /// reference arm.
    pub phases_rad: [f64; 2],
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            splitting: [1.0; 3],
            phases_rad: [0.0; 2],
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountConfig {
    /// Detected pair rate at the analysis stage, 1/s.
    pub pair_rate_hz: f64,
    /// Integration window per measurement setting, s.
    pub integration_time_s: f64,
    /// Expected events per unit probability over one tomography schedule.
    pub tomography_scale: f64,
    /// Resamples behind every Monte Carlo error bar.
    pub mc_samples: usize,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig {
            pair_rate_hz: 5000.0,
            integration_time_s: 1.0,
            tomography_scale: 120_000.0,
            mc_samples: 100,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: 1,
            seed: None,
            out_dir: None,
            sources: default_sources(),
            heater: HeaterConfig::default(),
            noise: NoiseModel::default(),
            pump: PumpConfig::default(),
            counts: CountConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema != 1 {
            bail!(
                "unsupported schema {}; this build reads schema 1",
                self.schema
            );
        }
        if self.sources.len() != 3 {
            bail!("exactly 3 sources are required, got {}", self.sources.len());
        }
        for (i, s) in self.sources.iter().enumerate() {
            s.validate().with_context(|| format!("source {}", i + 1))?;
        }
        self.noise.validate().context("noise")?;
        if !(self.heater.mw_per_two_pi.is_finite() && self.heater.mw_per_two_pi > 0.0) {
            bail!("heater.mw_per_two_pi must be positive and finite");
        }
        if self
            .pump
            .splitting
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0)
        {
            bail!("pump.splitting amplitudes must be finite and non-negative");
        }
        if self.pump.splitting.iter().all(|a| *a == 0.0) {
            bail!("pump.splitting must have at least one nonzero amplitude");
        }
        if self.pump.phases_rad.iter().any(|p| !p.is_finite()) {
            bail!("pump.phases_rad must be finite");
        }
        let c = &self.counts;
        if !(c.pair_rate_hz.is_finite() && c.pair_rate_hz > 0.0) {
            bail!("counts.pair_rate_hz must be positive and finite");
        }
        if !(c.integration_time_s.is_finite() && c.integration_time_s > 0.0) {
            bail!("counts.integration_time_s must be positive and finite");
        }
        if !(c.tomography_scale.is_finite() && c.tomography_scale > 0.0) {
            bail!("counts.tomography_scale must be positive and finite");
        }
        if c.mc_samples < 2 {
            bail!("counts.mc_samples must be at least 2");
        }
        Ok(())
    }
}

/// Loads and validates a config file, or returns the defaults without one.
pub fn load(path: Option<&Path>) -> CmdResult<RunConfig> {
    let Some(p) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(p)
        .map_err(|e| usage(anyhow!(e).context(format!("reading config {}", p.display()))))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| usage(anyhow!(e).context(format!("parsing config {}", p.display()))))?;
    cfg.validate()
        .map_err(|e| usage(e.context(format!("invalid config {}", p.display()))))?;
    Ok(cfg)
}
