use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacker::AttackConfig;
use crate::autoencoder::{TrainConfig, DEFAULT_DIMS, DEFAULT_LATENT_DIM};
use crate::channel::{LinkBudget, SvParams};
use crate::detector::ThStatistic;
use crate::par::Execution;
use crate::receiver::EdgeParams;
use crate::signal::FrameConfig;
use crate::{Error, Result};

/// Which device runs the integrity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectorSide {
    /// After the Response; an attack suspends ranging before the Final.
    #[default]
    Initiator,
    /// After the Final, comparing against features carried in the Final.
    Responder,
}

/// How often the legitimate devices derive a new STS from the frame seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StsRefresh {
    /// `frame.sts_seed` as is, for every message of every round.
    Fixed,
    /// One fresh STS per round, shared by Poll, Response and Final.
    #[default]
    PerRound,
    /// A fresh STS for every message.
    PerMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub enabled: bool,
    pub q: u8,
    pub alpha_t: f64,
    pub t_h_statistic: ThStatistic,
    pub side: DetectorSide,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            enabled: true,
            q: 4,
            alpha_t: 0.5,
            t_h_statistic: ThStatistic::Max,
            side: DetectorSide::Initiator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Autoencoder widths; the first entry is also the CIR window length.
    pub dims: Vec<usize>,
    pub latent_dim: usize,
    /// Unattacked CIR pairs generated for training and calibration.
    pub dataset_pairs: u64,
    /// Seed for weight initialization.
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dims: DEFAULT_DIMS.to_vec(),
            latent_dim: DEFAULT_LATENT_DIM,
            dataset_pairs: 20_000,
            init_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Same architecture with a different latent width.
    pub fn with_latent(&self, latent: usize) -> Self {
        let mut c = self.clone();
        for d in &mut c.dims {
            if *d == self.latent_dim {
                *d = latent;
            }
        }
        c.latent_dim = latent;
        c
    }

    /// Same architecture with a different input/output width.
    pub fn with_input(&self, input: usize) -> Self {
        let mut c = self.clone();
        let last = c.dims.len() - 1;
        c.dims[0] = input;
        c.dims[last] = input;
        c
    }
}

/// Ranging-error histogram bins, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub lo_m: f64,
    pub bin_width_m: f64,
    pub bins: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig {
            lo_m: -30.0,
            bin_width_m: 0.5,
            bins: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub true_distance_m: f64,
    pub snr_db: f64,
    /// `false` runs the link noiseless regardless of `snr_db`.
    pub noise: bool,
    pub attack: AttackConfig,
    pub edge: EdgeParams,
    pub frame: FrameConfig,
    pub sts_refresh: StsRefresh,
    pub channel: SvParams,
    pub detector: DetectorConfig,
    pub model: ModelConfig,
    pub trials: u64,
    pub master_seed: u64,
    pub success_distance_m: f64,
    /// Both reply delays, seconds.
    pub reply_time_s: f64,
    pub histogram: HistogramConfig,
    pub execution: Execution,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            true_distance_m: 10.0,
            snr_db: 10.0,
            noise: true,
            attack: AttackConfig::default(),
            edge: EdgeParams::default(),
            frame: FrameConfig::legitimate(),
            sts_refresh: StsRefresh::PerRound,
            channel: SvParams::default(),
            detector: DetectorConfig::default(),
            model: ModelConfig::default(),
            trials: 1000,
            master_seed: 0,
            success_distance_m: 5.0,
            reply_time_s: 1e-3,
            histogram: HistogramConfig::default(),
            execution: Execution::Parallel,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be > 0"));
        }
        if !(self.true_distance_m > 0.0 && self.true_distance_m.is_finite()) {
            return Err(Error::config("true_distance_m must be positive"));
        }
        if !(self.success_distance_m < self.true_distance_m) {
            return Err(Error::config("success_distance_m must be below true_distance_m"));
        }
        if self.noise && !self.snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite when noise is on"));
        }
        if !(self.reply_time_s > 0.0 && self.reply_time_s.is_finite()) {
            return Err(Error::config("reply_time_s must be positive"));
        }
        let h = &self.histogram;
        if h.bins == 0 || !(h.bin_width_m > 0.0) || !h.lo_m.is_finite() {
            return Err(Error::config("histogram needs bins > 0 and a positive bin width"));
        }
        let d = &self.detector;
        if !matches!(d.q, 1 | 2 | 4 | 8) {
            return Err(Error::config("detector.q must be 1, 2, 4 or 8"));
        }
        if !(d.alpha_t > 0.0 && d.alpha_t < 1.0) {
            return Err(Error::config("detector.alpha_t must be in (0, 1)"));
        }
        let m = &self.model;
        if m.dims.len() < 3 || m.dims.first() != m.dims.last() || !m.dims[1..m.dims.len() - 1].contains(&m.latent_dim)
        {
            return Err(Error::config(
                "model.dims must have equal input and output widths and contain latent_dim",
            ));
        }
        if self.cir_window() <= self.edge.btw_samples {
            return Err(Error::config("model input width (CIR window) must exceed edge.btw_samples"));
        }
        m.train.validate()?;
        self.edge.validate()?;
        self.frame.validate()?;
        self.channel.validate()?;
        if self.attack.enabled {
            self.attack.validate()?;
        }
        Ok(())
    }

    /// CIR window length, tied to the autoencoder input width.
    pub fn cir_window(&self) -> usize {
        self.model.dims[0]
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            snr_db: if self.noise { self.snr_db } else { f64::INFINITY },
            sir_db: if self.attack.enabled {
                self.attack.sir_db
            } else {
                f64::INFINITY
            },
        }
    }
}
