//! One-parameter sweeps.
//!
//! Every value runs an unattacked (H0) and an attacked (H1) campaign of
//! `base.trials` rounds each. H0 campaigns use `base.master_seed` and H1
//! campaigns `base.master_seed + H1_SEED_OFFSET` for every value, so values
//! are compared on common random numbers. Simulations are shared between
//! values whenever the swept parameter does not touch the physical layer.

use serde::{Deserialize, Serialize};

use super::campaign::{aggregate, simulate_campaign, MetricsReport};
use super::config::ScenarioConfig;
use super::dataset::{generate_dataset, Dataset};
use super::pipeline::{calibrate, detector_for, train_model};
use super::round::{evaluate, Detector, RoundObservation};
use crate::{Error, Result};

pub const H1_SEED_OFFSET: u64 = 0x0001_0000_0000;

/// Seed offset for datasets regenerated inside an input-width sweep.
pub const DATASET_SEED_OFFSET: u64 = 0x0002_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    InputDim,
    OutputDim,
    QBits,
    AlphaT,
    SirDb,
    SnrDb,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::InputDim => "input_dim",
            SweepParameter::OutputDim => "output_dim",
            SweepParameter::QBits => "q_bits",
            SweepParameter::AlphaT => "alpha_t",
            SweepParameter::SirDb => "sir_db",
            SweepParameter::SnrDb => "snr_db",
        }
    }

    /// Default grid for the parameter.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParameter::InputDim => vec![500.0, 600.0, 700.0, 800.0],
            SweepParameter::OutputDim => vec![8.0, 16.0, 32.0, 64.0],
            SweepParameter::QBits => vec![1.0, 2.0, 4.0],
            SweepParameter::AlphaT => vec![0.3, 0.5, 0.7],
            SweepParameter::SirDb => vec![-10.0, -7.5, -5.0, -2.5, 0.0],
            SweepParameter::SnrDb => vec![0.0, 5.0, 10.0, 15.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub p_fa: Option<f64>,
    pub p_m: Option<f64>,
    pub p_s: Option<f64>,
    /// Valid rounds over both campaigns.
    pub n: u64,
}

fn integral(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e6 {
        Ok(v as usize)
    } else {
        Err(Error::config(format!("{what} sweep value {v} is not a positive integer")))
    }
}

fn bits(v: f64) -> Result<u8> {
    match integral(v, "q_bits")? {
        q @ (1 | 2 | 4 | 8) => Ok(q as u8),
        q => Err(Error::config(format!("q_bits sweep value {q} is not 1, 2, 4 or 8"))),
    }
}

struct Observed {
    obs: Vec<RoundObservation>,
    invalid: u64,
}

fn simulate(s: &ScenarioConfig) -> Result<Observed> {
    let (obs, invalid) = simulate_campaign(s)?;
    Ok(Observed { obs, invalid })
}

fn hypotheses(base: &ScenarioConfig) -> (ScenarioConfig, ScenarioConfig) {
    let mut h0 = base.clone();
    h0.attack.enabled = false;
    let mut h1 = base.clone();
    h1.attack.enabled = true;
    h1.master_seed = base.master_seed.wrapping_add(H1_SEED_OFFSET);
    (h0, h1)
}

fn judge(s: &ScenarioConfig, h0: &Observed, h1: &Observed, det: &Detector) -> Result<MetricsReport> {
    let mut records = evaluate(s, &h0.obs, Some(det))?;
    records.extend(evaluate(s, &h1.obs, Some(det))?);
    Ok(aggregate(s, &records, h0.invalid + h1.invalid))
}

fn row(value: f64, m: &MetricsReport) -> SweepRow {
    SweepRow {
        value,
        p_fa: m.p_fa,
        p_m: m.p_m,
        p_s: m.p_s,
        n: m.n_valid,
    }
}

/// Run the sweep. `data` and `detector` are the base scenario's training set
/// and calibrated model; they are reused or rebuilt as the parameter needs.
pub fn sweep(
    param: SweepParameter,
    values: &[f64],
    base: &ScenarioConfig,
    data: &Dataset,
    detector: &Detector,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    base.validate()?;
    let mut base = base.clone();
    base.detector.enabled = true;
    let (h0_cfg, h1_cfg) = hypotheses(&base);
    let shared = || -> Result<(Observed, Observed)> { Ok((simulate(&h0_cfg)?, simulate(&h1_cfg)?)) };
    let mut rows = Vec::with_capacity(values.len());

    match param {
        SweepParameter::QBits | SweepParameter::AlphaT | SweepParameter::OutputDim => {
            let (h0, h1) = shared()?;
            for &v in values {
                let mut s = base.clone();
                let det = match param {
                    SweepParameter::QBits => {
                        s.detector.q = bits(v)?;
                        recalibrated(&s, detector, data)?
                    }
                    SweepParameter::AlphaT => {
                        s.detector.alpha_t = v;
                        s.validate()?;
                        recalibrated(&s, detector, data)?
                    }
                    _ => {
                        s.model = s.model.with_latent(integral(v, "output_dim")?);
                        s.validate()?;
                        let (model, _) = train_model(&s, data)?;
                        detector_for(&s, model, data)?
                    }
                };
                rows.push(row(v, &judge(&s, &h0, &h1, &det)?));
            }
        }
        SweepParameter::SirDb => {
            let h0 = simulate(&h0_cfg)?;
            for &v in values {
                let mut h1s = h1_cfg.clone();
                h1s.attack.sir_db = v;
                let h1 = simulate(&h1s)?;
                rows.push(row(v, &judge(&h1s, &h0, &h1, detector)?));
            }
        }
        SweepParameter::SnrDb => {
            for &v in values {
                let (mut h0s, mut h1s) = (h0_cfg.clone(), h1_cfg.clone());
                h0s.snr_db = v;
                h1s.snr_db = v;
                let (h0, h1) = (simulate(&h0s)?, simulate(&h1s)?);
                rows.push(row(v, &judge(&h0s, &h0, &h1, detector)?));
            }
        }
        SweepParameter::InputDim => {
            for &v in values {
                let mut s = base.clone();
                s.model = s.model.with_input(integral(v, "input_dim")?);
                s.validate()?;
                let mut ds = s.clone();
                ds.master_seed = base.master_seed.wrapping_add(DATASET_SEED_OFFSET);
                let fresh = generate_dataset(&ds, data.len() as u64)?;
                let (model, _) = train_model(&s, &fresh)?;
                let det = detector_for(&s, model, &fresh)?;
                let (h0s, h1s) = hypotheses(&s);
                let (h0, h1) = (simulate(&h0s)?, simulate(&h1s)?);
                rows.push(row(v, &judge(&s, &h0, &h1, &det)?));
            }
        }
    }
    Ok(rows)
}

fn recalibrated(s: &ScenarioConfig, detector: &Detector, data: &Dataset) -> Result<Detector> {
    let d = &s.detector;
    Ok(Detector {
        model: detector.model.clone(),
        calibration: calibrate(&detector.model, data, d.q, d.alpha_t, d.t_h_statistic)?,
    })
}
