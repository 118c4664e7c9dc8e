use serde::{Deserialize, Serialize};

use super::config::{HistogramConfig, ScenarioConfig};
use super::round::{evaluate, simulate_round, Detector, RoundDecision, RoundObservation, RoundRecord, Truth};
use crate::par::map_indexed;
use crate::{Error, Result};

/// Ranging error (measured minus true distance) counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub lo_m: f64,
    pub bin_width_m: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl ErrorHistogram {
    pub fn new(cfg: &HistogramConfig) -> Self {
        ErrorHistogram {
            lo_m: cfg.lo_m,
            bin_width_m: cfg.bin_width_m,
            counts: vec![0; cfg.bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn add(&mut self, error_m: f64) {
        let pos = ((error_m - self.lo_m) / self.bin_width_m).floor();
        if pos < 0.0 {
            self.underflow += 1;
        } else if pos >= self.counts.len() as f64 {
            self.overflow += 1;
        } else {
            self.counts[pos as usize] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.counts.iter().sum::<u64>()
    }

    /// Entries with error strictly below `edge_m`, which must be a bin edge.
    pub fn count_below(&self, edge_m: f64) -> Result<u64> {
        let k = (edge_m - self.lo_m) / self.bin_width_m;
        if (k - k.round()).abs() > 1e-9 || k < 0.0 || k > self.counts.len() as f64 {
            return Err(Error::config(format!("{edge_m} m is not a histogram bin edge")));
        }
        Ok(self.underflow + self.counts[..k.round() as usize].iter().sum::<u64>())
    }

    pub fn bin_lower_edge(&self, i: usize) -> f64 {
        self.lo_m + i as f64 * self.bin_width_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_trials: u64,
    pub n_valid: u64,
    /// Rounds aborted by a signal error, excluded from every probability.
    pub n_invalid: u64,
    pub n_h0: u64,
    pub n_h1: u64,
    /// p(flagged | H0); `None` without H0 rounds.
    pub p_fa: Option<f64>,
    /// p(not flagged | H1); `None` without H1 rounds.
    pub p_m: Option<f64>,
    /// p(H1, not flagged, measured below the success distance | H1).
    pub p_s: Option<f64>,
    /// Completed rounds only; flagged rounds contribute nothing.
    pub error_histogram: ErrorHistogram,
    pub config: ScenarioConfig,
}

impl MetricsReport {
    /// Fraction of valid rounds whose reported error is below `edge_m`.
    pub fn fraction_below(&self, edge_m: f64) -> Result<f64> {
        if self.n_valid == 0 {
            return Ok(0.0);
        }
        Ok(self.error_histogram.count_below(edge_m)? as f64 / self.n_valid as f64)
    }

    pub fn detection_rate(&self) -> Option<f64> {
        self.p_m.map(|p| 1.0 - p)
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub report: MetricsReport,
    pub records: Vec<RoundRecord>,
}

/// Simulate `s.trials` rounds. Invalid rounds are counted, not returned.
pub fn simulate_campaign(s: &ScenarioConfig) -> Result<(Vec<RoundObservation>, u64)> {
    s.validate()?;
    let results = map_indexed(s.trials, s.execution, |trial| simulate_round(s, trial, true));
    let mut obs = Vec::with_capacity(results.len());
    let mut invalid = 0;
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => obs.push(o),
            Err(e @ (Error::NoSignal | Error::Data(_))) => {
                log::warn!("trial {trial} invalid: {e}");
                invalid += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((obs, invalid))
}

pub fn aggregate(s: &ScenarioConfig, records: &[RoundRecord], n_invalid: u64) -> MetricsReport {
    let mut hist = ErrorHistogram::new(&s.histogram);
    let (mut n_h0, mut n_h1, mut fa, mut miss, mut success) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for r in records {
        let flagged = r.decision.flagged();
        match r.truth {
            Truth::H0 => {
                n_h0 += 1;
                fa += u64::from(flagged);
            }
            Truth::H1 => {
                n_h1 += 1;
                miss += u64::from(!flagged);
                if let Some(d) = r.measured_distance_m {
                    success += u64::from(d < s.success_distance_m && r.decision == RoundDecision::Normal);
                }
            }
        }
        if let Some(d) = r.measured_distance_m {
            hist.add(d - s.true_distance_m);
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    MetricsReport {
        n_trials: records.len() as u64 + n_invalid,
        n_valid: records.len() as u64,
        n_invalid,
        n_h0,
        n_h1,
        p_fa: ratio(fa, n_h0),
        p_m: ratio(miss, n_h1),
        p_s: ratio(success, n_h1),
        error_histogram: hist,
        config: s.clone(),
    }
}

/// Simulate, judge and aggregate one campaign.
pub fn run_campaign(s: &ScenarioConfig, detector: Option<&Detector>) -> Result<CampaignOutput> {
    if s.detector.enabled && detector.is_none() {
        return Err(Error::config("detection is enabled but no calibrated model was supplied"));
    }
    let (obs, invalid) = simulate_campaign(s)?;
    let records = evaluate(s, &obs, detector)?;
    Ok(CampaignOutput {
        report: aggregate(s, &records, invalid),
        records,
    })
}
