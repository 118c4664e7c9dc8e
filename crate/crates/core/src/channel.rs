//! Reciprocal indoor LOS multipath channel and AWGN.
//!
//! Realizations follow a Saleh–Valenzuela cluster model with IEEE 802.15.4a
//! CM1 (residential LOS) parameters. Rays are placed on the sample grid when a
//! waveform is propagated, so the LOS delay is quantized to `1 / fs`.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::signal::Waveform;
use crate::{dsp, Complex64, Error, Result, SPEED_OF_LIGHT};

/// Saleh–Valenzuela parameters. Defaults are CM1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvParams {
    /// Mean number of clusters (Poisson, at least one cluster is always drawn).
    pub mean_clusters: f64,
    pub cluster_arrival_rate_per_ns: f64,
    pub ray_arrival_rate_per_ns: f64,
    pub cluster_decay_ns: f64,
    pub ray_decay_ns: f64,
    /// Per-cluster lognormal shadowing, dB standard deviation.
    pub cluster_shadowing_db: f64,
    /// Nakagami m-factor is lognormal: mean and std of `10 log10(m)`.
    pub nakagami_m_mean_db: f64,
    pub nakagami_m_std_db: f64,
    /// Rays later than this excess delay are dropped.
    pub max_excess_delay_ns: f64,
}

impl Default for SvParams {
    fn default() -> Self {
        SvParams {
            mean_clusters: 3.0,
            cluster_arrival_rate_per_ns: 0.047,
            ray_arrival_rate_per_ns: 1.54,
            cluster_decay_ns: 22.61,
            ray_decay_ns: 12.53,
            cluster_shadowing_db: 2.75,
            nakagami_m_mean_db: 0.67,
            nakagami_m_std_db: 0.28,
            max_excess_delay_ns: 150.0,
        }
    }
}

impl SvParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cluster_arrival_rate_per_ns", self.cluster_arrival_rate_per_ns),
            ("ray_arrival_rate_per_ns", self.ray_arrival_rate_per_ns),
            ("cluster_decay_ns", self.cluster_decay_ns),
            ("ray_decay_ns", self.ray_decay_ns),
            ("max_excess_delay_ns", self.max_excess_delay_ns),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("channel.{name} must be positive")));
            }
        }
        if !(self.mean_clusters.is_finite() && self.mean_clusters >= 0.0) {
            return Err(Error::config("channel.mean_clusters must be >= 0"));
        }
        if !(self.cluster_shadowing_db >= 0.0 && self.nakagami_m_std_db >= 0.0) {
            return Err(Error::config("channel spreads must be >= 0"));
        }
        Ok(())
    }
}

/// One multipath realization, shared by both link directions of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Absolute tap delays in seconds, strictly increasing; the first is the LOS delay.
    pub tap_delays: Vec<f64>,
    pub tap_gains: Vec<Complex64>,
    pub los_delay_s: f64,
}

impl ChannelRealization {
    /// Single unit tap at `delay_s`.
    pub fn single_tap(delay_s: f64) -> Self {
        ChannelRealization {
            tap_delays: vec![delay_s],
            tap_gains: vec![Complex64::new(1.0, 0.0)],
            los_delay_s: delay_s,
        }
    }

    pub fn energy(&self) -> f64 {
        self.tap_gains.iter().map(|g| g.norm_sqr()).sum()
    }

    /// RMS delay spread in seconds.
    pub fn rms_delay_spread(&self) -> f64 {
        let e = self.energy();
        if e == 0.0 {
            return 0.0;
        }
        let mean: f64 = self
            .tap_delays
            .iter()
            .zip(&self.tap_gains)
            .map(|(t, g)| t * g.norm_sqr())
            .sum::<f64>()
            / e;
        let second: f64 = self
            .tap_delays
            .iter()
            .zip(&self.tap_gains)
            .map(|(t, g)| (t - mean).powi(2) * g.norm_sqr())
            .sum::<f64>()
            / e;
        second.sqrt()
    }

    /// Tap filter on the sample grid, index `round(delay * fs)`.
    pub fn grid_filter(&self, sample_rate_hz: f64) -> Vec<Complex64> {
        let idx: Vec<usize> = self
            .tap_delays
            .iter()
            .map(|&t| (t * sample_rate_hz).round().max(0.0) as usize)
            .collect();
        let len = idx.iter().copied().max().map_or(0, |m| m + 1);
        let mut h = vec![Complex64::default(); len];
        for (&k, &g) in idx.iter().zip(&self.tap_gains) {
            h[k] += g;
        }
        h
    }

    pub fn los_delay_samples(&self, sample_rate_hz: f64) -> usize {
        (self.los_delay_s * sample_rate_hz).round().max(0.0) as usize
    }
}

/// Legitimate-link SNR and legitimate-to-attacker STS power ratio, both dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// `+inf` disables noise and scaling altogether.
    pub snr_db: f64,
    pub sir_db: f64,
}

impl LinkBudget {
    pub fn noiseless() -> Self {
        LinkBudget {
            snr_db: f64::INFINITY,
            sir_db: f64::INFINITY,
        }
    }

    pub fn noise_enabled(&self) -> bool {
        self.snr_db.is_finite()
    }
}

/// Draw an energy-normalized realization for a link of `true_distance_m`.
pub fn draw_realization<R: Rng + ?Sized>(
    params: &SvParams,
    true_distance_m: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !(true_distance_m.is_finite() && true_distance_m > 0.0) {
        return Err(Error::config("true distance must be positive"));
    }
    params.validate()?;
    let los = true_distance_m / SPEED_OF_LIGHT;
    let max_ns = params.max_excess_delay_ns;

    let n_clusters = if params.mean_clusters > 0.0 {
        let p = Poisson::new(params.mean_clusters).map_err(|e| Error::config(e.to_string()))?;
        (p.sample(rng) as usize).max(1)
    } else {
        1
    };
    let cluster_gap = Exp::new(params.cluster_arrival_rate_per_ns).map_err(|e| Error::config(e.to_string()))?;
    let ray_gap = Exp::new(params.ray_arrival_rate_per_ns).map_err(|e| Error::config(e.to_string()))?;
    let shadow = Normal::new(0.0, params.cluster_shadowing_db).map_err(|e| Error::config(e.to_string()))?;
    let m_db = Normal::new(params.nakagami_m_mean_db, params.nakagami_m_std_db)
        .map_err(|e| Error::config(e.to_string()))?;

    let mut rays: Vec<(f64, Complex64)> = Vec::new();
    let mut cluster_t = 0.0;
    for c in 0..n_clusters {
        if c > 0 {
            cluster_t += cluster_gap.sample(rng);
        }
        if cluster_t > max_ns {
            break;
        }
        let cluster_gain = (-cluster_t / params.cluster_decay_ns).exp() * 10f64.powf(shadow.sample(rng) / 10.0);
        let mut tau = 0.0;
        while cluster_t + tau <= max_ns {
            let omega = cluster_gain * (-tau / params.ray_decay_ns).exp();
            let m = 10f64.powf(m_db.sample(rng) / 10.0).max(0.5);
            let power = Gamma::new(m, omega / m)
                .map_err(|e| Error::config(e.to_string()))?
                .sample(rng);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            rays.push((cluster_t + tau, Complex64::from_polar(power.sqrt(), phase)));
            tau += ray_gap.sample(rng);
        }
    }

    rays.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Coincident arrivals (only the t = 0 ray of the first cluster can tie
    // in practice) are merged so delays stay strictly increasing.
    let mut merged: Vec<(f64, Complex64)> = Vec::with_capacity(rays.len());
    for (t, g) in rays {
        match merged.last_mut() {
            Some(last) if t <= last.0 => last.1 += g,
            _ => merged.push((t, g)),
        }
    }
    let energy: f64 = merged.iter().map(|(_, g)| g.norm_sqr()).sum();
    if energy <= 0.0 {
        return Err(Error::data("channel realization has zero energy"));
    }
    let norm = energy.sqrt();
    Ok(ChannelRealization {
        tap_delays: merged.iter().map(|(t, _)| los + t * 1e-9).collect(),
        tap_gains: merged.iter().map(|(_, g)| g / norm).collect(),
        los_delay_s: los,
    })
}

/// Forward (Initiator to Responder) and reverse copies of one realization.
pub fn reciprocal_pair(r: &ChannelRealization) -> (ChannelRealization, ChannelRealization) {
    (r.clone(), r.clone())
}

/// Pass `w` through the channel and add noise.
///
/// The clean received signal is scaled so its mean power over the delayed
/// `sts_field` equals the SNR against unit-power complex Gaussian noise.
/// Output length is `w.len()` plus the channel's grid span.
pub fn propagate<R: Rng + ?Sized>(
    w: &Waveform,
    r: &ChannelRealization,
    budget: &LinkBudget,
    sts_field: Range<usize>,
    system_rate_hz: f64,
    rng: &mut R,
) -> Result<Waveform> {
    if (w.sample_rate_hz - system_rate_hz).abs() > 1e-9 * system_rate_hz {
        return Err(Error::SampleRateMismatch {
            waveform: w.sample_rate_hz,
            system: system_rate_hz,
        });
    }
    let h = r.grid_filter(system_rate_hz);
    if h.is_empty() || w.is_empty() {
        return Ok(w.clone());
    }
    let mut out = Waveform::new(dsp::convolve(&w.samples, &h), system_rate_hz);
    if !budget.noise_enabled() {
        return Ok(out);
    }
    let shift = r.los_delay_samples(system_rate_hz);
    let field = sts_field.start + shift..sts_field.end + shift;
    let p = out.mean_power(field);
    if p <= 0.0 {
        return Err(Error::NoSignal);
    }
    let snr = 10f64.powf(budget.snr_db / 10.0);
    out.scale((snr / p).sqrt());
    add_awgn(&mut out, 1.0, rng);
    Ok(out)
}

/// Add circularly-symmetric complex Gaussian noise of total power `power`.
pub fn add_awgn<R: Rng + ?Sized>(w: &mut Waveform, power: f64, rng: &mut R) {
    let sigma = (power / 2.0).sqrt();
    for s in &mut w.samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(re * sigma, im * sigma);
    }
}
