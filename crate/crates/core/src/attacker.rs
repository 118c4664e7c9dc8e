//! Ghost Peak attacker.
//!
//! The attacker knows the victim frame timing but not the STS key. It
//! transmits a fresh pseudorandom ±1 pulse train at a power `-sir_db` above
//! the legitimate received STS, starting `advance` samples before the
//! legitimate STS arrival, hoping a chance correlation peak lands inside the
//! victim's back-search window ahead of the true first path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::signal::{pulse_shape, FrameConfig, Waveform};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMessage {
    Response,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Fresh chips for every injection, independent of the legitimate key.
    RandomIndependent,
}

/// Inclusive range of injection leads in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvanceRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub enabled: bool,
    pub target_message: TargetMessage,
    /// Legitimate STS power over attacker STS power, dB. Negative means the
    /// attacker is stronger.
    pub sir_db: f64,
    pub advance_samples: AdvanceRange,
    pub seed_policy: SeedPolicy,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            enabled: false,
            target_message: TargetMessage::Response,
            sir_db: -10.0,
            advance_samples: AdvanceRange { min: 20, max: 380 },
            seed_policy: SeedPolicy::RandomIndependent,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let r = self.advance_samples;
        if r.min == 0 || r.min > r.max {
            return Err(Error::config("attack.advance_samples must satisfy 0 < min <= max"));
        }
        if !self.sir_db.is_finite() {
            return Err(Error::config("attack.sir_db must be finite"));
        }
        Ok(())
    }
}

/// What the attacker actually did in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub injected: bool,
    pub advance_used: usize,
    pub attacker_power_db: f64,
    /// The drawn advance would have started before sample 0.
    pub clamped: bool,
}

/// Forge a pulse-shaped random STS of `length` pulses.
///
/// `reference_power` is the legitimate STS mean power at the victim; the
/// forged signal's mean power over its pulses is `reference_power * 10^(-sir/10)`.
pub fn forge_sts_waveform<R: Rng + ?Sized>(
    cfg: &AttackConfig,
    frame: &FrameConfig,
    length: usize,
    reference_power: f64,
    rng: &mut R,
) -> Result<Waveform> {
    if !cfg.enabled {
        return Err(Error::config("forge_sts_waveform called with the attack disabled"));
    }
    if length == 0 {
        return Err(Error::config("forged STS length must be > 0"));
    }
    let chips: Vec<f64> = (0..length)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut w = pulse_shape(&chips, frame)?;
    let field = 0..length * frame.samples_per_pulse;
    let p = w.mean_power(field);
    let target = reference_power * 10f64.powf(-cfg.sir_db / 10.0);
    w.scale((target / p).sqrt());
    Ok(w)
}

/// Overlay `attack` on `victim_rx` starting `advance` samples before
/// `legit_sts_start`. Output length equals the input length.
pub fn inject<R: Rng + ?Sized>(
    victim_rx: &Waveform,
    attack: &Waveform,
    legit_sts_start: usize,
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<(Waveform, AttackTrace)> {
    if !cfg.enabled {
        return Ok((
            victim_rx.clone(),
            AttackTrace {
                injected: false,
                advance_used: 0,
                attacker_power_db: f64::NEG_INFINITY,
                clamped: false,
            },
        ));
    }
    cfg.validate()?;
    let r = cfg.advance_samples;
    let advance = rng.random_range(r.min..=r.max);
    let clamped = advance > legit_sts_start;
    let start = legit_sts_start.saturating_sub(advance);

    let mut out = victim_rx.clone();
    if start < out.len() {
        for (o, &a) in out.samples[start..].iter_mut().zip(&attack.samples) {
            *o += a;
        }
    }
    let power = attack.energy() / attack.len().max(1) as f64;
    Ok((
        out,
        AttackTrace {
            injected: true,
            advance_used: legit_sts_start - start,
            attacker_power_db: 10.0 * power.log10(),
            clamped,
        },
    ))
}
