//! One integrity-checked DS-TWR round.
//!
//! A round is simulated in two stages. [`simulate_round`] runs the physical
//! exchange (Poll, Response, Final) and keeps the CIRs the detector needs;
//! [`evaluate`] then encodes, quantizes, compares and decides. The
//! Final always draws from its own rng streams, so its outcome does not depend
//! on the decision and one set of observations can be judged under several
//! detector settings with results identical to separate campaigns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DetectorSide, ScenarioConfig, StsRefresh};
use crate::attacker::{forge_sts_waveform, inject, AttackTrace, TargetMessage};
use crate::autoencoder::{encode_batch, FeatureVector, MlpModel};
use crate::channel::{draw_realization, propagate, reciprocal_pair, ChannelRealization, LinkBudget};
use crate::detector::{decide, hamming, quantize, Decision, QuantizedFeature};
use crate::model_file::Calibration;
use crate::receiver::{ds_twr_distance, receive, Reception, RoundTimes};
use crate::signal::{build_frame, sts_template, FrameConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truth {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundDecision {
    Normal,
    /// Flagged after the Final; the distance is withheld.
    Attacked,
    /// Flagged before the Final; ranging stopped.
    Suspended,
}

impl RoundDecision {
    pub fn flagged(self) -> bool {
        self != RoundDecision::Normal
    }
}

/// Physical outcome of one round, before any detector runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundObservation {
    pub trial: u64,
    pub truth: Truth,
    pub trace: AttackTrace,
    pub times: RoundTimes,
    pub distance_m: f64,
    /// CIR measured by the checking device on the checked message.
    pub local_cir: Vec<f64>,
    /// CIR the peer measured on the opposite-direction message, sent in-band.
    pub remote_cir: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub trial: u64,
    pub truth: Truth,
    pub decision: RoundDecision,
    /// `None` when detection is disabled.
    pub hamming_d: Option<u32>,
    /// `None` when the round was flagged.
    pub measured_distance_m: Option<f64>,
    pub times: RoundTimes,
    pub attack_trace: AttackTrace,
}

/// Per-trial generator: one ChaCha stream per trial under the master seed.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

struct Streams {
    channel: ChaCha8Rng,
    sts: ChaCha8Rng,
    poll: ChaCha8Rng,
    response: ChaCha8Rng,
    fin: ChaCha8Rng,
    attack: ChaCha8Rng,
}

impl Streams {
    fn new(master_seed: u64, trial: u64) -> Self {
        let mut base = trial_rng(master_seed, trial);
        let mut fork = || ChaCha8Rng::from_rng(&mut base);
        Streams {
            channel: fork(),
            sts: fork(),
            poll: fork(),
            response: fork(),
            fin: fork(),
            attack: fork(),
        }
    }
}

struct Link<'a> {
    s: &'a ScenarioConfig,
    budget: LinkBudget,
}

impl Link<'_> {
    /// Send one frame with a fresh STS over `channel` and receive it,
    /// optionally with the attacker overlaid.
    fn exchange(
        &self,
        channel: &ChannelRealization,
        nonce: Option<u64>,
        attacked: bool,
        noise: &mut ChaCha8Rng,
        attack_rng: &mut ChaCha8Rng,
    ) -> Result<(Reception, AttackTrace)> {
        let s = self.s;
        let fs = s.frame.sample_rate_hz;
        let frame = FrameConfig {
            sts_seed: nonce.map_or(s.frame.sts_seed, |n| s.frame.sts_seed.with_nonce(n)),
            ..s.frame.clone()
        };
        let (tx, layout) = build_frame(&frame, &[])?;
        let template = sts_template(&frame)?;
        let mut rx = propagate(&tx, channel, &self.budget, layout.sts_field(), fs, noise)?;
        let mut trace = AttackTrace {
            injected: false,
            advance_used: 0,
            attacker_power_db: f64::NEG_INFINITY,
            clamped: false,
        };
        if attacked {
            let shift = channel.los_delay_samples(fs);
            let legit_start = layout.sts_start + shift;
            let reference = if self.budget.noise_enabled() {
                10f64.powf(self.budget.snr_db / 10.0)
            } else {
                rx.mean_power(legit_start..legit_start + layout.sts_length_samples)
            };
            let attacker_frame = FrameConfig {
                preamble_spreading_factor: FrameConfig::attacker().preamble_spreading_factor,
                ..frame.clone()
            };
            let forged = forge_sts_waveform(&s.attack, &attacker_frame, frame.sts_pulses(), reference, attack_rng)?;
            let (attacked_rx, t) = inject(&rx, &forged, legit_start, &s.attack, attack_rng)?;
            rx = attacked_rx;
            trace = t;
        }
        let rec = receive(&rx, &template, &layout, s.cir_window(), &s.edge)?;
        Ok((rec, trace))
    }
}

/// Run the physical exchange of one round.
///
/// `with_final` false stops after the Response (dataset generation).
pub fn simulate_round(s: &ScenarioConfig, trial: u64, with_final: bool) -> Result<RoundObservation> {
    let mut st = Streams::new(s.master_seed, trial);
    let realization = draw_realization(&s.channel, s.true_distance_m, &mut st.channel)?;
    let (forward, reverse) = reciprocal_pair(&realization);
    let link = Link {
        s,
        budget: s.budget(),
    };
    let target = s.attack.enabled.then_some(s.attack.target_message);
    let drawn: [u64; 3] = [st.sts.random(), st.sts.random(), st.sts.random()];
    let nonces = match s.sts_refresh {
        StsRefresh::Fixed => [None; 3],
        StsRefresh::PerRound => [Some(drawn[0]); 3],
        StsRefresh::PerMessage => drawn.map(Some),
    };

    // Poll: Initiator to Responder, never attacked.
    let (poll, _) = link.exchange(&forward, nonces[0], false, &mut st.poll, &mut st.attack)?;
    let response_attacked = target == Some(TargetMessage::Response);
    let (response, response_trace) =
        link.exchange(&reverse, nonces[1], response_attacked, &mut st.response, &mut st.attack)?;

    let reply = s.reply_time_s;
    let (fin, final_trace) = if with_final || s.detector.side == DetectorSide::Responder {
        let final_attacked = target == Some(TargetMessage::Final);
        let (r, t) = link.exchange(&forward, nonces[2], final_attacked, &mut st.fin, &mut st.attack)?;
        (Some(r), t)
    } else {
        (None, response_trace)
    };

    // Timeline with both clocks on true time: Poll leaves at 0, each reply is
    // scheduled `reply` after the device's own (possibly fooled) receive time.
    let a_poll = poll.arrival_s;
    let a_resp = response.arrival_s;
    let a_fin = fin.as_ref().map_or(a_poll, |f| f.arrival_s);
    let times = RoundTimes {
        t_round1: a_poll + reply + a_resp,
        t_reply1: reply,
        t_round2: a_resp + reply + a_fin,
        t_reply2: reply,
    };
    let distance_m = ds_twr_distance(&times)?;
    if !distance_m.is_finite() {
        return Err(Error::NoSignal);
    }

    let trace = match target {
        Some(TargetMessage::Final) => final_trace,
        _ => response_trace,
    };
    let (local_cir, remote_cir) = match (s.detector.side, fin) {
        (DetectorSide::Responder, Some(f)) => (f.cir.taps, response.cir.taps),
        _ => (response.cir.taps, poll.cir.taps),
    };
    Ok(RoundObservation {
        trial,
        truth: if s.attack.enabled { Truth::H1 } else { Truth::H0 },
        trace,
        times,
        distance_m,
        local_cir,
        remote_cir,
    })
}

/// Trained encoder plus calibration, or nothing when detection is off.
#[derive(Debug, Clone)]
pub struct Detector {
    pub model: MlpModel,
    pub calibration: Calibration,
}

impl Detector {
    /// Payload round trip: the remote side's bits travel as packed bytes.
    fn over_the_air(bits: &QuantizedFeature) -> Result<QuantizedFeature> {
        QuantizedFeature::from_bytes(&bits.to_bytes(), bits.len())
    }

    /// Hamming distances for a batch of observations.
    pub fn distances(&self, obs: &[RoundObservation]) -> Result<Vec<u32>> {
        let cirs: Vec<Vec<f64>> = obs
            .iter()
            .flat_map(|o| [o.remote_cir.clone(), o.local_cir.clone()])
            .collect();
        let feats = encode_batch(&self.model, &cirs)?;
        feats
            .chunks_exact(2)
            .map(|pair| self.pair_distance(&pair[0], &pair[1]))
            .collect()
    }

    fn pair_distance(&self, remote: &FeatureVector, local: &FeatureVector) -> Result<u32> {
        let q = &self.calibration.quantizer;
        let p_remote = Self::over_the_air(&quantize(remote, q)?)?;
        let p_local = quantize(local, q)?;
        hamming(&p_remote, &p_local)
    }
}

/// Judge observations. `detector` `None` disables detection.
pub fn evaluate(s: &ScenarioConfig, obs: &[RoundObservation], detector: Option<&Detector>) -> Result<Vec<RoundRecord>> {
    let distances = match detector {
        Some(d) if s.detector.enabled => Some(d.distances(obs)?),
        _ => None,
    };
    Ok(obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let d = distances.as_ref().map(|v| v[i]);
            let flagged = match (d, detector) {
                (Some(d), Some(det)) => decide(d, &det.calibration.threshold) == Decision::Attacked,
                _ => false,
            };
            let decision = match (flagged, s.detector.side) {
                (false, _) => RoundDecision::Normal,
                (true, DetectorSide::Initiator) => RoundDecision::Suspended,
                (true, DetectorSide::Responder) => RoundDecision::Attacked,
            };
            RoundRecord {
                trial: o.trial,
                truth: o.truth,
                decision,
                hamming_d: d,
                measured_distance_m: (!flagged).then_some(o.distance_m),
                times: o.times,
                attack_trace: o.trace,
            }
        })
        .collect())
}
