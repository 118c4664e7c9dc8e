//! BPRF frame synthesis: preamble, SFD and STS as sampled baseband waveforms.
//!
//! STS chips are modeled at pulse granularity: every STS segment contributes
//! [`STS_PULSES_PER_SEGMENT`] pulses, so the default 64 segments give a
//! 4096-pulse sequence. Payload bytes are carried next to the waveform in the
//! [`FrameLayout`] rather than modulated onto it.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Complex64, Error, Result};

/// Length of every stored preamble code.
pub const PREAMBLE_CODE_LENGTH: usize = 31;

/// STS pulses emitted per configured STS segment.
pub const STS_PULSES_PER_SEGMENT: usize = 64;

/// Roll-off of the root-raised-cosine pulse prototype.
pub const RRC_ROLL_OFF: f64 = 0.5;

/// Span of the pulse prototype in pulse periods.
pub const RRC_SPAN_PULSES: usize = 8;

// Length-31 ternary preamble codes, indices 1..=7. Each has a perfect
// periodic autocorrelation (16 at lag 0, zero elsewhere).
const PREAMBLE_CODES: [(u8, &str); 7] = [
    (1, "-0000+0-0+++0+-000+-+++00-+0-00"),
    (2, "0+0+-0+0+000-++0-+---00+00++000"),
    (3, "-+0++000-+-++00++0+00-0000-0+0-"),
    (4, "0000+-00-00-++++0+-+000+0-0++0-"),
    (5, "-0+-00+++-+000-+0+++0-0+0000-00"),
    (6, "++00+00---+-0++-000+0+0-+0+0000"),
    (7, "+0000+-0+0+00+000+0++---0-+00-+"),
];

// SFD index 0: eight preamble symbols modulated by this pattern.
const SFD0_PATTERN: [i8; 8] = [0, 1, 0, -1, 1, 0, 0, -1];

/// 128-bit key for the STS generator. Serialized as a hex string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StsSeed(pub [u8; 16]);

impl StsSeed {
    pub fn from_u128(v: u128) -> Self {
        StsSeed(v.to_le_bytes())
    }

    /// Derive a per-message seed by mixing a 64-bit nonce into the key.
    pub fn with_nonce(&self, nonce: u64) -> Self {
        let mut out = self.0;
        for (o, b) in out[8..].iter_mut().zip(nonce.to_le_bytes()) {
            *o ^= b;
        }
        StsSeed(out)
    }
}

impl fmt::Debug for StsSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StsSeed({})", hex::encode(self.0))
    }
}

impl Serialize for StsSeed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for StsSeed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("sts_seed must be 32 hex digits"))?;
        Ok(StsSeed(arr))
    }
}

/// Frame parameters. Defaults are the legitimate-device configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub preamble_code_index: u8,
    pub preamble_spreading_factor: usize,
    pub preamble_duration_symbols: usize,
    pub sfd_index: u8,
    /// STS length in segments; each segment is [`STS_PULSES_PER_SEGMENT`] pulses.
    pub sts_segment_length: usize,
    pub samples_per_pulse: usize,
    pub sample_rate_hz: f64,
    pub sts_seed: StsSeed,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self::legitimate()
    }
}

impl FrameConfig {
    pub fn legitimate() -> Self {
        FrameConfig {
            preamble_code_index: 9,
            preamble_spreading_factor: 4,
            preamble_duration_symbols: 64,
            sfd_index: 0,
            sts_segment_length: 64,
            samples_per_pulse: 4,
            sample_rate_hz: 2.0e9,
            sts_seed: StsSeed::from_u128(0x5753_5453_4545_4431_0000_0000_0000_0001),
        }
    }

    /// Attacker frame: identical except for the preamble spreading factor.
    pub fn attacker() -> Self {
        FrameConfig {
            preamble_spreading_factor: 9,
            ..Self::legitimate()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_pulse == 0 {
            return Err(Error::config("samples_per_pulse must be >= 1"));
        }
        if self.preamble_duration_symbols == 0 {
            return Err(Error::config("preamble_duration_symbols must be > 0"));
        }
        if self.sts_segment_length == 0 {
            return Err(Error::config("sts_segment_length must be > 0"));
        }
        if self.preamble_spreading_factor == 0 {
            return Err(Error::config("preamble_spreading_factor must be > 0"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample_rate_hz must be positive"));
        }
        if self.sfd_index != 0 {
            return Err(Error::config(format!("unsupported sfd_index {}", self.sfd_index)));
        }
        preamble_code(self.preamble_code_index)?;
        Ok(())
    }

    pub fn sts_pulses(&self) -> usize {
        self.sts_segment_length * STS_PULSES_PER_SEGMENT
    }

    pub fn sts_length_samples(&self) -> usize {
        self.sts_pulses() * self.samples_per_pulse
    }
}

/// Complex baseband samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        Waveform {
            samples,
            sample_rate_hz,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self::new(vec![Complex64::default(); len], sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power over `range`, clipped to the waveform.
    pub fn mean_power(&self, range: Range<usize>) -> f64 {
        let end = range.end.min(self.len());
        let start = range.start.min(end);
        if end == start {
            return 0.0;
        }
        self.samples[start..end].iter().map(|s| s.norm_sqr()).sum::<f64>() / (end - start) as f64
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.samples.iter_mut().for_each(|s| *s *= k);
    }
}

/// Sample-index bookkeeping for a synthesized frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    pub preamble_start: usize,
    pub sfd_start: usize,
    pub sts_start: usize,
    pub sts_length_samples: usize,
    pub total_len: usize,
    pub samples_per_pulse: usize,
    /// Payload carried with the frame (the quantized features in a Response).
    pub payload_marker: Vec<u8>,
}

impl FrameLayout {
    pub fn sts_field(&self) -> Range<usize> {
        self.sts_start..self.sts_start + self.sts_length_samples
    }
}

fn preamble_code(index: u8) -> Result<[i8; PREAMBLE_CODE_LENGTH]> {
    // Indices 9..=12 are the BPRF code indices; they share the length-31
    // table with 1..=4.
    let base = match index {
        1..=7 => index,
        9..=12 => index - 8,
        _ => return Err(Error::config(format!("unknown preamble code index {index}"))),
    };
    let (_, text) = PREAMBLE_CODES[usize::from(base - 1)];
    let mut code = [0i8; PREAMBLE_CODE_LENGTH];
    for (c, ch) in code.iter_mut().zip(text.chars()) {
        *c = match ch {
            '+' => 1,
            '-' => -1,
            _ => 0,
        };
    }
    Ok(code)
}

fn spread_code(config: &FrameConfig) -> Result<Vec<i8>> {
    let code = preamble_code(config.preamble_code_index)?;
    let factor = config.preamble_spreading_factor;
    if factor == 0 {
        return Err(Error::config("preamble_spreading_factor must be > 0"));
    }
    let mut out = vec![0i8; PREAMBLE_CODE_LENGTH * factor];
    for (i, &c) in code.iter().enumerate() {
        out[i * factor] = c;
    }
    Ok(out)
}

/// Preamble as ternary symbols: the spread code repeated
/// `preamble_duration_symbols` times.
pub fn gen_preamble(config: &FrameConfig) -> Result<Vec<i8>> {
    let symbol = spread_code(config)?;
    Ok(symbol.repeat(config.preamble_duration_symbols))
}

fn gen_sfd(config: &FrameConfig) -> Result<Vec<i8>> {
    let symbol = spread_code(config)?;
    let mut out = Vec::with_capacity(symbol.len() * SFD0_PATTERN.len());
    for &m in &SFD0_PATTERN {
        out.extend(symbol.iter().map(|&c| c * m));
    }
    Ok(out)
}

/// Keyed pseudorandom ±1 STS of `length` pulses.
///
/// ChaCha20 in counter mode keyed by the 128-bit seed; each keystream bit
/// becomes one chip.
pub fn gen_sts(seed: &StsSeed, length: usize) -> Result<Vec<i8>> {
    if length == 0 {
        return Err(Error::config("STS length must be > 0"));
    }
    let mut key = [0u8; 32];
    key[..16].copy_from_slice(&seed.0);
    key[16..].copy_from_slice(b"uwb-sts-keystrm\0");
    let mut rng = ChaCha20Rng::from_seed(key);
    let mut out = Vec::with_capacity(length);
    while out.len() < length {
        let word = rng.next_u32();
        for bit in 0..32 {
            if out.len() == length {
                break;
            }
            out.push(if (word >> bit) & 1 == 1 { 1 } else { -1 });
        }
    }
    Ok(out)
}

/// Unit-energy root-raised-cosine prototype, `RRC_SPAN_PULSES * spp + 1` taps.
pub fn pulse_prototype(samples_per_pulse: usize) -> Vec<f64> {
    let spp = samples_per_pulse.max(1);
    let half = (RRC_SPAN_PULSES * spp / 2) as isize;
    let beta = RRC_ROLL_OFF;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / spp as f64;
            if t == 0.0 {
                1.0 - beta + 4.0 * beta / PI
            } else if ((4.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
                let a = PI / (4.0 * beta);
                beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
            } else {
                let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
                let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();
    let norm = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|v| *v /= norm);
    taps
}

/// Upsample `symbols` by `samples_per_pulse` and filter with the pulse
/// prototype. Output length is `(n - 1) * spp + prototype.len()`.
pub fn pulse_shape(symbols: &[f64], config: &FrameConfig) -> Result<Waveform> {
    if symbols.is_empty() {
        return Err(Error::config("pulse_shape needs at least one symbol"));
    }
    let spp = config.samples_per_pulse;
    if spp == 0 {
        return Err(Error::config("samples_per_pulse must be >= 1"));
    }
    let pulse = pulse_prototype(spp);
    let len = (symbols.len() - 1) * spp + pulse.len();
    let mut out = vec![Complex64::default(); len];
    for (n, &s) in symbols.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let base = n * spp;
        for (o, &p) in out[base..base + pulse.len()].iter_mut().zip(&pulse) {
            o.re += s * p;
        }
    }
    Ok(Waveform::new(out, config.sample_rate_hz))
}

/// Pulse-shaped STS alone, used as the receiver's correlation template.
pub fn sts_template(config: &FrameConfig) -> Result<Waveform> {
    let sts = gen_sts(&config.sts_seed, config.sts_pulses())?;
    let symbols: Vec<f64> = sts.iter().map(|&c| f64::from(c)).collect();
    pulse_shape(&symbols, config)
}

/// Assemble preamble, SFD and STS into one waveform.
pub fn build_frame(config: &FrameConfig, payload_marker: &[u8]) -> Result<(Waveform, FrameLayout)> {
    config.validate()?;
    let preamble = gen_preamble(config)?;
    let sfd = gen_sfd(config)?;
    let sts = gen_sts(&config.sts_seed, config.sts_pulses())?;

    let spp = config.samples_per_pulse;
    let symbols: Vec<f64> = preamble
        .iter()
        .chain(&sfd)
        .chain(&sts)
        .map(|&c| f64::from(c))
        .collect();
    let waveform = pulse_shape(&symbols, config)?;

    let layout = FrameLayout {
        preamble_start: 0,
        sfd_start: preamble.len() * spp,
        sts_start: (preamble.len() + sfd.len()) * spp,
        sts_length_samples: sts.len() * spp,
        total_len: waveform.len(),
        samples_per_pulse: spp,
        payload_marker: payload_marker.to_vec(),
    };
    Ok((waveform, layout))
}
