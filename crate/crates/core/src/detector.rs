//! Feature quantization, Hamming comparison and the attack decision.
//!
//! Each latent dimension is quantized uniformly between calibrated bounds into
//! `2^q` levels, and each level is emitted as a q-bit Gray code, most
//! significant bit first, dimension after dimension. Features that sit close
//! together on both sides of the link therefore differ in few bits.

use serde::{Deserialize, Serialize};

use crate::autoencoder::FeatureVector;
use crate::{Error, Result};

/// Minimum number of feature vectors for quantizer calibration.
pub const MIN_QUANTIZER_SAMPLES: usize = 100;

/// Minimum number of unattacked pairs for threshold calibration.
pub const MIN_THRESHOLD_PAIRS: usize = 500;

const DEGENERATE_HALF_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerCalibration {
    /// Per-dimension `(lo, hi)` bounds.
    pub bounds: Vec<(f64, f64)>,
    pub q: u8,
}

impl QuantizerCalibration {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.q, 1 | 2 | 4 | 8) {
            return Err(Error::config(format!("quantization bits must be 1, 2, 4 or 8, got {}", self.q)));
        }
        if self.bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::config("quantizer bounds must satisfy lo < hi"));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn bit_len(&self) -> usize {
        self.bounds.len() * usize::from(self.q)
    }

    /// Same bounds, different bit depth.
    pub fn with_bits(&self, q: u8) -> Self {
        QuantizerCalibration {
            bounds: self.bounds.clone(),
            q,
        }
    }
}

/// Bit vector of `dims * q` bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedFeature {
    pub bits: Vec<bool>,
}

impl QuantizedFeature {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Pack bits big-endian within bytes; the last byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i))))
            .collect()
    }

    pub fn from_bytes(bytes: &[u8], bit_len: usize) -> Result<Self> {
        if bytes.len() != bit_len.div_ceil(8) {
            return Err(Error::data(format!(
                "payload of {} bytes cannot hold {bit_len} bits",
                bytes.len()
            )));
        }
        let bits = (0..bit_len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect();
        Ok(QuantizedFeature { bits })
    }
}

/// Which statistic of the unattacked Hamming distances becomes `t_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThStatistic {
    #[default]
    Max,
    P99,
    P95,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub alpha_t: f64,
    /// Reference unattacked Hamming distance.
    pub t_h: u32,
    /// Decision threshold `ceil(alpha_t * t_h)`.
    pub threshold: u32,
}

impl ThresholdSpec {
    pub fn new(alpha_t: f64, t_h: u32) -> Result<Self> {
        if !(alpha_t > 0.0 && alpha_t < 1.0) {
            return Err(Error::config(format!("alpha_t must be in (0, 1), got {alpha_t}")));
        }
        Ok(ThresholdSpec {
            alpha_t,
            t_h,
            threshold: (alpha_t * f64::from(t_h)).ceil() as u32,
        })
    }

    /// Threshold that no distance reaches: detection off.
    pub fn disabled() -> Self {
        ThresholdSpec {
            alpha_t: 0.5,
            t_h: u32::MAX,
            threshold: u32::MAX,
        }
    }

    pub fn is_disabled(&self) -> bool {
        self.threshold == u32::MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Normal,
    Attacked,
}

/// Per-dimension bounds from unattacked features, widened by 1% of the range.
pub fn calibrate_quantizer(features: &[FeatureVector], q: u8) -> Result<QuantizerCalibration> {
    if features.len() < MIN_QUANTIZER_SAMPLES {
        return Err(Error::data(format!(
            "quantizer calibration needs at least {MIN_QUANTIZER_SAMPLES} feature vectors, got {}",
            features.len()
        )));
    }
    let dims = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dims) {
        return Err(Error::LengthMismatch {
            expected: dims,
            actual: f.len(),
        });
    }
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dims];
    for f in features {
        for (b, &v) in bounds.iter_mut().zip(&f.values) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    for (d, b) in bounds.iter_mut().enumerate() {
        let span = b.1 - b.0;
        if span > 0.0 {
            *b = (b.0 - 0.005 * span, b.1 + 0.005 * span);
        } else {
            log::warn!("feature dimension {d} is constant at {}; widening by ±{DEGENERATE_HALF_WIDTH}", b.0);
            *b = (b.0 - DEGENERATE_HALF_WIDTH, b.1 + DEGENERATE_HALF_WIDTH);
        }
    }
    let cal = QuantizerCalibration { bounds, q };
    cal.validate()?;
    Ok(cal)
}

/// Binary-reflected Gray code.
pub fn gray(level: u32) -> u32 {
    level ^ (level >> 1)
}

/// Quantization level of `v` in `[lo, hi]` with `2^q` levels.
pub fn level(v: f64, lo: f64, hi: f64, q: u8) -> u32 {
    let levels = 1u32 << q;
    let x = v.clamp(lo, hi);
    let l = ((x - lo) / (hi - lo) * f64::from(levels)).floor();
    (l.max(0.0) as u32).min(levels - 1)
}

pub fn quantize(f: &FeatureVector, cal: &QuantizerCalibration) -> Result<QuantizedFeature> {
    if f.len() != cal.dims() {
        return Err(Error::LengthMismatch {
            expected: cal.dims(),
            actual: f.len(),
        });
    }
    let mut bits = Vec::with_capacity(cal.bit_len());
    for (&v, &(lo, hi)) in f.values.iter().zip(&cal.bounds) {
        let code = gray(level(v, lo, hi, cal.q));
        for b in (0..cal.q).rev() {
            bits.push((code >> b) & 1 == 1);
        }
    }
    Ok(QuantizedFeature { bits })
}

pub fn hamming(a: &QuantizedFeature, b: &QuantizedFeature) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count() as u32)
}

/// Reference distance from a set of unattacked distances.
pub fn reference_distance(distances: &[u32], stat: ThStatistic) -> Result<u32> {
    if distances.is_empty() {
        return Err(Error::data("threshold calibration needs at least one distance"));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_unstable();
    let pct = match stat {
        ThStatistic::Max => return Ok(*sorted.last().unwrap()),
        ThStatistic::P99 => 0.99,
        ThStatistic::P95 => 0.95,
    };
    // nearest-rank percentile
    let rank = (pct * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Calibrate the decision threshold from unattacked feature pairs.
pub fn calibrate_threshold(
    pairs: &[(FeatureVector, FeatureVector)],
    cal: &QuantizerCalibration,
    alpha_t: f64,
    stat: ThStatistic,
) -> Result<ThresholdSpec> {
    if pairs.is_empty() {
        return Err(Error::data("threshold calibration set is empty"));
    }
    if pairs.len() < MIN_THRESHOLD_PAIRS {
        log::warn!(
            "threshold calibrated on {} pairs; at least {MIN_THRESHOLD_PAIRS} recommended",
            pairs.len()
        );
    }
    let distances = pairs
        .iter()
        .map(|(a, b)| hamming(&quantize(a, cal)?, &quantize(b, cal)?))
        .collect::<Result<Vec<_>>>()?;
    ThresholdSpec::new(alpha_t, reference_distance(&distances, stat)?)
}

/// Attacked iff `d >= T`.
pub fn decide(d: u32, spec: &ThresholdSpec) -> Decision {
    if d >= spec.threshold {
        Decision::Attacked
    } else {
        Decision::Normal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector { values: v.to_vec() }
    }

    fn bits(s: &str) -> QuantizedFeature {
        QuantizedFeature {
            bits: s.chars().map(|c| c == '1').collect(),
        }
    }

    #[test]
    fn one_bit_split() {
        let cal = QuantizerCalibration {
            bounds: vec![(-1.0, 1.0)],
            q: 1,
        };
        assert_eq!(quantize(&fv(&[0.3]), &cal).unwrap(), bits("1"));
        assert_eq!(quantize(&fv(&[-0.2]), &cal).unwrap(), bits("0"));
    }

    #[test]
    fn two_bit_gray_levels() {
        let cal = QuantizerCalibration {
            bounds: vec![(0.0, 1.0)],
            q: 2,
        };
        // level edges at 0.25, 0.5, 0.75; level 2 -> gray 2^1 = 3
        assert_eq!(level(0.6, 0.0, 1.0, 2), 2);
        assert_eq!(quantize(&fv(&[0.6]), &cal).unwrap(), bits("11"));
        assert_eq!(quantize(&fv(&[0.1]), &cal).unwrap(), bits("00"));
        assert_eq!(quantize(&fv(&[0.3]), &cal).unwrap(), bits("01"));
        assert_eq!(quantize(&fv(&[0.9]), &cal).unwrap(), bits("10"));
    }

    #[test]
    fn saturation() {
        let cal = QuantizerCalibration {
            bounds: vec![(0.0, 1.0)],
            q: 4,
        };
        assert_eq!(level(7.0, 0.0, 1.0, 4), 15);
        assert_eq!(level(1.0, 0.0, 1.0, 4), 15);
        assert_eq!(level(-7.0, 0.0, 1.0, 4), 0);
        assert_eq!(quantize(&fv(&[7.0]), &cal).unwrap(), bits(&format!("{:04b}", gray(15))));
    }

    #[test]
    fn dimension_major_layout() {
        let cal = QuantizerCalibration {
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            q: 2,
        };
        assert_eq!(quantize(&fv(&[0.6, 0.3]), &cal).unwrap(), bits("1101"));
        assert!(quantize(&fv(&[0.6]), &cal).is_err());
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&bits("1010"), &bits("1010")).unwrap(), 0);
        assert_eq!(hamming(&bits("1010"), &bits("0110")).unwrap(), 2);
        let a = QuantizedFeature {
            bits: (0..128).map(|i| i % 3 == 0).collect(),
        };
        let not_a = QuantizedFeature {
            bits: a.bits.iter().map(|b| !b).collect(),
        };
        assert_eq!(hamming(&a, &not_a).unwrap(), 128);
        assert!(hamming(&bits("1"), &bits("10")).is_err());
    }

    #[test]
    fn byte_packing_is_big_endian() {
        let q = bits("1000000101");
        assert_eq!(q.to_bytes(), vec![0b1000_0001, 0b0100_0000]);
        assert_eq!(QuantizedFeature::from_bytes(&q.to_bytes(), 10).unwrap(), q);
        assert!(QuantizedFeature::from_bytes(&[0], 10).is_err());
    }

    fn ramp_features(n: usize) -> Vec<FeatureVector> {
        (0..n)
            .map(|i| fv(&[i as f64 / (n - 1) as f64, 3.0, -(i as f64)]))
            .collect()
    }

    #[test]
    fn quantizer_bounds_widen_by_one_percent() {
        let cal = calibrate_quantizer(&ramp_features(101), 4).unwrap();
        assert!((cal.bounds[0].0 - -0.005).abs() < 1e-12);
        assert!((cal.bounds[0].1 - 1.005).abs() < 1e-12);
        // constant dimension
        assert!((cal.bounds[1].0 - (3.0 - 1e-6)).abs() < 1e-12);
        assert!((cal.bounds[1].1 - (3.0 + 1e-6)).abs() < 1e-12);
        assert!((cal.bounds[2].0 - -100.5).abs() < 1e-9);
    }

    #[test]
    fn quantizer_calibration_is_order_independent() {
        let f = ramp_features(150);
        let mut rev = f.clone();
        rev.reverse();
        rev.swap(3, 77);
        assert_eq!(calibrate_quantizer(&f, 2).unwrap(), calibrate_quantizer(&rev, 2).unwrap());
    }

    #[test]
    fn quantizer_needs_enough_samples_and_valid_bits() {
        assert!(calibrate_quantizer(&ramp_features(99), 4).is_err());
        assert!(calibrate_quantizer(&ramp_features(100), 3).is_err());
    }

    #[test]
    fn threshold_from_distance_set() {
        let t_h = reference_distance(&[0, 1, 2, 5], ThStatistic::Max).unwrap();
        let spec = ThresholdSpec::new(0.5, t_h).unwrap();
        assert_eq!(spec.t_h, 5);
        assert_eq!(spec.threshold, 3);
        assert!(reference_distance(&[], ThStatistic::Max).is_err());
        assert!(ThresholdSpec::new(1.0, 5).is_err());
        assert!(ThresholdSpec::new(0.0, 5).is_err());
    }

    #[test]
    fn percentile_statistics() {
        let d: Vec<u32> = (1..=100).collect();
        assert_eq!(reference_distance(&d, ThStatistic::P99).unwrap(), 99);
        assert_eq!(reference_distance(&d, ThStatistic::P95).unwrap(), 95);
        assert_eq!(reference_distance(&d, ThStatistic::Max).unwrap(), 100);
        assert_eq!(reference_distance(&[4], ThStatistic::P95).unwrap(), 4);
    }

    #[test]
    fn threshold_monotone_in_alpha() {
        let mut last = 0;
        for alpha in [0.3, 0.5, 0.7] {
            let t = ThresholdSpec::new(alpha, 17).unwrap().threshold;
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn identical_pairs_give_zero_threshold() {
        let f = ramp_features(600);
        let cal = calibrate_quantizer(&f, 4).unwrap();
        let pairs: Vec<_> = f.iter().map(|v| (v.clone(), v.clone())).collect();
        let spec = calibrate_threshold(&pairs, &cal, 0.5, ThStatistic::Max).unwrap();
        assert_eq!(spec.t_h, 0);
        assert_eq!(spec.threshold, 0);
        assert_eq!(decide(0, &spec), Decision::Attacked);
        assert!(calibrate_threshold(&[], &cal, 0.5, ThStatistic::Max).is_err());
    }

    #[test]
    fn decision_rule_is_inclusive() {
        let spec = ThresholdSpec {
            alpha_t: 0.5,
            t_h: 6,
            threshold: 3,
        };
        assert_eq!(decide(3, &spec), Decision::Attacked);
        assert_eq!(decide(2, &spec), Decision::Normal);
        assert_eq!(decide(0, &ThresholdSpec::new(0.5, 2).unwrap()), Decision::Normal);
        assert_eq!(decide(128, &spec), Decision::Attacked);
        assert_eq!(decide(128, &ThresholdSpec::disabled()), Decision::Normal);
    }
}
