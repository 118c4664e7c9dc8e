//! Unattacked CIR pair datasets.
//!
//! File layout, little-endian: magic "UWBCIR", u32 pair count, u32 CIR
//! length, then for each pair the Responder's Poll CIR (h_IR) followed by the
//! Initiator's Response CIR (h_RI), all as f32. The train/test split is
//! positional: the first `floor(0.9 * count)` pairs train, the rest test.

use std::fs;
use std::path::Path;

use super::config::{DetectorSide, ScenarioConfig};
use super::round::simulate_round;
use crate::par::map_indexed;
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 6] = b"UWBCIR";

#[derive(Debug, Clone, PartialEq)]
pub struct CirPair {
    pub h_ir: Vec<f64>,
    pub h_ri: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub pairs: Vec<CirPair>,
}

fn to_f32_grid(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| f64::from(x as f32)).collect()
}

/// Simulate `n_pairs` unattacked Poll/Response rounds under `s`.
///
/// Values are rounded through f32 so a saved and reloaded dataset is
/// identical to the in-memory one.
pub fn generate_dataset(s: &ScenarioConfig, n_pairs: u64) -> Result<Dataset> {
    if s.attack.enabled {
        return Err(Error::config("dataset generation requires the attack to be disabled"));
    }
    if n_pairs == 0 {
        return Err(Error::config("dataset needs at least one pair"));
    }
    let mut s = s.clone();
    s.detector.side = DetectorSide::Initiator;
    s.validate()?;
    let rounds = map_indexed(n_pairs, s.execution, |trial| simulate_round(&s, trial, false));
    let mut pairs = Vec::with_capacity(rounds.len());
    for (trial, r) in rounds.into_iter().enumerate() {
        match r {
            Ok(o) => pairs.push(CirPair {
                h_ir: to_f32_grid(o.remote_cir),
                h_ri: to_f32_grid(o.local_cir),
            }),
            Err(e @ (Error::NoSignal | Error::Data(_))) => log::warn!("dataset trial {trial} skipped: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(Dataset {
        dim: s.cir_window(),
        pairs,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Positional split at `floor(ratio * len)`.
    pub fn split(&self, ratio: f64) -> (&[CirPair], &[CirPair]) {
        let n = ((self.pairs.len() as f64) * ratio).floor() as usize;
        self.pairs.split_at(n.min(self.pairs.len()))
    }

    /// Every CIR as an autoencoder sample, pairs kept adjacent.
    pub fn samples(pairs: &[CirPair]) -> Vec<Vec<f64>> {
        pairs.iter().flat_map(|p| [p.h_ir.clone(), p.h_ri.clone()]).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.pairs.len() * self.dim * 8);
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&(self.pairs.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for p in &self.pairs {
            for &v in p.h_ir.iter().chain(&p.h_ri) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 14 || &bytes[..6] != DATASET_MAGIC {
            return Err(Error::data("not a CIR dataset (bad magic)"));
        }
        let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let body = &bytes[14..];
        if dim == 0 || body.len() != count * dim * 2 * 4 {
            return Err(Error::data(format!(
                "dataset body is {} bytes, header promises {count} pairs of {dim} taps",
                body.len()
            )));
        }
        let floats: Vec<f64> = body
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let pairs = floats
            .chunks_exact(2 * dim)
            .map(|c| CirPair {
                h_ir: c[..dim].to_vec(),
                h_ri: c[dim..].to_vec(),
            })
            .collect();
        Ok(Dataset { dim, pairs })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            master_seed: 9,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn attack_enabled_is_refused() {
        let mut s = small();
        s.attack.enabled = true;
        assert!(matches!(generate_dataset(&s, 4), Err(Error::Config(_))));
    }

    #[test]
    fn reload_is_bit_identical() {
        let d = generate_dataset(&small(), 3).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim, 700);
        let bytes = d.to_bytes();
        assert_eq!(&bytes[..6], b"UWBCIR");
        assert_eq!(bytes.len(), 14 + 3 * 700 * 2 * 4);
        assert_eq!(Dataset::from_bytes(&bytes).unwrap(), d);
    }

    #[test]
    fn nine_to_one_split() {
        let pair = CirPair {
            h_ir: vec![0.0; 2],
            h_ri: vec![0.0; 2],
        };
        let d = Dataset {
            dim: 2,
            pairs: vec![pair; 20_000],
        };
        let (train, test) = d.split(0.9);
        assert_eq!((train.len(), test.len()), (18_000, 2_000));
    }

    #[test]
    fn truncated_file_is_a_data_error() {
        let d = generate_dataset(&small(), 1).unwrap();
        let bytes = d.to_bytes();
        assert!(matches!(Dataset::from_bytes(&bytes[..100]), Err(Error::Data(_))));
    }
}
