//! Binary model file: autoencoder weights plus an optional detector
//! calibration trailer.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    "UWBAE1"                      6 bytes
//! version  u16                           = 1
//! layers   u32                           D
//! dims     u32 x (D + 1)
//! per layer: weights f32 x (J * I) row-major, then biases f32 x J
//! -- optional calibration block --
//! bounds   (f32 lo, f32 hi) x latent_dim
//! q        u8
//! alpha_t  f32
//! t_h      u32
//! T        u32
//! ```
//!
//! The latent layer is the first interior layer of minimum width.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{Activation, Complexity, MlpModel, TrainConfig, TrainReport};
use crate::detector::{QuantizerCalibration, ThresholdSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 6] = b"UWBAE1";
pub const VERSION: u16 = 1;

/// Detector state shipped with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub quantizer: QuantizerCalibration,
    pub threshold: ThresholdSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: MlpModel,
    pub calibration: Option<Calibration>,
}

/// JSON sidecar mirroring dims and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub dims: Vec<usize>,
    pub latent_dim: usize,
    pub complexity: Complexity,
    pub train_config: Option<TrainConfig>,
    pub train_report: Option<TrainReport>,
    pub calibration: Option<Calibration>,
}

/// Round every parameter through `f32`, as storing and reloading would.
pub fn f32_rounded(m: &MlpModel) -> MlpModel {
    let round = |v: &Vec<f64>| v.iter().map(|&x| f64::from(x as f32)).collect::<Vec<_>>();
    MlpModel {
        weights: m.weights.iter().map(round).collect(),
        biases: m.biases.iter().map(round).collect(),
        ..m.clone()
    }
}

pub fn sidecar_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::data("model file truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f32().map(f64::from)).collect()
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut out = Vec::with_capacity(16 + 4 * m.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(m.depth() as u32).to_le_bytes());
        for &d in &m.layer_dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for (w, b) in m.weights.iter().zip(&m.biases) {
            for &v in w.iter().chain(b) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        if let Some(cal) = &self.calibration {
            for &(lo, hi) in &cal.quantizer.bounds {
                out.extend_from_slice(&(lo as f32).to_le_bytes());
                out.extend_from_slice(&(hi as f32).to_le_bytes());
            }
            out.push(cal.quantizer.q);
            out.extend_from_slice(&(cal.threshold.alpha_t as f32).to_le_bytes());
            out.extend_from_slice(&cal.threshold.t_h.to_le_bytes());
            out.extend_from_slice(&cal.threshold.threshold.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(6)? != MAGIC {
            return Err(Error::data("not a model file (bad magic)"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::data(format!("unsupported model file version {version}")));
        }
        let layers = r.u32()? as usize;
        if !(2..=64).contains(&layers) {
            return Err(Error::data(format!("implausible layer count {layers}")));
        }
        let dims = (0..=layers).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let latent = (1..dims.len() - 1)
            .min_by_key(|&i| (dims[i], i))
            .ok_or_else(|| Error::data("model has no interior layer"))?;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for pair in dims.windows(2) {
            weights.push(r.f32s(pair[0] * pair[1])?);
            biases.push(r.f32s(pair[1])?);
        }
        let model = MlpModel {
            layer_dims: dims,
            weights,
            biases,
            hidden_activation: Activation::Relu,
            latent_layer_index: latent,
        };
        model.validate().map_err(|e| Error::data(e.to_string()))?;

        let calibration = if r.remaining() == 0 {
            None
        } else {
            let n = model.latent_dim();
            let bounds = (0..n)
                .map(|_| Ok((f64::from(r.f32()?), f64::from(r.f32()?))))
                .collect::<Result<Vec<_>>>()?;
            let q = r.u8()?;
            let alpha_t = f64::from(r.f32()?);
            let t_h = r.u32()?;
            let threshold = r.u32()?;
            if r.remaining() != 0 {
                return Err(Error::data("trailing bytes after calibration block"));
            }
            let quantizer = QuantizerCalibration { bounds, q };
            quantizer.validate().map_err(|e| Error::data(e.to_string()))?;
            Some(Calibration {
                quantizer,
                threshold: ThresholdSpec { alpha_t, t_h, threshold },
            })
        };
        Ok(ModelFile { model, calibration })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

impl ModelSidecar {
    pub fn describe(file: &ModelFile, train_config: Option<TrainConfig>, train_report: Option<TrainReport>) -> Self {
        ModelSidecar {
            dims: file.model.layer_dims.clone(),
            latent_dim: file.model.latent_dim(),
            complexity: file.model.complexity(),
            train_config,
            train_report,
            calibration: file.calibration.clone(),
        }
    }

    pub fn save(&self, model_path: &Path) -> Result<()> {
        fs::write(sidecar_path(model_path), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(model_path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(sidecar_path(model_path))?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::init_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> ModelFile {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        ModelFile {
            model: f32_rounded(&init_model(&[12, 6, 3, 6, 12], 3, &mut rng).unwrap()),
            calibration: Some(Calibration {
                quantizer: QuantizerCalibration {
                    bounds: vec![(-1.0, 1.0), (0.0, 0.5), (-2.5, 3.25)],
                    q: 4,
                },
                threshold: ThresholdSpec::new(0.5, 9).unwrap(),
            }),
        }
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..6], b"UWBAE1");
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 12);
        let params = 13 * 6 + 7 * 3 + 4 * 6 + 7 * 12;
        let cal = 3 * 8 + 1 + 4 + 4 + 4;
        assert_eq!(bytes.len(), 6 + 2 + 4 + 5 * 4 + params * 4 + cal);
        // T is the last u32
        assert_eq!(u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap()), 5);
    }

    #[test]
    fn round_trip_with_and_without_calibration() {
        let f = sample();
        assert_eq!(ModelFile::from_bytes(&f.to_bytes()).unwrap(), f);
        let bare = ModelFile {
            calibration: None,
            ..f
        };
        assert_eq!(ModelFile::from_bytes(&bare.to_bytes()).unwrap(), bare);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = sample().to_bytes();
        assert!(ModelFile::from_bytes(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelFile::from_bytes(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ModelFile::from_bytes(&extra).is_err());
    }

    #[test]
    fn file_and_sidecar_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let f = sample();
        f.save(&path).unwrap();
        ModelSidecar::describe(&f, Some(TrainConfig::default()), None).save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), f);
        let side = ModelSidecar::load(&path).unwrap();
        assert_eq!(side.dims, vec![12, 6, 3, 6, 12]);
        assert_eq!(side.latent_dim, 3);
    }
}
