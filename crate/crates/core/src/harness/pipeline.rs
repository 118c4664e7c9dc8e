//! Dataset to deployable detector: training and calibration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::dataset::Dataset;
use super::round::Detector;
use crate::autoencoder::{encode_batch, init_model, train, MlpModel, TrainReport};
use crate::detector::{calibrate_quantizer, calibrate_threshold, ThStatistic};
use crate::model_file::{f32_rounded, Calibration};
use crate::{Error, Result};

/// Train a fresh autoencoder on every CIR of `data`, positional split per
/// the training config. The result is rounded to f32 so it matches the
/// model as stored on disk.
pub fn train_model(s: &ScenarioConfig, data: &Dataset) -> Result<(MlpModel, TrainReport)> {
    if data.dim != s.cir_window() {
        return Err(Error::LengthMismatch {
            expected: s.cir_window(),
            actual: data.dim,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.model.init_seed);
    let init = init_model(&s.model.dims, s.model.latent_dim, &mut rng)?;
    let (model, report) = train(&init, &Dataset::samples(&data.pairs), &s.model.train)?;
    Ok((f32_rounded(&model), report))
}

/// Quantizer bounds from every CIR's features, threshold from every pair.
pub fn calibrate(model: &MlpModel, data: &Dataset, q: u8, alpha_t: f64, stat: ThStatistic) -> Result<Calibration> {
    let features = encode_batch(model, &Dataset::samples(&data.pairs))?;
    let mut quantizer = calibrate_quantizer(&features, q)?;
    // Stored bounds are f32; use exactly those.
    for b in &mut quantizer.bounds {
        *b = (f64::from(b.0 as f32), f64::from(b.1 as f32));
    }
    quantizer.validate()?;
    let pairs: Vec<_> = features
        .chunks_exact(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let threshold = calibrate_threshold(&pairs, &quantizer, alpha_t, stat)?;
    log::info!(
        "calibrated q={q}: t_h={} T={} over {} pairs",
        threshold.t_h,
        threshold.threshold,
        pairs.len()
    );
    Ok(Calibration { quantizer, threshold })
}

/// Calibrate `model` for the scenario's detector settings.
pub fn detector_for(s: &ScenarioConfig, model: MlpModel, data: &Dataset) -> Result<Detector> {
    let d = &s.detector;
    let calibration = calibrate(&model, data, d.q, d.alpha_t, d.t_h_statistic)?;
    Ok(Detector { model, calibration })
}

/// Train and calibrate in one go.
pub fn prepare_detector(s: &ScenarioConfig, data: &Dataset) -> Result<(Detector, TrainReport)> {
    let (model, report) = train_model(s, data)?;
    Ok((detector_for(s, model, data)?, report))
}
