use super::train::loss_and_gradient;
use super::MlpModel;
use crate::Result;

/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

// Gradients smaller than this are compared in absolute terms.
const RELATIVE_FLOOR: f64 = 1e-6;

/// Largest relative error between the backpropagated gradient and central
/// finite differences, over every weight and bias, for one sample.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &MlpModel, sample: &[f64]) -> Result<f64> {
    let (_, analytic) = loss_and_gradient(model, sample)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;

    let loss_at = |m: &MlpModel| -> Result<f64> { Ok(loss_and_gradient(m, sample)?.0) };

    for l in 0..model.depth() {
        for i in 0..model.weights[l].len() {
            let orig = probe.weights[l][i];
            probe.weights[l][i] = orig + GRADCHECK_STEP;
            let up = loss_at(&probe)?;
            probe.weights[l][i] = orig - GRADCHECK_STEP;
            let down = loss_at(&probe)?;
            probe.weights[l][i] = orig;
            let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
            worst = worst.max(rel_err(analytic.weights[l][i], numeric));
        }
        for i in 0..model.biases[l].len() {
            let orig = probe.biases[l][i];
            probe.biases[l][i] = orig + GRADCHECK_STEP;
            let up = loss_at(&probe)?;
            probe.biases[l][i] = orig - GRADCHECK_STEP;
            let down = loss_at(&probe)?;
            probe.biases[l][i] = orig;
            let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
            worst = worst.max(rel_err(analytic.biases[l][i], numeric));
        }
    }
    Ok(worst)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR)
}
