//! FFT-backed linear convolution and correlation.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::Complex64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(len), p.plan_fft_inverse(len))
    })
}

/// Linear convolution `x * h`, output length `x.len() + h.len() - 1`.
pub(crate) fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let nnz = h.iter().filter(|g| g.norm_sqr() > 0.0).count();
    if nnz <= 16 {
        let mut out = vec![Complex64::default(); out_len];
        for (k, &g) in h.iter().enumerate() {
            if g.norm_sqr() == 0.0 {
                continue;
            }
            for (o, &s) in out[k..k + x.len()].iter_mut().zip(x) {
                *o += s * g;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let (fwd, inv) = plans(n);
    let mut a = padded(x, n);
    let mut b = padded(h, n);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a.truncate(out_len);
    a.iter_mut().for_each(|v| *v *= scale);
    a
}

/// Cross-correlation `c[l] = sum_k x[l + k] * conj(t[k])` for every lag
/// `l` in `0..=x.len() - t.len()`.
pub(crate) fn correlate(x: &[Complex64], t: &[Complex64]) -> Vec<Complex64> {
    if t.is_empty() || x.len() < t.len() {
        return Vec::new();
    }
    let lags = x.len() - t.len() + 1;
    let n = x.len().next_power_of_two();
    let (fwd, inv) = plans(n);
    let mut a = padded(x, n);
    let mut b = padded(t, n);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v.conj();
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a.truncate(lags);
    a.iter_mut().for_each(|v| *v *= scale);
    a
}

fn padded(x: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(n);
    v.extend_from_slice(x);
    v.resize(n, Complex64::default());
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_conv(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); x.len() + h.len() - 1];
        for (i, &a) in x.iter().enumerate() {
            for (j, &b) in h.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    }

    fn ramp(n: usize, k: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new((i as f64 * k).sin(), (i as f64 * 0.37 * k).cos()))
            .collect()
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let x = ramp(300, 0.7);
        let h = ramp(40, 1.3);
        let fast = convolve(&x, &h);
        let slow = direct_conv(&x, &h);
        assert_eq!(fast.len(), slow.len());
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn correlation_matches_direct() {
        let x = ramp(200, 0.3);
        let t = ramp(50, 0.9);
        let c = correlate(&x, &t);
        assert_eq!(c.len(), 151);
        for (l, v) in c.iter().enumerate() {
            let d: Complex64 = (0..t.len()).map(|k| x[l + k] * t[k].conj()).sum();
            assert!((v - d).norm() < 1e-9);
        }
    }
}
