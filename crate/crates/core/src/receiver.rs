//! STS correlation receiver: CIR estimation, back-search leading-edge
//! detection and DS-TWR distance.

use serde::{Deserialize, Serialize};

use crate::signal::{pulse_prototype, FrameLayout, Waveform};
use crate::{dsp, Error, Result, SPEED_OF_LIGHT};

/// Default CIR window length in taps.
pub const DEFAULT_CIR_WINDOW: usize = 700;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CirSource {
    Preamble,
    Sts,
}

/// Peak-normalized correlation magnitudes in a fixed-length window.
#[derive(Debug, Clone, PartialEq)]
pub struct CirEstimate {
    pub taps: Vec<f64>,
    /// Correlation lag of `taps[0]`.
    pub window_start: usize,
    pub source: CirSource,
}

impl CirEstimate {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn peak_index(&self) -> usize {
        argmax(&self.taps)
    }
}

/// Leading-edge thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeParams {
    /// Back-search window length in samples.
    pub btw_samples: usize,
    /// Minimum early-path amplitude relative to the main peak.
    pub mpep: f64,
    /// Minimum candidate power relative to the window's mean tap power.
    pub papr: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        EdgeParams {
            btw_samples: 400,
            mpep: 0.5,
            papr: 2.0,
        }
    }
}

impl EdgeParams {
    pub fn validate(&self) -> Result<()> {
        if self.btw_samples == 0 {
            return Err(Error::config("edge.btw_samples must be > 0"));
        }
        if !(self.mpep > 0.0 && self.mpep <= 1.0) {
            return Err(Error::config("edge.mpep must be in (0, 1]"));
        }
        if !(self.papr > 1.0 && self.papr.is_finite()) {
            return Err(Error::config("edge.papr must be > 1"));
        }
        Ok(())
    }
}

/// DS-TWR intervals in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTimes {
    pub t_round1: f64,
    pub t_reply1: f64,
    pub t_round2: f64,
    pub t_reply2: f64,
}

/// One STS reception: the CIR, the first-path tap and its time.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub cir: CirEstimate,
    pub first_path: usize,
    /// Arrival of the STS relative to the frame's transmit start, seconds.
    pub arrival_s: f64,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Estimate the CIR by sliding correlation of `received` against `template`.
///
/// The window holds `window` taps starting `back_search` lags before the
/// global correlation maximum (clamped at lag 0, zero-padded at the end).
pub fn estimate_cir(
    received: &Waveform,
    template: &Waveform,
    window: usize,
    back_search: usize,
) -> Result<CirEstimate> {
    if template.is_empty() || template.len() >= received.len() {
        return Err(Error::config("template must be non-empty and shorter than the received waveform"));
    }
    if window == 0 {
        return Err(Error::config("CIR window must be > 0"));
    }
    let template_energy = template.energy();
    if received.energy() == 0.0 || template_energy == 0.0 {
        return Err(Error::NoSignal);
    }
    let corr = dsp::correlate(&received.samples, &template.samples);
    let mags: Vec<f64> = corr.iter().map(|c| c.norm() / template_energy).collect();
    let peak = argmax(&mags);
    let peak_value = mags[peak];
    if !(peak_value > 0.0 && peak_value.is_finite()) {
        return Err(Error::NoSignal);
    }
    let start = peak.saturating_sub(back_search);
    let mut taps = vec![0.0; window];
    for (t, &m) in taps.iter_mut().zip(&mags[start..]) {
        *t = m / peak_value;
    }
    Ok(CirEstimate {
        taps,
        window_start: start,
        source: CirSource::Sts,
    })
}

/// First-path tap index by back-search from the main peak.
///
/// Scans `[m - btw, m]` in ascending order and returns the first tap that is
/// at least `mpep` times the peak and whose power is at least `papr` times
/// the mean tap power over the whole window. Falls back to the main peak.
pub fn leading_edge(cir: &CirEstimate, p: &EdgeParams) -> usize {
    let taps = &cir.taps;
    if taps.is_empty() {
        return 0;
    }
    let m = argmax(taps);
    let peak = taps[m];
    let mean_power = taps.iter().map(|t| t * t).sum::<f64>() / taps.len() as f64;
    if peak <= 0.0 || mean_power <= 0.0 {
        return m;
    }
    (m.saturating_sub(p.btw_samples)..=m)
        .find(|&i| taps[i] >= p.mpep * peak && taps[i] * taps[i] / mean_power >= p.papr)
        .unwrap_or(m)
}

/// How many samples ahead of an isolated path's peak the leading-edge rule
/// fires: the widest lag at which the pulse autocorrelation still clears
/// `mpep`. Timestamps add this back so a lone LOS path is unbiased.
pub fn edge_offset(samples_per_pulse: usize, p: &EdgeParams) -> usize {
    let pulse = pulse_prototype(samples_per_pulse);
    let r = |k: usize| -> f64 { pulse.iter().zip(&pulse[k..]).map(|(a, b)| a * b).sum() };
    let r0 = r(0);
    (1..pulse.len().min(p.btw_samples + 1))
        .filter(|&k| r(k).abs() >= p.mpep * r0)
        .max()
        .unwrap_or(0)
}

/// Correlate, window and timestamp one received frame in a single pass.
pub fn receive(
    received: &Waveform,
    template: &Waveform,
    layout: &FrameLayout,
    window: usize,
    p: &EdgeParams,
) -> Result<Reception> {
    let cir = estimate_cir(received, template, window, p.btw_samples)?;
    let first_path = leading_edge(&cir, p);
    let lag = (cir.window_start + first_path + edge_offset(layout.samples_per_pulse, p)) as f64;
    let arrival_s = (lag - layout.sts_start as f64) / received.sample_rate_hz;
    Ok(Reception {
        cir,
        first_path,
        arrival_s,
    })
}

/// STS arrival time relative to the frame's transmit start, on the sample grid.
pub fn timestamp(
    received: &Waveform,
    sts_template: &Waveform,
    layout: &FrameLayout,
    p: &EdgeParams,
) -> Result<f64> {
    receive(received, sts_template, layout, DEFAULT_CIR_WINDOW, p).map(|r| r.arrival_s)
}

/// Double-sided two-way ranging distance in meters.
pub fn ds_twr_distance(t: &RoundTimes) -> Result<f64> {
    let den = t.t_round1 + t.t_round2 + t.t_reply1 + t.t_reply2;
    if !(den > 0.0) {
        return Err(Error::config("DS-TWR denominator must be positive"));
    }
    Ok(SPEED_OF_LIGHT * (t.t_round1 * t.t_round2 - t.t_reply1 * t.t_reply2) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{build_frame, sts_template, FrameConfig};
    use crate::Complex64;

    fn cir_from(taps: Vec<f64>) -> CirEstimate {
        CirEstimate {
            taps,
            window_start: 0,
            source: CirSource::Sts,
        }
    }

    fn spikes(len: usize, at: &[(usize, f64)]) -> Vec<f64> {
        let mut v = vec![0.0; len];
        for &(i, a) in at {
            v[i] = a;
        }
        v
    }

    // Exhaustive-scan oracle written independently of `leading_edge`.
    fn oracle_first_path(taps: &[f64], p: &EdgeParams) -> usize {
        let m = (0..taps.len()).fold(0, |b, i| if taps[i] > taps[b] { i } else { b });
        let avg = taps.iter().map(|t| t * t).sum::<f64>() / taps.len() as f64;
        let mut candidates: Vec<usize> = Vec::new();
        for i in 0..taps.len() {
            let in_btw = i <= m && m - i <= p.btw_samples;
            if in_btw && taps[i] >= p.mpep * taps[m] && taps[i].powi(2) >= p.papr * avg {
                candidates.push(i);
            }
        }
        candidates.into_iter().min().unwrap_or(m)
    }

    #[test]
    fn single_tap_is_its_own_first_path() {
        let cir = cir_from(spikes(700, &[(400, 1.0)]));
        assert_eq!(leading_edge(&cir, &EdgeParams::default()), 400);
    }

    #[test]
    fn early_path_above_mpep_wins() {
        let mut taps = spikes(700, &[(380, 0.6), (400, 1.0)]);
        taps.iter_mut().filter(|t| **t == 0.0).for_each(|t| *t = 1e-3);
        let p = EdgeParams::default();
        assert_eq!(oracle_first_path(&taps, &p), 380);
        assert_eq!(leading_edge(&cir_from(taps), &p), 380);
    }

    #[test]
    fn early_path_below_mpep_ignored() {
        let mut taps = spikes(700, &[(380, 0.4), (400, 1.0)]);
        taps.iter_mut().filter(|t| **t == 0.0).for_each(|t| *t = 1e-3);
        let p = EdgeParams::default();
        assert_eq!(oracle_first_path(&taps, &p), 400);
        assert_eq!(leading_edge(&cir_from(taps), &p), 400);
    }

    #[test]
    fn paths_outside_btw_are_ignored() {
        let taps = spikes(700, &[(100, 0.9), (600, 1.0)]);
        assert_eq!(leading_edge(&cir_from(taps), &EdgeParams::default()), 600);
    }

    #[test]
    fn leading_edge_matches_oracle_on_pseudorandom_cirs() {
        let p = EdgeParams::default();
        let mut state = 0x1234_5678_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let taps: Vec<f64> = (0..700).map(|_| next().powi(6)).collect();
            assert_eq!(leading_edge(&cir_from(taps.clone()), &p), oracle_first_path(&taps, &p));
        }
    }

    #[test]
    fn ds_twr_symmetric_is_exact() {
        let tprop = 10.0 / SPEED_OF_LIGHT;
        let t = RoundTimes {
            t_round1: 1e-3 + 2.0 * tprop,
            t_reply1: 1e-3,
            t_round2: 1e-3 + 2.0 * tprop,
            t_reply2: 1e-3,
        };
        assert!((ds_twr_distance(&t).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn ds_twr_zero_distance() {
        let t = RoundTimes {
            t_round1: 2e-3,
            t_reply1: 2e-3,
            t_round2: 1e-3,
            t_reply2: 1e-3,
        };
        assert_eq!(ds_twr_distance(&t).unwrap(), 0.0);
    }

    #[test]
    fn ds_twr_asymmetric_matches_second_evaluation() {
        let c = 299_792_458.0_f64;
        let tp = 33.3564e-9_f64;
        let (ra, rb) = (1e-3_f64, 2e-3_f64);
        // Initiator: round1 = reply1 + 2 tp; Responder: round2 = reply2 + 2 tp
        let (r1, r2) = (rb + 2.0 * tp, ra + 2.0 * tp);
        let t = RoundTimes {
            t_round1: r1,
            t_reply1: rb,
            t_round2: r2,
            t_reply2: ra,
        };
        let num = r1 * r2 - rb * ra;
        let den = r1 + r2 + rb + ra;
        let want = c * (num / den);
        let got = ds_twr_distance(&t).unwrap();
        assert!(((got - want) / want).abs() < 1e-12);
    }

    #[test]
    fn ds_twr_rejects_degenerate_denominator() {
        let t = RoundTimes {
            t_round1: 0.0,
            t_reply1: 0.0,
            t_round2: 0.0,
            t_reply2: 0.0,
        };
        assert!(ds_twr_distance(&t).is_err());
    }

    fn delayed(w: &Waveform, k: usize) -> Waveform {
        let mut s = vec![Complex64::default(); k];
        s.extend_from_slice(&w.samples);
        s.resize(s.len() + 900, Complex64::default());
        Waveform::new(s, w.sample_rate_hz)
    }

    #[test]
    fn clean_template_gives_unit_tap_at_btw() {
        let cfg = FrameConfig::default();
        let t = sts_template(&cfg).unwrap();
        let rx = delayed(&t, 1000);
        let cir = estimate_cir(&rx, &t, 700, 400).unwrap();
        assert_eq!(cir.len(), 700);
        assert_eq!(cir.peak_index(), 400);
        assert!((cir.taps[400] - 1.0).abs() < 1e-9);
        assert_eq!(cir.window_start, 600);

        let shifted = delayed(&t, 1037);
        let cir2 = estimate_cir(&shifted, &t, 700, 400).unwrap();
        for (a, b) in cir.taps.iter().zip(&cir2.taps) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn two_path_cir_resolves_both_paths() {
        let cfg = FrameConfig::default();
        let t = sts_template(&cfg).unwrap();
        let mut rx = delayed(&t, 1000);
        // second path 20 samples later, main path 1.0, early path 0.6
        for s in rx.samples.iter_mut() {
            *s *= 0.6;
        }
        for (k, v) in t.samples.iter().enumerate() {
            rx.samples[1020 + k] += v;
        }
        let cir = estimate_cir(&rx, &t, 700, 400).unwrap();
        assert_eq!(cir.peak_index(), 400);
        let early = cir.taps[380];
        assert!((early - 0.6).abs() < 0.05, "early tap {early}");
        // The rising edge of the pulse-shaped 0.6 path clears MPEP one
        // sample early.
        assert_eq!(leading_edge(&cir, &EdgeParams::default()), 379);
    }

    #[test]
    fn rrc_edge_offset() {
        // Raised-cosine autocorrelation at T/2 is ~0.60, at 3T/4 ~0.26.
        assert_eq!(edge_offset(4, &EdgeParams::default()), 2);
        let strict = EdgeParams {
            mpep: 0.95,
            ..EdgeParams::default()
        };
        assert_eq!(edge_offset(4, &strict), 0);
    }

    #[test]
    fn window_is_clamped_and_padded() {
        let cfg = FrameConfig::default();
        let t = sts_template(&cfg).unwrap();
        let rx = delayed(&t, 10);
        let cir = estimate_cir(&rx, &t, 700, 400).unwrap();
        assert_eq!(cir.window_start, 0);
        assert_eq!(cir.len(), 700);
        assert_eq!(cir.peak_index(), 10);
    }

    #[test]
    fn zero_signal_is_an_error() {
        let cfg = FrameConfig::default();
        let t = sts_template(&cfg).unwrap();
        let rx = Waveform::zeros(t.len() + 2000, cfg.sample_rate_hz);
        assert!(matches!(estimate_cir(&rx, &t, 700, 400), Err(Error::NoSignal)));
    }

    #[test]
    fn frame_timestamp_matches_delay() {
        let cfg = FrameConfig::default();
        let (w, layout) = build_frame(&cfg, &[]).unwrap();
        let t = sts_template(&cfg).unwrap();
        let d = 67;
        let rx = delayed(&w, d);
        let ts = timestamp(&rx, &t, &layout, &EdgeParams::default()).unwrap();
        let want = d as f64 / cfg.sample_rate_hz;
        assert!((ts - want).abs() <= 1.0 / cfg.sample_rate_hz);
    }
}
