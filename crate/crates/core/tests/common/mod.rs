//! Property suites shared by the `properties` and `acceptance` targets.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uwb_guard::autoencoder::FeatureVector;
use uwb_guard::channel::{draw_realization, propagate, reciprocal_pair, LinkBudget, SvParams};
use uwb_guard::detector::{gray, hamming, level, quantize, QuantizedFeature, QuantizerCalibration};
use uwb_guard::receiver::{estimate_cir, leading_edge, CirEstimate, CirSource, EdgeParams};
use uwb_guard::signal::{pulse_shape, FrameConfig, Waveform};
use uwb_guard::Complex64;

pub type Suite = fn(u32) -> Result<(), String>;

pub const SUITES: [(&str, Suite); 5] = [
    ("hamming metric laws", hamming_laws),
    ("gray adjacency", gray_adjacency),
    ("leading-edge scaling invariance", edge_scaling),
    ("reciprocity tap equality", reciprocity),
    ("CIR window-length contract", window_contract),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn bits(len: usize) -> impl Strategy<Value = QuantizedFeature> {
    prop::collection::vec(any::<bool>(), len).prop_map(|bits| QuantizedFeature { bits })
}

fn triple() -> impl Strategy<Value = (QuantizedFeature, QuantizedFeature, QuantizedFeature)> {
    (0usize..300).prop_flat_map(|n| (bits(n), bits(n), bits(n)))
}

pub fn hamming_laws(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(triple(), 1usize..64), |((a, b, c), extra)| {
            let ab = hamming(&a, &b).unwrap();
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ab as usize <= a.len());
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
            // payload packing is transparent
            let a2 = QuantizedFeature::from_bytes(&a.to_bytes(), a.len()).unwrap();
            prop_assert_eq!(hamming(&a2, &b).unwrap(), ab);
            let longer = QuantizedFeature {
                bits: vec![false; a.len() + extra],
            };
            prop_assert!(hamming(&a, &longer).is_err());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn gray_adjacency(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::sample::select(vec![1u8, 2, 4, 8]),
        -10.0f64..10.0,
        0.1f64..20.0,
        0u32..255,
        0usize..16,
    );
    runner(cases)
        .run(&strategy, |(q, lo, width, k, dim)| {
            let levels = 1u32 << q;
            let k = k % (levels - 1);
            prop_assert_eq!((gray(k) ^ gray(k + 1)).count_ones(), 1);
            prop_assert!(gray(k + 1) < levels);

            let hi = lo + width;
            let step = width / f64::from(levels);
            let centre = |l: u32| lo + (f64::from(l) + 0.5) * step;
            prop_assert_eq!(level(centre(k), lo, hi, q), k);
            prop_assert_eq!(level(centre(k + 1), lo, hi, q), k + 1);

            let cal = QuantizerCalibration {
                bounds: vec![(lo, hi); 16],
                q,
            };
            let base = vec![centre(k); 16];
            let mut moved = base.clone();
            moved[dim] = centre(k + 1);
            let a = quantize(&FeatureVector { values: base }, &cal).unwrap();
            let b = quantize(&FeatureVector { values: moved }, &cal).unwrap();
            prop_assert_eq!(hamming(&a, &b).unwrap(), 1);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn edge_scaling(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(0.0f64..1.0, 1..800),
        -40i32..40,
        1usize..500,
        0.05f64..1.0,
        0.5f64..8.0,
    );
    runner(cases)
        .run(&strategy, |(taps, exp, btw, mpep, papr)| {
            let p = EdgeParams {
                btw_samples: btw,
                mpep,
                papr,
            };
            let cir = CirEstimate {
                taps,
                window_start: 0,
                source: CirSource::Sts,
            };
            // powers of two scale exactly
            let k = 2f64.powi(exp);
            let scaled = CirEstimate {
                taps: cir.taps.iter().map(|t| t * k).collect(),
                ..cir.clone()
            };
            let i = leading_edge(&cir, &p);
            prop_assert_eq!(leading_edge(&scaled, &p), i);
            prop_assert!(i <= cir.peak_index());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn symbols(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rand::Rng::random::<bool>(rng) { 1.0 } else { -1.0 })
        .collect()
}

pub fn reciprocity(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(any::<u64>(), 0.5f64..30.0), |(seed, distance)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = draw_realization(&SvParams::default(), distance, &mut rng).unwrap();
            let (fwd, rev) = reciprocal_pair(&r);
            prop_assert_eq!(&fwd.tap_delays, &rev.tap_delays);
            prop_assert_eq!(&fwd.tap_gains, &rev.tap_gains);

            let cfg = FrameConfig::legitimate();
            let template = pulse_shape(&symbols(&mut rng, 32), &cfg).unwrap();
            let budget = LinkBudget::noiseless();
            let field = 0..template.len();
            let a = propagate(&template, &fwd, &budget, field.clone(), cfg.sample_rate_hz, &mut rng).unwrap();
            let b = propagate(&template, &rev, &budget, field, cfg.sample_rate_hz, &mut rng).unwrap();
            prop_assert_eq!(&a.samples, &b.samples);
            let ca = estimate_cir(&a, &template, 700, 400).unwrap();
            let cb = estimate_cir(&b, &template, 700, 400).unwrap();
            prop_assert_eq!(ca, cb);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn window_contract(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), 8usize..64, 0usize..600, 1usize..200, 1usize..900, 0usize..500);
    runner(cases)
        .run(&strategy, |(seed, n, lead, tail, window, back)| {
            let cfg = FrameConfig::legitimate();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let template = pulse_shape(&symbols(&mut rng, n), &cfg).unwrap();
            let mut rx = vec![Complex64::default(); lead];
            rx.extend_from_slice(&template.samples);
            rx.resize(rx.len() + tail, Complex64::default());
            let rx = Waveform::new(rx, cfg.sample_rate_hz);
            let cir = estimate_cir(&rx, &template, window, back).unwrap();
            prop_assert_eq!(cir.len(), window);
            prop_assert_eq!(cir.window_start, lead.saturating_sub(back));
            let at = lead - cir.window_start;
            if at < window {
                prop_assert!((cir.taps[at] - 1.0).abs() < 1e-12);
            }
            prop_assert!(cir.taps.iter().all(|&t| (0.0..=1.0 + 1e-12).contains(&t)));
            Ok(())
        })
        .map_err(|e| e.to_string())
}
