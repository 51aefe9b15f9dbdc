//! Randomized invariants of the building blocks.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use rislink::channel::{convolve, frequency_response, ChannelResponse};
use rislink::codebook::{
    gen_exhaustive_codebook, gen_random_codebook, gen_sdm_codebook_traced, quantize_phase, Codebook, CodebookKind,
    ReflectionPattern,
};
use rislink::harness::output::{read_results, write_records, Format};
use rislink::harness::TrialRecord;
use rislink::metrics::{effective_rate, Scheme};
use rislink::pbf::{
    ao_optimize, fusion_learn, rote_index, AoConfig, LabeledSample, Objective, WeightShift,
};

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn taps(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(complex(), 1..=max_len)
}

/// Flat-or-selective response with `m` elements and `n` subcarriers.
fn response(m: usize, n: usize) -> impl Strategy<Value = ChannelResponse> {
    (
        prop::collection::vec(complex(), n),
        prop::collection::vec(prop::collection::vec(complex(), n), m),
    )
        .prop_map(|(direct, cascaded)| ChannelResponse { direct, cascaded })
}

fn pattern() -> impl Strategy<Value = ReflectionPattern> {
    (2u32..=16, 1usize..=12).prop_flat_map(|(b, m)| {
        prop::collection::vec(0..b, m).prop_map(move |idx| ReflectionPattern::new(idx, b).unwrap())
    })
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn samples(values: &[f64]) -> Vec<LabeledSample> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| LabeledSample {
            rp_index: i,
            objective_value: v,
        })
        .collect()
}

proptest! {
    #[test]
    fn patterns_are_unit_modulus_and_requantize(p in pattern()) {
        for (z, &i) in p.coefficients().iter().zip(p.phase_indices()) {
            prop_assert!((z.norm() - 1.0).abs() < 1e-15);
            prop_assert_eq!(quantize_phase(z.arg(), p.levels()).unwrap(), i);
        }
        prop_assert_eq!(ReflectionPattern::from_coefficients(&p.coefficients(), p.levels()).unwrap(), p);
    }

    #[test]
    fn quantization_picks_a_nearest_level(theta in -20.0..20.0f64, b in 2u32..=64) {
        let i = quantize_phase(theta, b).unwrap();
        prop_assert!(i < b);
        let step = 2.0 * PI / b as f64;
        let got = angular_distance(theta, step * i as f64);
        for j in 0..b {
            prop_assert!(got <= angular_distance(theta, step * j as f64) + 1e-9);
        }
    }

    #[test]
    fn composition_is_affine_in_the_coefficients(
        ch in response(5, 8),
        a in prop::collection::vec(complex(), 5),
        b in prop::collection::vec(complex(), 5),
        s in -3.0..3.0f64,
    ) {
        let zero = ch.compose_coefficients(&[Complex64::new(0.0, 0.0); 5]).unwrap();
        let f = |c: &[Complex64]| -> Vec<Complex64> {
            ch.compose_coefficients(c).unwrap().iter().zip(&zero).map(|(x, z)| x - z).collect()
        };
        let mix: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y * s).collect();
        let (fa, fb, fm) = (f(&a), f(&b), f(&mix));
        for k in 0..8 {
            prop_assert!((fm[k] - (fa[k] + fb[k] * s)).norm() < 1e-12);
        }
        prop_assert_eq!(zero, ch.direct.clone());
    }

    #[test]
    fn cascade_response_is_product_of_link_responses(a in taps(6), b in taps(6), extra in 0usize..8) {
        let n = a.len() + b.len() - 1 + extra;
        let joint = frequency_response(&convolve(&a, &b), n);
        let (fa, fb) = (frequency_response(&a, n), frequency_response(&b, n));
        let tol = 1e-14 * (a.len() * b.len()) as f64 * 16.0;
        for k in 0..n {
            prop_assert!((joint[k] - fa[k] * fb[k]).norm() <= tol);
        }
    }

    #[test]
    fn effective_rate_is_linear_in_rate_and_decreasing_in_tau(
        rate in 0.0..50.0f64, scale in 0.0..4.0f64, t in 1u64..5000, frac in 0.0..1.0f64,
    ) {
        let tau = (frac * t as f64) as u64;
        let r = effective_rate(rate, tau, t).unwrap();
        prop_assert!((effective_rate(rate * scale, tau, t).unwrap() - scale * r).abs() <= 1e-12 * (1.0 + rate * scale));
        if tau < t {
            prop_assert!(effective_rate(rate, tau + 1, t).unwrap() <= r);
        }
        prop_assert!(effective_rate(rate, t + 1, t).is_err());
    }

    #[test]
    fn rote_and_fusion_ignore_positive_scaling(
        seed in any::<u64>(),
        values in prop::collection::vec(-5.0..5.0f64, 1..12),
        scale in 0.01..100.0f64,
    ) {
        let cb = gen_random_codebook(6, 8, values.len(), seed).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let idx = rote_index(&samples(&values), &cb).unwrap();
        prop_assert_eq!(idx, rote_index(&samples(&scaled), &cb).unwrap());
        prop_assert_eq!(values[idx], values.iter().cloned().fold(f64::MIN, f64::max));
        let fa = fusion_learn(&samples(&values), &cb, WeightShift::SubtractMin).unwrap();
        let fb = fusion_learn(&samples(&scaled), &cb, WeightShift::SubtractMin).unwrap();
        prop_assert_eq!(&fa.pattern, &fb.pattern);
        // Closure: the fused pattern is a legitimate B-level pattern of the right size.
        prop_assert_eq!(fa.pattern.levels(), 8);
        prop_assert_eq!(fa.pattern.num_elements(), 6);
        prop_assert!(!fa.pattern.is_off());
        prop_assert!((fa.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(fa.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn sdm_never_loses_distance_and_stays_distinct(m in 1usize..=4, b in 2u32..=5, seed in any::<u64>(), qf in 0.0..1.0f64) {
        let universe = (b as usize).pow(m as u32);
        let q = 2 + (qf * (universe.min(12) - 2) as f64) as usize;
        let (cb, trace) = gen_sdm_codebook_traced(m, b, q, seed, 100).unwrap();
        let mut all = vec![trace.initial_distance];
        all.extend(&trace.sweep_distances);
        prop_assert!(all.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let mut rows: Vec<&[u32]> = cb.patterns().iter().map(|p| p.phase_indices()).collect();
        rows.sort();
        rows.dedup();
        prop_assert_eq!(rows.len(), q);
    }

    #[test]
    fn codebook_text_round_trip(m in 1usize..=8, b in 2u32..=16, q in 1usize..=10, seed in any::<u64>()) {
        let cb = gen_random_codebook(m, b, q, seed).unwrap();
        prop_assert_eq!(Codebook::from_text(&cb.to_text()).unwrap(), cb);
    }

    #[test]
    fn ao_trace_is_monotone_and_its_output_is_a_fixed_point(
        ch in response(6, 4),
        init in prop::collection::vec(0u32..4, 6),
        rate in any::<bool>(),
    ) {
        let objective = if rate {
            Objective::Rate { tx_power: 1.0, noise_power: 0.1 }
        } else {
            Objective::ReceivedPower { tx_power: 1.0 }
        };
        let init = ReflectionPattern::new(init, 4).unwrap();
        let out = ao_optimize(&ch, 4, &init, objective, AoConfig::default()).unwrap();
        prop_assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((out.objective() - objective.evaluate(&ch.compose(&out.pattern).unwrap())).abs() <= 1e-9 * out.objective().abs().max(1.0));
        let again = ao_optimize(&ch, 4, &out.pattern, objective, AoConfig::default()).unwrap();
        prop_assert_eq!(again.pattern, out.pattern);
    }

    #[test]
    fn oracle_dominates_exhaustive_dominates_rote(ch in response(3, 1), b in prop::sample::select(vec![2u32, 4]), pick in prop::collection::vec(any::<bool>(), 64)) {
        let full = gen_exhaustive_codebook(3, b).unwrap();
        let power = |p: &ReflectionPattern| ch.compose(p).unwrap()[0].norm_sqr();
        let best = full.patterns().iter().map(power).fold(0.0, f64::max);
        let subset: Vec<ReflectionPattern> = full
            .patterns()
            .iter()
            .zip(pick.iter().cycle())
            .filter(|(_, &keep)| keep)
            .map(|(p, _)| p.clone())
            .collect();
        prop_assume!(!subset.is_empty());
        let sub = Codebook::new(subset, CodebookKind::Random, None).unwrap();
        let values: Vec<f64> = sub.patterns().iter().map(power).collect();
        let rote = values[rote_index(&samples(&values), &sub).unwrap()];
        let amplitude = ch.direct[0].norm() + ch.cascaded.iter().map(|g| g[0].norm()).sum::<f64>();
        prop_assert!(amplitude * amplitude >= best - 1e-12);
        prop_assert!(best >= rote);
        // Quantization loss of full enumeration is bounded by cos^2(pi / B).
        prop_assert!(best >= (PI / b as f64).cos().powi(2) * amplitude * amplitude - 1e-12);
    }

    #[test]
    fn records_round_trip_through_csv(
        rows in prop::collection::vec((0u64..50, 0usize..4, -1e3..1e3f64, 0.0..30.0f64, 0u64..100, any::<bool>()), 0..20),
    ) {
        let records: Vec<TrialRecord> = rows
            .into_iter()
            .map(|(trial, s, p, rate, tau, picked)| TrialRecord {
                trial_id: trial,
                scheme: Scheme::ALL[s],
                axis_value: None,
                rate,
                effective_rate: rate / 2.0,
                received_power_dbm: p,
                tau,
                coherence: 500,
                chosen_rp_index: picked.then_some(tau as usize),
                wall_time_s: 0.0,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut buf = Vec::new();
        write_records(&records, &mut buf, Format::Csv, true).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let back = read_results(&path, Format::Csv).unwrap();
        let mut want = records.clone();
        rislink::harness::output::sort_records(&mut want);
        prop_assert_eq!(back, want);
    }
}
