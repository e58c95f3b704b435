use proptest::prelude::*;
use szt_core::analysis::{self, StepDist};
use szt_core::grad::{self, SteKind};
use szt_core::kernel;
use szt_core::quantizer::{self, encode_bt, encode_szt};
use szt_core::train::count_transitions;
use szt_core::{pack_codes, unpack_codes, Granularity, PackedTernaryTensor, Prior, RandomSource, TernaryCode};

fn code() -> impl Strategy<Value = TernaryCode> {
    prop::sample::select(TernaryCode::ALL.to_vec())
}

fn simplex() -> impl Strategy<Value = [f64; 3]> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| {
        let s = a + b + c;
        [a / s, b / s, 1.0 - a / s - b / s]
    })
}

proptest! {
    #[test]
    fn pack_round_trip(codes in prop::collection::vec(code(), 0..10_000)) {
        let bytes = pack_codes(&codes);
        prop_assert_eq!(bytes.len(), codes.len().div_ceil(4));
        prop_assert_eq!(unpack_codes(&bytes, codes.len()).unwrap(), codes);
    }

    #[test]
    fn packed_slots_are_lsb_first_with_zero_padding(codes in prop::collection::vec(code(), 1..64)) {
        let bytes = pack_codes(&codes);
        for (i, c) in codes.iter().enumerate() {
            prop_assert_eq!((bytes[i / 4] >> (2 * (i % 4))) & 0b11, c.bits());
        }
        let used = 2 * (codes.len() % 4);
        if used != 0 {
            prop_assert_eq!(bytes[bytes.len() - 1] >> used, 0);
        }
    }

    #[test]
    fn high_bit_records_the_sign(w in -10.0f64..10.0, delta in 0.01f64..5.0) {
        let c = encode_szt(w, delta).unwrap();
        prop_assert_eq!(c.bits() >> 1 == 1, w < 0.0);
        prop_assert_eq!(c.stored_sign() < 0, w < 0.0);
    }

    #[test]
    fn forward_identity(w in -10.0f64..10.0, delta in 0.01f64..5.0) {
        let s = encode_szt(w, delta).unwrap();
        let b = encode_bt(w, delta).unwrap();
        prop_assert_eq!(s.numeric_value(), b.numeric_value());
        prop_assert!(b != TernaryCode::ZeroMinus);
    }

    #[test]
    fn entropy_gap_equals_zero_mass(p0 in 0.0f64..=1.0) {
        let gap = analysis::entropy_szt(p0).unwrap() - analysis::entropy_bt(p0).unwrap();
        prop_assert!((gap - p0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn szt_bias_is_linear_in_distance(u in 0.0f64..1.0, c in 0.0f64..1.0, delta in 0.1f64..3.0, g in 0.0f64..5.0) {
        let w = u * delta;
        let b = grad::bias_bound(SteKind::Szt, w, delta, g).unwrap();
        let bc = grad::bias_bound(SteKind::Szt, c * w, delta, g).unwrap();
        prop_assert!((bc - c * b).abs() <= 1e-12 * (1.0 + b));
        let mc = grad::mse_estimate_mc(SteKind::Szt, w, delta, &[g], 8, 1).unwrap();
        prop_assert!((mc.bias_sq - b * b).abs() <= 1e-9 * (1.0 + b * b));
    }

    #[test]
    fn deterministic_estimators_repeat(w in -2.0f64..2.0, delta in 0.1f64..3.0, g in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        for kind in [SteKind::Bt, SteKind::Szt] {
            let c = encode_szt(w, delta).unwrap();
            let a = grad::ste_backward(kind, w, delta, c, &g, None).unwrap();
            let b = grad::ste_backward(kind, w, delta, c, &g, None).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn szt_dead_zone_gradient_follows_stored_sign(w in -0.99f64..0.99, g in -3.0f64..3.0) {
        let c = encode_szt(w, 1.0).unwrap();
        let out = grad::ste_backward(SteKind::Szt, w, 1.0, c, &[g], None).unwrap();
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        prop_assert_eq!(out[0], sign * g);
    }

    #[test]
    fn laplace_threshold_is_scale_equivariant(b in 0.01f64..100.0, c in 0.01f64..100.0) {
        let d = quantizer::optimal_threshold(&Prior::laplace(b).unwrap()).unwrap();
        let dc = quantizer::optimal_threshold(&Prior::laplace(c * b).unwrap()).unwrap();
        prop_assert!((dc - c * d).abs() <= 1e-12 * c * d);
        let m = quantizer::mse_forward(&Prior::laplace(b).unwrap(), d).unwrap();
        let mc = quantizer::mse_forward(&Prior::laplace(c * b).unwrap(), dc).unwrap();
        prop_assert!((mc - c * c * m).abs() <= 1e-10 * c * c * m);
    }

    #[test]
    fn sensitivities_respect_the_sandwich(b in 0.2f64..5.0, k in 0.2f64..2.0, frac in 0.001f64..0.999) {
        for prior in [Prior::laplace(b).unwrap(), Prior::gaussian(b).unwrap(), Prior::half_laplace(b).unwrap()] {
            let delta = k * prior.sigma();
            let rep = analysis::sensitivity_ratio(&prior, delta, frac * delta).unwrap();
            prop_assert!(rep.sandwich_holds, "{:?} {:?}", prior, rep);
            prop_assert!(rep.phi_r >= rep.phi_f);
        }
    }

    #[test]
    fn deterministic_mgf_matches_closed_form(b in 0.2f64..5.0, frac in 0.01f64..0.99) {
        let delta = std::f64::consts::SQRT_2 * b;
        let s = frac * delta;
        let prior = Prior::laplace(b).unwrap();
        let closed = analysis::phi_r(&prior, delta, s).unwrap() / analysis::phi_f(&prior, delta, s).unwrap();
        let mgf = analysis::expected_ratio(&StepDist::Deterministic { s0: s }, b, delta).unwrap();
        prop_assert!((mgf - closed).abs() <= 1e-10 * closed);
    }

    #[test]
    fn kl_split_is_zero_mass_times_ln2(q in simplex(), p in simplex()) {
        let r = analysis::kl_split_check(q, p).unwrap();
        prop_assert!((r.difference - q[1] * std::f64::consts::LN_2).abs() <= 1e-12);
        prop_assert!(r.kl_szt_normalized >= -1e-12);
    }

    #[test]
    fn pac_bayes_gap_grows_with_zero_mass(d in 1u64..10_000_000, n in 2u64..1_000_000, p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(analysis::pac_bayes_gap(d, lo, n).unwrap() <= analysis::pac_bayes_gap(d, hi, n).unwrap());
    }

    #[test]
    fn szt_file_round_trip(rows in 1usize..6, cols in 1usize..9, seed in any::<u64>(), per_row in any::<bool>()) {
        let mut rng = RandomSource::new(seed);
        let codes: Vec<TernaryCode> = (0..rows * cols).map(|_| TernaryCode::ALL[rng.below(4)]).collect();
        let groups = if per_row { rows } else { 1 };
        let th: Vec<f64> = (0..groups).map(|_| 0.1 + rng.uniform()).collect();
        let gran = if per_row { Granularity::PerChannel(0) } else { Granularity::PerLayer };
        let t = PackedTernaryTensor::from_codes(vec![rows, cols], gran, th.clone(), th, &codes).unwrap();
        let back = PackedTernaryTensor::from_bytes(&t.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.codes(), codes);
    }

    #[test]
    fn gemv_matches_dequantized_product(rows in 1usize..8, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = RandomSource::new(seed);
        let codes: Vec<TernaryCode> = (0..rows * cols).map(|_| TernaryCode::ALL[rng.below(4)]).collect();
        let scales: Vec<f64> = (0..rows).map(|_| 0.5 + rng.uniform()).collect();
        let t = PackedTernaryTensor::from_codes(vec![rows, cols], Granularity::PerChannel(0), scales.clone(), scales, &codes).unwrap();
        let x: Vec<f64> = (0..cols).map(|_| rng.standard_normal()).collect();
        let y = kernel::ternary_gemv(&t, &x).unwrap();
        let dense = t.dequantize();
        for r in 0..rows {
            let expect: f64 = (0..cols).map(|c| dense[r * cols + c] * x[c]).sum();
            prop_assert!((y[r] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn transition_counts_partition_changes(a in prop::collection::vec(code(), 1..200), seed in any::<u64>()) {
        let mut rng = RandomSource::new(seed);
        let b: Vec<TernaryCode> = a.iter().map(|&c| if rng.bernoulli(0.3) { TernaryCode::ALL[rng.below(4)] } else { c }).collect();
        let t = count_transitions(&a, &b).unwrap();
        let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64;
        prop_assert_eq!(t.numeric + t.representational, changed);
        let back = count_transitions(&b, &a).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn stochastic_rounding_lands_on_neighbours(w in -3.0f64..3.0, delta in 0.1f64..2.0, seed in any::<u64>()) {
        let mut rng = RandomSource::new(seed);
        let v = f64::from(grad::sr_round(w, delta, &mut rng).numeric_value());
        if w.abs() >= delta {
            prop_assert_eq!(v, w.signum());
        } else {
            prop_assert!(v == 0.0 || v == w.signum());
        }
    }

    #[test]
    fn momentum_keeps_a_floor_under_szt(beta in 0.01f64..0.99, g in 0.1f64..2.0) {
        let traj = grad::momentum_simulate(SteKind::Szt, beta, 0.0, &[g], 2000).unwrap();
        let floor = g * g / (1.0 - beta * beta);
        prop_assert!(traj[1999] >= floor * (1.0 - 1e-9));
        let bt = grad::momentum_simulate(SteKind::Bt, beta, 1.0, &[g], 50).unwrap();
        prop_assert!((bt[49] - beta.powi(100)).abs() <= 1e-12);
    }
}
