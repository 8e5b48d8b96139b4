//! Randomized properties over the numeric kernels: norm inequalities,
//! gradient agreement with finite differences, spectral-norm domination,
//! serialization stability, and exact shift symmetries.

use proptest::prelude::*;

use softshift::harness::oracle::fd_gradient_richardson;
use softshift::harness::sampler::{sample_gradient_instance, sample_pair};
use softshift::harness::{run_suite, SampleConfig, ShiftKind, Suite, SuiteReport, TrialRecord};
use softshift::numkit::{
    dot, exp_elementwise, hadamard, l2_norm, linf_norm, spectral_norm_default, Matrix, RngStream,
    Vector,
};
use softshift::shift::{check_lemmas, BoundContext, ShiftPair};
use softshift::softmax::{log_sum_exp, Instance};

fn small_config() -> SampleConfig {
    SampleConfig {
        n_range: (2, 8),
        d_range: (1, 4),
        trials: 1,
        ..SampleConfig::bounds_default()
    }
}

/// A pair of equal-length vectors with entries in a tame range.
fn vector_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
        )
    })
}

proptest! {
    #[test]
    fn sup_norm_l2_norm_chain((xs, _) in vector_pair(64)) {
        let v = Vector(xs);
        let n = v.len() as f64;
        let linf = linf_norm(&v);
        let l2 = l2_norm(&v);
        prop_assert!(linf <= l2 * (1.0 + 1e-12));
        prop_assert!(l2 <= n.sqrt() * linf * (1.0 + 1e-12));
    }

    #[test]
    fn hadamard_product_norm_bound((xs, ys) in vector_pair(64)) {
        let x = Vector(xs);
        let y = Vector(ys);
        let lhs = l2_norm(&hadamard(&x, &y).unwrap());
        prop_assert!(lhs <= linf_norm(&x) * l2_norm(&y) * (1.0 + 1e-12));
    }

    #[test]
    fn cauchy_schwarz((xs, ys) in vector_pair(64)) {
        let x = Vector(xs);
        let y = Vector(ys);
        prop_assert!(dot(&x, &y).abs() <= l2_norm(&x) * l2_norm(&y) * (1.0 + 1e-12));
    }

    #[test]
    fn exp_of_small_perturbation_stays_proportional(
        (xs, ds) in (1usize..=32).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-0.01f64..0.01, n),
            )
        })
    ) {
        let x = Vector(xs);
        let delta = Vector(ds.clone());
        let y = x.add_scaled(1.0, &delta);
        let moved = exp_elementwise(&y).unwrap().add_scaled(-1.0, &exp_elementwise(&x).unwrap());
        let budget = 2.0 * l2_norm(&exp_elementwise(&x).unwrap()) * linf_norm(&delta);
        prop_assert!(l2_norm(&moved) <= budget * (1.0 + 1e-9) + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_agrees_with_richardson_differences(seed in any::<u64>()) {
        let config = SampleConfig::gradient_default();
        let mut stream = RngStream::new(seed, 0);
        let (a, x, b) = sample_gradient_instance(&config, &mut stream).unwrap();
        let analytic = Instance::new(a.clone(), x.clone(), b.clone()).unwrap().gradient().unwrap();
        let fd = fd_gradient_richardson(&a, &b, &x, 1e-4).unwrap();
        for j in 0..analytic.len() {
            let rel = (analytic[j] - fd[j]).abs() / fd[j].abs().max(1e-3);
            prop_assert!(rel <= 1e-7, "coordinate {} off by {:.3e}", j, rel);
        }
    }

    #[test]
    fn spectral_norm_dominates_every_matvec(seed in any::<u64>(), n in 1usize..=12, d in 1usize..=8) {
        let mut stream = RngStream::new(seed, 1);
        let a = stream.normal_matrix(n, d);
        let sigma = spectral_norm_default(&a).unwrap();
        for _ in 0..8 {
            let v = stream.unit_vector(d);
            prop_assert!(l2_norm(&a.matvec(&v).unwrap()) <= sigma * (1.0 + 1e-8) + 1e-12);
        }
        let frobenius = a.data().iter().map(|e| e * e).sum::<f64>().sqrt();
        prop_assert!(sigma <= frobenius * (1.0 + 1e-8) + 1e-12);
    }

    #[test]
    fn spectral_norm_is_absolutely_homogeneous(seed in any::<u64>(), c in -8.0f64..8.0) {
        let mut stream = RngStream::new(seed, 2);
        let a = stream.normal_matrix(5, 3);
        let sigma = spectral_norm_default(&a).unwrap();
        let scaled = spectral_norm_default(&a.scale(c)).unwrap();
        prop_assert!((scaled - c.abs() * sigma).abs() <= 1e-8 * sigma.max(1.0));
    }

    #[test]
    fn delta_b_is_antisymmetric_under_swap(seed in any::<u64>(), use_data in any::<bool>()) {
        let config = SampleConfig { master_seed: seed, ..small_config() };
        let kind = if use_data { ShiftKind::Data } else { ShiftKind::Weight };
        let pair = match sample_pair(kind, &config, 0) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let forward = pair.delta_b_exact().unwrap();
        let backward = pair.swapped().delta_b_exact().unwrap();
        for i in 0..forward.len() {
            prop_assert_eq!(forward[i].to_bits(), (-backward[i]).to_bits());
        }
    }

    #[test]
    fn derived_normalizer_matches_direct_log_sum_exp(seed in any::<u64>()) {
        let config = SampleConfig { master_seed: seed, ..small_config() };
        let pair = match sample_pair(ShiftKind::Weight, &config, 0) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let (_, derived) = pair.log_alphas().unwrap();
        let direct = log_sum_exp(&pair.logits_next().unwrap());
        prop_assert!((derived - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn bounds_hold_along_the_whole_step_segment(seed in any::<u64>(), t in 0.0f64..1.0) {
        let config = SampleConfig { master_seed: seed, ..small_config() };
        let pair = match sample_pair(ShiftKind::Weight, &config, 0) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let ShiftPair::Weight { a, b, x_t, x_next, r } = &pair else {
            panic!("weight pair expected");
        };
        let partial = ShiftPair::Weight {
            a: a.clone(),
            b: b.clone(),
            x_t: x_t.clone(),
            x_next: x_t.add_scaled(t, &x_next.add_scaled(-1.0, x_t)),
            r: *r,
        };
        partial.validate().unwrap();
        let ctx = BoundContext::with_floor(partial.n(), *r);
        let report = check_lemmas(&partial, &ctx).unwrap();
        prop_assert!(report.all_satisfied(), "unsatisfied at t={}: {:?}", t, report.satisfied);
    }

    #[test]
    fn suite_reports_round_trip_byte_for_byte(seed in any::<u64>(), trials in 1u64..5) {
        let config = SampleConfig {
            master_seed: seed % 1024,
            trials,
            ..small_config()
        };
        let report = run_suite(Suite::LemmasX, &config).unwrap();
        let once = report.to_json().unwrap();
        let twice = SuiteReport::from_json(&once).unwrap().to_json().unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn special_float_values_survive_the_json_encoding(
        v in prop_oneof![
            Just(f64::INFINITY),
            Just(f64::NEG_INFINITY),
            Just(f64::NAN),
            -1e308f64..1e308,
        ]
    ) {
        let mut record = TrialRecord::new(0, 3, 2, 4.0);
        record.log_actual = v;
        let text = serde_json::to_string(&record).unwrap();
        let back: TrialRecord = serde_json::from_str(&text).unwrap();
        if v.is_nan() {
            prop_assert!(back.log_actual.is_nan());
        } else {
            prop_assert_eq!(back.log_actual.to_bits(), v.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrices_round_trip_through_json(seed in any::<u64>(), n in 1usize..=6, d in 1usize..=6) {
        let mut stream = RngStream::new(seed, 3);
        let a = stream.normal_matrix(n, d);
        let text = serde_json::to_string(&a).unwrap();
        let back: Matrix = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(a, back);
    }
}

#[test]
fn ragged_matrix_payloads_are_rejected() {
    assert!(serde_json::from_str::<Matrix>("[[1.0, 2.0], [3.0]]").is_err());
}
