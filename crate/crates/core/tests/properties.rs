//! Property tests for the algebraic invariants.

mod common;

use common::explicit_hadamard;
use kfh_core::hadamard::{fwht_in_place, fwht_in_place_i64, hadamard_row, split_signs};
use kfh_core::reconstruct::eta2;
use kfh_core::sampler::{inverse_permutation, JointSampler};
use kfh_core::wavelet::soft_threshold;
use proptest::prelude::*;

fn dyadic_len() -> impl Strategy<Value = usize> {
    (1u32..=6).prop_map(|k| 1usize << k)
}

proptest! {
    #[test]
    fn fwht_matches_dense(len in dyadic_len(), seed in any::<u64>()) {
        let mut stream = common::TestStream(seed);
        let x: Vec<i64> = (0..len).map(|_| stream.small_int()).collect();
        let mut fast = x.clone();
        fwht_in_place_i64(&mut fast).unwrap();
        let h = explicit_hadamard(len);
        for (i, row) in h.iter().enumerate() {
            let dense: i64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert_eq!(fast[i], dense);
        }
    }

    #[test]
    fn fwht_involution_scales_by_length(len in dyadic_len(), seed in any::<u64>()) {
        let mut stream = common::TestStream(seed);
        let x: Vec<f64> = (0..len).map(|_| stream.unit_f64()).collect();
        let mut twice = x.clone();
        fwht_in_place(&mut twice).unwrap();
        fwht_in_place(&mut twice).unwrap();
        for (out, orig) in twice.iter().zip(&x) {
            prop_assert!((out - len as f64 * orig).abs() <= 1e-12 * len as f64);
        }
    }

    #[test]
    fn sign_split_partitions_every_row(n in (1u32..=5).prop_map(|k| 1usize << k), row in 0usize..32) {
        let row = row % n;
        let split = split_signs(&hadamard_row(n, row).unwrap()).unwrap();
        for (p, m) in split.positive().iter().zip(split.negative()) {
            prop_assert_eq!(p + m, 1);
        }
        prop_assert_eq!(split.signed_row(), hadamard_row(n, row).unwrap());
    }

    #[test]
    fn adjoint_identity_holds(seed in any::<u64>()) {
        let sampler = JointSampler::generate(8, 16, seed).unwrap();
        let mut stream = common::TestStream(seed ^ 0xabcdef);
        let x: Vec<f64> = (0..sampler.joint_dim()).map(|_| stream.unit_f64()).collect();
        let y: Vec<f64> = (0..sampler.m()).map(|_| stream.unit_f64()).collect();
        let ax = sampler.forward(&x).unwrap();
        let aty = sampler.adjoint(&y).unwrap();
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale);
    }

    #[test]
    fn permutation_inverse_composes_to_identity(seed in any::<u64>()) {
        let mut rng = kfh_core::rng::seeded_rng(seed);
        let p = kfh_core::rng::random_permutation(&mut rng, 64);
        let q = inverse_permutation(&p).unwrap();
        for i in 0..64 {
            prop_assert_eq!(q[p[i] as usize] as usize, i);
        }
    }

    #[test]
    fn soft_threshold_is_a_contraction(value in -1e6f64..1e6, lambda in 0f64..1e6) {
        let out = soft_threshold(value, lambda);
        prop_assert!(out.abs() <= value.abs());
        prop_assert!(out == 0.0 || out.signum() == value.signum());
        // Idempotent once the threshold has been applied.
        prop_assert_eq!(soft_threshold(out, 0.0), out);
    }

    #[test]
    fn eta2_always_yields_a_distribution(seed in any::<u64>(), threshold in 0f64..0.2) {
        let mut stream = common::TestStream(seed);
        let values: Vec<f64> = (0..16).map(|_| stream.unit_f64() * 0.1 + 0.05).collect();
        let out = eta2(2, &values, threshold, None).unwrap();
        let sum: f64 = out.distribution.values().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(out.distribution.values().iter().all(|&v| v >= 0.0));
    }
}
