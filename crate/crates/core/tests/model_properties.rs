use std::collections::BTreeMap;

use galam_core::model::{
    drift_closed_form, drift_iterate, expected_negative, expected_positive,
    expected_positive_derivative, expected_positive_tiebreak, f_prime_single, f_single,
    find_fixed_points, h, threshold, DriftDirection, DriftSpec, DEFAULT_GRID_RESOLUTION,
    DEFAULT_TOLERANCE,
};
use galam_core::RoomConfig;
use proptest::prelude::*;
use statrs::distribution::{Binomial, Discrete};

/// Seat-weighted room-majority probability via statrs' binomial pmf.
fn reference_f(config: &RoomConfig, p: f64) -> f64 {
    config
        .fractions()
        .map(|(size, a)| {
            let law = Binomial::new(p, size as u64).unwrap();
            let win: f64 = (size / 2 + 1..=size).map(|j| law.pmf(j as u64)).sum();
            a * win
        })
        .sum()
}

fn layout() -> impl Strategy<Value = RoomConfig> {
    prop::collection::btree_map(2u32..=16, 1u64..40, 1..5).prop_map(|m| RoomConfig::new(m).unwrap())
}

fn layout_min3() -> impl Strategy<Value = RoomConfig> {
    prop::collection::btree_map(3u32..=16, 1u64..40, 1..5).prop_map(|m| RoomConfig::new(m).unwrap())
}

fn grid(step: f64) -> impl Iterator<Item = f64> {
    let k = (1.0 / step).round() as u32;
    (0..=k).map(move |j| j as f64 / k as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_reference_pmf(cfg in layout(), p in 0.0f64..=1.0) {
        let ours = expected_positive(&cfg, p).unwrap();
        prop_assert!((ours - reference_f(&cfg, p)).abs() < 1e-12);
    }

    #[test]
    fn row_identity(cfg in layout()) {
        for p in grid(1e-3) {
            let lhs = expected_negative(&cfg, p).unwrap();
            let rhs = 1.0 - expected_positive(&cfg, 1.0 - p).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12, "p={} {} vs {}", p, lhs, rhs);
        }
    }

    #[test]
    fn nondecreasing_with_exact_endpoints(cfg in layout()) {
        let values: Vec<f64> = grid(1e-3).map(|p| expected_positive(&cfg, p).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(values[0], 0.0);
        prop_assert_eq!(*values.last().unwrap(), 1.0);
        prop_assert_eq!(h(&cfg, 0.0).unwrap(), 0.0);
        prop_assert_eq!(h(&cfg, 1.0).unwrap(), 0.0);
        for p in grid(1e-2) {
            prop_assert!(expected_positive_derivative(&cfg, p).unwrap() >= 0.0);
        }
    }

    #[test]
    fn single_sign_change_when_rooms_have_three_seats(cfg in layout_min3()) {
        let report = find_fixed_points(&cfg, DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE).unwrap();
        prop_assert!(report.unique, "pattern {}", report.sign_pattern);
        let alpha = threshold(&cfg).unwrap();
        for p in grid(1e-3).filter(|&p| p > 0.0 && p < 1.0) {
            let v = h(&cfg, p).unwrap();
            if p < alpha - 1e-9 {
                prop_assert!(v <= 0.0, "h({}) = {} above zero below alpha {}", p, v, alpha);
            } else if p > alpha + 1e-9 {
                prop_assert!(v >= 0.0, "h({}) = {} below zero above alpha {}", p, v, alpha);
            }
        }
    }

    #[test]
    fn tiebreak_half_is_symmetric(size in (1u32..=8).prop_map(|m| 2 * m), p in 0.0f64..=1.0) {
        let cfg = RoomConfig::uniform(size, 3).unwrap();
        let lhs = expected_positive_tiebreak(&cfg, p, 0.5).unwrap();
        let rhs = 1.0 - expected_positive_tiebreak(&cfg, 1.0 - p, 0.5).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn drift_closed_form_agrees(k in 0.5f64..4.0, ell in 1.0f64..3.0, delta in 0.0f64..=1.0, b in 0.01f64..0.3, t in 0u32..=10, upper in any::<bool>()) {
        let direction = if upper { DriftDirection::Upper } else { DriftDirection::Lower };
        prop_assume!(!(direction == DriftDirection::Lower && delta == 1.0));
        let spec = DriftSpec::new(k, ell, delta, direction).unwrap();
        let it = drift_iterate(&spec, b, t).unwrap();
        prop_assume!(!it.clamped);
        let closed = drift_closed_form(&spec, b, t);
        prop_assume!(closed.is_normal());
        prop_assert!((it.value - closed).abs() <= 1e-12 * closed.abs().max(f64::MIN_POSITIVE), "{} vs {}", it.value, closed);
    }
}

#[test]
fn room_order_property() {
    for i in (3..=13).step_by(2) {
        for k in 51..=99 {
            let p = k as f64 / 100.0;
            assert!(
                f_single(i, p).unwrap() < f_single(i + 2, p).unwrap(),
                "i={i} p={p}"
            );
        }
        for k in 1..=49 {
            let p = k as f64 / 100.0;
            assert!(
                f_single(i, p).unwrap() > f_single(i + 2, p).unwrap(),
                "i={i} p={p}"
            );
        }
    }
}

#[test]
fn derivative_is_nonnegative_and_matches_difference_quotient() {
    for i in 2..=16 {
        for k in 1..=99 {
            let p = k as f64 / 100.0;
            let d = f_prime_single(i, p).unwrap();
            assert!(d >= 0.0);
            let step = 1e-6;
            let fd =
                (f_single(i, p + step).unwrap() - f_single(i, p - step).unwrap()) / (2.0 * step);
            assert!(
                (d - fd).abs() <= 1e-6 * d.abs().max(1e-3),
                "i={i} p={p}: {d} vs {fd}"
            );
        }
    }
}

#[test]
fn odd_sizes_sit_at_one_half() {
    for i in (3..=15).step_by(2) {
        let alpha = threshold(&RoomConfig::uniform(i, 1).unwrap()).unwrap();
        assert!((alpha - 0.5).abs() < 1e-10, "size {i}: {alpha}");
    }
    for i in (4..=14).step_by(2) {
        let a = threshold(&RoomConfig::uniform(i, 1).unwrap()).unwrap();
        let b = threshold(&RoomConfig::uniform(i + 2, 1).unwrap()).unwrap();
        assert!(a > b && b > 0.5);
    }
}

#[test]
fn layouts_with_pairs_may_lack_a_threshold() {
    // Pairs alone drive everything negative: h < 0 on the whole interior.
    let pairs = RoomConfig::uniform(2, 10).unwrap();
    let report = find_fixed_points(&pairs, DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE).unwrap();
    assert!(report.roots.is_empty());
    assert!(threshold(&pairs).is_err());
    let mixed = RoomConfig::new(BTreeMap::from([(2, 5), (5, 10)])).unwrap();
    assert!(threshold(&mixed).is_ok());
}
