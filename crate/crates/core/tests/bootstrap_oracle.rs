mod oracles;

use annoteval_core::bootstrap::{bca_interval, CiMethod};
use annoteval_core::normal::normal_quantile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn agrees_with_reference_bound_for_bound() {
    for k in 0..20u64 {
        let n = 5 + (k as usize * 45) / 19;
        let x = oracles::sample(k, n);
        let ci = bca_interval(&x, 10_000, 42 + k, 0.95).unwrap();
        assert_eq!(ci.method, CiMethod::Bca, "sample {k}");
        let (lo, hi) = oracles::bca_reference(&x, 10_000, 42 + k, 0.95);
        assert_eq!(
            (ci.lower.to_bits(), ci.upper.to_bits()),
            (lo.to_bits(), hi.to_bits()),
            "sample {k}"
        );
    }
}

#[test]
fn two_point_sample() {
    let x = [0.4, 0.6];
    let ci = bca_interval(&x, 10_000, 42, 0.95).unwrap();
    assert_eq!(
        (ci.lower, ci.upper),
        oracles::bca_reference(&x, 10_000, 42, 0.95)
    );
}

#[test]
fn stable_across_seeds() {
    for k in 0..20u64 {
        let x = oracles::sample(k, 5 + (k as usize * 45) / 19);
        let a = bca_interval(&x, 10_000, 1, 0.95).unwrap();
        let b = bca_interval(&x, 10_000, 2, 0.95).unwrap();
        assert!(
            (a.lower - b.lower).abs() <= 0.01 && (a.upper - b.upper).abs() <= 0.01,
            "sample {k}: {a:?} {b:?}"
        );
    }
}

#[test]
fn shift_equivariance() {
    let x = oracles::sample(3, 30);
    let c = 0.25;
    let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
    let a = bca_interval(&x, 5_000, 9, 0.95).unwrap();
    let b = bca_interval(&shifted, 5_000, 9, 0.95).unwrap();
    assert!((a.lower + c - b.lower).abs() < 1e-9 && (a.upper + c - b.upper).abs() < 1e-9);
}

#[test]
fn coverage_of_true_mean() {
    // Beta(2, 5)-like skewed draws through inverse transform of a triangular law.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let true_mean = 1.0 / 3.0;
    let mut hits = 0;
    for trial in 0..500u64 {
        let x: Vec<f64> = (0..35)
            .map(|_| {
                // Triangular on [0, 1] with mode 0: mean 1/3.
                let u: f64 = rng.gen();
                1.0 - u.sqrt()
            })
            .collect();
        let ci = bca_interval(&x, 2_000, trial, 0.95).unwrap();
        if ci.lower <= true_mean && true_mean <= ci.upper {
            hits += 1;
        }
    }
    assert!(hits >= 450, "coverage {hits}/500");
}

#[test]
fn half_width_for_table_sized_spread() {
    // 35 precision-like values around 0.6 with standard deviation about 0.12.
    let x: Vec<f64> = (0..35)
        .map(|i| (0.6 + 0.12 * normal_quantile((i as f64 + 0.5) / 35.0).unwrap()).clamp(0.0, 1.0))
        .collect();
    let ci = bca_interval(&x, 10_000, 42, 0.95).unwrap();
    let (lo, hi) = oracles::bca_reference(&x, 10_000, 42, 0.95);
    assert_eq!((ci.lower, ci.upper), (lo, hi));
    let half = ci.half_width();
    assert!((0.02..0.08).contains(&half), "half width {half}");
}

#[test]
fn all_equal_sample_is_a_point() {
    let ci = bca_interval(&[0.7; 12], 10_000, 42, 0.95).unwrap();
    assert_eq!(
        (ci.lower, ci.upper, ci.method),
        (0.7, 0.7, CiMethod::PercentileFallback)
    );
}
