//! Bias-corrected and accelerated (BCa) bootstrap intervals for the mean.
//!
//! Resampling is single-threaded from one seeded ChaCha8 stream, so a given
//! `(values, resamples, seed, level)` always yields the same interval.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::{normal_cdf, normal_quantile};

pub const MIN_RESAMPLES: usize = 1000;

/// How the resample indices are drawn.
pub const RNG_DESCRIPTION: &str =
    "ChaCha8Rng::seed_from_u64(seed); resample-major, n draws of gen_range(0..n) per resample";

#[derive(Debug, Error, PartialEq)]
pub enum BootstrapError {
    #[error("need at least 2 values, got {0}")]
    InsufficientData(usize),
    #[error("need at least {MIN_RESAMPLES} resamples, got {0}")]
    TooFewResamples(usize),
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Bca,
    PercentileFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval<F = f64> {
    pub lower: F,
    pub upper: F,
    pub estimate: F,
    pub level: f64,
    pub method: CiMethod,
    pub n_resamples: usize,
    pub seed: u64,
    pub z0: Option<f64>,
    pub acceleration: Option<f64>,
    pub warning: Option<String>,
}

impl<F: Float> ConfidenceInterval<F> {
    pub fn half_width(&self) -> F {
        (self.upper - self.lower) / (F::one() + F::one())
    }
}

/// Means of `resamples` bootstrap resamples of `values`.
pub fn resample_means<F>(values: &[F], resamples: usize, seed: u64) -> Vec<F>
where
    F: Float + FromPrimitive,
{
    let n = values.len();
    let n_f = F::from_usize(n).expect("length representable");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| {
            let mut sum = F::zero();
            for _ in 0..n {
                sum = sum + values[rng.gen_range(0..n)];
            }
            sum / n_f
        })
        .collect()
}

fn mean<F: Float + FromPrimitive>(values: impl Iterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut n = 0usize;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    sum / F::from_usize(n).expect("length representable")
}

/// Empirical quantile of sorted data, linear interpolation between order
/// statistics at position `p * (len - 1)`.
pub fn interpolated_quantile<F: Float + FromPrimitive>(sorted: &[F], p: f64) -> F {
    let p = p.clamp(0.0, 1.0);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return sorted[lo.min(sorted.len() - 1)];
    }
    let frac = F::from_f64(frac).expect("fraction representable");
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// BCa interval for the mean of `values`.
///
/// `z0` counts resample means equal to the point estimate (up to summation
/// rounding, see [`tie_tolerance`]) as one half. The
/// acceleration comes from the leave-one-out jackknife. When `z0` is infinite
/// or the jackknife has zero variance the percentile interval is returned
/// instead, flagged as [`CiMethod::PercentileFallback`].
pub fn bca_interval<F>(
    values: &[F],
    resamples: usize,
    seed: u64,
    level: F,
) -> Result<ConfidenceInterval<F>, BootstrapError>
where
    F: Float + FromPrimitive + ToPrimitive + Debug,
{
    let n = values.len();
    if n < 2 {
        return Err(BootstrapError::InsufficientData(n));
    }
    if resamples < MIN_RESAMPLES {
        return Err(BootstrapError::TooFewResamples(resamples));
    }
    let level_f = level.to_f64().unwrap_or(f64::NAN);
    if !(level_f > 0.0 && level_f < 1.0) {
        return Err(BootstrapError::Domain(format!(
            "level {level_f} is outside (0, 1)"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BootstrapError::Domain("values must be finite".into()));
    }
    let theta = mean(values.iter().copied());
    let mut ci = ConfidenceInterval {
        lower: theta,
        upper: theta,
        estimate: theta,
        level: level_f,
        method: CiMethod::PercentileFallback,
        n_resamples: resamples,
        seed,
        z0: None,
        acceleration: None,
        warning: None,
    };
    if values.iter().all(|v| *v == values[0]) {
        ci.lower = values[0];
        ci.upper = values[0];
        ci.warning = Some("zero variance: all values are equal".into());
        return Ok(ci);
    }

    let mut boot = resample_means(values, resamples, seed);
    // A resample mean that equals the estimate in exact arithmetic can differ
    // from it by summation rounding; such means count as ties.
    let tol = tie_tolerance(values);
    let below = boot.iter().filter(|b| **b < theta - tol).count();
    let ties = boot.iter().filter(|b| (**b - theta).abs() <= tol).count();
    boot.sort_by(|a, b| a.partial_cmp(b).expect("finite resample means"));

    let alpha = 1.0 - level_f;
    let percentile = |ci: &mut ConfidenceInterval<F>, why: String| {
        ci.method = CiMethod::PercentileFallback;
        ci.lower = interpolated_quantile(&boot, alpha / 2.0);
        ci.upper = interpolated_quantile(&boot, 1.0 - alpha / 2.0);
        ci.warning = Some(why);
    };

    let prop = (below as f64 + 0.5 * ties as f64) / resamples as f64;
    let z0 = match normal_quantile(prop) {
        Ok(z) => z,
        Err(_) => {
            percentile(
                &mut ci,
                format!("bias correction is infinite (proportion {prop})"),
            );
            return Ok(finish(ci));
        }
    };
    ci.z0 = Some(z0);

    let jack: Vec<f64> = (0..n)
        .map(|i| {
            mean(
                values
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| *v),
            )
            .to_f64()
            .expect("finite")
        })
        .collect();
    let jack_mean = jack.iter().sum::<f64>() / n as f64;
    let sq: f64 = jack.iter().map(|t| (jack_mean - t).powi(2)).sum();
    let cube: f64 = jack.iter().map(|t| (jack_mean - t).powi(3)).sum();
    if sq == 0.0 {
        percentile(&mut ci, "jackknife variance is zero".into());
        return Ok(finish(ci));
    }
    let a = cube / (6.0 * sq.powf(1.5));
    ci.acceleration = Some(a);

    let adjust = |z_alpha: f64| {
        let s = z0 + z_alpha;
        normal_cdf(z0 + s / (1.0 - a * s))
    };
    let z_lo = normal_quantile(alpha / 2.0).expect("alpha in (0, 1)");
    let z_hi = normal_quantile(1.0 - alpha / 2.0).expect("alpha in (0, 1)");
    let (a1, a2) = (adjust(z_lo), adjust(z_hi));
    if !(a1.is_finite() && a2.is_finite()) || a1 > a2 {
        percentile(&mut ci, format!("adjusted quantiles unusable ({a1}, {a2})"));
        return Ok(finish(ci));
    }
    ci.method = CiMethod::Bca;
    ci.lower = interpolated_quantile(&boot, a1);
    ci.upper = interpolated_quantile(&boot, a2);
    Ok(finish(ci))
}

/// Bound on the rounding error of a mean of `values` computed by summation.
pub fn tie_tolerance<F: Float + FromPrimitive>(values: &[F]) -> F {
    let n = F::from_usize(values.len()).expect("length representable");
    let abs_mean = mean(values.iter().map(|v| v.abs()));
    F::from_f64(4.0).expect("small constant") * n * F::epsilon() * abs_mean
}

fn finish<F: Float>(mut ci: ConfidenceInterval<F>) -> ConfidenceInterval<F> {
    if ci.estimate < ci.lower || ci.estimate > ci.upper {
        let note = "point estimate lies outside the interval";
        ci.warning = Some(match ci.warning.take() {
            Some(w) => format!("{w}; {note}"),
            None => note.to_string(),
        });
    }
    ci
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_equal_is_point_interval() {
        let ci = bca_interval(&[0.7f64; 35], 10_000, 42, 0.95).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.7, 0.7));
        assert_eq!(ci.method, CiMethod::PercentileFallback);
        assert!(ci.warning.is_some());
    }

    #[test]
    fn preconditions() {
        assert_eq!(
            bca_interval(&[0.5f64], 10_000, 1, 0.95),
            Err(BootstrapError::InsufficientData(1))
        );
        assert_eq!(
            bca_interval(&[0.5f64, 0.6], 999, 1, 0.95),
            Err(BootstrapError::TooFewResamples(999))
        );
        assert!(matches!(
            bca_interval(&[0.5f64, 0.6], 1000, 1, 1.0),
            Err(BootstrapError::Domain(_))
        ));
        assert!(matches!(
            bca_interval(&[0.5f64, f64::NAN], 1000, 1, 0.9),
            Err(BootstrapError::Domain(_))
        ));
    }

    #[test]
    fn deterministic() {
        let v = [0.2f64, 0.9, 0.4, 0.55, 1.0, 0.3];
        let a = bca_interval(&v, 5000, 9, 0.95).unwrap();
        let b = bca_interval(&v, 5000, 9, 0.95).unwrap();
        assert_eq!(a.lower.to_bits(), b.lower.to_bits());
        assert_eq!(a.upper.to_bits(), b.upper.to_bits());
        assert_eq!(a.method, CiMethod::Bca);
        assert!(a.lower <= a.estimate && a.estimate <= a.upper);
    }

    #[test]
    fn two_values() {
        let ci = bca_interval(&[0.4, 0.6], 10_000, 42, 0.95).unwrap();
        assert_eq!(ci.method, CiMethod::Bca);
        assert!(ci.lower >= 0.4 && ci.upper <= 0.6);
        // Symmetric sample: no acceleration.
        assert!(ci.acceleration.unwrap().abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let ci = bca_interval(&[0.1f32, 0.5, 0.9, 0.3, 0.7], 2000, 3, 0.95).unwrap();
        assert!(ci.lower < ci.upper);
    }

    #[test]
    fn quantile_interpolation() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(interpolated_quantile(&s, 0.0), 0.0);
        assert_eq!(interpolated_quantile(&s, 1.0), 3.0);
        assert_eq!(interpolated_quantile(&s, 0.5), 1.5);
    }
}
