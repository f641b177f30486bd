//! Reference implementations used to check the library, written without
//! touching its internals. Shared by several test targets.
#![allow(dead_code)]

use std::collections::HashMap;

use annoteval_core::normal::{normal_cdf, normal_quantile};
use annoteval_core::Span;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shared(a: Span, b: Span) -> usize {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    hi.saturating_sub(lo)
}

/// Best `(cardinality, total overlap)` over every one-to-one matching, by
/// exhaustive search over which unused prediction each reference takes (or
/// none), memoised on the set of used predictions.
pub fn best_matching_value(refs: &[Span], preds: &[Option<Span>]) -> (usize, usize) {
    assert!(preds.len() <= 20);
    fn go(
        i: usize,
        used: u32,
        refs: &[Span],
        preds: &[Option<Span>],
        memo: &mut HashMap<(usize, u32), (usize, usize)>,
    ) -> (usize, usize) {
        if i == refs.len() {
            return (0, 0);
        }
        if let Some(v) = memo.get(&(i, used)) {
            return *v;
        }
        let mut best = go(i + 1, used, refs, preds, memo);
        for (j, p) in preds.iter().enumerate() {
            let Some(p) = p else { continue };
            let o = shared(refs[i], *p);
            if o == 0 || used & (1 << j) != 0 {
                continue;
            }
            let (c, t) = go(i + 1, used | (1 << j), refs, preds, memo);
            best = best.max((c + 1, t + o));
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, refs, preds, &mut HashMap::new())
}

/// Every one-to-one matching listed explicitly, then the winner picked by
/// cardinality, total overlap and the smallest sorted list of span pairs.
/// Returns `(ref_index, pred_index)` pairs, sorted. Only for small inputs.
pub fn brute_force_matching(refs: &[Span], preds: &[Option<Span>]) -> Vec<(usize, usize)> {
    fn enumerate(
        i: usize,
        refs: &[Span],
        preds: &[Option<Span>],
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == refs.len() {
            out.push(cur.clone());
            return;
        }
        enumerate(i + 1, refs, preds, used, cur, out);
        for j in 0..preds.len() {
            if used[j] {
                continue;
            }
            if let Some(p) = preds[j] {
                if shared(refs[i], p) > 0 {
                    used[j] = true;
                    cur.push((i, j));
                    enumerate(i + 1, refs, preds, used, cur, out);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
    }
    let mut all = Vec::new();
    enumerate(
        0,
        refs,
        preds,
        &mut vec![false; preds.len()],
        &mut Vec::new(),
        &mut all,
    );
    let key = |m: &Vec<(usize, usize)>| {
        let total: usize = m
            .iter()
            .map(|&(r, p)| shared(refs[r], preds[p].unwrap()))
            .sum();
        let mut spans: Vec<_> = m
            .iter()
            .map(|&(r, p)| (refs[r], preds[p].unwrap(), r, p))
            .collect();
        spans.sort();
        (std::cmp::Reverse(m.len()), std::cmp::Reverse(total), spans)
    };
    let mut best = all.into_iter().min_by_key(key).unwrap();
    best.sort();
    best
}

/// A random matching instance over a text of `len` code points.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_refs: usize,
    max_preds: usize,
    len: usize,
) -> (Vec<Span>, Vec<Option<Span>>) {
    let span = |rng: &mut ChaCha8Rng| {
        let start = rng.gen_range(0..len - 1);
        let width = rng.gen_range(1..=(len - start).min(30));
        Span::new(start, start + width)
    };
    let n_refs = rng.gen_range(0..=max_refs);
    let n_preds = rng.gen_range(0..=max_preds);
    let mut refs: Vec<Span> = (0..n_refs).map(|_| span(rng)).collect();
    refs.sort();
    refs.dedup();
    let preds = (0..n_preds)
        .map(|_| {
            if rng.gen_bool(0.1) {
                None
            } else {
                Some(span(rng))
            }
        })
        .collect();
    (refs, preds)
}

/// BCa interval for the mean following the textbook recipe step by step.
/// Draws indices from the same ChaCha8 stream as the library so the two can
/// be compared bound for bound.
pub fn bca_reference(x: &[f64], b: usize, seed: u64, level: f64) -> (f64, f64) {
    let n = x.len();
    let mut total = 0.0;
    for v in x {
        total += v;
    }
    let theta = total / n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stars = Vec::with_capacity(b);
    for _ in 0..b {
        let mut s = 0.0;
        for _ in 0..n {
            s += x[rng.gen_range(0..n)];
        }
        stars.push(s / n as f64);
    }

    // Means within rounding distance of the estimate are ties.
    let mut abs_total = 0.0;
    for v in x {
        abs_total += v.abs();
    }
    let tol = 4.0 * n as f64 * f64::EPSILON * (abs_total / n as f64);
    let mut less = 0usize;
    let mut equal = 0usize;
    for t in &stars {
        if (*t - theta).abs() <= tol {
            equal += 1;
        } else if *t < theta {
            less += 1;
        }
    }
    let z0 = normal_quantile((less as f64 + 0.5 * equal as f64) / b as f64).unwrap();

    let mut loo = vec![0.0; n];
    for (i, slot) in loo.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, v) in x.iter().enumerate() {
            if j != i {
                s += v;
            }
        }
        *slot = s / (n - 1) as f64;
    }
    let mut loo_sum = 0.0;
    for t in &loo {
        loo_sum += t;
    }
    let loo_mean = loo_sum / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for t in &loo {
        den += (loo_mean - t).powi(2);
    }
    for t in &loo {
        num += (loo_mean - t).powi(3);
    }
    let a = num / (6.0 * den.powf(1.5));

    let alpha = 1.0 - level;
    let adjusted = |z: f64| normal_cdf(z0 + (z0 + z) / (1.0 - a * (z0 + z)));
    let a1 = adjusted(normal_quantile(alpha / 2.0).unwrap());
    let a2 = adjusted(normal_quantile(1.0 - alpha / 2.0).unwrap());

    stars.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (b - 1) as f64;
        let k = h.floor() as usize;
        let f = h - k as f64;
        if f == 0.0 || k + 1 >= b {
            stars[k.min(b - 1)]
        } else {
            stars[k] + f * (stars[k + 1] - stars[k])
        }
    };
    (q(a1), q(a2))
}

/// A seeded sample of `n` score-like values in `[0.3, 0.9)`.
pub fn sample(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n)
        .map(|_| 0.3 + 0.6 * rng.gen::<f64>() * rng.gen::<f64>())
        .collect()
}
