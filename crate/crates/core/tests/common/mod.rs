//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn logistic(mu: f64, x: f64) -> f64 {
    mu * x * (1.0 - x)
}

pub fn tent(gamma: f64, x: f64) -> f64 {
    if x < 0.5 {
        gamma * x
    } else {
        gamma * (1.0 - x)
    }
}

pub fn fog(mu: f64, gamma: f64, x: f64) -> f64 {
    logistic(mu, tent(gamma, x))
}

/// Two-orbit divergence-rate estimate of the largest Lyapunov exponent with
/// renormalization to `d0` after every step.
pub fn divergence_rate(f: impl Fn(f64) -> f64, x0: f64, d0: f64, transient: usize, steps: usize) -> f64 {
    let mut x = x0;
    for _ in 0..transient {
        x = f(x);
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for _ in 0..steps {
        // Keep the companion inside the unit interval.
        let y = if x + d0 <= 1.0 { x + d0 } else { x - d0 };
        let fx = f(x);
        let fy = f(y);
        let d = (fy - fx).abs();
        if d > 0.0 {
            sum += (d / (y - x).abs()).ln();
            used += 1;
        }
        x = fx;
    }
    sum / used as f64
}

/// Central finite difference of a function evaluated in higher precision,
/// returned as `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Two-sided signed-rank p-value by enumerating all `2^n` sign assignments.
/// Returns `(W+, W-, p)`.
pub fn wilcoxon_enumerate(diffs: &[f64]) -> (f64, f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    assert!(n <= 24, "enumeration oracle limited to small n");
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let tied = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let dev = (w_plus - total / 2.0).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - total / 2.0).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    (w_plus, total - w_plus, extreme as f64 / (1u64 << n) as f64)
}

pub fn chi_square_statistic(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum()
}

/// Monte Carlo p-value of the chi-square statistic under the uniform
/// multinomial null.
pub fn chi_square_monte_carlo(counts: &[u64], resamples: usize, seed: u64) -> f64 {
    let observed = chi_square_statistic(counts);
    let n: u64 = counts.iter().sum();
    let k = counts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = vec![0u64; k];
    let mut hits = 0usize;
    for _ in 0..resamples {
        sim.fill(0);
        for _ in 0..n {
            sim[rng.gen_range(0..k)] += 1;
        }
        if chi_square_statistic(&sim) >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / resamples as f64
}

/// `P(|Z| >= z)` for a standard normal, by Simpson integration of the density.
pub fn normal_two_sided_tail(z: f64) -> f64 {
    let z = z.abs();
    let upper = z + 40.0;
    let n = 200_000;
    let h = (upper - z) / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(z) + phi(upper);
    for i in 1..n {
        let t = z + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(t);
    }
    2.0 * s * h / 3.0
}

/// Upper tail of a one-degree-of-freedom chi-square distribution.
pub fn chi_square_df1_tail(x: f64) -> f64 {
    normal_two_sided_tail(x.sqrt())
}

pub fn uniform_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

pub fn uniform_words(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<u32>()).collect()
}
