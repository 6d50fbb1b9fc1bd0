//! Floating point helpers shared by the analytic modules.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;

/// Natural logarithm of a big integer, accurate to a few ulps at any size.
pub fn big_ln(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln(sum(exp(v)))` without overflow. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `x ln x` with the continuous extension at zero.
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Geometric grid on `[0, beta_max]`: dense near zero, sparse at large beta.
pub fn beta_grid(beta_max: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let span = beta_max.max(0.0).ln_1p();
    (0..points)
        .map(|i| (span * i as f64 / (points - 1) as f64).exp_m1())
        .collect()
}

/// Result of minimizing a function of beta over `[0, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub value: f64,
    /// `f64::INFINITY` when the infimum is the limit at infinity.
    pub beta: f64,
}

pub const DEFAULT_GRID: usize = 256;

/// Minimizes `f` over `[0, beta_max]` on a geometric grid, refines every grid-local
/// minimum by golden-section search, and compares against `limit`, the value of
/// `f` as beta tends to infinity. `f` need not be unimodal.
pub fn minimize_beta<F>(f: F, beta_max: f64, grid: usize, limit: f64) -> Minimum
where
    F: Fn(f64) -> f64 + Sync,
{
    let betas = beta_grid(beta_max, grid);
    let values: Vec<f64> = betas.par_iter().map(|&b| f(b)).collect();
    let mut best = Minimum {
        value: limit,
        beta: f64::INFINITY,
    };
    let n = betas.len();
    for i in 0..n {
        let v = values[i];
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { values[i + 1] };
        if v > left || v > right {
            continue;
        }
        let lo = if i == 0 { betas[0] } else { betas[i - 1] };
        let hi = if i + 1 == n { betas[i] } else { betas[i + 1] };
        let (b, fb) = golden_section(&f, lo, hi, 200);
        let (b, fb) = if fb <= v { (b, fb) } else { (betas[i], v) };
        if fb <= best.value {
            best = Minimum { value: fb, beta: b };
        }
    }
    // a tie with the limit means the grid has underflowed to it
    if limit <= best.value {
        best = Minimum {
            value: limit,
            beta: f64::INFINITY,
        };
    }
    best
}

/// Golden-section search for a local minimum of `f` on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if (hi - lo).abs() <= 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let flo = f(lo);
    let fhi = f(hi);
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if flo < best.1 {
        best = (lo, flo);
    }
    if fhi < best.1 {
        best = (hi, fhi);
    }
    best
}
