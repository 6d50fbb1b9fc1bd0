//! Large deviations for shape measures and bulk embeddability.
//!
//! A shape `λ` defines the atomic measure `μ = Σ_k λ_k δ_{log λ_k}`. Its
//! n-fold convolution is the measure of `λ^{⊗n}`, and its tail above `x` is
//! the tail sum `λ_{≥e^x}`. The log-Laplace transform is
//! `ℓ(β) = log Σ_k λ_k^{β+1} = (β+1) log ‖λ‖_{β+1}`.
//!
//! `A` bulk-embeds in `B` exactly when `ℓ_B(β) ≥ ℓ_A(β)` for every `β ≥ 0`
//! together with the comparison of largest parts at `p = ∞`.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{big_ln, log_sum_exp, minimize_beta, DEFAULT_GRID};
use crate::report::{SandwichReport, SandwichRow, Status, Verdict};
use crate::packing::{greedy_pack, verify_certificate, PackingCertificate};
use crate::shapes::{supermajorizes, Shape};

/// Default ceiling on distinct part sizes materialized by [`exact_tail`].
pub const DEFAULT_TAIL_BUDGET: u64 = 1_000_000;

pub const DEFAULT_TOL: f64 = 1e-9;

/// The measure `μ_λ` in log form: one atom per distinct part size.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLaplace {
    /// `(log size, log multiplicity)`, ascending in position.
    atoms: Vec<(f64, f64)>,
    max_position: f64,
}

impl LogLaplace {
    pub fn new(shape: &Shape) -> LogLaplace {
        let atoms: Vec<(f64, f64)> = shape.parts().map(|(s, m)| (big_ln(s), big_ln(m))).collect();
        let max_position = atoms.last().map_or(0.0, |a| a.0);
        LogLaplace { atoms, max_position }
    }

    /// `log λ_max`, the right end of the support.
    pub fn max_position(&self) -> f64 {
        self.max_position
    }

    /// Atoms as `(position, log weight)` with weight = size × multiplicity.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().map(|&(x, lm)| (x, x + lm))
    }

    /// `ℓ(β) − (β+1) log λ_max`, bounded as `β → ∞`.
    pub fn reduced(&self, beta: f64) -> f64 {
        let p = beta + 1.0;
        log_sum_exp(self.atoms.iter().map(|&(x, lm)| lm + p * (x - self.max_position)))
    }

    pub fn ell(&self, beta: f64) -> f64 {
        (beta + 1.0) * self.max_position + self.reduced(beta)
    }

    /// `(ℓ, ℓ′, ℓ″)` at `beta`: the log partition function and the mean and
    /// variance of log-size under the tilted weights.
    pub fn derivatives(&self, beta: f64) -> (f64, f64, f64) {
        let p = beta + 1.0;
        let logs: Vec<f64> = self.atoms.iter().map(|&(x, lm)| lm + p * (x - self.max_position)).collect();
        let red = log_sum_exp(logs.iter().copied());
        let weights: Vec<f64> = logs.iter().map(|l| (l - red).exp()).collect();
        let mean: f64 = weights.iter().zip(&self.atoms).map(|(w, a)| w * a.0).sum();
        let var: f64 = weights
            .iter()
            .zip(&self.atoms)
            .map(|(w, a)| w * (a.0 - mean).powi(2))
            .sum();
        (p * self.max_position + red, mean.clamp(0.0, self.max_position), var.max(0.0))
    }

    /// Gap between the largest and second largest atom positions, if any.
    fn top_gap(&self) -> Option<f64> {
        let n = self.atoms.len();
        (n >= 2).then(|| self.atoms[n - 1].0 - self.atoms[n - 2].0)
    }

    /// A beta beyond which the tilted weights are concentrated on the top atom.
    pub(crate) fn flat_beta(&self) -> f64 {
        match self.top_gap() {
            Some(gap) => (64.0f64).max(60.0 / gap),
            None => 64.0,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::OutOfDomain(format!("beta = {beta}")));
    }
    Ok(())
}

/// `ℓ(β)` (order 0) or its first or second derivative.
pub fn ell(shape: &Shape, beta: f64, order: u8) -> Result<f64> {
    check_beta(beta)?;
    let (l, d1, d2) = LogLaplace::new(shape).derivatives(beta);
    match order {
        0 => Ok(l),
        1 => Ok(d1),
        2 => Ok(d2),
        _ => Err(Error::InvalidArgument(format!("derivative order {order} not in 0..=2"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Legendre {
    /// `min_{β ≥ 0} ℓ(β) − βt`.
    pub value: f64,
    pub beta: f64,
}

/// Minimizes `ℓ(β) − βt` over `β ≥ 0`.
///
/// Below `ℓ′(0)` the minimum sits at `β = 0`. For `t ≥ log λ_max` the minimand
/// has no minimizer and an error is returned.
pub fn legendre(shape: &Shape, t: f64) -> Result<Legendre> {
    legendre_of(&LogLaplace::new(shape), t)
}

fn legendre_of(ll: &LogLaplace, t: f64) -> Result<Legendre> {
    if t.is_nan() {
        return Err(Error::OutOfDomain("t = NaN".into()));
    }
    let (l0, d0, _) = ll.derivatives(0.0);
    if t <= d0 {
        return Ok(Legendre { value: l0, beta: 0.0 });
    }
    if t >= ll.max_position() {
        return Err(Error::OutOfDomain(format!(
            "t = {t} is not below log of the largest part {}",
            ll.max_position()
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ll.derivatives(hi).1 < t {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    // Newton on ℓ′(β) = t, falling back to bisection when a step leaves the bracket.
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (_, d1, d2) = ll.derivatives(beta);
        let err = d1 - t;
        if err.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
        if err > 0.0 {
            hi = beta;
        } else {
            lo = beta;
        }
        let step = if d2 > 0.0 { beta - err / d2 } else { f64::NAN };
        beta = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(Legendre {
        value: ll.ell(beta) - beta * t,
        beta,
    })
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

/// `log` of the Chernoff bound `e^{n(ℓ(β) − βt)}` at the Legendre minimizer.
pub fn log_chernoff_upper(shape: &Shape, n: u64, t: f64) -> Result<f64> {
    check_n(n)?;
    Ok(n as f64 * legendre(shape, t)?.value)
}

/// Upper bound on `∫_{nt}^∞ dμ^{*n}`, the sum of parts of `λ^{⊗n}` at least `e^{nt}`.
pub fn chernoff_upper(shape: &Shape, n: u64, t: f64) -> Result<f64> {
    log_chernoff_upper(shape, n, t).map(f64::exp)
}

/// The Cramér lower bound split into its exponential factor and bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramerBound {
    /// `n(ℓ(β) − βt − β·slack)`.
    pub log_scale: f64,
    /// `1 − ℓ″(β)/(n·slack²)`; the bound is vacuous when this is not positive.
    pub bracket: f64,
    pub beta: f64,
}

impl CramerBound {
    pub fn value(&self) -> f64 {
        self.log_scale.exp() * self.bracket
    }

    pub fn is_vacuous(&self) -> bool {
        self.bracket <= 0.0
    }
}

/// Cramér's lower bound on `∫_{n(t−slack)}^∞ dμ^{*n}` for `ℓ′(0) ≤ t < log λ_max`.
pub fn cramer_bound(shape: &Shape, n: u64, t: f64, slack: f64) -> Result<CramerBound> {
    check_n(n)?;
    if slack.is_nan() || slack <= 0.0 {
        return Err(Error::InvalidArgument(format!("slack must be positive, got {slack}")));
    }
    let ll = LogLaplace::new(shape);
    let d0 = ll.derivatives(0.0).1;
    if t < d0 - 1e-15 || t >= ll.max_position() {
        return Err(Error::OutOfDomain(format!(
            "t = {t} outside [{d0}, {}) where the Cramér bound applies",
            ll.max_position()
        )));
    }
    let lg = legendre_of(&ll, t.max(d0))?;
    let (_, _, d2) = ll.derivatives(lg.beta);
    let nf = n as f64;
    Ok(CramerBound {
        log_scale: nf * (lg.value - lg.beta * slack),
        bracket: 1.0 - d2 / (nf * slack * slack),
        beta: lg.beta,
    })
}

/// Value of the Cramér lower bound; nonpositive results are vacuous.
pub fn cramer_lower(shape: &Shape, n: u64, t: f64, slack: f64) -> Result<f64> {
    cramer_bound(shape, n, t, slack).map(|c| c.value())
}

/// The slack `√(2C/n)` with `C = max ℓ″`, which makes the Cramér bracket at least 1/2.
pub fn default_slack(shape: &Shape, n: u64) -> Result<f64> {
    check_n(n)?;
    Ok((2.0 * max_second_derivative(shape) / n as f64).sqrt())
}

/// `max_{β ≥ 0} ℓ″(β)` by grid search with local refinement.
pub fn max_second_derivative(shape: &Shape) -> f64 {
    let ll = LogLaplace::new(shape);
    let m = minimize_beta(|b| -ll.derivatives(b).2, ll.flat_beta(), DEFAULT_GRID, 0.0);
    -m.value
}

/// Exact `∫_{nt}^∞ dμ^{*n}`: the sum of parts of `λ^{⊗n}` that are at least `e^{nt}`.
pub fn exact_tail(shape: &Shape, n: u64, t: f64) -> Result<BigUint> {
    exact_tail_with_budget(shape, n, t, DEFAULT_TAIL_BUDGET)
}

pub fn exact_tail_with_budget(shape: &Shape, n: u64, t: f64, budget: u64) -> Result<BigUint> {
    check_n(n)?;
    if t.is_nan() {
        return Err(Error::InvalidArgument("t = NaN".into()));
    }
    check_power_budget(shape, n, budget)?;
    Ok(shape.tensor_power(n).tail_ge_log(n as f64 * t))
}

/// Upper bound on the distinct sizes of `shape^{⊗n}`: `C(n+d−1, d−1)`.
pub fn power_size_bound(shape: &Shape, n: u64) -> BigUint {
    let d = shape.distinct_sizes() as u64;
    let mut c = BigUint::from(1u32);
    for i in 1..d {
        c = c * BigUint::from(n + i) / BigUint::from(i);
    }
    c
}

fn check_power_budget(shape: &Shape, n: u64, budget: u64) -> Result<()> {
    let bound = power_size_bound(shape, n);
    if bound > BigUint::from(budget) {
        return Err(Error::BudgetExceeded(format!(
            "{shape} to the power {n} may have {bound} distinct sizes (budget {budget})"
        )));
    }
    Ok(())
}

/// `g(β) = ℓ_b(β) − ℓ_a(β) = (β+1)(log‖b‖_{β+1} − log‖a‖_{β+1})`.
pub fn log_norm_gap(a: &Shape, b: &Shape, beta: f64) -> f64 {
    let la = LogLaplace::new(a);
    let lb = LogLaplace::new(b);
    (beta + 1.0) * (lb.max_position() - la.max_position()) + lb.reduced(beta) - la.reduced(beta)
}

/// A beta past which the sign of `Σ_x c_x x^{β+1}` equals the sign of the
/// coefficient at the largest size where the multiplicities of `a` and `b`
/// differ. `None` when the shapes are equal.
pub fn dominant_crossover(a: &Shape, b: &Shape) -> Option<f64> {
    let mut sizes: Vec<&BigUint> = a.parts().map(|(s, _)| s).chain(b.parts().map(|(s, _)| s)).collect();
    sizes.sort();
    sizes.dedup();
    let diffs: Vec<(&BigUint, BigInt)> = sizes
        .into_iter()
        .rev()
        .map(|s| {
            let c = BigInt::from(b.multiplicity(s)) - BigInt::from(a.multiplicity(s));
            (s, c)
        })
        .filter(|(_, c)| c.sign() != Sign::NoSign)
        .collect();
    let (top, c_top) = diffs.first()?;
    let Some((next, _)) = diffs.get(1) else {
        return Some(0.0);
    };
    let rest: BigUint = diffs[1..].iter().map(|(_, c)| c.magnitude().clone()).sum();
    let ratio = big_ln(&rest) - big_ln(c_top.magnitude());
    let gap = big_ln(top) - big_ln(next);
    Some((ratio / gap - 1.0).max(0.0))
}

/// Decides `‖λ(a)‖_p ≤ ‖λ(b)‖_p` for all `p ∈ [1, ∞]`.
///
/// Entirely classical pairs compare 1-norms only. Otherwise the margin
/// `g(β)/(β+1)` is minimized over a compact beta interval that extends past the
/// dominant-term crossover, and compared with its limit at `p = ∞`.
pub fn bulk_check(a: &Shape, b: &Shape, tol: f64) -> Verdict {
    let la = LogLaplace::new(a);
    let lb = LogLaplace::new(b);
    if a.is_classical() && b.is_classical() {
        let margin = lb.ell(0.0) - la.ell(0.0);
        return Verdict {
            status: Status::from_margin(margin, tol),
            margin,
            witness_p: 1.0,
        };
    }
    let limit = lb.max_position() - la.max_position();
    let crossover = match dominant_crossover(a, b) {
        Some(c) => c,
        None => {
            return Verdict {
                status: Status::Marginal,
                margin: 0.0,
                witness_p: 1.0,
            }
        }
    };
    let beta_max = 64f64.max(4.0 * (crossover + 1.0)).max(la.flat_beta()).max(lb.flat_beta());
    let m = minimize_beta(
        |beta| limit + (lb.reduced(beta) - la.reduced(beta)) / (beta + 1.0),
        beta_max,
        DEFAULT_GRID,
        limit,
    );
    Verdict {
        status: Status::from_margin(m.value, tol),
        margin: m.value,
        witness_p: m.beta + 1.0,
    }
}

/// An `n` for which the large-deviation argument certifies
/// `2λ(a^{⊗n}) ≼_S λ(b^{⊗n})`.
///
/// With `C = max ℓ″_b` and `s = √(2C/n)`, the Chernoff bound for `a` and the
/// Cramér bound for `b` give the criterion once
/// `g(β) − 2βs ≥ 2 log 2 / n` for every `β ≥ 0`. The condition is monotone in
/// `n`, so the smallest such `n` is found by doubling then bisection.
///
/// Returns `Ok(None)` when domination is not strict. Errors when `b` is
/// entirely classical, where only 1-norms matter.
pub fn analytic_n_bound(a: &Shape, b: &Shape) -> Result<Option<BigUint>> {
    if b.is_classical() {
        return Err(Error::OutOfDomain(
            "b is entirely classical; compare 1-norms instead".into(),
        ));
    }
    if bulk_check(a, b, DEFAULT_TOL).status != Status::Holds {
        return Ok(None);
    }
    let la = LogLaplace::new(a);
    let lb = LogLaplace::new(b);
    let c = max_second_derivative(b) * (1.0 + 1e-9) + 1e-300;
    let slope = lb.max_position() - la.max_position();
    let beta_max = 64f64
        .max(4.0 * (dominant_crossover(a, b).unwrap_or(0.0) + 1.0))
        .max(la.flat_beta())
        .max(lb.flat_beta());
    let holds = |n: u64| -> bool {
        let nf = n as f64;
        let s = (2.0 * c / nf).sqrt();
        if slope - 2.0 * s <= 0.0 {
            return false;
        }
        let gap = |beta: f64| {
            (beta + 1.0) * slope + lb.reduced(beta) - la.reduced(beta) - 2.0 * beta * s
        };
        let m = minimize_beta(gap, beta_max, DEFAULT_GRID, f64::INFINITY);
        m.value >= 2.0 * std::f64::consts::LN_2 / nf
    };
    let mut hi: u64 = 1;
    while !holds(hi) {
        if hi >= 1 << 62 {
            return Ok(None);
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(Some(BigUint::from(1u32)));
    }
    // holds(hi), !holds(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(BigUint::from(hi)))
}

/// A verified embedding `a^{⊗n} ↪ b^{⊗m}` with `m = ⌈n(1+ε)⌉`.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkConstruction {
    pub n: u64,
    pub m: u64,
    pub certificate: PackingCertificate,
}

/// Scans `N = 1..=n_max` for the first `N` where `2λ(a^{⊗N}) ≼_S λ(b^{⊗M})`,
/// `M = ⌈N(1+ε)⌉`, then packs greedily and verifies the packing exactly.
///
/// Errors with [`Error::NotBulkEmbeddable`] when the norm comparison fails and
/// with [`Error::BudgetExceeded`] when no `N ≤ n_max` works.
pub fn bulk_construct(a: &Shape, b: &Shape, eps: &BigRational, n_max: u64) -> Result<BulkConstruction> {
    if *eps <= BigRational::zero() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let verdict = bulk_check(a, b, DEFAULT_TOL);
    if verdict.status == Status::Violated {
        return Err(Error::NotBulkEmbeddable {
            margin: verdict.margin,
            witness_p: verdict.witness_p,
        });
    }
    let factor = BigRational::from_integer(1.into()) + eps;
    let mut a_pow = Shape::unit();
    let mut b_pow = Shape::unit();
    let mut m_cur: u64 = 0;
    for n in 1..=n_max {
        a_pow = a_pow.tensor(a);
        let m = (BigRational::from_integer(n.into()) * &factor)
            .ceil()
            .to_integer()
            .to_u64()
            .ok_or_else(|| Error::BudgetExceeded("exponent beyond 64 bits".into()))?;
        while m_cur < m {
            b_pow = b_pow.tensor(b);
            m_cur += 1;
        }
        if !supermajorizes(&b_pow, &a_pow.repeat(2)?) {
            continue;
        }
        let certificate = greedy_pack(&a_pow, &b_pow).ok_or_else(|| {
            Error::InvalidState(format!("greedy packing failed at N = {n} despite the tail criterion"))
        })?;
        if !verify_certificate(&a_pow, &b_pow, &certificate) {
            return Err(Error::InvalidState(format!("certificate at N = {n} failed verification")));
        }
        return Ok(BulkConstruction { n, m, certificate });
    }
    Err(Error::BudgetExceeded(format!("no N <= {n_max} satisfies the packing criterion")))
}

/// Tabulates exact tails against the Chernoff and Cramér bounds on `grid`
/// evenly spaced `t ∈ [ℓ′(0), log λ_max)`.
///
/// The Chernoff bound is compared with the tail at `nt`, the Cramér bound
/// with the tail at `n(t − slack)` where `slack = √(2C/n)`. A shape with a
/// single distinct part size has a point-mass measure and yields no rows.
pub fn sandwich(shape: &Shape, n: u64, grid: usize, budget: u64) -> Result<SandwichReport> {
    check_n(n)?;
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be at least 1".into()));
    }
    if shape.distinct_sizes() == 1 {
        return Ok(SandwichReport {
            n,
            rows: Vec::new(),
            violations: 0,
            note: Some("single part size: the measure is a point mass and every tail is 0 or the total".into()),
        });
    }
    check_power_budget(shape, n, budget)?;
    let power = shape.tensor_power(n);
    let ll = LogLaplace::new(shape);
    let d0 = ll.derivatives(0.0).1;
    let max = ll.max_position();
    let slack = default_slack(shape, n)?;
    let nf = n as f64;
    let close = |x: f64, bound: f64| x <= bound + 1e-10 * bound.abs().max(1.0);
    let mut rows = Vec::with_capacity(grid);
    for i in 0..grid {
        let t = d0 + (max - d0) * i as f64 / grid as f64;
        let exact = power.tail_ge_log(nf * t);
        let shifted = power.tail_ge_log(nf * (t - slack));
        let log_upper = log_chernoff_upper(shape, n, t)?;
        let cramer = cramer_bound(shape, n, t, slack)?;
        let log_lower = (!cramer.is_vacuous()).then(|| cramer.log_scale + cramer.bracket.ln());
        let log_exact = if exact.is_zero() { f64::NEG_INFINITY } else { big_ln(&exact) };
        let log_shifted = if shifted.is_zero() { f64::NEG_INFINITY } else { big_ln(&shifted) };
        let sandwiched = close(log_exact, log_upper) && log_lower.is_none_or(|l| close(l, log_shifted));
        rows.push(SandwichRow {
            t,
            exact_tail: exact.to_string(),
            log_exact_tail: log_exact,
            log_chernoff_upper: log_upper,
            slack,
            exact_tail_shifted: shifted.to_string(),
            log_exact_tail_shifted: log_shifted,
            log_cramer_lower: log_lower,
            sandwiched,
        });
    }
    let violations = rows.iter().filter(|r| !r.sandwiched).count();
    Ok(SandwichReport {
        n,
        rows,
        violations,
        note: None,
    })
}
