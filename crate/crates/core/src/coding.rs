//! Noiseless coding of hybrid states: channels given by Kraus operators,
//! complete fidelity, the Hölder squeeze bound, typical subalgebras and the
//! feasibility and decay-rate verdicts.
//!
//! Channels act on states. A Kraus operator carries an input block, an output
//! block and a matrix of shape `output size × input size`; the channel is
//! subunital when `Σ K*K ≤ I` on every input block, which is the dual of
//! `E(I) ≤ I` for the observable map.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{classical_entropy, quantum_entropy, region_contains, DiagonalState};
use crate::error::{Error, Result};
use crate::largedev::LogLaplace;
use crate::numeric::{big_ln, log_sum_exp, minimize_beta, DEFAULT_GRID};
use crate::report::Verdict;
use crate::shapes::Shape;

/// Smallest eigenvalue of `I − Σ K*K` tolerated by the subunital check.
pub const SUBUNITAL_TOL: f64 = 1e-9;

/// Default ceiling on the number of joint types enumerated by [`typical_algebra`].
pub const DEFAULT_TYPE_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct KrausOp {
    pub input_block: usize,
    pub output_block: usize,
    pub matrix: DMatrix<Complex64>,
}

/// A completely positive, trace non-increasing map between hybrid memories.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input: Vec<u64>,
    output: Vec<u64>,
    kraus: Vec<KrausOp>,
}

fn block_sizes(shape: &Shape) -> Result<Vec<u64>> {
    shape
        .to_part_list(1 << 16)
        .ok_or_else(|| Error::BudgetExceeded(format!("{shape} has too many blocks for explicit channels")))
}

impl Channel {
    /// Validates dimensions and the subunital condition. Block indices refer
    /// to the descending part lists of `input` and `output`.
    pub fn new(input: &Shape, output: &Shape, kraus: Vec<KrausOp>) -> Result<Channel> {
        let channel = Channel {
            input: block_sizes(input)?,
            output: block_sizes(output)?,
            kraus,
        };
        for (i, op) in channel.kraus.iter().enumerate() {
            let (Some(&cols), Some(&rows)) = (
                channel.input.get(op.input_block),
                channel.output.get(op.output_block),
            ) else {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {i} refers to blocks ({}, {}) outside the shapes",
                    op.input_block, op.output_block
                )));
            };
            if op.matrix.nrows() as u64 != rows || op.matrix.ncols() as u64 != cols {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {i} is {}x{}, expected {rows}x{cols}",
                    op.matrix.nrows(),
                    op.matrix.ncols()
                )));
            }
        }
        let worst = channel.min_slack();
        if worst < -SUBUNITAL_TOL {
            return Err(Error::NotSubunital(worst));
        }
        Ok(channel)
    }

    /// The identity channel on `shape`.
    pub fn identity(shape: &Shape) -> Result<Channel> {
        let sizes = block_sizes(shape)?;
        let kraus = sizes
            .iter()
            .enumerate()
            .map(|(k, &s)| KrausOp {
                input_block: k,
                output_block: k,
                matrix: DMatrix::identity(s as usize, s as usize),
            })
            .collect();
        Channel::new(shape, shape, kraus)
    }

    pub fn input_sizes(&self) -> &[u64] {
        &self.input
    }

    pub fn output_sizes(&self) -> &[u64] {
        &self.output
    }

    pub fn kraus(&self) -> &[KrausOp] {
        &self.kraus
    }

    /// `Σ K*K` restricted to each input block.
    fn gram(&self) -> Vec<DMatrix<Complex64>> {
        let mut out: Vec<DMatrix<Complex64>> =
            self.input.iter().map(|&s| DMatrix::zeros(s as usize, s as usize)).collect();
        for op in &self.kraus {
            out[op.input_block] += op.matrix.adjoint() * &op.matrix;
        }
        out
    }

    /// Smallest eigenvalue of `I − Σ K*K` over all input blocks.
    pub fn min_slack(&self) -> f64 {
        self.gram()
            .into_iter()
            .map(|g| {
                let n = g.nrows();
                let m = DMatrix::<Complex64>::identity(n, n) - g;
                m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_subunital(&self) -> bool {
        self.min_slack() >= -SUBUNITAL_TOL
    }

    /// Multiplies every Kraus operator by `c`, which scales `Σ K*K` by `c²`.
    pub fn scaled(&self, c: f64) -> Result<Channel> {
        let kraus = self
            .kraus
            .iter()
            .map(|op| KrausOp {
                matrix: op.matrix.map(|z| z * c),
                ..op.clone()
            })
            .collect();
        let channel = Channel {
            input: self.input.clone(),
            output: self.output.clone(),
            kraus,
        };
        let worst = channel.min_slack();
        if worst < -SUBUNITAL_TOL {
            return Err(Error::NotSubunital(worst));
        }
        Ok(channel)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel serializes")
    }

    pub fn from_json(text: &str) -> Result<Channel> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct KrausJson {
    input_block: usize,
    output_block: usize,
    #[serde(default)]
    index: usize,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    input: Vec<u64>,
    output: Vec<u64>,
    kraus: Vec<KrausJson>,
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut counters: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let kraus = self
            .kraus
            .iter()
            .map(|op| {
                let c = counters.entry((op.input_block, op.output_block)).or_default();
                let index = *c;
                *c += 1;
                KrausJson {
                    input_block: op.input_block,
                    output_block: op.output_block,
                    index,
                    rows: op.matrix.nrows(),
                    cols: op.matrix.ncols(),
                    entries: (0..op.matrix.nrows())
                        .map(|r| (0..op.matrix.ncols()).map(|c| [op.matrix[(r, c)].re, op.matrix[(r, c)].im]).collect())
                        .collect(),
                }
            })
            .collect();
        ChannelJson {
            input: self.input.clone(),
            output: self.output.clone(),
            kraus,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ChannelJson::deserialize(d)?;
        let mut kraus = Vec::with_capacity(raw.kraus.len());
        for (i, k) in raw.kraus.into_iter().enumerate() {
            if k.entries.len() != k.rows || k.entries.iter().any(|row| row.len() != k.cols) {
                return Err(D::Error::custom(format!(
                    "Kraus operator {i} entries do not match {}x{}",
                    k.rows, k.cols
                )));
            }
            let matrix = DMatrix::from_fn(k.rows, k.cols, |r, c| {
                let [re, im] = k.entries[r][c];
                Complex64::new(re, im)
            });
            kraus.push(KrausOp {
                input_block: k.input_block,
                output_block: k.output_block,
                matrix,
            });
        }
        let input = Shape::new(&raw.input).map_err(D::Error::custom)?;
        let output = Shape::new(&raw.output).map_err(D::Error::custom)?;
        for (name, given, shape) in [("input", &raw.input, &input), ("output", &raw.output, &output)] {
            if given.windows(2).any(|w| w[0] < w[1]) {
                return Err(D::Error::custom(format!(
                    "{name} block sizes must be listed in descending order, got {given:?} for {shape}"
                )));
            }
        }
        Channel::new(&input, &output, kraus).map_err(D::Error::custom)
    }
}

/// An encoder followed by a decoder, as stored in a channels file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingPair {
    pub encode: Channel,
    pub decode: Channel,
}

/// Random subunital channel with `rank` Kraus operators per block pair.
///
/// Entries are uniform in the unit square and the whole channel is scaled
/// once so that the largest `‖Σ K*K‖` over input blocks is at most 1.
pub fn random_subunital_channel(input: &Shape, output: &Shape, rank: usize, seed: u64) -> Result<Channel> {
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let ins = block_sizes(input)?;
    let outs = block_sizes(output)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kraus = Vec::new();
    for (j, &cols) in ins.iter().enumerate() {
        for (k, &rows) in outs.iter().enumerate() {
            for _ in 0..rank {
                let matrix = DMatrix::from_fn(rows as usize, cols as usize, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                kraus.push(KrausOp {
                    input_block: j,
                    output_block: k,
                    matrix,
                });
            }
        }
    }
    let raw = Channel {
        input: ins,
        output: outs,
        kraus,
    };
    let norm = raw
        .gram()
        .into_iter()
        .map(|g| g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let scale = if norm > 0.0 { (1.0 - 1e-12) / norm.sqrt() } else { 1.0 };
    raw.scaled(scale)
}

/// `‖ρ‖_d = max r_{k,j}² / r_k` over blocks with positive weight.
pub fn dense_sup(state: &DiagonalState) -> f64 {
    state
        .blocks()
        .iter()
        .filter_map(|b| {
            let rk = b.weight();
            (rk > 0.0).then(|| b.weights.iter().map(|r| r * r / rk).fold(0.0, f64::max))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    pub bound: f64,
    pub log_bound: f64,
    #[serde(with = "crate::report::extended_f64")]
    pub best_p: f64,
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `log(‖λ(a)‖_q · ‖λ(b)‖_p)` with `1/p + 1/q = 1`.
fn log_norm_product(a: &Shape, b: &Shape, p: f64) -> Result<f64> {
    Ok(a.log_p_norm(conjugate(p))? + b.log_p_norm(p)?)
}

/// Hölder bound `‖ρ‖_d ‖λ(a)‖_q ‖λ(b)‖_p` on the complete fidelity of any
/// encode and decode pair through `b`, where `a` is the shape of `ρ`.
/// With `p = None` the bound is minimized over `p ∈ [1, ∞]`.
pub fn holder_bound(state: &DiagonalState, b: &Shape, p: Option<f64>) -> Result<HolderBound> {
    holder_bound_power(state, b, 1, p)
}

/// The Hölder bound for `ρ^{⊗n}` through `b^{⊗n}`, evaluated in log space.
pub fn holder_bound_power(state: &DiagonalState, b: &Shape, n: u64, p: Option<f64>) -> Result<HolderBound> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let a = state.shape();
    let log_d = dense_sup(state).ln();
    let (log_norms, best_p) = match p {
        Some(p) => {
            if p.is_nan() || p < 1.0 {
                return Err(Error::InvalidExponent(p));
            }
            (log_norm_product(&a, b, p)?, p)
        }
        None => {
            let la = LogLaplace::new(&a);
            let lb = LogLaplace::new(b);
            let limit = log_norm_product(&a, b, f64::INFINITY)?;
            let beta_max = la.flat_beta().max(lb.flat_beta());
            let f = |beta: f64| log_norm_product(&a, b, beta + 1.0).unwrap_or(f64::INFINITY);
            let m = minimize_beta(f, beta_max, DEFAULT_GRID, limit);
            (m.value, m.beta + 1.0)
        }
    };
    let log_bound = n as f64 * (log_d + log_norms);
    Ok(HolderBound {
        bound: log_bound.exp(),
        log_bound,
        best_p,
    })
}

/// Complete fidelity `Σ r_k |ρ′_k(D E)|²` of encoding with `encode` and
/// recovering with `decode`, summed over all Kraus pairs that return to the
/// starting block.
pub fn coding_fidelity(state: &DiagonalState, decode: &Channel, encode: &Channel) -> Result<f64> {
    let sizes: Vec<u64> = state.blocks().iter().map(|b| b.size).collect();
    if encode.input != sizes {
        return Err(Error::DimensionMismatch(format!(
            "encoder input {:?} differs from the state's blocks {sizes:?}",
            encode.input
        )));
    }
    if decode.input != encode.output {
        return Err(Error::DimensionMismatch(format!(
            "decoder input {:?} differs from encoder output {:?}",
            decode.input, encode.output
        )));
    }
    if decode.output != sizes {
        return Err(Error::DimensionMismatch(format!(
            "decoder output {:?} differs from the state's blocks {sizes:?}",
            decode.output
        )));
    }
    for ch in [encode, decode] {
        let worst = ch.min_slack();
        if worst < -SUBUNITAL_TOL {
            return Err(Error::NotSubunital(worst));
        }
    }
    let mut by_input: Vec<Vec<&KrausOp>> = vec![Vec::new(); decode.input.len()];
    for op in &decode.kraus {
        by_input[op.input_block].push(op);
    }
    let mut fidelity = 0.0;
    for e in &encode.kraus {
        let block = &state.blocks()[e.input_block];
        let rk = block.weight();
        if rk <= 0.0 {
            continue;
        }
        for d in by_input[e.output_block].iter().filter(|d| d.output_block == e.input_block) {
            let m = &d.matrix * &e.matrix;
            let trace: Complex64 = block
                .weights
                .iter()
                .enumerate()
                .map(|(i, r)| m[(i, i)] * (r / rk))
                .sum();
            fidelity += rk * trace.norm_sqr();
        }
    }
    Ok(fidelity)
}

/// The α-typical subalgebra of `a^{⊗N}` for `ρ^{⊗N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalSummary {
    pub n: u64,
    pub alpha: f64,
    /// Block sizes are counts of typical `J` for a typical `K`; multiplicities
    /// count typical `K`. `None` when nothing is typical.
    pub shape_typ: Option<Shape>,
    pub prob_typ: f64,
    #[serde(with = "rational_string")]
    pub prob_typ_exact: BigRational,
    /// `log n(A_typ)`.
    #[serde(with = "crate::report::extended_f64")]
    pub log_block_count: f64,
    /// `log ‖ρ_typ‖_d` for the renormalized restriction of `ρ^{⊗N}`.
    #[serde(with = "crate::report::extended_f64")]
    pub log_dense_sup: f64,
}

mod rational_string {
    use num_rational::BigRational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(|_| de::Error::custom(format!("not a rational: {text}")))
    }
}

struct Alphabet {
    /// Block of each letter.
    block: Vec<usize>,
    log_r: Vec<f64>,
    exact_r: Vec<BigRational>,
    /// Allowed count range per letter.
    range: Vec<(u64, u64)>,
    blocks: usize,
}

fn factorials(n: u64) -> Vec<BigUint> {
    let mut f = vec![BigUint::one()];
    for i in 1..=n {
        let next = &f[i as usize - 1] * BigUint::from(i);
        f.push(next);
    }
    f
}

fn binomial_u64(n: u64, k: u64) -> BigUint {
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    c
}

/// Per block type `(N_k)`: typical `J` count per `K`, and the per-`K`
/// typical weight and largest single-sequence log probability.
#[derive(Default, Clone)]
struct ClassAccum {
    sizes: BigUint,
    exact_weight: BigRational,
    log_weights: Vec<f64>,
    max_log_r: f64,
}

/// Enumerates the joint types of `ρ^{⊗N}` and keeps those within `alpha` of
/// `r_{k,j}` in every letter (strict inequality), using multinomial counts.
///
/// Entries and `alpha` are read as the decimals they print as, so the
/// typicality boundary and the exact probability are decided in rational
/// arithmetic.
pub fn typical_algebra(state: &DiagonalState, n: u64, alpha: f64) -> Result<TypicalSummary> {
    typical_algebra_with_budget(state, n, alpha, DEFAULT_TYPE_BUDGET)
}

pub fn typical_algebra_with_budget(state: &DiagonalState, n: u64, alpha: f64, budget: u64) -> Result<TypicalSummary> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let letters: u64 = state.blocks().iter().map(|b| b.size).sum();
    let types = binomial_u64(n + letters - 1, letters - 1);
    if types > BigUint::from(budget) {
        return Err(Error::BudgetExceeded(format!(
            "{types} joint types for N = {n} over {letters} letters (budget {budget})"
        )));
    }
    let mut alphabet = Alphabet {
        block: Vec::new(),
        log_r: Vec::new(),
        exact_r: Vec::new(),
        range: Vec::new(),
        blocks: state.blocks().len(),
    };
    for (k, b) in state.blocks().iter().enumerate() {
        for &r in &b.weights {
            alphabet.block.push(k);
            alphabet.log_r.push(r.ln());
            alphabet.exact_r.push(decimal_rational(r));
            alphabet.range.push(typical_range(r, alpha, n));
        }
    }
    let fact = factorials(n);
    let d = alphabet.block.len();
    let empty = alphabet.range.iter().any(|&(lo, hi)| lo > hi);
    let mut classes: BTreeMap<Vec<u64>, ClassAccum> = BTreeMap::new();
    if !empty {
        let first = alphabet.range[0];
        let parts: Vec<BTreeMap<Vec<u64>, ClassAccum>> = (first.0..=first.1.min(n))
            .into_par_iter()
            .map(|c0| {
                let mut local = BTreeMap::new();
                let mut counts = vec![0u64; d];
                counts[0] = c0;
                enumerate(&alphabet, &fact, 1, n - c0, &mut counts, &mut local);
                local
            })
            .collect();
        for part in parts {
            for (key, acc) in part {
                let entry = classes.entry(key).or_insert_with(|| ClassAccum {
                    max_log_r: f64::NEG_INFINITY,
                    ..Default::default()
                });
                entry.sizes += acc.sizes;
                entry.exact_weight += acc.exact_weight;
                entry.log_weights.extend(acc.log_weights);
                entry.max_log_r = entry.max_log_r.max(acc.max_log_r);
            }
        }
    }
    let mut prob = BigRational::zero();
    let mut shape_parts: BTreeMap<BigUint, BigUint> = BTreeMap::new();
    let mut class_stats = Vec::new();
    for (block_counts, acc) in &classes {
        let mut k_count = fact[n as usize].clone();
        for &c in block_counts {
            k_count /= &fact[c as usize];
        }
        prob += BigRational::from_integer(k_count.clone().into()) * &acc.exact_weight;
        *shape_parts.entry(acc.sizes.clone()).or_default() += k_count;
        class_stats.push((log_sum_exp(acc.log_weights.iter().copied()), acc.max_log_r));
    }
    let prob_f = prob.to_f64().unwrap_or(0.0);
    let shape_typ = if shape_parts.is_empty() {
        None
    } else {
        Some(Shape::from_multiplicities(shape_parts)?)
    };
    let log_block_count = shape_typ
        .as_ref()
        .map_or(f64::NEG_INFINITY, |s| big_ln(&s.part_count()));
    let log_prob = prob_f.ln();
    let log_dense_sup = class_stats
        .iter()
        .filter(|(lw, _)| lw.is_finite())
        .map(|&(lw, mr)| 2.0 * mr - lw - log_prob)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TypicalSummary {
        n,
        alpha,
        shape_typ,
        prob_typ: prob_f,
        prob_typ_exact: prob,
        log_block_count,
        log_dense_sup,
    })
}

/// The rational with the shortest decimal expansion that rounds to `x`, so
/// that `0.05` is read as `1/20` rather than its binary approximation.
pub fn decimal_rational(x: f64) -> BigRational {
    let text = format!("{x}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let numer: num_bigint::BigInt = format!("{int}{frac}").parse().unwrap_or_default();
    BigRational::new(numer, num_traits::pow(num_bigint::BigInt::from(10), frac.len()))
}

/// Counts `c ≤ N` with `|c/N − r| < α`, computed in exact arithmetic.
fn typical_range(r: f64, alpha: f64, n: u64) -> (u64, u64) {
    let nr = BigRational::from_integer(n.into());
    let (r, alpha) = (decimal_rational(r), decimal_rational(alpha));
    let lo = ((&r - &alpha) * &nr).floor() + BigRational::one();
    let hi = ((&r + &alpha) * &nr).ceil() - BigRational::one();
    let clamp = |x: BigRational| {
        if x.is_negative() {
            0
        } else {
            x.to_integer().to_u64().unwrap_or(u64::MAX).min(n)
        }
    };
    (clamp(lo), clamp(hi))
}

fn enumerate(
    alphabet: &Alphabet,
    fact: &[BigUint],
    letter: usize,
    remaining: u64,
    counts: &mut Vec<u64>,
    out: &mut BTreeMap<Vec<u64>, ClassAccum>,
) {
    let d = counts.len();
    if letter == d {
        if remaining == 0 {
            record(alphabet, fact, counts, out);
        }
        return;
    }
    let (lo, hi) = alphabet.range[letter];
    if letter == d - 1 {
        if remaining >= lo && remaining <= hi {
            counts[letter] = remaining;
            record(alphabet, fact, counts, out);
        }
        return;
    }
    // the later letters must absorb what is left
    let rest_max: u64 = alphabet.range[letter + 1..].iter().map(|r| r.1).sum();
    for c in lo..=hi.min(remaining) {
        if remaining - c > rest_max {
            continue;
        }
        counts[letter] = c;
        enumerate(alphabet, fact, letter + 1, remaining - c, counts, out);
    }
    counts[letter] = 0;
}

fn record(alphabet: &Alphabet, fact: &[BigUint], counts: &[u64], out: &mut BTreeMap<Vec<u64>, ClassAccum>) {
    let mut block_counts = vec![0u64; alphabet.blocks];
    for (i, &c) in counts.iter().enumerate() {
        block_counts[alphabet.block[i]] += c;
    }
    // Π_k multinomial(N_k; n_{k,·})
    let mut refinements = BigUint::one();
    for &bc in &block_counts {
        refinements *= &fact[bc as usize];
    }
    for &c in counts {
        refinements /= &fact[c as usize];
    }
    let mut exact = BigRational::one();
    let mut log_r = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            exact *= num_traits::pow(alphabet.exact_r[i].clone(), c as usize);
            log_r += c as f64 * alphabet.log_r[i];
        }
    }
    let log_weight = big_ln(&refinements) + log_r;
    let entry = out.entry(block_counts).or_insert_with(|| ClassAccum {
        max_log_r: f64::NEG_INFINITY,
        ..Default::default()
    });
    entry.exact_weight += BigRational::from_integer(refinements.clone().into()) * exact;
    entry.sizes += refinements;
    entry.log_weights.push(log_weight);
    if log_r.is_finite() {
        entry.max_log_r = entry.max_log_r.max(log_r);
    }
}

/// Outcome of checking the three typical-subalgebra estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypicalBounds {
    /// `|log n(A_typ) − HN| < Nε`.
    pub block_count: bool,
    /// `|log λ(A_typ)_K − SN| < Nε` for every typical `K`.
    pub block_sizes: bool,
    /// `log ‖ρ_typ‖_d + (H + 2S)N < Nε`.
    pub dense_sup: bool,
}

impl TypicalBounds {
    pub fn holds(&self) -> bool {
        self.block_count && self.block_sizes && self.dense_sup
    }
}

pub fn verify_typical_bounds(summary: &TypicalSummary, h: f64, s: f64, eps: f64) -> TypicalBounds {
    let nf = summary.n as f64;
    let slack = nf * eps;
    let Some(shape) = &summary.shape_typ else {
        return TypicalBounds {
            block_count: false,
            block_sizes: false,
            dense_sup: false,
        };
    };
    TypicalBounds {
        block_count: (summary.log_block_count - h * nf).abs() < slack,
        block_sizes: shape.parts().all(|(size, _)| (big_ln(size) - s * nf).abs() < slack),
        dense_sup: summary.log_dense_sup + (h + 2.0 * s) * nf < slack,
    }
}

/// Whether `ρ` can be coded reliably into copies of `b`: `(H(ρ), S(ρ)) ∈ C(b)`.
pub fn code_feasible(state: &DiagonalState, b: &Shape, tol: f64) -> Verdict {
    region_contains(b, classical_entropy(state), quantum_entropy(state), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NogoRate {
    pub rate: f64,
    #[serde(with = "crate::report::extended_f64")]
    pub best_p: f64,
}

/// The fidelity decay exponent `max_p H/p + S − (1+δ) log‖λ(b)‖_p`.
/// Positive exactly when coding through `b^{⊗N(1+δ)}` must fail exponentially.
pub fn nogo_rate(state: &DiagonalState, b: &Shape, delta: f64) -> Result<NogoRate> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    let h = classical_entropy(state);
    let s = quantum_entropy(state);
    let lb = LogLaplace::new(b);
    let scale = 1.0 + delta;
    let max = lb.max_position();
    let m = minimize_beta(
        |beta| -(h / (beta + 1.0) + s - scale * (max + lb.reduced(beta) / (beta + 1.0))),
        lb.flat_beta(),
        DEFAULT_GRID,
        -(s - scale * max),
    );
    Ok(NogoRate {
        rate: -m.value,
        best_p: m.beta + 1.0,
    })
}
