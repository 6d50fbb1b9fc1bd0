//! States on hybrid memories, their entropies, thermal states and the
//! capacity region `C(A)` of achievable (classical, quantum) entropy pairs.
//!
//! All entropies are in nats.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::largedev::{bulk_check, LogLaplace};
use crate::numeric::{beta_grid, log_sum_exp, minimize_beta, xlogx, DEFAULT_GRID};
use crate::report::{Status, Verdict};
use crate::shapes::Shape;

/// Largest number of blocks a materialized state may have.
pub const STATE_BLOCK_LIMIT: usize = 1 << 20;

/// Largest total dimension a materialized state may have.
pub const STATE_DIMENSION_LIMIT: u64 = 1 << 24;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Block sizes in descending order, if a state on `shape` fits in memory.
fn state_sizes(shape: &Shape) -> Result<Vec<u64>> {
    let too_big = || Error::BudgetExceeded(format!("{shape} is too large to hold an explicit state"));
    if shape.total() > STATE_DIMENSION_LIMIT.into() {
        return Err(too_big());
    }
    shape.to_part_list(STATE_BLOCK_LIMIT).ok_or_else(too_big)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub size: u64,
    /// Diagonal entries `r_{k,j}` of the block, not normalized.
    pub weights: Vec<f64>,
}

impl Block {
    /// `r_k`.
    pub fn weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A density operator given by its diagonal in a basis adapted to the blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalState {
    blocks: Vec<Block>,
}

impl<'de> Deserialize<'de> for DiagonalState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            blocks: Vec<Block>,
        }
        let raw = Raw::deserialize(d)?;
        DiagonalState::from_blocks(raw.blocks).map_err(serde::de::Error::custom)
    }
}

impl DiagonalState {
    /// Validates blocks and orders them by size, largest first. The sort is
    /// stable so blocks of equal size keep their given order.
    pub fn from_blocks(mut blocks: Vec<Block>) -> Result<DiagonalState> {
        if blocks.is_empty() {
            return Err(Error::EmptyShape);
        }
        let mut total = 0.0;
        for (k, b) in blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(Error::InvalidPart(format!("block {k} has size 0")));
            }
            if b.weights.len() as u64 != b.size {
                return Err(Error::DimensionMismatch(format!(
                    "block {k} has size {} but {} entries",
                    b.size,
                    b.weights.len()
                )));
            }
            for &w in &b.weights {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidState(format!("entry {w} in block {k} is not a probability")));
                }
            }
            total += b.weight();
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidState(format!("entries sum to {total}, not 1")));
        }
        blocks.sort_by_key(|b| std::cmp::Reverse(b.size));
        Ok(DiagonalState { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn shape(&self) -> Shape {
        let sizes: Vec<u64> = self.blocks.iter().map(|b| b.size).collect();
        Shape::new(&sizes).expect("validated blocks are nonempty with positive sizes")
    }

    /// Block weights `r_k`.
    pub fn block_weights(&self) -> Vec<f64> {
        self.blocks.iter().map(Block::weight).collect()
    }

    /// All diagonal entries, block by block.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.weights.iter().copied())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<DiagonalState> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Builds a state on `shape` from per-block entries, listed for the blocks in
/// descending size order.
pub fn make_state(shape: &Shape, entries: Vec<Vec<f64>>) -> Result<DiagonalState> {
    let sizes = state_sizes(shape)?;
    if sizes.len() != entries.len() {
        return Err(Error::DimensionMismatch(format!(
            "shape has {} blocks but {} were given",
            sizes.len(),
            entries.len()
        )));
    }
    let blocks = sizes
        .into_iter()
        .zip(entries)
        .map(|(size, weights)| Block { size, weights })
        .collect();
    DiagonalState::from_blocks(blocks)
}

/// `H(ρ) = −Σ_k r_k log r_k`.
pub fn classical_entropy(state: &DiagonalState) -> f64 {
    -state.blocks.iter().map(|b| xlogx(b.weight())).sum::<f64>()
}

/// `S(ρ) = −Σ_{k,j} r_{k,j} log(r_{k,j}/r_k)`.
pub fn quantum_entropy(state: &DiagonalState) -> f64 {
    state
        .blocks
        .iter()
        .map(|b| {
            let rk = b.weight();
            if rk <= 0.0 {
                return 0.0;
            }
            -b.weights.iter().map(|&r| xlogx(r / rk)).sum::<f64>() * rk
        })
        .sum::<f64>()
        .max(0.0)
}

/// `−Σ r_{k,j} log r_{k,j}`, which equals `H + S`.
pub fn total_entropy(state: &DiagonalState) -> f64 {
    -state.entries().map(xlogx).sum::<f64>()
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// Statistical-mechanics data of the thermal state at exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnsemble {
    #[serde(with = "crate::report::extended_f64")]
    pub p: f64,
    #[serde(with = "crate::report::extended_f64")]
    pub beta: f64,
    #[serde(with = "crate::report::extended_f64")]
    pub temperature: f64,
    /// `E_k = −log λ_k`, one per block in descending size order.
    pub energies: Vec<f64>,
    /// `log Z = ℓ(β) = log Σ λ_k^p`.
    #[serde(with = "crate::report::extended_f64")]
    pub log_partition: f64,
    /// `F = −T log Z`, extended continuously to `p = 1` and `p = ∞`.
    #[serde(with = "crate::report::extended_f64")]
    pub free_energy: f64,
}

/// The state maximizing `H/p + S`: block weights `∝ λ_k^p`, uniform spectra.
/// At `p = ∞` the weight is spread evenly over the largest blocks.
pub fn thermal_state(shape: &Shape, p: f64) -> Result<(DiagonalState, ThermalEnsemble)> {
    check_p(p)?;
    let sizes = state_sizes(shape)?;
    let ll = LogLaplace::new(shape);
    let beta = p - 1.0;
    let max = sizes[0];
    let log_weights: Vec<f64> = if p.is_infinite() {
        let m = sizes.iter().filter(|&&s| s == max).count() as f64;
        sizes
            .iter()
            .map(|&s| if s == max { -m.ln() } else { f64::NEG_INFINITY })
            .collect()
    } else {
        let z = log_sum_exp(sizes.iter().map(|&s| p * (s as f64).ln()));
        sizes.iter().map(|&s| p * (s as f64).ln() - z).collect()
    };
    let blocks = sizes
        .iter()
        .zip(&log_weights)
        .map(|(&s, &lw)| {
            let e = (lw - (s as f64).ln()).exp();
            Block {
                size: s,
                weights: vec![e; s as usize],
            }
        })
        .collect();
    let state = DiagonalState { blocks };
    let log_partition = if p.is_infinite() { f64::INFINITY } else { ll.ell(beta) };
    let free_energy = if p.is_infinite() {
        -ll.max_position()
    } else if beta == 0.0 {
        if log_partition == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        -log_partition / beta
    };
    let ensemble = ThermalEnsemble {
        p,
        beta,
        temperature: if beta == 0.0 { f64::INFINITY } else { 1.0 / beta },
        energies: sizes.iter().map(|&s| -(s as f64).ln()).collect(),
        log_partition,
        free_energy,
    };
    Ok((state, ensemble))
}

/// The tangency point of `H/p + S = log‖λ‖_p` with the capacity region:
/// `S = ℓ′(p−1)` and `H = p(log‖λ‖_p − S)`.
pub fn capacity_point(shape: &Shape, p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    Ok(point_at(&LogLaplace::new(shape), p))
}

fn point_at(ll: &LogLaplace, p: f64) -> (f64, f64) {
    let max = ll.max_position();
    let atoms: Vec<(f64, f64)> = ll.atoms().collect();
    // log of the total weight of the top atom as a block count: log m
    let top = atoms.last().expect("shapes are nonempty");
    let log_m = top.1 - top.0;
    if p.is_infinite() {
        return (log_m, max);
    }
    // tilted atom weights ∝ m_i x_i^p, with H written as
    // red + p Σ W_i (max − x_i) to avoid cancellation at large p
    let logs: Vec<f64> = atoms.iter().map(|&(x, lw)| lw - x + p * (x - max)).collect();
    let red = log_sum_exp(logs.iter().copied());
    let mut deficit = 0.0;
    let mut s = 0.0;
    for (&(x, _), &l) in atoms.iter().zip(&logs) {
        let w = (l - red).exp();
        deficit += w * (max - x);
        s += w * x;
    }
    ((red + p * deficit).max(0.0), s.clamp(0.0, max))
}

/// Upper boundary of `C(A)` from `(0, log λ_max)` to `(log‖λ‖_1, 0)`.
///
/// The thermal curve is sampled on a geometric grid in `β = p − 1`, which
/// resolves both the curvature near `p = 1` and the flat tail. Consecutive
/// coincident vertices are dropped.
pub fn region_boundary(shape: &Shape, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("samples must be at least 2, got {samples}")));
    }
    let ll = LogLaplace::new(shape);
    let max = ll.max_position();
    let mut betas = beta_grid(ll.flat_beta(), samples);
    betas.reverse();
    let curve: Vec<(f64, f64)> = betas.par_iter().map(|&b| point_at(&ll, b + 1.0)).collect();
    let mut points = Vec::with_capacity(samples + 3);
    points.push((0.0, max));
    points.push(point_at(&ll, f64::INFINITY));
    points.extend(curve);
    points.push((ll.ell(0.0), 0.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for pt in points {
        match out.last() {
            Some(last) if (last.0 - pt.0).abs() <= 1e-13 && (last.1 - pt.1).abs() <= 1e-13 => {}
            _ => out.push(pt),
        }
    }
    Ok(out)
}

/// Decides `(H, S) ∈ C(A)` by minimizing `log‖λ‖_p − H/p − S` over `p ∈ [1, ∞]`.
///
/// Negative coordinates are rejected with margin `min(H, S)`.
pub fn region_contains(shape: &Shape, h: f64, s: f64, tol: f64) -> Verdict {
    if h.is_nan() || s.is_nan() {
        return Verdict {
            status: Status::Violated,
            margin: f64::NAN,
            witness_p: f64::NAN,
        };
    }
    if h < 0.0 || s < 0.0 {
        let margin = h.min(s);
        return Verdict {
            status: Status::from_margin(margin, tol),
            margin,
            witness_p: f64::NAN,
        };
    }
    let ll = LogLaplace::new(shape);
    let max = ll.max_position();
    let limit = max - s;
    let m = minimize_beta(
        |beta| max - s + (ll.reduced(beta) - h) / (beta + 1.0),
        ll.flat_beta().max(64.0),
        DEFAULT_GRID,
        limit,
    );
    Verdict {
        status: Status::from_margin(m.value, tol),
        margin: m.value,
        witness_p: m.beta + 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub verdict: Verdict,
    /// A boundary point of `C(a)` outside `C(b)` when the inclusion fails.
    pub witness_point: Option<(f64, f64)>,
}

/// Decides `C(a) ⊆ C(b)`, which is equivalent to the bulk norm comparison.
pub fn region_subset(a: &Shape, b: &Shape, tol: f64) -> SubsetReport {
    let verdict = bulk_check(a, b, tol);
    let witness_point = (verdict.status == Status::Violated)
        .then(|| point_at(&LogLaplace::new(a), verdict.witness_p));
    SubsetReport { verdict, witness_point }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub state: DiagonalState,
    /// Quantum entropy traded for classical: `H = H(ρ) + t`, `S = S(ρ) − t`.
    pub t: f64,
}

/// Finds a state `ρ` and `t ≥ 0` with `H = H(ρ) + t` and `S = S(ρ) − t`.
///
/// Starts from a thermal state (or a tilt over the largest blocks when `H` is
/// below the `p = ∞` endpoint), then lowers the quantum entropy by
/// interpolating every block spectrum between uniform and pure.
pub fn realize_point(shape: &Shape, h: f64, s: f64) -> Result<Realization> {
    let verdict = region_contains(shape, h, s, 1e-9);
    if verdict.status == Status::Violated {
        return Err(Error::OutOfDomain(format!(
            "({h}, {s}) lies outside the capacity region (margin {})",
            verdict.margin
        )));
    }
    let ll = LogLaplace::new(shape);
    let (h1, _) = point_at(&ll, 1.0);
    let (h_inf, _) = point_at(&ll, f64::INFINITY);
    let (base, t) = if h >= h1 {
        (thermal_state(shape, 1.0)?.0, h - h1)
    } else if h > h_inf {
        // H(ρ_p) decreases from h1 at p = 1 to log m at p = ∞
        let mut lo = 0.0;
        let mut hi = 1.0;
        while point_at(&ll, hi + 1.0).0 > h {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if point_at(&ll, mid + 1.0).0 > h {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (thermal_state(shape, 0.5 * (lo + hi) + 1.0)?.0, 0.0)
    } else {
        (tilt_over_largest(shape, h)?, 0.0)
    };
    let state = deform_to(&base, s + t)?;
    Ok(Realization { state, t })
}

/// Uniform spectra on the largest blocks, with block weights `w` on the first
/// and `(1−w)/(m−1)` on the rest, tuned so the classical entropy is `h`.
fn tilt_over_largest(shape: &Shape, h: f64) -> Result<DiagonalState> {
    let sizes = state_sizes(shape)?;
    let max = sizes[0];
    let m = sizes.iter().filter(|&&x| x == max).count();
    let entropy = |w: f64| {
        if m == 1 {
            0.0
        } else {
            -xlogx(w) - (m - 1) as f64 * xlogx((1.0 - w) / (m - 1) as f64)
        }
    };
    // entropy(w) decreases from log m at w = 1/m to 0 at w = 1
    let (mut lo, mut hi) = (1.0 / m as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy(mid) > h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let blocks = sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| {
            let bw = match k {
                0 => w,
                _ if size == max => (1.0 - w) / (m - 1) as f64,
                _ => 0.0,
            };
            Block {
                size,
                weights: vec![bw / size as f64; size as usize],
            }
        })
        .collect();
    Ok(DiagonalState { blocks })
}

/// Moves every block spectrum along `(1−θ)·uniform + θ·pure`, keeping block
/// weights, until the quantum entropy equals `target`.
fn deform_to(base: &DiagonalState, target: f64) -> Result<DiagonalState> {
    let at = |theta: f64| {
        let blocks = base
            .blocks
            .iter()
            .map(|b| {
                let rk = b.weight();
                let n = b.size as f64;
                let mut weights: Vec<f64> = vec![rk * (1.0 - theta) / n; b.size as usize];
                weights[0] += rk * theta;
                Block { size: b.size, weights }
            })
            .collect();
        DiagonalState { blocks }
    };
    let start = quantum_entropy(base);
    if target >= start {
        return Ok(base.clone());
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quantum_entropy(&at(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}
