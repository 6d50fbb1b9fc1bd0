//! Algebra embeddings as one-dimensional bin packing.
//!
//! An embedding `A ↪ B` places every block of `A` into a block of `B` so that
//! no block of `B` overflows. The placement is recorded as a Bratteli diagram
//! `Γ`, where `Γ[j][k]` counts the copies of `A`-summand `j` inside
//! `B`-summand `k`.
//!
//! Two certificate forms exist. [`BratteliDiagram`] is the explicit per-part
//! matrix, usable when both shapes have few parts. [`PackingCertificate`]
//! groups bins into patterns with big-integer counts, which is the only
//! feasible form for tensor powers.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapes::Shape;

/// Largest part count for which explicit diagrams are materialized.
pub const EXPLICIT_PART_LIMIT: usize = 4096;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BratteliDiagram {
    /// Part sizes of `A`, descending.
    pub block_sizes_a: Vec<u64>,
    /// Part sizes of `B`, descending.
    pub bin_sizes_b: Vec<u64>,
    /// `edges[j][k]`: copies of `A`-part `j` placed in `B`-part `k`.
    pub edges: Vec<Vec<u64>>,
}

/// Checks that `d` certifies `a ↪ b`: every row has an edge and no column overflows.
pub fn verify_diagram(a: &Shape, b: &Shape, d: &BratteliDiagram) -> Result<bool> {
    let parts_a = a
        .to_part_list(usize::MAX)
        .ok_or_else(|| Error::DimensionMismatch("shape a is too large for an explicit diagram".into()))?;
    let parts_b = b
        .to_part_list(usize::MAX)
        .ok_or_else(|| Error::DimensionMismatch("shape b is too large for an explicit diagram".into()))?;
    if parts_a != d.block_sizes_a {
        return Err(Error::DimensionMismatch(format!(
            "diagram rows {:?} do not match shape a = {a}",
            d.block_sizes_a
        )));
    }
    if parts_b != d.bin_sizes_b {
        return Err(Error::DimensionMismatch(format!(
            "diagram columns {:?} do not match shape b = {b}",
            d.bin_sizes_b
        )));
    }
    if d.edges.len() != parts_a.len() || d.edges.iter().any(|row| row.len() != parts_b.len()) {
        return Err(Error::DimensionMismatch(format!(
            "edge matrix must be {} x {}",
            parts_a.len(),
            parts_b.len()
        )));
    }
    if d.edges.iter().any(|row| row.iter().all(|&e| e == 0)) {
        return Ok(false);
    }
    for (k, &bin) in parts_b.iter().enumerate() {
        let load: u128 = d
            .edges
            .iter()
            .zip(&parts_a)
            .map(|(row, &size)| row[k] as u128 * size as u128)
            .sum();
        if load > bin as u128 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of an exact embedding search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedOutcome {
    Embeddable(BratteliDiagram),
    NotEmbeddable,
    /// The node budget ran out before the search finished.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedSearch {
    pub outcome: EmbedOutcome,
    pub nodes_explored: u64,
}

/// Exact embeddability with an unlimited node budget.
///
/// Returns `Ok(None)` when no embedding exists; errors only when the shapes
/// are too large to list part by part.
pub fn decide_embed(a: &Shape, b: &Shape) -> Result<Option<BratteliDiagram>> {
    match decide_embed_with_budget(a, b, u64::MAX)?.outcome {
        EmbedOutcome::Embeddable(d) => Ok(Some(d)),
        EmbedOutcome::NotEmbeddable => Ok(None),
        EmbedOutcome::Unknown => unreachable!("unbounded search cannot run out of budget"),
    }
}

/// Branch-and-bound search for a packing of the parts of `a` into the parts of `b`.
///
/// Parts of `a` are placed in descending order, each exactly once. Equal parts
/// are placed into bins of nondecreasing index, and bins with equal remaining
/// capacity are tried once per node. A node is pruned when the remaining parts
/// are not supermajorized by the remaining capacities.
pub fn decide_embed_with_budget(a: &Shape, b: &Shape, node_budget: u64) -> Result<EmbedSearch> {
    let parts_a = explicit_parts(a, "a")?;
    let parts_b = explicit_parts(b, "b")?;
    let mut groups: Vec<(u64, usize)> = Vec::new();
    for &p in &parts_a {
        match groups.last_mut() {
            Some((s, c)) if *s == p => *c += 1,
            _ => groups.push((p, 1)),
        }
    }
    let mut search = Search {
        groups: &groups,
        bins: parts_b.clone(),
        placement: Vec::with_capacity(parts_a.len()),
        nodes: 0,
        budget: node_budget,
    };
    let found = search.run(0, groups[0].1, 0);
    let outcome = match found {
        None => EmbedOutcome::Unknown,
        Some(false) => EmbedOutcome::NotEmbeddable,
        Some(true) => {
            let mut edges = vec![vec![0u64; parts_b.len()]; parts_a.len()];
            for (row, &bin) in search.placement.iter().enumerate() {
                edges[row][bin] += 1;
            }
            EmbedOutcome::Embeddable(BratteliDiagram {
                block_sizes_a: parts_a,
                bin_sizes_b: parts_b,
                edges,
            })
        }
    };
    Ok(EmbedSearch {
        outcome,
        nodes_explored: search.nodes,
    })
}

fn explicit_parts(s: &Shape, name: &str) -> Result<Vec<u64>> {
    s.to_part_list(EXPLICIT_PART_LIMIT).ok_or_else(|| {
        Error::BudgetExceeded(format!(
            "shape {name} has more than {EXPLICIT_PART_LIMIT} parts or parts beyond 64 bits"
        ))
    })
}

struct Search<'a> {
    groups: &'a [(u64, usize)],
    bins: Vec<u64>,
    /// Bin index of each placed part, in placement order.
    placement: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    /// `Some(found)`, or `None` once the budget is exhausted.
    fn run(&mut self, group: usize, left: usize, min_bin: usize) -> Option<bool> {
        if group == self.groups.len() {
            return Some(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        if !self.feasible(group, left) {
            return Some(false);
        }
        let size = self.groups[group].0;
        let mut candidates: Vec<usize> = (min_bin..self.bins.len()).filter(|&i| self.bins[i] >= size).collect();
        candidates.sort_by_key(|&i| (self.bins[i], i));
        let mut tried = HashSet::new();
        for i in candidates {
            if !tried.insert(self.bins[i]) {
                continue;
            }
            self.bins[i] -= size;
            self.placement.push(i);
            let next = if left > 1 {
                self.run(group, left - 1, i)
            } else if group + 1 < self.groups.len() {
                self.run(group + 1, self.groups[group + 1].1, 0)
            } else {
                self.run(group + 1, 0, 0)
            };
            match next {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            self.placement.pop();
            self.bins[i] += size;
        }
        Some(false)
    }

    /// Necessary condition: the remaining parts are supermajorized by the remaining capacities.
    fn feasible(&self, group: usize, left: usize) -> bool {
        let mut caps: Vec<u64> = self.bins.iter().copied().filter(|&c| c > 0).collect();
        caps.sort_unstable_by(|x, y| y.cmp(x));
        let mut blocks: Vec<(u64, u64)> = Vec::with_capacity(self.groups.len() - group);
        blocks.push((self.groups[group].0, left as u64));
        blocks.extend(self.groups[group + 1..].iter().map(|&(s, c)| (s, c as u64)));
        // Sweep thresholds at block sizes, descending.
        let mut cap_iter = caps.iter().peekable();
        let mut cap_tail: u128 = 0;
        let mut block_tail: u128 = 0;
        for &(size, count) in &blocks {
            block_tail += size as u128 * count as u128;
            while let Some(&&c) = cap_iter.peek() {
                if c < size {
                    break;
                }
                cap_tail += c as u128;
                cap_iter.next();
            }
            if block_tail > cap_tail {
                return false;
            }
        }
        true
    }
}

/// A group of identically filled bins in a [`PackingCertificate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinPattern {
    pub bin_size: BigUint,
    /// Number of `B`-parts of size `bin_size` filled this way.
    pub bins: BigUint,
    /// `(block size, blocks per bin)` placed in each such bin.
    pub blocks: Vec<(BigUint, BigUint)>,
}

/// Bratteli diagram at the granularity of (block size, bin size) classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PackingCertificate {
    pub patterns: Vec<BinPattern>,
}

impl PackingCertificate {
    /// Expands into an explicit diagram when both shapes are small enough.
    pub fn to_diagram(&self, a: &Shape, b: &Shape) -> Result<BratteliDiagram> {
        let parts_a = explicit_parts(a, "a")?;
        let parts_b = explicit_parts(b, "b")?;
        let mut edges = vec![vec![0u64; parts_b.len()]; parts_a.len()];
        let mut used_rows = vec![false; parts_a.len()];
        let mut used_cols = vec![false; parts_b.len()];
        for pattern in &self.patterns {
            let bin = pattern
                .bin_size
                .to_u64()
                .ok_or_else(|| Error::DimensionMismatch("bin size beyond 64 bits".into()))?;
            let count = pattern.bins.to_u64().unwrap_or(u64::MAX);
            for _ in 0..count {
                let col = (0..parts_b.len())
                    .find(|&k| !used_cols[k] && parts_b[k] == bin)
                    .ok_or_else(|| Error::DimensionMismatch(format!("too many bins of size {bin}")))?;
                used_cols[col] = true;
                for (block, per_bin) in &pattern.blocks {
                    let block = block.to_u64().unwrap_or(u64::MAX);
                    let per_bin = per_bin.to_u64().unwrap_or(u64::MAX);
                    for _ in 0..per_bin {
                        match (0..parts_a.len()).find(|&j| !used_rows[j] && parts_a[j] == block) {
                            Some(row) => {
                                used_rows[row] = true;
                                edges[row][col] += 1;
                            }
                            // every part of this size is already placed
                            None => break,
                        }
                    }
                }
            }
        }
        Ok(BratteliDiagram {
            block_sizes_a: parts_a,
            bin_sizes_b: parts_b,
            edges,
        })
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }
}

/// Exact check of a grouped certificate: patterns fit their bins, no bin size is
/// used more often than `b` provides, and every part of `a` is placed.
pub fn verify_certificate(a: &Shape, b: &Shape, cert: &PackingCertificate) -> bool {
    use std::collections::BTreeMap;
    let mut bins_used: BTreeMap<&BigUint, BigUint> = BTreeMap::new();
    let mut placed: BTreeMap<&BigUint, BigUint> = BTreeMap::new();
    for pattern in &cert.patterns {
        let load: BigUint = pattern.blocks.iter().map(|(s, c)| s * c).sum();
        if load > pattern.bin_size {
            return false;
        }
        *bins_used.entry(&pattern.bin_size).or_default() += &pattern.bins;
        for (size, per_bin) in &pattern.blocks {
            if a.multiplicity(size).is_zero() {
                return false;
            }
            *placed.entry(size).or_default() += per_bin * &pattern.bins;
        }
    }
    for (bin, used) in &bins_used {
        if *used > b.multiplicity(bin) {
            return false;
        }
    }
    a.parts().all(|(size, mult)| placed.get(size).is_some_and(|p| p >= mult))
}

struct BinClass {
    bin_size: BigUint,
    bins: BigUint,
    remaining: BigUint,
    blocks: Vec<(BigUint, BigUint)>,
}

impl BinClass {
    fn place(&self, size: &BigUint, per_bin: &BigUint, bins: BigUint) -> BinClass {
        let mut blocks = self.blocks.clone();
        blocks.push((size.clone(), per_bin.clone()));
        BinClass {
            bin_size: self.bin_size.clone(),
            bins,
            remaining: &self.remaining - size * per_bin,
            blocks,
        }
    }
}

/// Best-fit greedy packing of `a` into `b` on grouped counts.
///
/// Parts of `a` go in descending order, each into the fitting bin with the
/// least remaining capacity. Identical parts fill that bin before moving on, so
/// whole classes of identical bins are handled at once. Guaranteed to succeed
/// when `2λ(a) ≼_S λ(b)`.
pub fn greedy_pack(a: &Shape, b: &Shape) -> Option<PackingCertificate> {
    let mut classes: Vec<BinClass> = b
        .parts_desc()
        .map(|(s, m)| BinClass {
            bin_size: s.clone(),
            bins: m.clone(),
            remaining: s.clone(),
            blocks: Vec::new(),
        })
        .collect();
    for (size, mult) in a.parts_desc() {
        let mut left = mult.clone();
        while !left.is_zero() {
            let idx = classes
                .iter()
                .enumerate()
                .filter(|(_, c)| c.remaining >= *size)
                .min_by(|(_, x), (_, y)| x.remaining.cmp(&y.remaining))
                .map(|(i, _)| i)?;
            let per_bin = &classes[idx].remaining / size;
            let capacity = &per_bin * &classes[idx].bins;
            if left >= capacity {
                let filled = classes[idx].place(size, &per_bin, classes[idx].bins.clone());
                classes[idx] = filled;
                left -= capacity;
            } else {
                let full = &left / &per_bin;
                let partial = &left % &per_bin;
                let mut fresh = Vec::new();
                if !full.is_zero() {
                    fresh.push(classes[idx].place(size, &per_bin, full.clone()));
                    classes[idx].bins -= &full;
                }
                if !partial.is_zero() {
                    fresh.push(classes[idx].place(size, &partial, BigUint::one()));
                    classes[idx].bins -= 1u32;
                }
                classes.extend(fresh);
                classes.retain(|c| !c.bins.is_zero());
                left = BigUint::zero();
            }
        }
    }
    Some(PackingCertificate {
        patterns: classes
            .into_iter()
            .filter(|c| !c.blocks.is_empty())
            .map(|c| BinPattern {
                bin_size: c.bin_size,
                bins: c.bins,
                blocks: c.blocks,
            })
            .collect(),
    })
}

/// [`greedy_pack`] expanded into an explicit diagram.
pub fn greedy_embed(a: &Shape, b: &Shape) -> Result<Option<BratteliDiagram>> {
    match greedy_pack(a, b) {
        Some(cert) => cert.to_diagram(a, b).map(Some),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::supermajorizes;

    fn shape(parts: &[u64]) -> Shape {
        Shape::new(parts).unwrap()
    }

    fn diagram(a: &[u64], b: &[u64], edges: &[&[u64]]) -> BratteliDiagram {
        BratteliDiagram {
            block_sizes_a: a.to_vec(),
            bin_sizes_b: b.to_vec(),
            edges: edges.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn verify_examples() {
        let d = diagram(&[2, 1], &[3], &[&[1], &[1]]);
        assert!(verify_diagram(&shape(&[2, 1]), &shape(&[3]), &d).unwrap());
        let d = diagram(&[2], &[2, 1], &[&[1, 0]]);
        assert!(verify_diagram(&shape(&[2]), &shape(&[2, 1]), &d).unwrap());
        let d = diagram(&[2, 1], &[2], &[&[1], &[1]]);
        assert!(!verify_diagram(&shape(&[2, 1]), &shape(&[2]), &d).unwrap());
    }

    #[test]
    fn verify_rejects_missing_rows_and_bad_dimensions() {
        let d = diagram(&[2, 1], &[3], &[&[1], &[0]]);
        assert!(!verify_diagram(&shape(&[2, 1]), &shape(&[3]), &d).unwrap());
        let d = diagram(&[2, 1], &[3], &[&[1]]);
        assert!(matches!(
            verify_diagram(&shape(&[2, 1]), &shape(&[3]), &d),
            Err(Error::DimensionMismatch(_))
        ));
        let d = diagram(&[2], &[3], &[&[1]]);
        assert!(verify_diagram(&shape(&[2, 1]), &shape(&[3]), &d).is_err());
    }

    #[test]
    fn decide_examples() {
        let d = decide_embed(&shape(&[2, 1]), &shape(&[3])).unwrap().unwrap();
        assert_eq!(d.edges, vec![vec![1], vec![1]]);
        assert_eq!(decide_embed(&shape(&[2, 2, 2]), &shape(&[3, 3])).unwrap(), None);
        let d = decide_embed(&shape(&[1, 1, 1]), &shape(&[2, 1])).unwrap().unwrap();
        assert!(verify_diagram(&shape(&[1, 1, 1]), &shape(&[2, 1]), &d).unwrap());
        let load_two: u64 = d.edges.iter().map(|r| r[0]).sum();
        assert_eq!(load_two, 2);
    }

    #[test]
    fn budget_exhaustion_is_unknown() {
        let a = shape(&[3, 3, 3, 2, 2, 2, 2, 1]);
        let b = shape(&[5, 5, 5, 4]);
        let r = decide_embed_with_budget(&a, &b, 1).unwrap();
        assert_eq!(r.outcome, EmbedOutcome::Unknown);
        let full = decide_embed_with_budget(&a, &b, DEFAULT_NODE_BUDGET).unwrap();
        assert_ne!(full.outcome, EmbedOutcome::Unknown);
    }

    #[test]
    fn greedy_examples() {
        let a = shape(&[2, 1]);
        let b = shape(&[4, 3]);
        assert!(supermajorizes(&b, &a.repeat(2).unwrap()));
        let d = greedy_embed(&a, &b).unwrap().unwrap();
        assert!(verify_diagram(&a, &b, &d).unwrap());
        assert_eq!(greedy_embed(&shape(&[2, 2, 2]), &shape(&[3, 3])).unwrap(), None);
        assert!(greedy_embed(&shape(&[1]), &shape(&[1])).unwrap().is_some());
    }

    #[test]
    fn greedy_uses_best_fit() {
        // best fit puts the 2 into the 2-bin, leaving the 3-bin for the 3
        let a = shape(&[3, 2]);
        let b = shape(&[3, 2]);
        let d = greedy_embed(&a, &b).unwrap().unwrap();
        assert_eq!(d.edges, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn grouped_greedy_handles_huge_counts() {
        let a = shape(&[2, 2, 2]).tensor_power(64);
        let b = shape(&[3, 3]).tensor_power(80);
        let cert = greedy_pack(&a, &b).unwrap();
        assert!(verify_certificate(&a, &b, &cert));
    }

    #[test]
    fn certificate_verification_catches_tampering() {
        let a = shape(&[2, 1, 1]);
        let b = shape(&[3, 2]);
        let mut cert = greedy_pack(&a, &b).unwrap();
        assert!(verify_certificate(&a, &b, &cert));
        cert.patterns[0].blocks[0].1 += 5u32;
        assert!(!verify_certificate(&a, &b, &cert));
        assert!(!verify_certificate(&a, &b, &PackingCertificate::default()));
    }
}
