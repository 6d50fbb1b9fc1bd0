//! Brute-force oracles shared by the integration tests. None of them call the
//! algorithms they are used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use qmem_core::Shape;

/// All partitions with parts summing to at most `max_total`, parts descending.
pub fn partitions_up_to(max_total: u64) -> Vec<Vec<u64>> {
    fn rec(remaining: u64, max_part: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        for p in (1..=max_part.min(remaining)).rev() {
            prefix.push(p);
            rec(remaining - p, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(max_total, max_total, &mut Vec::new(), &mut out);
    out
}

pub fn shape(parts: &[u64]) -> Shape {
    Shape::new(parts).unwrap()
}

/// Exact bin packing by memoized search over sorted residual capacities.
pub fn embeds_oracle(a: &[u64], b: &[u64]) -> bool {
    let mut items = a.to_vec();
    items.sort_unstable_by(|x, y| y.cmp(x));
    let mut bins = b.to_vec();
    bins.sort_unstable();
    let mut memo: HashMap<(usize, Vec<u64>), bool> = HashMap::new();
    fn go(i: usize, bins: Vec<u64>, items: &[u64], memo: &mut HashMap<(usize, Vec<u64>), bool>) -> bool {
        if i == items.len() {
            return true;
        }
        if let Some(&v) = memo.get(&(i, bins.clone())) {
            return v;
        }
        let mut ok = false;
        let mut tried = Vec::new();
        for k in 0..bins.len() {
            if bins[k] >= items[i] && !tried.contains(&bins[k]) {
                tried.push(bins[k]);
                let mut next = bins.clone();
                next[k] -= items[i];
                next.sort_unstable();
                if go(i + 1, next, items, memo) {
                    ok = true;
                    break;
                }
            }
        }
        memo.insert((i, bins), ok);
        ok
    }
    go(0, bins, &items, &mut memo)
}

/// Tail-sum comparison at every part size of either list.
pub fn supermajorizes_oracle(big: &[u64], small: &[u64]) -> bool {
    let tail = |list: &[u64], x: u64| -> u64 { list.iter().filter(|&&p| p >= x).sum() };
    big.iter()
        .chain(small)
        .all(|&x| tail(big, x) >= tail(small, x))
}

/// Brute force over all `D^N` letter sequences of a diagonal state whose
/// letters are `(block, weight in hundredths)`, with `alpha` in hundredths.
/// Typicality is decided in integers. Returns the typical shape as
/// `size → count` and the total probability of typical sequences.
pub fn typical_oracle(letters: &[(usize, u64)], n: u32, alpha: u64) -> (BTreeMap<u64, u64>, f64) {
    let d = letters.len();
    let total = d.pow(n);
    let nn = n as i64;
    let mut per_k: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut prob = 0.0;
    let mut seq = vec![0usize; n as usize];
    for code in 0..total {
        let mut c = code;
        for slot in seq.iter_mut() {
            *slot = c % d;
            c /= d;
        }
        let mut counts = vec![0i64; d];
        for &s in &seq {
            counts[s] += 1;
        }
        // |c/N − w/100| < a/100  ⇔  |100c − wN| < aN
        let typical = counts
            .iter()
            .zip(letters)
            .all(|(&c, &(_, w))| (100 * c - w as i64 * nn).abs() < alpha as i64 * nn);
        if typical {
            let k: Vec<usize> = seq.iter().map(|&s| letters[s].0).collect();
            *per_k.entry(k).or_default() += 1;
            prob += seq.iter().map(|&s| letters[s].1 as f64 / 100.0).product::<f64>();
        }
    }
    let mut shape = BTreeMap::new();
    for size in per_k.values() {
        *shape.entry(*size).or_default() += 1;
    }
    (shape, prob)
}

pub fn shape_as_map(s: &Shape) -> BTreeMap<u64, u64> {
    s.parts()
        .map(|(size, m)| (to_u64(size), to_u64(m)))
        .collect()
}

pub fn to_u64(x: &BigUint) -> u64 {
    u64::try_from(x).unwrap()
}

/// Complex numbers as pairs, for arithmetic independent of the library.
pub type C = (f64, f64);

pub fn cmul(x: C, y: C) -> C {
    (x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0)
}

/// `Σ_k r_k Σ_{pairs returning to k} |Σ_i r′_{k,i} (D E)_{ii}|²` with plain loops.
/// Kraus operators are `(input block, output block, rows of entries)`.
pub fn fidelity_oracle(
    block_entries: &[Vec<f64>],
    encode: &[(usize, usize, Vec<Vec<C>>)],
    decode: &[(usize, usize, Vec<Vec<C>>)],
) -> f64 {
    let mut f = 0.0;
    for (k, e_out, e) in encode {
        let rk: f64 = block_entries[*k].iter().sum();
        if rk <= 0.0 {
            continue;
        }
        for (d_in, d_out, d) in decode {
            if d_in != e_out || d_out != k {
                continue;
            }
            let mut tr = (0.0, 0.0);
            for (i, &r) in block_entries[*k].iter().enumerate() {
                let mut m_ii = (0.0, 0.0);
                for (l, d_row) in d[i].iter().enumerate() {
                    let p = cmul(*d_row, e[l][i]);
                    m_ii = (m_ii.0 + p.0, m_ii.1 + p.1);
                }
                tr = (tr.0 + m_ii.0 * r / rk, tr.1 + m_ii.1 * r / rk);
            }
            f += rk * (tr.0 * tr.0 + tr.1 * tr.1);
        }
    }
    f
}
