//! Memory shapes: the multiset of block dimensions of a finite-dimensional
//! observable algebra `M_{λ_1} ⊕ ... ⊕ M_{λ_n}`.
//!
//! A [`Shape`] is stored as a map from part size to multiplicity, both as
//! arbitrary-precision integers. Tensor powers produce astronomically many
//! parts but only a handful of distinct sizes, so this form stays small where a
//! sorted list of parts would not.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{big_ln, log_sum_exp};

/// Relative tolerance (on the log scale) for log-threshold comparisons.
pub const LOG_THRESHOLD_RTOL: f64 = 1e-12;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    parts: BTreeMap<BigUint, BigUint>,
}

impl Shape {
    /// Builds a shape from a list of part sizes, merging equal sizes.
    pub fn new(sizes: &[u64]) -> Result<Shape> {
        if sizes.is_empty() {
            return Err(Error::EmptyShape);
        }
        let mut parts = BTreeMap::new();
        for &s in sizes {
            if s == 0 {
                return Err(Error::InvalidPart(s.to_string()));
            }
            *parts.entry(BigUint::from(s)).or_insert_with(BigUint::zero) += 1u32;
        }
        Ok(Shape { parts })
    }

    /// Builds a shape from `(size, multiplicity)` pairs. Zero multiplicities are
    /// dropped; the result must still have a part.
    pub fn from_multiplicities<I>(pairs: I) -> Result<Shape>
    where
        I: IntoIterator<Item = (BigUint, BigUint)>,
    {
        let mut parts = BTreeMap::new();
        for (size, mult) in pairs {
            if size.is_zero() {
                return Err(Error::InvalidPart(size.to_string()));
            }
            if mult.is_zero() {
                continue;
            }
            *parts.entry(size).or_insert_with(BigUint::zero) += mult;
        }
        if parts.is_empty() {
            return Err(Error::EmptyShape);
        }
        Ok(Shape { parts })
    }

    /// The trivial one-dimensional memory `C`, identity for [`Shape::tensor`].
    pub fn unit() -> Shape {
        let mut parts = BTreeMap::new();
        parts.insert(BigUint::one(), BigUint::one());
        Shape { parts }
    }

    /// `(size, multiplicity)` pairs in ascending size order.
    pub fn parts(&self) -> impl DoubleEndedIterator<Item = (&BigUint, &BigUint)> + ExactSizeIterator {
        self.parts.iter()
    }

    /// `(size, multiplicity)` pairs in descending size order.
    pub fn parts_desc(&self) -> impl Iterator<Item = (&BigUint, &BigUint)> {
        self.parts.iter().rev()
    }

    pub fn distinct_sizes(&self) -> usize {
        self.parts.len()
    }

    pub fn multiplicity(&self, size: &BigUint) -> BigUint {
        self.parts.get(size).cloned().unwrap_or_default()
    }

    pub fn max_part(&self) -> &BigUint {
        self.parts.keys().next_back().expect("shapes are nonempty")
    }

    /// Multiplicity of the largest part.
    pub fn max_multiplicity(&self) -> &BigUint {
        self.parts.values().next_back().expect("shapes are nonempty")
    }

    /// Number of parts counted with multiplicity (the number of summands).
    pub fn part_count(&self) -> BigUint {
        self.parts.values().sum()
    }

    /// `‖λ‖_1`, the sum of all parts.
    pub fn total(&self) -> BigUint {
        self.parts.iter().map(|(s, m)| s * m).sum()
    }

    /// True when every part has size 1.
    pub fn is_classical(&self) -> bool {
        self.max_part().is_one()
    }

    /// Explicit descending list of parts, if every size fits `u64` and there
    /// are at most `limit` parts.
    pub fn to_part_list(&self, limit: usize) -> Option<Vec<u64>> {
        let count = self.part_count().to_usize()?;
        if count > limit {
            return None;
        }
        let mut out = Vec::with_capacity(count);
        for (size, mult) in self.parts_desc() {
            let s = size.to_u64()?;
            let m = mult.to_usize()?;
            out.extend(std::iter::repeat_n(s, m));
        }
        Some(out)
    }

    /// `log ‖λ‖_p` in nats. `p = f64::INFINITY` gives the log of the largest part.
    pub fn log_p_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        if p.is_infinite() {
            return Ok(big_ln(self.max_part()));
        }
        let lse = log_sum_exp(self.parts.iter().map(|(s, m)| big_ln(m) + p * big_ln(s)));
        Ok(lse / p)
    }

    /// The shape of `A ⊗ B`: all pairwise products of parts.
    pub fn tensor(&self, other: &Shape) -> Shape {
        let mut parts = BTreeMap::new();
        for (sa, ma) in &self.parts {
            for (sb, mb) in &other.parts {
                *parts.entry(sa * sb).or_insert_with(BigUint::zero) += ma * mb;
            }
        }
        Shape { parts }
    }

    /// `A^{⊗n}` by repeated squaring; `n = 0` gives [`Shape::unit`].
    pub fn tensor_power(&self, n: u64) -> Shape {
        let mut result = Shape::unit();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.tensor(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.tensor(&base);
            }
        }
        result
    }

    /// `ℓλ`: every part repeated `ℓ` times.
    pub fn repeat(&self, times: u64) -> Result<Shape> {
        if times == 0 {
            return Err(Error::InvalidArgument("repetition count must be at least 1".into()));
        }
        let t = BigUint::from(times);
        Ok(Shape {
            parts: self.parts.iter().map(|(s, m)| (s.clone(), m * &t)).collect(),
        })
    }

    /// `λ_{≥x}`: the sum of all parts of size at least `x`.
    pub fn tail_ge(&self, x: f64) -> Result<BigUint> {
        let cut = ceil_threshold(x)?;
        Ok(self.parts.range(cut..).map(|(s, m)| s * m).sum())
    }

    /// `λ_{≥x}` for an exact rational threshold.
    pub fn tail_ge_ratio(&self, x: &BigRational) -> Result<BigUint> {
        let cut = ceil_ratio(x)?;
        Ok(self.parts.range(cut..).map(|(s, m)| s * m).sum())
    }

    /// `λ_{≥e^y}`, comparing `ln(size) ≥ y` in log space. Sizes within a relative
    /// [`LOG_THRESHOLD_RTOL`] of the threshold count as reaching it.
    pub fn tail_ge_log(&self, log_x: f64) -> BigUint {
        self.parts
            .iter()
            .filter(|(s, _)| reaches_log(s, log_x))
            .map(|(s, m)| s * m)
            .sum()
    }

    /// Number of parts (with multiplicity) of size at least `x`.
    pub fn part_count_ge(&self, x: f64) -> Result<BigUint> {
        let cut = ceil_threshold(x)?;
        Ok(self.parts.range(cut..).map(|(_, m)| m.clone()).sum())
    }

    /// Part count at or above `e^y`, with the same log comparison as [`Shape::tail_ge_log`].
    pub fn part_count_ge_log(&self, log_x: f64) -> BigUint {
        self.parts
            .iter()
            .filter(|(s, _)| reaches_log(s, log_x))
            .map(|(_, m)| m.clone())
            .sum()
    }
}

fn reaches_log(size: &BigUint, log_x: f64) -> bool {
    big_ln(size) >= log_x - LOG_THRESHOLD_RTOL * log_x.abs().max(1.0)
}

fn ceil_threshold(x: f64) -> Result<BigUint> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::InvalidThreshold(x));
    }
    let r = BigRational::from_float(x).ok_or(Error::InvalidThreshold(x))?;
    ceil_ratio(&r)
}

fn ceil_ratio(x: &BigRational) -> Result<BigUint> {
    if *x <= BigRational::zero() {
        return Err(Error::InvalidArgument(format!("threshold {x} must be positive")));
    }
    let (q, r) = x.numer().div_rem(x.denom());
    let c = if r.is_zero() { q } else { q + 1 };
    c.to_biguint()
        .ok_or_else(|| Error::InvalidArgument(format!("threshold {x} must be positive")))
}

/// True iff `small ≼_S big`: every tail sum of `small` is at most the matching
/// tail sum of `big`. Tails only change at part sizes, so the check runs over
/// the merged distinct sizes of both shapes in descending order.
pub fn supermajorizes(big: &Shape, small: &Shape) -> bool {
    let mut tail_big = BigUint::zero();
    let mut tail_small = BigUint::zero();
    let mut ib = big.parts.iter().rev().peekable();
    let mut is = small.parts.iter().rev().peekable();
    loop {
        let next = match (ib.peek(), is.peek()) {
            (None, None) => return true,
            (Some((sb, _)), None) => (*sb).clone(),
            (None, Some((ss, _))) => (*ss).clone(),
            (Some((sb, _)), Some((ss, _))) => (*sb).max(*ss).clone(),
        };
        while let Some((s, m)) = ib.peek() {
            if **s != next {
                break;
            }
            tail_big += *s * *m;
            ib.next();
        }
        while let Some((s, m)) = is.peek() {
            if **s != next {
                break;
            }
            tail_small += *s * *m;
            is.next();
        }
        if tail_small > tail_big {
            return false;
        }
    }
}

impl fmt::Display for Shape {
    /// Comma-separated descending parts; large shapes fall back to `size^mult` terms.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(list) = self.to_part_list(64) {
            let text: Vec<String> = list.iter().map(u64::to_string).collect();
            return write!(f, "{}", text.join(","));
        }
        let text: Vec<String> = self
            .parts_desc()
            .map(|(s, m)| format!("{s}x{m}"))
            .collect();
        write!(f, "{}", text.join(","))
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Shape({self})")
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// Parses `"2,1,1"`. Whitespace around tokens is ignored; order does not matter.
    fn from_str(text: &str) -> Result<Shape> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::EmptyShape);
        }
        let mut parts = Vec::new();
        for token in text.split(',') {
            let token = token.trim();
            let size = BigUint::from_str(token).map_err(|_| Error::InvalidPart(token.to_string()))?;
            parts.push((size, BigUint::one()));
        }
        Shape::from_multiplicities(parts)
    }
}

/// Parses a comma-separated shape literal.
pub fn parse_shape(text: &str) -> Result<Shape> {
    text.parse()
}

struct PartsMap<'a>(&'a BTreeMap<BigUint, BigUint>);

impl Serialize for PartsMap<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (size, mult) in self.0.iter().rev() {
            match mult.to_u64() {
                Some(m) => map.serialize_entry(&size.to_string(), &m)?,
                None => map.serialize_entry(&size.to_string(), &mult.to_string())?,
            }
        }
        map.end()
    }
}

impl Serialize for Shape {
    /// `{"parts": {"2": 1, "1": 2}}`; multiplicities beyond `u64` are written as strings.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1))?;
        map.serialize_entry("parts", &PartsMap(&self.parts))?;
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BigField {
    Num(u64),
    Text(String),
}

impl BigField {
    fn to_big(&self) -> std::result::Result<BigUint, String> {
        match self {
            BigField::Num(n) => Ok(BigUint::from(*n)),
            BigField::Text(t) => BigUint::from_str(t.trim()).map_err(|e| format!("{t:?}: {e}")),
        }
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            parts: BTreeMap<String, BigField>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let mut pairs = Vec::with_capacity(raw.parts.len());
        for (size, mult) in raw.parts {
            let size = BigUint::from_str(size.trim()).map_err(|e| de::Error::custom(format!("{size:?}: {e}")))?;
            let mult = mult.to_big().map_err(de::Error::custom)?;
            if mult.is_zero() {
                return Err(de::Error::custom("multiplicities must be positive"));
            }
            pairs.push((size, mult));
        }
        Shape::from_multiplicities(pairs).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(parts: &[u64]) -> Shape {
        Shape::new(parts).unwrap()
    }

    fn map(pairs: &[(u64, u64)]) -> Shape {
        Shape::from_multiplicities(pairs.iter().map(|&(s, m)| (BigUint::from(s), BigUint::from(m)))).unwrap()
    }

    #[test]
    fn construction_merges_and_validates() {
        assert_eq!(shape(&[2, 1]), map(&[(2, 1), (1, 1)]));
        assert_eq!(shape(&[1, 1, 1]), map(&[(1, 3)]));
        assert_eq!(shape(&[2, 1, 1]), map(&[(2, 1), (1, 2)]));
        assert_eq!(shape(&[1, 2, 1]), shape(&[2, 1, 1]));
        assert_eq!(Shape::new(&[]), Err(Error::EmptyShape));
        assert!(matches!(Shape::new(&[2, 0]), Err(Error::InvalidPart(_))));
    }

    #[test]
    fn log_norms() {
        let s = shape(&[2, 1, 1]);
        assert!((s.log_p_norm(3.0).unwrap() - 10f64.ln() / 3.0).abs() < 1e-12);
        assert!((s.log_p_norm(3.0).unwrap() - 0.767528).abs() < 1e-6);
        let trit = shape(&[2, 1]);
        assert!((trit.log_p_norm(1.0).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((trit.log_p_norm(2.0).unwrap() - 0.804719).abs() < 1e-6);
        assert_eq!(trit.log_p_norm(f64::INFINITY).unwrap(), 2f64.ln());
        assert!(matches!(trit.log_p_norm(0.5), Err(Error::InvalidExponent(_))));
        assert!(trit.log_p_norm(f64::NAN).is_err());
    }

    #[test]
    fn log_norm_survives_huge_powers() {
        let s = shape(&[3, 2]).tensor_power(600);
        let direct = 600.0 * shape(&[3, 2]).log_p_norm(2.5).unwrap();
        assert!((s.log_p_norm(2.5).unwrap() - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn tensor_examples() {
        let trit = shape(&[2, 1]);
        assert_eq!(trit.tensor(&trit), map(&[(4, 1), (2, 2), (1, 1)]));
        assert_eq!(trit.tensor(&Shape::unit()), trit);
        assert_eq!(map(&[(3, 1)]).tensor(&map(&[(2, 2)])), map(&[(6, 2)]));
    }

    #[test]
    fn tensor_power_examples() {
        let trit = shape(&[2, 1]);
        assert_eq!(trit.tensor_power(2), map(&[(4, 1), (2, 2), (1, 1)]));
        assert_eq!(trit.tensor_power(0), Shape::unit());
        assert_eq!(shape(&[2]).tensor_power(10), map(&[(1024, 1)]));
    }

    #[test]
    fn tensor_power_multiplicities_are_binomials() {
        let p = shape(&[2, 1]).tensor_power(40);
        for k in 0..=40u32 {
            let size = BigUint::from(2u32).pow(k);
            let binom: BigUint = (0..k).fold(BigUint::one(), |acc, i| acc * (40 - i) / (i + 1));
            assert_eq!(p.multiplicity(&size), binom);
        }
    }

    #[test]
    fn tails() {
        let s = map(&[(4, 1), (2, 2), (1, 1)]);
        assert_eq!(s.tail_ge(2.0).unwrap(), BigUint::from(8u32));
        assert_eq!(s.tail_ge(1.5).unwrap(), BigUint::from(8u32));
        let f = shape(&[2, 1, 1]);
        assert_eq!(f.tail_ge(3.0).unwrap(), BigUint::zero());
        assert_eq!(f.tail_ge(1.0).unwrap(), BigUint::from(4u32));
        assert!(matches!(f.tail_ge(0.0), Err(Error::InvalidThreshold(_))));
        assert!(f.tail_ge(-1.0).is_err());
        let half = BigRational::new(3.into(), 2.into());
        assert_eq!(s.tail_ge_ratio(&half).unwrap(), BigUint::from(8u32));
        assert_eq!(s.tail_ge_log(2f64.ln()), BigUint::from(8u32));
        assert_eq!(s.tail_ge_log(-3.0), BigUint::from(9u32));
    }

    #[test]
    fn part_counts() {
        assert_eq!(map(&[(4, 1), (2, 2), (1, 1)]).part_count_ge(2.0).unwrap(), BigUint::from(3u32));
        let f = shape(&[2, 1, 1]);
        assert_eq!(f.part_count_ge(1.0).unwrap(), BigUint::from(3u32));
        assert_eq!(f.part_count_ge(2.5).unwrap(), BigUint::zero());
        assert!(f.part_count_ge(0.0).is_err());
    }

    #[test]
    fn repeat_examples() {
        assert_eq!(shape(&[2, 1]).repeat(2).unwrap(), map(&[(2, 2), (1, 2)]));
        assert_eq!(shape(&[2, 1]).repeat(1).unwrap(), shape(&[2, 1]));
        assert_eq!(map(&[(3, 2)]).repeat(3).unwrap(), map(&[(3, 6)]));
        assert!(shape(&[1]).repeat(0).is_err());
    }

    #[test]
    fn supermajorization_examples() {
        assert!(supermajorizes(&map(&[(3, 2)]), &map(&[(2, 3)])));
        assert!(!supermajorizes(&map(&[(1, 4)]), &shape(&[2, 1])));
        let s = shape(&[5, 3, 3, 1]);
        assert!(supermajorizes(&s, &s));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(parse_shape("2,1,1").unwrap(), shape(&[2, 1, 1]));
        assert_eq!(parse_shape(" 1, 2 ").unwrap(), shape(&[2, 1]));
        assert!(matches!(parse_shape("0,2"), Err(Error::InvalidPart(_))));
        assert!(parse_shape("2,,1").is_err());
        assert!(parse_shape("").is_err());
        assert!(parse_shape("a").is_err());
        assert_eq!(shape(&[1, 2, 1]).to_string(), "2,1,1");
        assert_eq!(shape(&[2]).tensor_power(70).to_string(), "1180591620717411303424x1");
    }

    #[test]
    fn json_form() {
        let s = shape(&[2, 1, 1]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"parts":{"2":1,"1":2}}"#);
        let back: Shape = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let big = shape(&[3, 3]).tensor_power(80);
        let back: Shape = serde_json::from_str(&serde_json::to_string(&big).unwrap()).unwrap();
        assert_eq!(back, big);
        assert!(serde_json::from_str::<Shape>(r#"{"parts":{"2":0}}"#).is_err());
        assert!(serde_json::from_str::<Shape>(r#"{"parts":{}}"#).is_err());
        assert!(serde_json::from_str::<Shape>(r#"{"parts":{"0":1}}"#).is_err());
    }
}
