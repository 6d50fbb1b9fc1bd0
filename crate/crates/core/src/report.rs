//! Serializable reports shared by the CLI and the Python bindings.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Violated,
    Marginal,
}

impl Status {
    pub fn from_margin(margin: f64, tol: f64) -> Status {
        if margin < -tol {
            Status::Violated
        } else if margin > tol {
            Status::Holds
        } else {
            Status::Marginal
        }
    }

    /// Holds and Marginal both count as success.
    pub fn is_positive(self) -> bool {
        self != Status::Violated
    }
}

/// A three-state verdict with its margin and the exponent where the margin is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub margin: f64,
    /// `f64::INFINITY` for `p = ∞`.
    #[serde(with = "extended_f64")]
    pub witness_p: f64,
}

/// Serde adapter writing infinite floats as the strings `"inf"` and `"-inf"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// Keys are exponents as given (`"2"`, `"inf"`), values are `log‖λ‖_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormsReport {
    pub log_norms: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    /// `None` when the node budget ran out before a decision.
    pub embeddable: Option<bool>,
    pub nodes_explored: u64,
    pub diagram: Option<crate::packing::BratteliDiagram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermajorizeReport {
    /// Whether every tail sum of `b` dominates that of `a`.
    pub supermajorizes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkCheckReport {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkConstructReport {
    pub n: u64,
    pub m: u64,
    pub verified: bool,
    pub certificate: crate::packing::PackingCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub classical: f64,
    pub quantum: f64,
    pub total: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalReport {
    pub state: crate::entropy::DiagonalState,
    pub ensemble: crate::entropy::ThermalEnsemble,
    pub classical: f64,
    pub quantum: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalReport {
    #[serde(flatten)]
    pub summary: crate::coding::TypicalSummary,
    pub bounds: Option<crate::coding::TypicalBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: f64,
    pub log_bound: f64,
    #[serde(with = "extended_f64")]
    pub best_p: f64,
    pub feasible: Verdict,
    pub nogo_rate: crate::coding::NogoRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub t: f64,
    /// Exact sum of parts of `λ^{⊗n}` at least `e^{nt}`, in decimal.
    pub exact_tail: String,
    pub log_exact_tail: f64,
    pub log_chernoff_upper: f64,
    pub slack: f64,
    /// Exact tail at the shifted threshold `e^{n(t − slack)}` bounded by Cramér.
    pub exact_tail_shifted: String,
    pub log_exact_tail_shifted: f64,
    /// `None` when the Cramér bound is vacuous.
    pub log_cramer_lower: Option<f64>,
    pub sandwiched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n: u64,
    pub rows: Vec<SandwichRow>,
    pub violations: usize,
    pub note: Option<String>,
}
