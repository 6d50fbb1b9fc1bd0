//! The `qmem` command line: argument parsing, dispatch and the exit-code contract.
//!
//! Exit codes: 0 success or a positive (possibly marginal) verdict, 1 usage or
//! input error, 2 negative verdict, 3 inconclusive or budget exhausted.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::coding::{
    code_feasible, coding_fidelity, holder_bound, nogo_rate, random_subunital_channel,
    typical_algebra_with_budget, verify_typical_bounds, CodingPair, DEFAULT_TYPE_BUDGET,
};
use crate::entropy::{
    classical_entropy, quantum_entropy, region_boundary, region_contains, region_subset, thermal_state,
    total_entropy, DiagonalState,
};
use crate::error::{Error, Result};
use crate::largedev::{bulk_check, bulk_construct, sandwich, DEFAULT_TAIL_BUDGET, DEFAULT_TOL};
use crate::packing::{decide_embed_with_budget, verify_certificate, EmbedOutcome, DEFAULT_NODE_BUDGET};
use crate::report::{
    BoundReport, BulkCheckReport, BulkConstructReport, EmbedReport, EntropyReport, FidelityReport, NormsReport,
    Status, SupermajorizeReport, ThermalReport, TypicalReport, Verdict,
};
use crate::shapes::{parse_shape, supermajorizes, Shape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

/// Environment variable overriding the default resource budgets.
pub const BUDGET_ENV: &str = "QMEM_BUDGET";

#[derive(Debug, Parser)]
#[command(name = "qmem", version, about = "Ordering, capacity and coding bounds for hybrid quantum memories")]
pub struct Cli {
    /// Write the document to FILE instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel grids and enumerations.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report entropies and log quantities in bits instead of nats.
    #[arg(long, global = true)]
    pub bits: bool,
    #[command(subcommand)]
    pub command: Command,
}

fn shape_arg(text: &str) -> std::result::Result<Shape, String> {
    parse_shape(text).map_err(|e| e.to_string())
}

fn exponent_arg(text: &str) -> std::result::Result<f64, String> {
    parse_exponent(text).map_err(|e| e.to_string())
}

fn rational_arg(text: &str) -> std::result::Result<BigRational, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

/// Parses `p ≥ 1`, accepting `inf` for infinity.
pub fn parse_exponent(text: &str) -> Result<f64> {
    let t = text.trim();
    let p = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        _ => t.parse::<f64>().map_err(|_| Error::Parse(format!("not an exponent: {t:?}")))?,
    };
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(p)
}

/// Parses `a/b` or a finite decimal into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {t:?}"));
    if t.contains('/') {
        let r = BigRational::from_str(t).map_err(|_| bad())?;
        return Ok(r);
    }
    let (sign, digits) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let numer = BigInt::from_str(&format!("{int}{frac}")).map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(numer * sign, denom))
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long, value_parser = shape_arg)]
    pub a: Shape,
    #[arg(long, value_parser = shape_arg)]
    pub b: Shape,
}

#[derive(Debug, Args)]
pub struct BulkCheckArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BulkConstructArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Rate slack ε as `a/b` or a decimal.
    #[arg(long, value_parser = rational_arg, default_value = "1/4")]
    pub epsilon: BigRational,
    #[arg(long, default_value_t = 512)]
    pub max_n: u64,
}

#[derive(Debug, Subcommand)]
pub enum BulkCommand {
    /// Compare `log‖λ‖_p` for all p.
    Check(BulkCheckArgs),
    /// Find and verify an embedding of a^N into b^M with M = ceil(N(1+ε)).
    Construct(BulkConstructArgs),
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Log p-norms of a shape.
    Norms {
        #[arg(long, value_parser = shape_arg)]
        shape: Shape,
        /// Comma-separated exponents; `inf` allowed.
        #[arg(long, default_value = "1,2,inf")]
        p: String,
    },
    /// Decide whether a embeds in b by exact bin packing.
    Embed {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        node_budget: Option<u64>,
    },
    /// Decide whether b supermajorizes a.
    Supermajorize {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Bulk embedding: `bulk check` or `bulk construct`.
    Bulk {
        #[command(subcommand)]
        command: BulkCommand,
    },
    /// Same as `bulk check`.
    BulkCheck(BulkCheckArgs),
    /// Same as `bulk construct`.
    BulkConstruct(BulkConstructArgs),
    /// Boundary of the capacity region as CSV with columns H,S.
    Capacity {
        #[arg(long, value_parser = shape_arg)]
        shape: Shape,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Classical and quantum entropy of a state.
    Entropy {
        #[arg(long, value_parser = shape_arg)]
        shape: Option<Shape>,
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
    },
    /// Thermal state at exponent p.
    Thermal {
        #[arg(long, value_parser = shape_arg)]
        shape: Shape,
        #[arg(long, value_parser = exponent_arg, default_value = "1")]
        p: f64,
    },
    /// Whether (H, S) lies in the capacity region.
    RegionContains {
        #[arg(long, value_parser = shape_arg)]
        shape: Shape,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Whether C(a) is contained in C(b).
    RegionSubset {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// The α-typical subalgebra of N copies of a state.
    Typical {
        #[arg(long, value_parser = shape_arg)]
        shape: Option<Shape>,
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        alpha: f64,
        /// Also check the three typical-subalgebra estimates at this ε.
        #[arg(long, value_parser = rational_arg)]
        epsilon: Option<BigRational>,
    },
    /// Hölder bound on coding fidelity through shape b, with feasibility and decay rate.
    Bound {
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        #[arg(long, value_parser = shape_arg)]
        shape_a: Option<Shape>,
        #[arg(long, value_parser = shape_arg)]
        shape_b: Shape,
        /// Fixed exponent; minimized over p when omitted.
        #[arg(long, value_parser = exponent_arg)]
        p: Option<f64>,
        /// Rate inflation δ for the decay exponent.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Complete fidelity of an encode and decode pair.
    Fidelity {
        /// JSON with `encode` and `decode` channels.
        #[arg(long, value_name = "FILE", required_unless_present = "seed")]
        channels: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        /// Draw a random pair through this shape instead of reading channels.
        #[arg(long, value_parser = shape_arg, requires = "seed")]
        shape_b: Option<Shape>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        rank: usize,
    },
    /// Exact tails of a tensor power against the Chernoff and Cramér bounds.
    Sandwich {
        #[arg(long, value_parser = shape_arg)]
        shape: Shape,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
}

/// What a command produced: the exit code and the document to emit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub document: String,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

fn verdict_code(status: Status) -> i32 {
    match status {
        Status::Holds | Status::Marginal => EXIT_OK,
        Status::Violated => EXIT_NEGATIVE,
    }
}

/// Exit code for an error raised while running a command.
pub fn error_code(err: &Error) -> i32 {
    match err {
        Error::BudgetExceeded(_) => EXIT_UNKNOWN,
        Error::NotBulkEmbeddable { .. } => EXIT_NEGATIVE,
        _ => EXIT_USAGE,
    }
}

fn env_budget() -> Result<Option<u64>> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Parse(format!("{BUDGET_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn read_state(path: &PathBuf, expected: Option<&Shape>) -> Result<DiagonalState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let state = DiagonalState::from_json(&text)?;
    if let Some(shape) = expected {
        if state.shape() != *shape {
            return Err(Error::DimensionMismatch(format!(
                "state has shape {} but {shape} was given",
                state.shape()
            )));
        }
    }
    Ok(state)
}

fn format_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn bulk_note(v: &Verdict) -> String {
    let word = match v.status {
        Status::Holds => "holds",
        Status::Violated => "violated",
        Status::Marginal => "marginal",
    };
    format!("{word} at p = {}", format_p(v.witness_p))
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let unit = if cli.bits { std::f64::consts::LN_2.recip() } else { 1.0 };
    let units = if cli.bits { "bits" } else { "nats" }.to_string();
    let budget = env_budget()?;
    let out = |code: i32, document: String| Ok(Outcome { code, document });
    match &cli.command {
        Command::Norms { shape, p } => {
            let mut log_norms = serde_json::Map::new();
            for token in p.split(',') {
                let exponent = parse_exponent(token)?;
                let value = shape.log_p_norm(exponent)? * unit;
                log_norms.insert(token.trim().to_string(), serde_json::json!(value));
            }
            out(EXIT_OK, json(&NormsReport { log_norms }))
        }
        Command::Embed { pair, node_budget } => {
            let limit = node_budget.or(budget).unwrap_or(DEFAULT_NODE_BUDGET);
            let search = decide_embed_with_budget(&pair.a, &pair.b, limit)?;
            let (code, embeddable, diagram) = match search.outcome {
                EmbedOutcome::Embeddable(d) => (EXIT_OK, Some(true), Some(d)),
                EmbedOutcome::NotEmbeddable => (EXIT_NEGATIVE, Some(false), None),
                EmbedOutcome::Unknown => (EXIT_UNKNOWN, None, None),
            };
            let report = EmbedReport {
                embeddable,
                nodes_explored: search.nodes_explored,
                diagram,
            };
            out(code, json(&report))
        }
        Command::Supermajorize { pair } => {
            let holds = supermajorizes(&pair.b, &pair.a);
            let code = if holds { EXIT_OK } else { EXIT_NEGATIVE };
            out(code, json(&SupermajorizeReport { supermajorizes: holds }))
        }
        Command::Bulk {
            command: BulkCommand::Check(args),
        }
        | Command::BulkCheck(args) => {
            let verdict = bulk_check(&args.pair.a, &args.pair.b, args.tol);
            let report = BulkCheckReport {
                note: bulk_note(&verdict),
                verdict,
            };
            out(verdict_code(verdict.status), json(&report))
        }
        Command::Bulk {
            command: BulkCommand::Construct(args),
        }
        | Command::BulkConstruct(args) => {
            let c = bulk_construct(&args.pair.a, &args.pair.b, &args.epsilon, args.max_n)?;
            let verified = verify_certificate(
                &args.pair.a.tensor_power(c.n),
                &args.pair.b.tensor_power(c.m),
                &c.certificate,
            );
            let report = BulkConstructReport {
                n: c.n,
                m: c.m,
                verified,
                certificate: c.certificate,
            };
            out(if verified { EXIT_OK } else { EXIT_UNKNOWN }, json(&report))
        }
        Command::Capacity { shape, samples } => {
            let mut csv = String::from("H,S\n");
            for (h, s) in region_boundary(shape, *samples)? {
                writeln!(csv, "{},{}", h * unit, s * unit).expect("writing to a string");
            }
            out(EXIT_OK, csv)
        }
        Command::Entropy { shape, state } => {
            let rho = read_state(state, shape.as_ref())?;
            let report = EntropyReport {
                classical: classical_entropy(&rho) * unit,
                quantum: quantum_entropy(&rho) * unit,
                total: total_entropy(&rho) * unit,
                units,
            };
            out(EXIT_OK, json(&report))
        }
        Command::Thermal { shape, p } => {
            let (state, ensemble) = thermal_state(shape, *p)?;
            let report = ThermalReport {
                classical: classical_entropy(&state) * unit,
                quantum: quantum_entropy(&state) * unit,
                state,
                ensemble,
                units,
            };
            out(EXIT_OK, json(&report))
        }
        Command::RegionContains { shape, h, s, tol } => {
            let mut v = region_contains(shape, h / unit, s / unit, *tol);
            v.margin *= unit;
            out(verdict_code(v.status), json(&v))
        }
        Command::RegionSubset { pair, tol } => {
            let report = region_subset(&pair.a, &pair.b, *tol);
            out(verdict_code(report.verdict.status), json(&report))
        }
        Command::Typical {
            shape,
            state,
            n,
            alpha,
            epsilon,
        } => {
            let rho = read_state(state, shape.as_ref())?;
            let summary = typical_algebra_with_budget(&rho, *n, *alpha, budget.unwrap_or(DEFAULT_TYPE_BUDGET))?;
            let bounds = epsilon.as_ref().map(|eps| {
                let eps = num_traits::ToPrimitive::to_f64(eps).unwrap_or(f64::NAN);
                verify_typical_bounds(&summary, classical_entropy(&rho), quantum_entropy(&rho), eps)
            });
            out(EXIT_OK, json(&TypicalReport { summary, bounds }))
        }
        Command::Bound {
            state,
            shape_a,
            shape_b,
            p,
            delta,
            tol,
        } => {
            let rho = read_state(state, shape_a.as_ref())?;
            let hb = holder_bound(&rho, shape_b, *p)?;
            let report = BoundReport {
                bound: hb.bound,
                log_bound: hb.log_bound * unit,
                best_p: hb.best_p,
                feasible: code_feasible(&rho, shape_b, *tol),
                nogo_rate: nogo_rate(&rho, shape_b, *delta)?,
            };
            out(EXIT_OK, json(&report))
        }
        Command::Fidelity {
            channels,
            state,
            shape_b,
            seed,
            rank,
        } => {
            let rho = read_state(state, None)?;
            let pair = match (channels, seed) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str::<CodingPair>(&text).map_err(|e| Error::Parse(e.to_string()))?
                }
                (None, Some(seed)) => {
                    let a = rho.shape();
                    let b = shape_b.clone().unwrap_or_else(|| a.clone());
                    CodingPair {
                        encode: random_subunital_channel(&a, &b, *rank, *seed)?,
                        decode: random_subunital_channel(&b, &a, *rank, seed.wrapping_add(1))?,
                    }
                }
                (None, None) => return Err(Error::InvalidArgument("give --channels or --seed".into())),
            };
            let fidelity = coding_fidelity(&rho, &pair.decode, &pair.encode)?;
            out(EXIT_OK, json(&FidelityReport { fidelity }))
        }
        Command::Sandwich { shape, n, grid } => {
            let report = sandwich(shape, *n, *grid, budget.unwrap_or(DEFAULT_TAIL_BUDGET))?;
            let code = if report.violations == 0 { EXIT_OK } else { EXIT_NEGATIVE };
            out(code, json(&report))
        }
    }
}

/// Parses `args`, runs the command and writes its document. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("qmem: cannot configure {n} threads: {e}");
            return EXIT_USAGE;
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("qmem: {e}");
            return error_code(&e);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &outcome.document)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{}", outcome.document);
            Ok(())
        }
    };
    if let Err(msg) = written {
        eprintln!("qmem: {msg}");
        return EXIT_USAGE;
    }
    outcome.code
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};

    fn run_args(args: &[&str]) -> Result<Outcome> {
        let cli = Cli::try_parse_from(std::iter::once("qmem").chain(args.iter().copied())).unwrap();
        run(&cli)
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("1/4").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("3").unwrap(), BigRational::from_integer(3.into()));
        assert!(parse_rational("0").unwrap().is_zero());
        assert!(parse_rational("1").unwrap().is_one());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(parse_exponent("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_exponent(" 2.5 ").unwrap(), 2.5);
        assert!(parse_exponent("0.5").is_err());
        assert!(parse_exponent("two").is_err());
    }

    #[test]
    fn norms_document() {
        let o = run_args(&["norms", "--shape", "2,1,1", "--p", "1,2,3,inf"]).unwrap();
        assert_eq!(o.code, EXIT_OK);
        let r: NormsReport = serde_json::from_str(&o.document).unwrap();
        let keys: Vec<&String> = r.log_norms.keys().collect();
        assert_eq!(keys, ["1", "2", "3", "inf"]);
        let get = |k: &str| r.log_norms[k].as_f64().unwrap();
        assert!((get("1") - 4f64.ln()).abs() < 1e-12);
        assert!((get("2") - 6f64.ln() / 2.0).abs() < 1e-12);
        assert!((get("3") - 10f64.ln() / 3.0).abs() < 1e-12);
        assert!((get("inf") - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn verdict_exit_codes() {
        assert_eq!(run_args(&["embed", "--a", "2,2,2", "--b", "3,3"]).unwrap().code, EXIT_NEGATIVE);
        assert_eq!(run_args(&["embed", "--a", "2", "--b", "2,1"]).unwrap().code, EXIT_OK);
        assert_eq!(
            run_args(&["embed", "--a", "2,2,2", "--b", "3,3", "--node-budget", "1"]).unwrap().code,
            EXIT_UNKNOWN
        );
        assert_eq!(run_args(&["supermajorize", "--a", "2,2,2", "--b", "3,3"]).unwrap().code, EXIT_OK);
        let o = run_args(&["bulk", "check", "--a", "2,2,2", "--b", "3,3"]).unwrap();
        assert_eq!(o.code, EXIT_OK);
        let r: BulkCheckReport = serde_json::from_str(&o.document).unwrap();
        assert_eq!(r.verdict.status, Status::Marginal);
        assert_eq!(r.note, "marginal at p = 1");
        assert_eq!(run_args(&["bulk-check", "--a", "2,1", "--b", "1,1,1,1"]).unwrap().code, EXIT_NEGATIVE);
        let err = run_args(&["bulk-construct", "--a", "2,1", "--b", "1,1,1,1"]).unwrap_err();
        assert_eq!(error_code(&err), EXIT_NEGATIVE);
        let err = run_args(&["bulk", "construct", "--a", "2,2,2", "--b", "3,3", "--max-n", "0"]).unwrap_err();
        assert_eq!(error_code(&err), EXIT_UNKNOWN);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(main_with_args(["qmem", "norms", "--shape", "0,2"]), EXIT_USAGE);
        assert_eq!(main_with_args(["qmem", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["qmem", "thermal", "--shape", "2", "--p", "0.5"]), EXIT_USAGE);
    }

    #[test]
    fn capacity_csv() {
        let o = run_args(&["capacity", "--shape", "2", "--samples", "16"]).unwrap();
        let lines: Vec<&str> = o.document.lines().collect();
        assert_eq!(lines[0], "H,S");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn bits_scaling() {
        let o = run_args(&["--bits", "norms", "--shape", "2", "--p", "inf"]).unwrap();
        let r: NormsReport = serde_json::from_str(&o.document).unwrap();
        assert!((r.log_norms["inf"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    }
}
