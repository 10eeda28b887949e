//! Solver output: [`FrontReport`] and the front CSV format.
//!
//! A front file starts with `#`-prefixed `key=value` header lines followed by a
//! column header and one row per solution:
//!
//! ```text
//! # crashplan-front v1
//! # instance_hash=<sha256 hex>
//! # algorithm=moga
//! # seed=7
//! order,mode,duration,npv_cost,makespan,productivity,valid_number
//! 1:3:2:4,1:2:1:1,0:3:5:0,254.912839313,5,0.294211508227,3
//! ```
//!
//! `order`, `mode` and `duration` are colon-joined integer strings with 1-based
//! activity ids and mode numbers. Reals carry 12 significant digits.

use std::fmt::Write as _;

use serde::Serialize;

use crate::pareto::{Front, Solution};
use crate::schedule::{Chromosome, ObjectiveVector};

pub const FRONT_HEADER: &str = "order,mode,duration,npv_cost,makespan,productivity,valid_number";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("front file line {line}: {message}")]
pub struct FrontParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontSource {
    Archive,
    FinalPopulation,
    Enumeration,
}

/// A solver's front plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontReport {
    pub algorithm: String,
    pub seed: u64,
    pub instance_hash: String,
    pub params: serde_json::Value,
    pub evaluations: u64,
    pub generations: u64,
    pub wall_ms: u64,
    pub source: FrontSource,
    pub front: Front,
}

impl FrontReport {
    pub fn to_csv(&self) -> String {
        write_front_csv(&self.front, &self.instance_hash, &self.algorithm, self.seed)
    }

    /// Everything except the front itself, for the JSON sidecar.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "algorithm": self.algorithm,
            "seed": self.seed,
            "instance_hash": self.instance_hash,
            "params": self.params,
            "evaluations": self.evaluations,
            "generations": self.generations,
            "wall_ms": self.wall_ms,
            "source": self.source,
            "front_size": self.front.len(),
        })
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn solution_row(s: &Solution, valid_number: u8) -> String {
    format!(
        "{},{},{},{},{}",
        s.chromosome,
        fmt_sig12(s.objectives.npv_cost),
        s.objectives.makespan,
        fmt_sig12(s.objectives.productivity),
        valid_number
    )
}

pub fn write_front_csv(front: &Front, instance_hash: &str, algorithm: &str, seed: u64) -> String {
    let mut out = String::new();
    out.push_str("# crashplan-front v1\n");
    let _ = writeln!(out, "# instance_hash={instance_hash}");
    let _ = writeln!(out, "# algorithm={algorithm}");
    let _ = writeln!(out, "# seed={seed}");
    out.push_str(FRONT_HEADER);
    out.push('\n');
    for m in &front.members {
        out.push_str(&solution_row(&m.solution, 3));
        out.push('\n');
    }
    out
}

/// Parsed front file.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontFile {
    pub instance_hash: Option<String>,
    pub algorithm: Option<String>,
    pub seed: Option<u64>,
    pub solutions: Vec<Solution>,
}

pub fn read_front_csv(text: &str) -> Result<FrontFile, FrontParseError> {
    let mut file = FrontFile { instance_hash: None, algorithm: None, seed: None, solutions: Vec::new() };
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| FrontParseError { line, message };
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        if let Some(meta) = raw.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                match k.trim() {
                    "instance_hash" => file.instance_hash = Some(v.trim().to_string()),
                    "algorithm" => file.algorithm = Some(v.trim().to_string()),
                    "seed" => file.seed = Some(v.trim().parse().map_err(|_| err(format!("bad seed {v:?}")))?),
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            if raw != FRONT_HEADER {
                return Err(err(format!("expected column header {FRONT_HEADER:?}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 columns, got {}", fields.len())));
        }
        let chromosome: Chromosome = fields[..3].join(",").parse().map_err(|e| err(format!("{e}")))?;
        let num = |s: &str| -> Result<f64, FrontParseError> {
            s.parse().map_err(|_| err(format!("bad number {s:?}")))
        };
        let npv = num(fields[3])?;
        let makespan: u32 = fields[4].parse().map_err(|_| err(format!("bad makespan {:?}", fields[4])))?;
        let productivity = num(fields[5])?;
        file.solutions.push(Solution::new(ObjectiveVector::new(npv, makespan, productivity), chromosome));
    }
    if !saw_header {
        return Err(FrontParseError { line: text.lines().count(), message: "missing column header".into() });
    }
    Ok(file)
}
