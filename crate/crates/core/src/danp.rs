//! DEMATEL-based ANP weighting of quality criteria.
//!
//! A direct-influence matrix `A` is scaled and expanded into the total-relation
//! matrix `T`. The transpose of `T`, column-normalized, is a column-stochastic
//! supermatrix whose limiting distribution gives the criterion weights. Mode
//! quality scores are the weighted sums of per-criterion scores.

use std::collections::BTreeMap;
use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::instance::{validate_instance, ProjectInstance};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DanpError {
    #[error("invalid influence matrix: {0}")]
    InvalidMatrix(String),
    #[error("I - X is singular")]
    Singular,
    #[error("total-relation matrix is all zero")]
    AllZero,
    #[error("activity {activity} mode {mode} has no score for criterion {criterion:?}")]
    MissingScore { activity: usize, mode: usize, criterion: String },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("patch: {0}")]
    Patch(String),
}

/// Named criteria with their direct-influence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    pub criteria: Vec<String>,
    pub a: DMatrix<f64>,
}

impl InfluenceMatrix {
    pub fn new(criteria: Vec<String>, a: DMatrix<f64>) -> Result<Self, DanpError> {
        let c = criteria.len();
        if c == 0 || a.nrows() != c || a.ncols() != c {
            return Err(DanpError::InvalidMatrix(format!(
                "{} criteria but a {}x{} matrix",
                c,
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DanpError::InvalidMatrix("entries must be finite and nonnegative".into()));
        }
        if (0..c).any(|i| a[(i, i)] != 0.0) {
            return Err(DanpError::InvalidMatrix("diagonal must be zero".into()));
        }
        Ok(Self { criteria, a })
    }
}

/// `T = X (I - X)^-1` with `X = A / max(max row sum, max column sum)`.
pub fn dematel_total(a: &DMatrix<f64>) -> Result<DMatrix<f64>, DanpError> {
    let n = a.nrows();
    let row_max = a.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let col_max = a.column_iter().map(|c| c.sum()).fold(0.0, f64::max);
    let s = row_max.max(col_max);
    if s == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let x = a / s;
    let m = DMatrix::identity(n, n) - &x;
    let lu = m.lu();
    if lu.determinant().abs() < 1e-12 {
        return Err(DanpError::Singular);
    }
    let inv = lu.try_inverse().ok_or(DanpError::Singular)?;
    Ok(x * inv)
}

/// Column-stochastic supermatrix: column `j` is row `j` of `T` scaled to sum
/// to one. A zero row of `T` becomes a uniform column.
pub fn supermatrix(t: &DMatrix<f64>) -> Result<DMatrix<f64>, DanpError> {
    let n = t.nrows();
    if t.iter().all(|x| *x == 0.0) {
        return Err(DanpError::AllZero);
    }
    let mut w = t.transpose();
    for mut col in w.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / n as f64);
        }
    }
    Ok(w)
}

const LIMIT_TOL: f64 = 1e-9;
const MAX_SQUARINGS: usize = 64;

/// Criterion weights from the limit of the supermatrix powers.
pub fn danp_weights(t: &DMatrix<f64>) -> Result<Vec<f64>, DanpError> {
    let mut w = supermatrix(t)?;
    let mut limit = None;
    for _ in 0..MAX_SQUARINGS {
        let next = &w * &w;
        let delta = (&next - &w).amax();
        w = next;
        if delta < LIMIT_TOL {
            limit = Some(w.clone());
            break;
        }
    }
    let limit = limit.unwrap_or_else(|| (&w + &w * &w) / 2.0);
    let means: Vec<f64> = limit.row_iter().map(|r| r.mean()).collect();
    let total: f64 = means.iter().sum();
    Ok(means.into_iter().map(|m| m / total).collect())
}

/// Per-criterion scores of one activity mode (1-based ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    pub activity: usize,
    pub mode: usize,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityEntry {
    pub activity: usize,
    pub mode: usize,
    pub quality: f64,
}

/// Mergeable list of mode qualities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityPatch {
    pub quality: Vec<QualityEntry>,
}

/// `q = Σ_c w_c · score_c` for every scored mode.
pub fn quality_scores(
    criteria: &[String],
    weights: &[f64],
    scores: &[ModeScores],
) -> Result<QualityPatch, DanpError> {
    let mut out = Vec::with_capacity(scores.len());
    for s in scores {
        let mut q = 0.0;
        for (c, w) in criteria.iter().zip(weights) {
            let v = s.scores.get(c).ok_or_else(|| DanpError::MissingScore {
                activity: s.activity,
                mode: s.mode,
                criterion: c.clone(),
            })?;
            q += w * v;
        }
        out.push(QualityEntry { activity: s.activity, mode: s.mode, quality: q });
    }
    Ok(QualityPatch { quality: out })
}

fn csv_err(e: csv::Error) -> DanpError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    DanpError::Csv { line, message: e.to_string() }
}

fn parse_num(s: &str, line: usize) -> Result<f64, DanpError> {
    s.trim().parse().map_err(|_| DanpError::Csv { line, message: format!("not a number: {s:?}") })
}

/// Header row names the criteria; each following row is one matrix row.
pub fn read_influence_csv(r: impl Read) -> Result<InfluenceMatrix, DanpError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let criteria: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let c = criteria.len();
    let mut data = Vec::with_capacity(c * c);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        for f in rec.iter() {
            data.push(parse_num(f, line)?);
        }
        rows += 1;
    }
    if rows != c {
        return Err(DanpError::InvalidMatrix(format!("{c} criteria but {rows} rows")));
    }
    InfluenceMatrix::new(criteria, DMatrix::from_row_slice(c, c, &data))
}

/// Columns `activity,mode,<criterion>...`.
pub fn read_scores_csv(r: impl Read) -> Result<(Vec<String>, Vec<ModeScores>), DanpError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.len() < 3 || header[0] != "activity" || header[1] != "mode" {
        return Err(DanpError::Csv { line: 1, message: "header must be activity,mode,<criteria...>".into() });
    }
    let criteria = header[2..].to_vec();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let int = |s: &str| -> Result<usize, DanpError> {
            s.parse().map_err(|_| DanpError::Csv { line, message: format!("not an id: {s:?}") })
        };
        let mut scores = BTreeMap::new();
        for (c, f) in criteria.iter().zip(rec.iter().skip(2)) {
            if !f.is_empty() {
                scores.insert(c.clone(), parse_num(f, line)?);
            }
        }
        out.push(ModeScores { activity: int(&rec[0])?, mode: int(&rec[1])?, scores });
    }
    Ok((criteria, out))
}

/// Writes patch qualities into the instance and revalidates it. Every real
/// activity mode must be covered.
pub fn apply_quality_patch(inst: &mut ProjectInstance, patch: &QualityPatch) -> Result<(), DanpError> {
    let mut covered = std::collections::HashSet::new();
    for e in &patch.quality {
        let act = inst
            .activities
            .iter_mut()
            .find(|a| a.id == e.activity)
            .ok_or_else(|| DanpError::Patch(format!("unknown activity {}", e.activity)))?;
        if act.is_dummy {
            return Err(DanpError::Patch(format!("activity {} is a dummy", e.activity)));
        }
        let mode = act
            .modes
            .get_mut(e.mode.wrapping_sub(1))
            .ok_or_else(|| DanpError::Patch(format!("activity {} has no mode {}", e.activity, e.mode)))?;
        mode.quality = e.quality;
        covered.insert((e.activity, e.mode));
    }
    for a in inst.activities.iter().filter(|a| !a.is_dummy) {
        for m in 1..=a.modes.len() {
            if !covered.contains(&(a.id, m)) {
                return Err(DanpError::Patch(format!("activity {} mode {m} not covered", a.id)));
            }
        }
    }
    let v = validate_instance(inst);
    if !v.is_empty() {
        return Err(DanpError::Patch(format!("patched instance invalid: {v:?}")));
    }
    Ok(())
}
