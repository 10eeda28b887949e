//! Exact Pareto front of small instances by exhaustive enumeration.
//!
//! Decoding is order-independent, so only (mode, duration) assignments are
//! enumerated. The space is walked as a mixed-radix counter, split into
//! contiguous chunks that are filtered in parallel and merged in index order.

use std::time::Instant;

use rayon::prelude::*;

use crate::pareto::{Front, ParetoArchive, Solution};
use crate::report::{FrontReport, FrontSource};
use crate::schedule::{Chromosome, EvalError, Evaluator};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("search space of {size} assignments exceeds the limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u128 },
    #[error("no feasible solution exists")]
    NoFeasible,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_points: u128,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_points: 10_000_000 }
    }
}

/// Options per activity as (mode, duration) pairs.
fn choices(ev: &Evaluator<'_>) -> Vec<Vec<(usize, u32)>> {
    ev.instance()
        .activities
        .iter()
        .map(|a| {
            a.modes
                .iter()
                .enumerate()
                .flat_map(|(m, mode)| (mode.crash_duration..=mode.normal_duration).map(move |d| (m, d)))
                .collect()
        })
        .collect()
}

/// Π over activities of Σ over modes of (D - d + 1), saturating.
pub fn search_space_size(ev: &Evaluator<'_>) -> u128 {
    choices(ev).iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
}

const CHUNK: u64 = 4096;

/// Every feasible assignment, filtered to the exact nondominated set.
pub fn true_pareto_front(ev: &Evaluator<'_>, limits: OracleLimits) -> Result<Front, OracleError> {
    Ok(enumerate(ev, limits)?.0)
}

fn enumerate(ev: &Evaluator<'_>, limits: OracleLimits) -> Result<(Front, u64), OracleError> {
    let size = search_space_size(ev);
    if size > limits.max_points {
        return Err(OracleError::SpaceTooLarge { size, limit: limits.max_points });
    }
    let total = size as u64;
    let options = choices(ev);
    let order = ev.instance().topological_order().expect("evaluated instances are acyclic");
    let n = options.len();

    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let partial: Vec<Result<ParetoArchive, EvalError>> = chunks
        .par_iter()
        .map(|&c| {
            let mut archive = ParetoArchive::new();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let mut chrom = Chromosome { order: order.clone(), mode: vec![0; n], duration: vec![0; n] };
            for k in lo..hi {
                let mut rest = k;
                for (i, opts) in options.iter().enumerate().rev() {
                    let r = opts.len() as u64;
                    let (m, d) = opts[(rest % r) as usize];
                    rest /= r;
                    chrom.mode[i] = m;
                    chrom.duration[i] = d;
                }
                let (obj, feas) = ev.evaluate(&chrom)?;
                if feas.is_feasible() {
                    archive.insert(Solution::new(obj, chrom.clone()));
                }
            }
            Ok(archive)
        })
        .collect();

    let mut merged = ParetoArchive::new();
    for p in partial {
        merged.extend(p?);
    }
    if merged.is_empty() {
        return Err(OracleError::NoFeasible);
    }
    let mut front = merged.into_front();
    front.sort_canonical();
    Ok((front, total))
}

/// [`true_pareto_front`] wrapped with run metadata.
pub fn run_oracle(ev: &Evaluator<'_>, limits: OracleLimits) -> Result<FrontReport, OracleError> {
    let started = Instant::now();
    let (front, evaluations) = enumerate(ev, limits)?;
    Ok(FrontReport {
        algorithm: "oracle".into(),
        seed: 0,
        instance_hash: ev.instance().content_hash(),
        params: serde_json::json!({ "max_points": limits.max_points.to_string() }),
        evaluations,
        generations: 0,
        wall_ms: started.elapsed().as_millis() as u64,
        source: FrontSource::Enumeration,
        front,
    })
}
