//! Taguchi L25(5^6) parameter tuning with analysis of means.
//!
//! Factors, in column order: elitism rate, hill-climbing rate, mutation rate,
//! crossover rate, iterations, population size.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{mid, MetricError, ReferenceBounds};
use crate::moga::{run_moga, MogaParams};
use crate::operators::SolverError;
use crate::report::fmt_sig12;
use crate::schedule::{Evaluator, ObjectiveVector};

pub const FACTORS: [&str; 6] =
    ["elitism_rate", "hill_climb_rate", "mutation_rate", "crossover_rate", "iterations", "pop_size"];

/// Level indices of the standard L25 array. Row `5a + b` holds
/// `(a, b, a+b, a+2b, a+3b, a+4b) mod 5`.
pub const L25: [[usize; 6]; 25] = {
    let mut out = [[0; 6]; 25];
    let mut r = 0;
    while r < 25 {
        let (a, b) = (r / 5, r % 5);
        out[r] = [a, b, (a + b) % 5, (a + 2 * b) % 5, (a + 3 * b) % 5, (a + 4 * b) % 5];
        r += 1;
    }
    out
};

#[derive(Debug, thiserror::Error)]
pub enum TuningError {
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Five candidate values per factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorLevels {
    pub elitism_rate: [f64; 5],
    pub hill_climb_rate: [f64; 5],
    pub mutation_rate: [f64; 5],
    pub crossover_rate: [f64; 5],
    pub iterations: [usize; 5],
    pub pop_size: [usize; 5],
}

impl Default for FactorLevels {
    fn default() -> Self {
        Self {
            elitism_rate: [0.05, 0.1, 0.15, 0.2, 0.25],
            hill_climb_rate: [0.2, 0.4, 0.5, 0.6, 0.8],
            mutation_rate: [0.2, 0.4, 0.5, 0.6, 0.8],
            crossover_rate: [0.2, 0.4, 0.5, 0.6, 0.8],
            iterations: [500, 700, 1100, 1500, 2000],
            pop_size: [20, 40, 60, 80, 100],
        }
    }
}

impl FactorLevels {
    /// Builds from six lists of five values each, in factor order.
    pub fn from_lists(lists: &[Vec<f64>]) -> Result<Self, TuningError> {
        if lists.len() != 6 {
            return Err(TuningError::Dimension { expected: 6, got: lists.len() });
        }
        let five = |v: &Vec<f64>| -> Result<[f64; 5], TuningError> {
            v.as_slice().try_into().map_err(|_| TuningError::Dimension { expected: 5, got: v.len() })
        };
        let ints =
            |v: &Vec<f64>| -> Result<[usize; 5], TuningError> { Ok(five(v)?.map(|x| x.round() as usize)) };
        Ok(Self {
            elitism_rate: five(&lists[0])?,
            hill_climb_rate: five(&lists[1])?,
            mutation_rate: five(&lists[2])?,
            crossover_rate: five(&lists[3])?,
            iterations: ints(&lists[4])?,
            pop_size: ints(&lists[5])?,
        })
    }

    pub fn value(&self, factor: usize, level: usize) -> f64 {
        match factor {
            0 => self.elitism_rate[level],
            1 => self.hill_climb_rate[level],
            2 => self.mutation_rate[level],
            3 => self.crossover_rate[level],
            4 => self.iterations[level] as f64,
            _ => self.pop_size[level] as f64,
        }
    }

    /// `base` with every factor set to the given level indices.
    pub fn params(&self, levels: &[usize; 6], base: &MogaParams) -> MogaParams {
        MogaParams {
            elitism_rate: self.elitism_rate[levels[0]],
            hill_climb_rate: self.hill_climb_rate[levels[1]],
            mutation_rate: self.mutation_rate[levels[2]],
            crossover_rate: self.crossover_rate[levels[3]],
            iterations: self.iterations[levels[4]],
            pop_size: self.pop_size[levels[5]],
            ..base.clone()
        }
    }
}

/// The 25 parameter sets of the design; row `r` runs with seed `base.seed + r`.
pub fn l25_design(levels: &FactorLevels, base: &MogaParams) -> Vec<MogaParams> {
    L25.iter()
        .enumerate()
        .map(|(r, row)| MogaParams { seed: base.seed.wrapping_add(r as u64), ..levels.params(row, base) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anom {
    /// `means[f][l]`: mean response over the runs with factor `f` at level `l`.
    pub means: [[f64; 5]; 6],
    /// Level index minimizing each factor's mean; ties go to the lower index.
    pub best: [usize; 6],
}

pub fn anom(responses: &[f64]) -> Result<Anom, TuningError> {
    if responses.len() != 25 {
        return Err(TuningError::Dimension { expected: 25, got: responses.len() });
    }
    let mut means = [[0.0; 5]; 6];
    for (row, y) in L25.iter().zip(responses) {
        for f in 0..6 {
            means[f][row[f]] += y / 5.0;
        }
    }
    let best = means.map(|m| (0..5).fold(0, |b, l| if m[l] < m[b] { l } else { b }));
    Ok(Anom { means, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRun {
    pub row: usize,
    pub levels: [usize; 6],
    pub seed: u64,
    pub front_size: usize,
    pub evaluations: u64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub instance_hash: String,
    pub levels: FactorLevels,
    pub runs: Vec<TuningRun>,
    pub anom: Anom,
    pub recommended_levels: [usize; 6],
    pub recommended: MogaParams,
}

impl TuningReport {
    /// Level-mean table, one row per (factor, level).
    pub fn means_csv(&self) -> String {
        let mut out = String::from("factor,level,value,mean\n");
        for (f, name) in FACTORS.iter().enumerate() {
            for l in 0..5 {
                let _ = writeln!(
                    out,
                    "{name},{},{},{}",
                    l + 1,
                    fmt_sig12(self.levels.value(f, l)),
                    fmt_sig12(self.anom.means[f][l])
                );
            }
        }
        out
    }
}

/// Runs MOGA once per design row. The response of a run is the MID of its
/// front measured against the bounds of all 25 fronts together.
pub fn tune(
    ev: &Evaluator<'_>,
    levels: &FactorLevels,
    base: &MogaParams,
) -> Result<TuningReport, TuningError> {
    let design = l25_design(levels, base);
    for p in &design {
        p.validate()?;
    }
    let reports: Vec<_> = design.par_iter().map(|p| run_moga(ev, p)).collect::<Result<_, _>>()?;
    let union: Vec<ObjectiveVector> = reports.iter().flat_map(|r| r.front.objectives()).collect();
    let bounds = ReferenceBounds::from_points(&union)?;
    let mut runs = Vec::with_capacity(25);
    for (r, rep) in reports.iter().enumerate() {
        runs.push(TuningRun {
            row: r,
            levels: L25[r],
            seed: design[r].seed,
            front_size: rep.front.len(),
            evaluations: rep.evaluations,
            response: mid(&rep.front.objectives(), &bounds)?,
        });
    }
    let responses: Vec<f64> = runs.iter().map(|r| r.response).collect();
    let anom = anom(&responses)?;
    let recommended = levels.params(&anom.best, base);
    Ok(TuningReport {
        instance_hash: ev.instance().content_hash(),
        levels: levels.clone(),
        runs,
        recommended_levels: anom.best,
        anom,
        recommended,
    })
}
