//! Pareto dominance under the fixed senses (min cost, min makespan, max
//! productivity), nondominated sorting and a dominance archive.

use serde::Serialize;

use crate::schedule::{Chromosome, ObjectiveVector};

/// Absolute tolerance for treating two objective vectors as the same point.
pub const OBJECTIVE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParetoError {
    #[error("objective vector contains NaN")]
    NaN,
}

fn has_nan(v: &ObjectiveVector) -> bool {
    v.npv_cost.is_nan() || v.productivity.is_nan()
}

/// `a` dominates `b`: no worse in every objective and strictly better in one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool, ParetoError> {
    if has_nan(a) || has_nan(b) {
        return Err(ParetoError::NaN);
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let no_worse = a.npv_cost <= b.npv_cost && a.makespan <= b.makespan && a.productivity >= b.productivity;
    let better = a.npv_cost < b.npv_cost || a.makespan < b.makespan || a.productivity > b.productivity;
    no_worse && better
}

pub fn same_point(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    (a.npv_cost - b.npv_cost).abs() <= OBJECTIVE_EPS
        && a.makespan == b.makespan
        && (a.productivity - b.productivity).abs() <= OBJECTIVE_EPS
}

/// Front index of every member (0 = nondominated).
pub fn nondominated_sort(pop: &[ObjectiveVector]) -> Result<Vec<usize>, ParetoError> {
    if pop.iter().any(has_nan) {
        return Err(ParetoError::NaN);
    }
    Ok(sort_unchecked(pop))
}

pub(crate) fn sort_unchecked(pop: &[ObjectiveVector]) -> Vec<usize> {
    let n = pop.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates_unchecked(&pop[i], &pop[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_unchecked(&pop[j], &pop[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = level;
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        level += 1;
        current = next;
    }
    rank
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub objectives: ObjectiveVector,
    pub chromosome: Chromosome,
}

impl Solution {
    pub fn new(objectives: ObjectiveVector, chromosome: Chromosome) -> Self {
        Self { objectives, chromosome }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontMember {
    pub solution: Solution,
    /// Input positions that produced this objective vector.
    pub contributors: Vec<usize>,
}

/// Mutually nondominated solutions with distinct objective vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Front {
    pub members: Vec<FrontMember>,
}

impl Front {
    pub fn from_solutions(solutions: Vec<Solution>) -> Self {
        Self {
            members: solutions
                .into_iter()
                .enumerate()
                .map(|(i, solution)| FrontMember { solution, contributors: vec![i] })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|m| m.solution.objectives).collect()
    }

    pub fn solutions(&self) -> Vec<Solution> {
        self.members.iter().map(|m| m.solution.clone()).collect()
    }

    /// Sorts by (cost, makespan, descending productivity, chromosome).
    pub fn sort_canonical(&mut self) {
        self.members.sort_by(|a, b| {
            let (x, y) = (&a.solution.objectives, &b.solution.objectives);
            x.npv_cost
                .total_cmp(&y.npv_cost)
                .then(x.makespan.cmp(&y.makespan))
                .then(y.productivity.total_cmp(&x.productivity))
                .then_with(|| a.solution.chromosome.cmp(&b.solution.chromosome))
        });
    }

    pub fn contains_point(&self, v: &ObjectiveVector) -> bool {
        self.members.iter().any(|m| same_point(&m.solution.objectives, v))
    }
}

/// Rank-0 members of `pop` with duplicate objective vectors collapsed onto
/// their first occurrence.
pub fn pareto_filter(pop: &[Solution]) -> Front {
    let objs: Vec<ObjectiveVector> = pop.iter().map(|s| s.objectives).collect();
    let ranks = sort_unchecked(&objs);
    let mut members: Vec<FrontMember> = Vec::new();
    for (i, s) in pop.iter().enumerate() {
        if ranks[i] != 0 || has_nan(&s.objectives) {
            continue;
        }
        match members.iter_mut().find(|m| same_point(&m.solution.objectives, &s.objectives)) {
            Some(m) => m.contributors.push(i),
            None => members.push(FrontMember { solution: s.clone(), contributors: vec![i] }),
        }
    }
    Front { members }
}

/// Incrementally maintained nondominated set.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    members: Vec<Solution>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `s` unless it is dominated by or equal to a member; evicts the
    /// members it dominates. Returns whether it was inserted.
    pub fn insert(&mut self, s: Solution) -> bool {
        if has_nan(&s.objectives) {
            return false;
        }
        for m in &self.members {
            if same_point(&m.objectives, &s.objectives) || dominates_unchecked(&m.objectives, &s.objectives) {
                return false;
            }
        }
        self.members.retain(|m| !dominates_unchecked(&s.objectives, &m.objectives));
        self.members.push(s);
        true
    }

    pub fn extend(&mut self, other: ParetoArchive) {
        for s in other.members {
            self.insert(s);
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Solution] {
        &self.members
    }

    pub fn into_front(self) -> Front {
        Front::from_solutions(self.members)
    }
}
