//! Encoding-level operators shared by both evolutionary solvers: random
//! sampling, selection, crossover, mutation and the feasibility controls.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::pareto::Solution;
use crate::schedule::{Chromosome, EvalError, Evaluator};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "could not find {requested} distinct feasible solutions in {attempts} draws \
         (found {found}; failing groups: resource {}, time {}, budget {})",
        failures[0], failures[1], failures[2]
    )]
    InitTimeout {
        requested: usize,
        found: usize,
        attempts: u64,
        /// Draws failing the resource, time and budget groups respectively.
        failures: [u64; 3],
    },
    #[error("population too small for tournament selection")]
    PopulationTooSmall,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Topological order drawn by releasing a uniformly chosen ready activity at
/// each step.
pub fn random_topological_order<R: Rng + ?Sized>(succ: &[Vec<usize>], rng: &mut R) -> Vec<usize> {
    let n = succ.len();
    let mut indeg = vec![0usize; n];
    for s in succ {
        for &h in s {
            indeg[h] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let k = rng.gen_range(0..ready.len());
        let i = ready.swap_remove(k);
        order.push(i);
        for &h in &succ[i] {
            indeg[h] -= 1;
            if indeg[h] == 0 {
                ready.push(h);
            }
        }
    }
    order
}

fn draw_mode_and_duration<R: Rng + ?Sized>(ev: &Evaluator<'_>, i: usize, rng: &mut R) -> (usize, u32) {
    let a = ev.instance().activity(i);
    let m = rng.gen_range(0..a.modes.len());
    let mode = &a.modes[m];
    (m, rng.gen_range(mode.crash_duration..=mode.normal_duration))
}

/// Uniform random mode per activity, uniform duration within the mode's
/// [crash, normal] interval, random topological order.
pub fn random_chromosome<R: Rng + ?Sized>(ev: &Evaluator<'_>, rng: &mut R) -> Chromosome {
    let inst = ev.instance();
    let order = random_topological_order(&inst.successor_indices(), rng);
    let n = inst.len();
    let mut mode = vec![0; n];
    let mut duration = vec![0; n];
    for i in 0..n {
        let (m, d) = draw_mode_and_duration(ev, i, rng);
        mode[i] = m;
        duration[i] = d;
    }
    Chromosome { order, mode, duration }
}

/// Redraws every duration within the chromosome's current modes.
pub fn resample_durations<R: Rng + ?Sized>(ev: &Evaluator<'_>, chrom: &mut Chromosome, rng: &mut R) {
    for (i, a) in ev.instance().activities.iter().enumerate() {
        let m = &a.modes[chrom.mode[i]];
        chrom.duration[i] = rng.gen_range(m.crash_duration..=m.normal_duration);
    }
}

/// Binary tournament on Pareto rank; equal ranks are settled by a fair coin.
pub fn tournament_select<R: Rng + ?Sized>(ranks: &[usize], rng: &mut R) -> Result<usize, SolverError> {
    if ranks.len() < 2 {
        return Err(SolverError::PopulationTooSmall);
    }
    let a = rng.gen_range(0..ranks.len());
    let mut b = rng.gen_range(0..ranks.len() - 1);
    if b >= a {
        b += 1;
    }
    Ok(match ranks[a].cmp(&ranks[b]) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        }
    })
}

/// Each child keeps its parent's order string and takes the other parent's
/// mode and duration strings as a pair.
pub fn crossover(p1: &Chromosome, p2: &Chromosome) -> (Chromosome, Chromosome) {
    let c1 = Chromosome { order: p1.order.clone(), mode: p2.mode.clone(), duration: p2.duration.clone() };
    let c2 = Chromosome { order: p2.order.clone(), mode: p1.mode.clone(), duration: p1.duration.clone() };
    (c1, c2)
}

/// Picks two distinct real activities in the order string, swaps them when the
/// result stays topological, and redraws both activities' modes and durations.
pub fn mutate<R: Rng + ?Sized>(chrom: &Chromosome, ev: &Evaluator<'_>, rng: &mut R) -> Chromosome {
    let inst = ev.instance();
    let real_positions: Vec<usize> =
        chrom.order.iter().enumerate().filter(|(_, &i)| !inst.activity(i).is_dummy).map(|(p, _)| p).collect();
    if real_positions.len() < 2 {
        return chrom.clone();
    }
    let picked: Vec<usize> = real_positions.choose_multiple(rng, 2).copied().collect();
    let (p, q) = (picked[0], picked[1]);
    let mut out = chrom.clone();
    out.order.swap(p, q);
    if !is_topological(&out.order, inst) {
        out.order.swap(p, q);
    }
    for pos in [p, q] {
        let i = out.order[pos];
        let (m, d) = draw_mode_and_duration(ev, i, rng);
        out.mode[i] = m;
        out.duration[i] = d;
    }
    out
}

pub(crate) fn is_topological(order: &[usize], inst: &crate::instance::ProjectInstance) -> bool {
    let mut position = vec![0usize; order.len()];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    inst.activities
        .iter()
        .enumerate()
        .all(|(i, a)| a.successors.iter().all(|&s| position[s - 1] > position[i]))
}

/// Outcome of a rejection-sampling run: accepted solutions plus every feasible
/// evaluation performed on the way.
#[derive(Debug, Default)]
pub struct Sampled {
    pub accepted: Vec<Solution>,
    pub feasible_seen: Vec<Solution>,
    pub evaluations: u64,
    pub failures: [u64; 3],
}

/// Draws random chromosomes until `count` distinct feasible ones not in
/// `exclude` are found or `max_draws` is exhausted.
pub fn sample_feasible<R: Rng + ?Sized>(
    ev: &Evaluator<'_>,
    count: usize,
    exclude: &HashSet<Chromosome>,
    max_draws: u64,
    rng: &mut R,
) -> Result<Sampled, EvalError> {
    let mut out = Sampled::default();
    let mut taken: HashSet<Chromosome> = HashSet::new();
    while out.accepted.len() < count && out.evaluations < max_draws {
        let c = random_chromosome(ev, rng);
        let (obj, feas) = ev.evaluate(&c)?;
        out.evaluations += 1;
        if !feas.is_feasible() {
            out.failures[0] += !feas.resource_ok as u64;
            out.failures[1] += !feas.time_ok as u64;
            out.failures[2] += !feas.budget_ok as u64;
            continue;
        }
        let s = Solution::new(obj, c);
        out.feasible_seen.push(s.clone());
        if !exclude.contains(&s.chromosome) && !taken.contains(&s.chromosome) {
            taken.insert(s.chromosome.clone());
            out.accepted.push(s);
        }
    }
    Ok(out)
}

/// Rejection-sampled initial population of fully feasible members. Members
/// are distinct unless a slot goes `stall_limit` draws without a new distinct
/// feasible chromosome while seeing feasible duplicates, in which case the
/// last duplicate fills it. This keeps populations larger than the feasible
/// space usable.
pub fn init_population<R: Rng + ?Sized>(
    ev: &Evaluator<'_>,
    pop_size: usize,
    attempts_per_member: u64,
    stall_limit: u64,
    rng: &mut R,
) -> Result<Sampled, SolverError> {
    let budget = attempts_per_member.saturating_mul(pop_size as u64);
    let mut out = Sampled::default();
    let mut taken: HashSet<Chromosome> = HashSet::new();
    while out.accepted.len() < pop_size {
        let mut duplicate = None;
        loop {
            let remaining = budget.saturating_sub(out.evaluations);
            if remaining == 0 {
                return Err(SolverError::InitTimeout {
                    requested: pop_size,
                    found: out.accepted.len(),
                    attempts: out.evaluations,
                    failures: out.failures,
                });
            }
            let s = sample_feasible(ev, 1, &taken, stall_limit.max(1).min(remaining), rng)?;
            out.evaluations += s.evaluations;
            for k in 0..3 {
                out.failures[k] += s.failures[k];
            }
            duplicate = s.feasible_seen.last().cloned().or(duplicate);
            out.feasible_seen.extend(s.feasible_seen);
            if let Some(a) = s.accepted.into_iter().next() {
                taken.insert(a.chromosome.clone());
                out.accepted.push(a);
                break;
            }
            if let Some(d) = duplicate.take() {
                out.accepted.push(d);
                break;
            }
        }
    }
    Ok(out)
}

/// Evaluates a child, retrying with resampled durations while infeasible.
/// Returns the feasible child (if any), the feasible evaluations and the
/// evaluation count.
pub fn evaluate_with_repair<R: Rng + ?Sized>(
    ev: &Evaluator<'_>,
    mut chrom: Chromosome,
    attempts: usize,
    rng: &mut R,
) -> Result<(Option<Solution>, u64), EvalError> {
    let mut evals = 0;
    for attempt in 0..=attempts {
        if attempt > 0 {
            resample_durations(ev, &mut chrom, rng);
        }
        let (obj, feas) = ev.evaluate(&chrom)?;
        evals += 1;
        if feas.is_feasible() {
            return Ok((Some(Solution::new(obj, chrom)), evals));
        }
    }
    Ok((None, evals))
}
