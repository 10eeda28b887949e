//! NSGA-II baseline on the same encoding, operators and feasibility control
//! as [`crate::moga`].
//!
//! A (μ+λ) loop: μ parents breed λ = μ offspring via binary tournament on
//! (rank, crowding), the combined pool is sorted into fronts, and survivors
//! are taken by rank, then by descending crowding distance. There is no
//! hill-climbing and no separate elite fraction.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::moga::{generation_rng, objectives, Run};
use crate::operators::{crossover, init_population, mutate, SolverError};
use crate::pareto::{pareto_filter, sort_unchecked, Solution};
use crate::report::{FrontReport, FrontSource};
use crate::schedule::{Chromosome, Evaluator, ObjectiveVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Nsga2Params {
    pub pop_size: usize,
    pub iterations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub seed: u64,
    pub init_attempts: u64,
    pub replacement_attempts: u64,
    pub repair_attempts: usize,
    pub max_evaluations: Option<u64>,
    /// Report the external archive instead of the final rank-0 set.
    pub archive_output: bool,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Self {
            pop_size: 100,
            iterations: 2000,
            crossover_rate: 0.8,
            mutation_rate: 0.6,
            seed: 0,
            init_attempts: 10_000,
            replacement_attempts: 50,
            repair_attempts: 20,
            max_evaluations: None,
            archive_output: false,
        }
    }
}

impl Nsga2Params {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.pop_size < 2 {
            return Err(SolverError::InvalidParams("pop_size must be at least 2".into()));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(SolverError::InvalidParams(format!("{name} = {r} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Crowding distance of each member of one front.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    if n < 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    for k in 0..3 {
        let val = |i: usize| front[i].to_array()[k];
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        dist[idx[0]] = f64::INFINITY;
        dist[idx[n - 1]] = f64::INFINITY;
        let range = val(idx[n - 1]) - val(idx[0]);
        if range <= 0.0 {
            continue;
        }
        for w in idx.windows(3) {
            dist[w[1]] += (val(w[2]) - val(w[0])) / range;
        }
    }
    dist
}

/// Rank and crowding distance (computed within each rank) for a pool.
pub fn rank_and_crowd(pool: &[ObjectiveVector]) -> (Vec<usize>, Vec<f64>) {
    let ranks = sort_unchecked(pool);
    let mut crowd = vec![0.0; pool.len()];
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..pool.len()).filter(|&i| ranks[i] == r).collect();
        let objs: Vec<ObjectiveVector> = members.iter().map(|&i| pool[i]).collect();
        for (&i, d) in members.iter().zip(crowding_distance(&objs)) {
            crowd[i] = d;
        }
    }
    (ranks, crowd)
}

fn better(a: usize, b: usize, ranks: &[usize], crowd: &[f64]) -> Ordering {
    ranks[a].cmp(&ranks[b]).then(crowd[b].total_cmp(&crowd[a])).then(a.cmp(&b))
}

/// Indices of the `keep` best members by (rank ascending, crowding
/// descending, index ascending).
pub fn environmental_selection(ranks: &[usize], crowd: &[f64], keep: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ranks.len()).collect();
    idx.sort_by(|&a, &b| better(a, b, ranks, crowd));
    idx.truncate(keep);
    idx
}

fn binary_tournament(ranks: &[usize], crowd: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let n = ranks.len();
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    match ranks[a].cmp(&ranks[b]).then(crowd[b].total_cmp(&crowd[a])) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

pub fn run_nsga2(ev: &Evaluator<'_>, params: &Nsga2Params) -> Result<FrontReport, SolverError> {
    run_nsga2_traced(ev, params, |_, _| {})
}

/// As [`run_nsga2`], calling `observe` with the generation index and the
/// survivors after each environmental selection.
pub fn run_nsga2_traced(
    ev: &Evaluator<'_>,
    params: &Nsga2Params,
    mut observe: impl FnMut(usize, &[Solution]),
) -> Result<FrontReport, SolverError> {
    params.validate()?;
    let started = Instant::now();
    let n = params.pop_size;
    let mut run = Run::new(ev);

    let mut rng = generation_rng(params.seed, 0);
    rng.set_stream(0);
    let init = init_population(ev, n, params.init_attempts, params.replacement_attempts, &mut rng)?;
    run.evaluations += init.evaluations;
    run.record(init.feasible_seen);
    let mut pop = init.accepted;
    let mut generations = 0u64;

    for g in 0..params.iterations {
        if run.budget_exhausted(params.max_evaluations) {
            break;
        }
        generations += 1;
        let mut rng = generation_rng(params.seed, g);
        let (ranks, crowd) = rank_and_crowd(&objectives(&pop));

        let mut children: Vec<Chromosome> = Vec::with_capacity(n);
        while children.len() < n {
            let a = binary_tournament(&ranks, &crowd, &mut rng);
            let b = binary_tournament(&ranks, &crowd, &mut rng);
            let (c1, c2) = if rng.gen_bool(params.crossover_rate) {
                crossover(&pop[a].chromosome, &pop[b].chromosome)
            } else {
                (pop[a].chromosome.clone(), pop[b].chromosome.clone())
            };
            children.push(c1);
            if children.len() < n {
                children.push(c2);
            }
        }
        for c in children.iter_mut() {
            if rng.gen_bool(params.mutation_rate) {
                *c = mutate(c, ev, &mut rng);
            }
        }

        let evaluated = run.evaluate_children(children, params.repair_attempts, &mut rng)?;
        let mut offspring = Vec::with_capacity(n);
        let mut seen: HashSet<Chromosome> = HashSet::new();
        for s in evaluated.into_iter().flatten() {
            if seen.insert(s.chromosome.clone()) {
                offspring.push(s);
            }
        }
        run.fill_random(&mut offspring, &mut seen, n, params.replacement_attempts, &mut rng)?;

        // parents first, so an offspring identical to a parent is the one dropped
        let mut pool: Vec<Solution> = Vec::with_capacity(2 * n);
        let mut dups: Vec<Solution> = Vec::new();
        let mut in_pool: HashSet<Chromosome> = HashSet::new();
        for s in pop.into_iter().chain(offspring) {
            if in_pool.insert(s.chromosome.clone()) {
                pool.push(s);
            } else {
                dups.push(s);
            }
        }
        let (ranks, crowd) = rank_and_crowd(&objectives(&pool));
        let keep = environmental_selection(&ranks, &crowd, n);
        let mut next: Vec<Solution> = keep.into_iter().map(|i| pool[i].clone()).collect();
        // only tiny search spaces run short of distinct members
        next.extend(dups.into_iter().take(n - next.len()));
        pop = next;
        observe(g, &pop);
    }

    let source = if params.archive_output { FrontSource::Archive } else { FrontSource::FinalPopulation };
    let mut front = match source {
        FrontSource::Archive => run.archive.into_front(),
        _ => pareto_filter(&pop),
    };
    front.sort_canonical();
    Ok(FrontReport {
        algorithm: "nsga2".into(),
        seed: params.seed,
        instance_hash: ev.instance().content_hash(),
        params: serde_json::to_value(params).expect("params serialize"),
        evaluations: run.evaluations,
        generations,
        wall_ms: started.elapsed().as_millis() as u64,
        source,
        front,
    })
}
