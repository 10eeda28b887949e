//! Multi-objective genetic algorithm with hill-climbing improvement, elitism
//! and duplicate control.
//!
//! Each generation ranks the population, breeds offspring by tournament
//! selection and crossover, mutates a fraction of them, repairs or replaces
//! infeasible and duplicate offspring, hill-climbs a sample of the new
//! population and finally reinserts the previous generation's elites. Every
//! feasible evaluation feeds an external Pareto archive.
//!
//! Randomness is pre-split: generation `g` draws from its own ChaCha stream,
//! and every parallel work item receives a seed drawn sequentially from that
//! stream, so results do not depend on the number of worker threads.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::operators::{
    crossover, evaluate_with_repair, init_population, mutate, sample_feasible, tournament_select, SolverError,
};
use crate::pareto::{sort_unchecked, ParetoArchive, Solution};
use crate::report::{FrontReport, FrontSource};
use crate::schedule::{EvalError, Evaluator, ObjectiveVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MogaParams {
    pub pop_size: usize,
    pub iterations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub hill_climb_rate: f64,
    pub elitism_rate: f64,
    pub seed: u64,
    /// Initial-population draw budget per member.
    pub init_attempts: u64,
    /// Draw budget per initial or replacement slot before a feasible duplicate
    /// is accepted.
    pub replacement_attempts: u64,
    /// Duration resamples tried on an infeasible offspring before discarding it.
    pub repair_attempts: usize,
    /// Stop at the first generation boundary at or past this many evaluations.
    pub max_evaluations: Option<u64>,
    /// Report the final population's nondominated set instead of the archive.
    pub final_population_only: bool,
}

impl Default for MogaParams {
    /// Tuned levels: elitism 0.05, hill-climbing 0.8, mutation 0.6,
    /// crossover 0.8, 2000 iterations, population 100.
    fn default() -> Self {
        Self {
            pop_size: 100,
            iterations: 2000,
            crossover_rate: 0.8,
            mutation_rate: 0.6,
            hill_climb_rate: 0.8,
            elitism_rate: 0.05,
            seed: 0,
            init_attempts: 10_000,
            replacement_attempts: 50,
            repair_attempts: 20,
            max_evaluations: None,
            final_population_only: false,
        }
    }
}

impl MogaParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.pop_size < 2 {
            return Err(SolverError::InvalidParams("pop_size must be at least 2".into()));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("hill_climb_rate", self.hill_climb_rate),
            ("elitism_rate", self.elitism_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(SolverError::InvalidParams(format!("{name} = {r} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

pub(crate) fn fraction_count(rate: f64, pop: usize) -> usize {
    ((rate * pop as f64).ceil() as usize).min(pop)
}

/// Result of one hill-climbing pass.
#[derive(Debug, Clone)]
pub struct HillClimbOutcome {
    pub solution: Solution,
    pub improved: bool,
    /// Feasible variants evaluated on the way.
    pub explored: Vec<Solution>,
    pub evaluations: u64,
}

/// Scans, activity by activity in order-string sequence, every alternative
/// (mode, duration) assignment of that activity. At the first activity where
/// some feasible variant dominates `p`, returns a uniformly chosen variant of
/// rank 0 among `{p} ∪ variants`; otherwise returns `p` unchanged.
pub fn hill_climb<R: Rng + ?Sized>(
    ev: &Evaluator<'_>,
    p: &Solution,
    rng: &mut R,
) -> Result<HillClimbOutcome, EvalError> {
    let inst = ev.instance();
    let mut explored = Vec::new();
    let mut evaluations = 0;
    for &m in &p.chromosome.order {
        let act = inst.activity(m);
        if act.is_dummy {
            continue;
        }
        let mut variants: Vec<Solution> = Vec::new();
        for (mode_idx, mode) in act.modes.iter().enumerate() {
            for t in mode.crash_duration..=mode.normal_duration {
                if mode_idx == p.chromosome.mode[m] && t == p.chromosome.duration[m] {
                    continue;
                }
                let mut c = p.chromosome.clone();
                c.mode[m] = mode_idx;
                c.duration[m] = t;
                let (obj, feas) = ev.evaluate(&c)?;
                evaluations += 1;
                if feas.is_feasible() {
                    variants.push(Solution::new(obj, c));
                }
            }
        }
        if variants.is_empty() {
            continue;
        }
        let mut objs: Vec<ObjectiveVector> = Vec::with_capacity(variants.len() + 1);
        objs.push(p.objectives);
        objs.extend(variants.iter().map(|v| v.objectives));
        let ranks = sort_unchecked(&objs);
        explored.extend(variants.iter().cloned());
        if ranks[0] > 0 {
            let best: Vec<usize> = (1..ranks.len()).filter(|&k| ranks[k] == 0).collect();
            let pick = *best.choose(rng).expect("a dominator of p has rank 0");
            return Ok(HillClimbOutcome {
                solution: variants[pick - 1].clone(),
                improved: true,
                explored,
                evaluations,
            });
        }
    }
    Ok(HillClimbOutcome { solution: p.clone(), improved: false, explored, evaluations })
}

/// Per-generation bookkeeping, exposed for invariant checks. The three
/// counts describe where the members of the new population came from and sum
/// to the population size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub offspring_kept: usize,
    pub replacements: usize,
    pub elites_inserted: usize,
    pub hill_climb_improvements: usize,
    pub evaluations: u64,
}

pub(crate) fn generation_rng(seed: u64, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation as u64 + 1);
    rng
}

/// Shared state for the population-based solvers.
pub(crate) struct Run<'e, 'a> {
    pub ev: &'e Evaluator<'a>,
    pub archive: ParetoArchive,
    pub evaluations: u64,
}

impl<'e, 'a> Run<'e, 'a> {
    pub fn new(ev: &'e Evaluator<'a>) -> Self {
        Self { ev, archive: ParetoArchive::new(), evaluations: 0 }
    }

    pub fn record(&mut self, feasible: impl IntoIterator<Item = Solution>) {
        for s in feasible {
            self.archive.insert(s);
        }
    }

    /// Evaluates (and repairs) children in parallel with pre-drawn seeds.
    pub fn evaluate_children(
        &mut self,
        children: Vec<crate::schedule::Chromosome>,
        repair_attempts: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<Solution>>, EvalError> {
        let seeds: Vec<u64> = children.iter().map(|_| rng.gen()).collect();
        let ev = self.ev;
        let results: Vec<Result<(Option<Solution>, u64), EvalError>> = children
            .into_par_iter()
            .zip(seeds)
            .map(|(c, seed)| {
                evaluate_with_repair(ev, c, repair_attempts, &mut ChaCha8Rng::seed_from_u64(seed))
            })
            .collect();
        let mut out = Vec::with_capacity(results.len());
        for r in results {
            let (s, n) = r?;
            self.evaluations += n;
            if let Some(s) = &s {
                self.archive.insert(s.clone());
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Fills `pop` up to `target` with fresh random feasible members, preferring
    /// chromosomes not already present.
    pub fn fill_random(
        &mut self,
        pop: &mut Vec<Solution>,
        seen: &mut HashSet<crate::schedule::Chromosome>,
        target: usize,
        attempts: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize, SolverError> {
        let mut added = 0;
        while pop.len() < target {
            let s = sample_feasible(self.ev, 1, seen, attempts, rng)?;
            self.evaluations += s.evaluations;
            let fallback = s.feasible_seen.last().cloned();
            self.record(s.feasible_seen);
            let pick = match s.accepted.into_iter().next() {
                Some(x) => x,
                None => match fallback {
                    Some(dup) => dup,
                    None => {
                        return Err(SolverError::InitTimeout {
                            requested: 1,
                            found: 0,
                            attempts: s.evaluations,
                            failures: s.failures,
                        })
                    }
                },
            };
            seen.insert(pick.chromosome.clone());
            pop.push(pick);
            added += 1;
        }
        Ok(added)
    }

    pub fn budget_exhausted(&self, max: Option<u64>) -> bool {
        max.is_some_and(|m| self.evaluations >= m)
    }
}

pub(crate) fn objectives(pop: &[Solution]) -> Vec<ObjectiveVector> {
    pop.iter().map(|s| s.objectives).collect()
}

/// Runs the genetic algorithm and returns the archive (or final population
/// front) with run metadata.
pub fn run_moga(ev: &Evaluator<'_>, params: &MogaParams) -> Result<FrontReport, SolverError> {
    run_moga_traced(ev, params, |_, _| {})
}

/// As [`run_moga`], calling `observe` after every generation with the
/// generation's bookkeeping and the current population.
pub fn run_moga_traced(
    ev: &Evaluator<'_>,
    params: &MogaParams,
    mut observe: impl FnMut(&GenerationStats, &[Solution]),
) -> Result<FrontReport, SolverError> {
    params.validate()?;
    let started = Instant::now();
    let pop_size = params.pop_size;
    let mut run = Run::new(ev);

    let mut rng = generation_rng(params.seed, 0);
    rng.set_stream(0);
    let init = init_population(ev, pop_size, params.init_attempts, params.replacement_attempts, &mut rng)?;
    run.evaluations += init.evaluations;
    run.record(init.feasible_seen);
    let mut pop = init.accepted;

    let n_offspring = fraction_count(params.crossover_rate, pop_size);
    let n_elite = fraction_count(params.elitism_rate, pop_size);
    let n_climb = fraction_count(params.hill_climb_rate, pop_size);
    let mut generations = 0u64;

    for g in 0..params.iterations {
        if run.budget_exhausted(params.max_evaluations) {
            break;
        }
        generations += 1;
        let mut rng = generation_rng(params.seed, g);
        let ranks = sort_unchecked(&objectives(&pop));

        // elites of the previous generation, by rank with random tie-break
        let mut keyed: Vec<(usize, u64, usize)> = (0..pop.len()).map(|i| (ranks[i], rng.gen(), i)).collect();
        keyed.sort_unstable();
        let elites: Vec<Solution> = keyed[..n_elite].iter().map(|k| pop[k.2].clone()).collect();

        let mut children = Vec::with_capacity(n_offspring);
        while children.len() < n_offspring {
            let a = tournament_select(&ranks, &mut rng)?;
            let b = tournament_select(&ranks, &mut rng)?;
            let (c1, c2) = crossover(&pop[a].chromosome, &pop[b].chromosome);
            children.push(c1);
            if children.len() < n_offspring {
                children.push(c2);
            }
        }
        for c in children.iter_mut() {
            if rng.gen_bool(params.mutation_rate) {
                *c = mutate(c, ev, &mut rng);
            }
        }

        let evaluated = run.evaluate_children(children, params.repair_attempts, &mut rng)?;
        let mut next: Vec<Solution> = Vec::with_capacity(pop_size);
        let mut seen: HashSet<crate::schedule::Chromosome> = HashSet::new();
        for s in evaluated.into_iter().flatten() {
            if seen.insert(s.chromosome.clone()) {
                next.push(s);
            }
        }
        let n_children = next.len();
        run.fill_random(&mut next, &mut seen, pop_size, params.replacement_attempts, &mut rng)?;

        // hill-climbing on a uniform sample of the new population
        let mut sample: Vec<usize> = (0..next.len()).choose_multiple(&mut rng, n_climb);
        sample.sort_unstable();
        let seeds: Vec<u64> = sample.iter().map(|_| rng.gen()).collect();
        let outcomes: Vec<Result<HillClimbOutcome, EvalError>> = sample
            .par_iter()
            .zip(seeds)
            .map(|(&i, seed)| hill_climb(ev, &next[i], &mut ChaCha8Rng::seed_from_u64(seed)))
            .collect();
        let mut improvements = 0;
        for (&i, out) in sample.iter().zip(outcomes) {
            let out = out?;
            run.evaluations += out.evaluations;
            run.record(out.explored);
            if out.improved && !seen.contains(&out.solution.chromosome) {
                seen.remove(&next[i].chromosome);
                seen.insert(out.solution.chromosome.clone());
                next[i] = out.solution;
                improvements += 1;
            }
        }

        // elitism: each elite missing from the new population evicts its
        // worst-ranked non-elite member
        let mut from_elite = vec![false; next.len()];
        let new_ranks = sort_unchecked(&objectives(&next));
        let elite_set: HashSet<&crate::schedule::Chromosome> = elites.iter().map(|e| &e.chromosome).collect();
        let mut eviction: Vec<(usize, u64, usize)> = (0..next.len())
            .map(|i| (new_ranks[i], rng.gen(), i))
            .filter(|k| !elite_set.contains(&next[k.2].chromosome))
            .collect();
        eviction.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut evict: Vec<usize> = eviction.into_iter().map(|k| k.2).collect();
        evict.reverse();
        for e in elites {
            if seen.contains(&e.chromosome) {
                continue;
            }
            let Some(slot) = evict.pop() else { break };
            seen.remove(&next[slot].chromosome);
            seen.insert(e.chromosome.clone());
            next[slot] = e;
            from_elite[slot] = true;
        }
        let elites_inserted = from_elite.iter().filter(|&&x| x).count();
        let offspring_kept = from_elite[..n_children].iter().filter(|&&x| !x).count();
        let replacements = next.len() - elites_inserted - offspring_kept;

        pop = next;
        let stats = GenerationStats {
            generation: g,
            offspring_kept,
            replacements,
            elites_inserted,
            hill_climb_improvements: improvements,
            evaluations: run.evaluations,
        };
        observe(&stats, &pop);
    }

    let source =
        if params.final_population_only { FrontSource::FinalPopulation } else { FrontSource::Archive };
    let mut front = match source {
        FrontSource::FinalPopulation => crate::pareto::pareto_filter(&pop),
        _ => run.archive.into_front(),
    };
    front.sort_canonical();
    Ok(FrontReport {
        algorithm: "moga".into(),
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
