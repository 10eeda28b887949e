//! Chromosome decoding, payments, objectives and constraint checks.
//!
//! A [`Chromosome`] is decoded into an earliest-start [`DecodedSchedule`];
//! payment milestones follow the deadline-fraction rule. Resource use is
//! checked in aggregate, so start times do not depend on the order string.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::instance::ProjectInstance;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("instance has no real activities")]
    NoRealActivities,
    #[error("net present cost is zero; productivity undefined")]
    DivisionByZero,
}

/// Three integer strings: activity order, mode per activity, realized
/// duration per activity. Indices are 0-based internally; the textual form
/// uses 1-based activity ids and mode numbers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chromosome {
    pub order: Vec<usize>,
    pub mode: Vec<usize>,
    pub duration: Vec<u32>,
}

impl Chromosome {
    /// First mode, normal durations, smallest-index topological order.
    pub fn baseline(inst: &ProjectInstance) -> Option<Self> {
        let order = inst.topological_order()?;
        Some(Self {
            order,
            mode: vec![0; inst.len()],
            duration: inst.activities.iter().map(|a| a.modes[0].normal_duration).collect(),
        })
    }

    /// Checks the type invariants against `inst`.
    pub fn check(&self, inst: &ProjectInstance) -> Result<(), EvalError> {
        let n = inst.len();
        if self.order.len() != n || self.mode.len() != n || self.duration.len() != n {
            return Err(EvalError::Encoding(format!(
                "string lengths ({}, {}, {}) differ from {n} activities",
                self.order.len(),
                self.mode.len(),
                self.duration.len()
            )));
        }
        let mut position = vec![usize::MAX; n];
        for (pos, &i) in self.order.iter().enumerate() {
            if i >= n || position[i] != usize::MAX {
                return Err(EvalError::Encoding("order is not a permutation".into()));
            }
            position[i] = pos;
        }
        for (i, a) in inst.activities.iter().enumerate() {
            for &s in &a.successors {
                if position[s - 1] < position[i] {
                    return Err(EvalError::Encoding(format!(
                        "order places activity {s} before its predecessor {}",
                        i + 1
                    )));
                }
            }
            let m = a.modes.get(self.mode[i]).ok_or_else(|| {
                EvalError::Encoding(format!("activity {} has no mode {}", i + 1, self.mode[i] + 1))
            })?;
            let d = self.duration[i];
            if d < m.crash_duration || d > m.normal_duration {
                return Err(EvalError::Encoding(format!(
                    "activity {} duration {d} outside [{}, {}]",
                    i + 1,
                    m.crash_duration,
                    m.normal_duration
                )));
            }
        }
        Ok(())
    }
}

fn join<T: fmt::Display>(xs: impl Iterator<Item = T>) -> String {
    xs.map(|x| x.to_string()).collect::<Vec<_>>().join(":")
}

impl fmt::Display for Chromosome {
    /// `order,mode,duration` with each string colon-joined, ids and modes 1-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{}",
            join(self.order.iter().map(|i| i + 1)),
            join(self.mode.iter().map(|m| m + 1)),
            join(self.duration.iter())
        )
    }
}

impl FromStr for Chromosome {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(EvalError::Encoding(format!(
                "expected order,mode,duration; got {} fields",
                parts.len()
            )));
        }
        fn ints(field: &str) -> Result<Vec<u64>, EvalError> {
            field
                .split(':')
                .map(|t| {
                    t.trim().parse::<u64>().map_err(|_| EvalError::Encoding(format!("bad integer {t:?}")))
                })
                .collect()
        }
        let one_based = |v: Vec<u64>| -> Result<Vec<usize>, EvalError> {
            v.into_iter()
                .map(|x| {
                    x.checked_sub(1)
                        .map(|x| x as usize)
                        .ok_or_else(|| EvalError::Encoding("ids and modes are 1-based".into()))
                })
                .collect()
        };
        Ok(Self {
            order: one_based(ints(parts[0])?)?,
            mode: one_based(ints(parts[1])?)?,
            duration: ints(parts[2])?.into_iter().map(|d| d as u32).collect(),
        })
    }
}

/// Earliest-start timing of every activity, 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodedSchedule {
    pub start: Vec<u32>,
    pub finish: Vec<u32>,
    pub makespan: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentEvent {
    /// 1-based payment number.
    pub index: u32,
    /// 1-based id of the milestone activity.
    pub activity: usize,
    pub time: u32,
    pub amount: f64,
    /// No activity finished at or after the milestone threshold; the event
    /// was moved to the dummy end.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentPlan {
    pub prepayment: f64,
    pub events: Vec<PaymentEvent>,
}

impl PaymentPlan {
    pub fn total(&self) -> f64 {
        self.prepayment + self.events.iter().map(|e| e.amount).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub npv_cost: f64,
    pub makespan: u32,
    pub productivity: f64,
}

impl ObjectiveVector {
    pub fn new(npv_cost: f64, makespan: u32, productivity: f64) -> Self {
        Self { npv_cost, makespan, productivity }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.npv_cost, self.makespan as f64, self.productivity]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub resource_ok: bool,
    pub time_ok: bool,
    pub budget_ok: bool,
    pub valid_number: u8,
}

impl FeasibilityReport {
    pub fn new(resource_ok: bool, time_ok: bool, budget_ok: bool) -> Self {
        Self {
            resource_ok,
            time_ok,
            budget_ok,
            valid_number: resource_ok as u8 + time_ok as u8 + budget_ok as u8,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.valid_number == 3
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Discount milestone payments at the start of the milestone activity
    /// rather than at its completion in the budget check.
    pub literal_eq15: bool,
}

/// Full evaluation output of one chromosome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inspection {
    pub schedule: DecodedSchedule,
    pub payments: PaymentPlan,
    pub q_min: f64,
    pub q_avg: f64,
    pub objectives: ObjectiveVector,
    pub feasibility: FeasibilityReport,
    pub discounted_inflow: f64,
}

/// Evaluation context for one instance, caching the precedence structure.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    inst: &'a ProjectInstance,
    preds: Vec<Vec<usize>>,
    options: EvalOptions,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a ProjectInstance) -> Self {
        Self::with_options(inst, EvalOptions::default())
    }

    pub fn with_options(inst: &'a ProjectInstance, options: EvalOptions) -> Self {
        Self { inst, preds: inst.predecessor_indices(), options }
    }

    pub fn instance(&self) -> &'a ProjectInstance {
        self.inst
    }

    pub fn options(&self) -> EvalOptions {
        self.options
    }

    pub fn decode(&self, chrom: &Chromosome) -> Result<DecodedSchedule, EvalError> {
        chrom.check(self.inst)?;
        let n = self.inst.len();
        let mut start = vec![0u32; n];
        let mut finish = vec![0u32; n];
        for &i in &chrom.order {
            let e = self.preds[i].iter().map(|&p| finish[p]).max().unwrap_or(0);
            start[i] = e;
            finish[i] = e + chrom.duration[i];
        }
        Ok(DecodedSchedule { makespan: finish[n - 1], start, finish })
    }

    pub fn evaluate(&self, chrom: &Chromosome) -> Result<(ObjectiveVector, FeasibilityReport), EvalError> {
        let sched = self.decode(chrom)?;
        let plan = compute_payments(self.inst, &sched);
        let npv = npv_cost(self.inst, chrom, &sched);
        let prod = productivity_from(self.inst, chrom, npv)?;
        let feas = self.feasibility_with(chrom, &sched, &plan, npv);
        Ok((ObjectiveVector::new(npv, sched.makespan, prod), feas))
    }

    pub fn inspect(&self, chrom: &Chromosome) -> Result<Inspection, EvalError> {
        let sched = self.decode(chrom)?;
        let plan = compute_payments(self.inst, &sched);
        let npv = npv_cost(self.inst, chrom, &sched);
        let (q_min, q_avg) = quality_stats(self.inst, chrom)?;
        let prod = productivity_from(self.inst, chrom, npv)?;
        let feasibility = self.feasibility_with(chrom, &sched, &plan, npv);
        let inflow = discounted_inflow(self.inst, &sched, &plan, self.options.literal_eq15);
        Ok(Inspection {
            objectives: ObjectiveVector::new(npv, sched.makespan, prod),
            schedule: sched,
            payments: plan,
            q_min,
            q_avg,
            feasibility,
            discounted_inflow: inflow,
        })
    }

    pub fn check_feasibility(
        &self,
        chrom: &Chromosome,
        sched: &DecodedSchedule,
        plan: &PaymentPlan,
    ) -> FeasibilityReport {
        let npv = npv_cost(self.inst, chrom, sched);
        self.feasibility_with(chrom, sched, plan, npv)
    }

    fn feasibility_with(
        &self,
        chrom: &Chromosome,
        sched: &DecodedSchedule,
        plan: &PaymentPlan,
        npv: f64,
    ) -> FeasibilityReport {
        let inst = self.inst;
        let resource_ok = inst.resource_capacity.iter().all(|(r, &cap)| {
            let used: u64 =
                inst.activities.iter().zip(&chrom.mode).map(|(a, &m)| a.modes[m].demand(r) as u64).sum();
            used <= cap as u64
        });

        let bounds_ok = inst.activities.iter().enumerate().all(|(i, a)| {
            let m = &a.modes[chrom.mode[i]];
            (m.crash_duration..=m.normal_duration).contains(&chrom.duration[i])
        });
        let precedence_ok = self
            .preds
            .iter()
            .enumerate()
            .all(|(h, ps)| ps.iter().all(|&p| sched.finish[p] <= sched.start[h]));
        let time_ok = bounds_ok && sched.makespan <= inst.deadline && precedence_ok;

        let available =
            inst.initial_capital + discounted_inflow(inst, sched, plan, self.options.literal_eq15);
        let budget_ok = npv <= available + 1e-9 * available.abs().max(1.0);

        FeasibilityReport::new(resource_ok, time_ok, budget_ok)
    }
}

/// Earliest-start decoding under default options.
pub fn decode_schedule(inst: &ProjectInstance, chrom: &Chromosome) -> Result<DecodedSchedule, EvalError> {
    Evaluator::new(inst).decode(chrom)
}

fn earned_value_by(inst: &ProjectInstance, sched: &DecodedSchedule, t: u32) -> f64 {
    inst.activities.iter().zip(&sched.finish).filter(|(_, &f)| f <= t).map(|(a, _)| a.earned_value).sum()
}

/// Milestone payments. Milestone `j < J` is the activity with the smallest
/// finish time at or after `j * D / J` (ties by smallest id); the last payment
/// settles the remaining contract price at the project end.
pub fn compute_payments(inst: &ProjectInstance, sched: &DecodedSchedule) -> PaymentPlan {
    let j_count = inst.payment_count.max(1);
    let prepayment = inst.prepay_ratio * inst.price;
    let rate = inst.compensation_ratio - inst.prepay_ratio;
    let end = inst.end();

    let mut events = Vec::with_capacity(j_count as usize);
    let mut prev_ev = 0.0;
    let mut paid = 0.0;
    for j in 1..j_count {
        let threshold = j as f64 * inst.deadline as f64 / j_count as f64;
        let hit = sched
            .finish
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as f64 >= threshold)
            .min_by_key(|(i, &f)| (f, *i));
        let (activity, time, fallback) = match hit {
            Some((i, &f)) => (i, f, false),
            None => (end, sched.makespan, true),
        };
        let ev = earned_value_by(inst, sched, time);
        let amount = rate * (ev - prev_ev);
        prev_ev = ev;
        paid += amount;
        events.push(PaymentEvent { index: j, activity: activity + 1, time, amount, fallback });
    }
    events.push(PaymentEvent {
        index: j_count,
        activity: end + 1,
        time: sched.makespan,
        amount: inst.price - (prepayment + paid),
        fallback: false,
    });
    PaymentPlan { prepayment, events }
}

/// Net present value of direct and indirect costs.
pub fn npv_cost(inst: &ProjectInstance, chrom: &Chromosome, sched: &DecodedSchedule) -> f64 {
    let base = 1.0 + inst.interest_rate;
    let direct: f64 = inst
        .activities
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_dummy)
        .map(|(i, a)| {
            let m = &a.modes[chrom.mode[i]];
            let crashed = (m.normal_duration - chrom.duration[i]) as f64;
            (m.normal_cost + m.cost_slope * crashed) / base.powi(sched.finish[i] as i32)
        })
        .sum();
    let end = inst.end();
    let span = (sched.start[end] - sched.start[0]) as f64;
    direct + inst.overhead * span / base.powi(sched.start[end] as i32)
}

/// Prepayment plus milestone payments discounted to time zero.
///
/// Payments are discounted at the milestone's completion time, or at its
/// start when `literal_start_exponent` is set.
pub fn discounted_inflow(
    inst: &ProjectInstance,
    sched: &DecodedSchedule,
    plan: &PaymentPlan,
    literal_start_exponent: bool,
) -> f64 {
    let base = 1.0 + inst.interest_rate;
    plan.prepayment
        + plan
            .events
            .iter()
            .map(|e| {
                let t = if literal_start_exponent { sched.start[e.activity - 1] } else { e.time };
                e.amount / base.powi(t as i32)
            })
            .sum::<f64>()
}

/// Minimum and mean quality of the selected modes over real activities.
pub fn quality_stats(inst: &ProjectInstance, chrom: &Chromosome) -> Result<(f64, f64), EvalError> {
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for (i, a) in inst.activities.iter().enumerate() {
        if a.is_dummy {
            continue;
        }
        let q = a.modes[chrom.mode[i]].quality;
        count += 1;
        sum += q;
        min = min.min(q);
    }
    if count == 0 {
        return Err(EvalError::NoRealActivities);
    }
    Ok((min, sum / count as f64))
}

fn productivity_from(inst: &ProjectInstance, chrom: &Chromosome, npv: f64) -> Result<f64, EvalError> {
    if npv == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let (q_min, q_avg) = quality_stats(inst, chrom)?;
    let alpha = inst.quality_blend;
    Ok((alpha * q_min + (1.0 - alpha) * q_avg) / npv)
}

/// Blended quality divided by the net present cost.
pub fn productivity(
    inst: &ProjectInstance,
    chrom: &Chromosome,
    sched: &DecodedSchedule,
) -> Result<f64, EvalError> {
    productivity_from(inst, chrom, npv_cost(inst, chrom, sched))
}

pub fn check_feasibility(
    inst: &ProjectInstance,
    chrom: &Chromosome,
    sched: &DecodedSchedule,
    plan: &PaymentPlan,
) -> FeasibilityReport {
    Evaluator::new(inst).check_feasibility(chrom, sched, plan)
}

pub fn evaluate(
    inst: &ProjectInstance,
    chrom: &Chromosome,
) -> Result<(ObjectiveVector, FeasibilityReport), EvalError> {
    Evaluator::new(inst).evaluate(chrom)
}
