//! Problem instances: activities, modes, precedence, resources and the
//! financial parameters of the contract.
//!
//! Instances are plain data. They are validated explicitly via
//! [`validate_instance`], persisted as strict JSON and can be synthesized with
//! [`generate_instance`].

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid instance: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("infeasible: earliest project finish {earliest} exceeds deadline {deadline}")]
    Infeasible { earliest: u32, deadline: u32 },
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// One execution mode of an activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityMode {
    pub normal_duration: u32,
    pub crash_duration: u32,
    pub normal_cost: f64,
    /// Extra cost per period of compression below the normal duration.
    pub cost_slope: f64,
    /// Quality score on a 0..=100 scale.
    pub quality: f64,
    pub demands: BTreeMap<String, u32>,
}

impl ActivityMode {
    pub fn dummy() -> Self {
        Self {
            normal_duration: 0,
            crash_duration: 0,
            normal_cost: 0.0,
            cost_slope: 0.0,
            quality: 100.0,
            demands: BTreeMap::new(),
        }
    }

    /// Number of admissible realized durations, `D - d + 1`.
    pub fn duration_choices(&self) -> u32 {
        self.normal_duration.saturating_sub(self.crash_duration) + 1
    }

    pub fn demand(&self, resource: &str) -> u32 {
        self.demands.get(resource).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Activity {
    /// 1-based activity id; must equal the position in the activity list.
    pub id: usize,
    pub successors: Vec<usize>,
    pub earned_value: f64,
    pub is_dummy: bool,
    pub modes: Vec<ActivityMode>,
}

impl Activity {
    pub fn min_crash_duration(&self) -> u32 {
        self.modes.iter().map(|m| m.crash_duration).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectInstance {
    pub schema_version: u32,
    /// Activity 1 is the dummy start, activity n the dummy end.
    pub activities: Vec<Activity>,
    pub resource_capacity: BTreeMap<String, u32>,
    /// Discount rate per period.
    pub interest_rate: f64,
    /// Indirect cost per period.
    pub overhead: f64,
    pub prepay_ratio: f64,
    pub compensation_ratio: f64,
    pub deadline: u32,
    pub price: f64,
    pub initial_capital: f64,
    pub quality_blend: f64,
    pub payment_count: u32,
}

impl ProjectInstance {
    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    /// Activity by 0-based index.
    pub fn activity(&self, idx: usize) -> &Activity {
        &self.activities[idx]
    }

    /// 0-based index of the dummy end activity.
    pub fn end(&self) -> usize {
        self.activities.len() - 1
    }

    /// Successor lists as 0-based indices. Out-of-range ids are skipped.
    pub fn successor_indices(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        self.activities
            .iter()
            .map(|a| a.successors.iter().filter(|&&s| s >= 1 && s <= n).map(|&s| s - 1).collect())
            .collect()
    }

    /// Predecessor lists as 0-based indices.
    pub fn predecessor_indices(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.len()];
        for (i, succ) in self.successor_indices().iter().enumerate() {
            for &h in succ {
                preds[h].push(i);
            }
        }
        preds
    }

    /// Kahn's algorithm, always releasing the smallest ready index first.
    /// Returns `None` when the precedence graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let succ = self.successor_indices();
        let mut indeg = vec![0usize; self.len()];
        for s in &succ {
            for &h in s {
                indeg[h] += 1;
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..self.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &h in &succ[i] {
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    ready.insert(h);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    pub fn real_activity_count(&self) -> usize {
        self.activities.iter().filter(|a| !a.is_dummy).count()
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A broken invariant, naming the offending field and the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub fn validate_instance(inst: &ProjectInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.len();

    if inst.schema_version != SCHEMA_VERSION {
        out.push(Violation::new("schema_version", format!("schema_version = {SCHEMA_VERSION}")));
    }
    if n < 2 {
        out.push(Violation::new("activities", "at least dummy start and end"));
        return out;
    }
    if !inst.activities[0].is_dummy {
        out.push(Violation::new("activities[1].is_dummy", "activity 1 is the dummy start"));
    }
    if !inst.activities[n - 1].is_dummy {
        out.push(Violation::new(format!("activities[{n}].is_dummy"), "activity n is the dummy end"));
    }

    let mut ids_ok = true;
    for (pos, a) in inst.activities.iter().enumerate() {
        let tag = format!("activities[{}]", pos + 1);
        if a.id != pos + 1 {
            out.push(Violation::new(format!("{tag}.id"), "ids are 1..n in order"));
            ids_ok = false;
        }
        if a.modes.is_empty() {
            out.push(Violation::new(format!("{tag}.modes"), "at least one mode"));
        }
        if !(a.earned_value.is_finite() && a.earned_value >= 0.0) {
            out.push(Violation::new(format!("{tag}.earned_value"), "V_i ≥ 0"));
        }
        for &s in &a.successors {
            if s == 0 || s > n {
                out.push(Violation::new(format!("{tag}.successors"), "valid successor id"));
                ids_ok = false;
            } else if s == pos + 1 {
                out.push(Violation::new(format!("{tag}.successors"), "acyclic"));
                ids_ok = false;
            }
        }
        if a.is_dummy {
            let single_zero = a.modes.len() == 1 && {
                let m = &a.modes[0];
                m.normal_duration == 0 && m.crash_duration == 0 && m.normal_cost == 0.0 && m.cost_slope == 0.0
            };
            if !single_zero || a.earned_value != 0.0 {
                out.push(Violation::new(
                    format!("{tag}.modes"),
                    "dummy has one mode with D=d=0, C=0, R=0, V=0",
                ));
            }
        }
        for (mi, m) in a.modes.iter().enumerate() {
            let mtag = format!("{tag}.modes[{}]", mi + 1);
            if m.crash_duration > m.normal_duration {
                out.push(Violation::new(format!("{mtag}.crash_duration"), "d_im ≤ D_im"));
            }
            if !(m.normal_cost.is_finite() && m.normal_cost >= 0.0) {
                out.push(Violation::new(format!("{mtag}.normal_cost"), "C_im ≥ 0"));
            }
            if !(m.cost_slope.is_finite() && m.cost_slope >= 0.0) {
                out.push(Violation::new(format!("{mtag}.cost_slope"), "R_im ≥ 0"));
            }
            if !(0.0..=100.0).contains(&m.quality) {
                out.push(Violation::new(format!("{mtag}.quality"), "0 ≤ q_im ≤ 100"));
            }
            for r in m.demands.keys() {
                if !inst.resource_capacity.contains_key(r) {
                    out.push(Violation::new(
                        format!("{mtag}.demands.{r}"),
                        "demand names a declared resource",
                    ));
                }
            }
        }
    }

    if ids_ok {
        if inst.topological_order().is_none() {
            out.push(Violation::new("activities.successors", "acyclic"));
        }
        let succ = inst.successor_indices();
        let from_start = reachable(&succ, 0);
        for (i, seen) in from_start.iter().enumerate() {
            if !seen {
                out.push(Violation::new(format!("activities[{}]", i + 1), "reachable from activity 1"));
            }
        }
        let preds = inst.predecessor_indices();
        let to_end = reachable(&preds, n - 1);
        for (i, seen) in to_end.iter().enumerate() {
            if !seen {
                out.push(Violation::new(format!("activities[{}]", i + 1), "activity n reachable"));
            }
        }
    }

    let ev_sum: f64 = inst.activities.iter().map(|a| a.earned_value).sum();
    if !(inst.price.is_finite() && inst.price > 0.0) {
        out.push(Violation::new("price", "U > 0"));
    } else if ev_sum > inst.price * (1.0 + 1e-12) {
        out.push(Violation::new("activities.earned_value", "Σ V_i ≤ U"));
    }
    if !(inst.interest_rate.is_finite() && inst.interest_rate >= 0.0) {
        out.push(Violation::new("interest_rate", "k_x ≥ 0"));
    }
    if !(inst.overhead.is_finite() && inst.overhead >= 0.0) {
        out.push(Violation::new("overhead", "H ≥ 0"));
    }
    if !(inst.prepay_ratio >= 0.0 && inst.prepay_ratio < 1.0) {
        out.push(Violation::new("prepay_ratio", "0 ≤ γ < 1"));
    }
    if !(inst.compensation_ratio > inst.prepay_ratio && inst.compensation_ratio <= 1.0) {
        out.push(Violation::new("compensation_ratio", "γ < θ ≤ 1"));
    }
    if !(inst.initial_capital.is_finite() && inst.initial_capital >= 0.0) {
        out.push(Violation::new("initial_capital", "ICA ≥ 0"));
    }
    if !(0.0..=1.0).contains(&inst.quality_blend) {
        out.push(Violation::new("quality_blend", "0 ≤ α ≤ 1"));
    }
    if inst.payment_count < 1 {
        out.push(Violation::new("payment_count", "J ≥ 1"));
    }
    out
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(i) = queue.pop_front() {
        for &h in &adj[i] {
            if !seen[h] {
                seen[h] = true;
                queue.push_back(h);
            }
        }
    }
    seen
}

/// Earliest and latest finish periods, indexed by 0-based activity index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimeWindows {
    pub earliest_finish: Vec<u32>,
    pub latest_finish: Vec<u32>,
}

/// CPM forward/backward pass using each activity's shortest crash duration.
pub fn compute_time_windows(inst: &ProjectInstance) -> Result<TimeWindows, InstanceError> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(InstanceError::Invalid(violations));
    }
    let order = inst.topological_order().expect("validated instance is acyclic");
    let succ = inst.successor_indices();
    let preds = inst.predecessor_indices();
    let dur: Vec<u32> = inst.activities.iter().map(|a| a.min_crash_duration()).collect();

    let n = inst.len();
    let mut ef = vec![0u32; n];
    for &i in &order {
        let start = preds[i].iter().map(|&p| ef[p]).max().unwrap_or(0);
        ef[i] = start + dur[i];
    }
    let earliest = ef[n - 1];
    if earliest > inst.deadline {
        return Err(InstanceError::Infeasible { earliest, deadline: inst.deadline });
    }
    let mut lf = vec![inst.deadline; n];
    for &i in order.iter().rev() {
        if let Some(v) = succ[i].iter().map(|&h| lf[h] - dur[h]).min() {
            lf[i] = v;
        }
    }
    Ok(TimeWindows { earliest_finish: ef, latest_finish: lf })
}

/// Knobs for [`generate_instance`] beyond the required size parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOptions {
    /// Maximum compression per mode, `D - d`.
    pub duration_span: u32,
    pub min_normal_duration: u32,
    pub max_normal_duration: u32,
    pub resources: usize,
    /// Fraction of the extra demand of faster modes that the capacity admits.
    pub resource_slack: f64,
    pub interest_rate: f64,
    pub overhead: f64,
    pub prepay_ratio: f64,
    pub compensation_ratio: f64,
    pub quality_blend: f64,
    pub payment_count: u32,
    /// Deadline as a multiple of the baseline makespan (≥ 1).
    pub deadline_factor: f64,
    /// Contract price as a multiple of the undiscounted baseline cost.
    pub price_markup: f64,
    /// Share of the price distributed as earned value over activities.
    pub earned_value_share: f64,
    /// Initial capital head-room above the baseline budget gap, relative to baseline NPV.
    pub capital_cushion: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            duration_span: 3,
            min_normal_duration: 3,
            max_normal_duration: 10,
            resources: 2,
            resource_slack: 0.5,
            interest_rate: 0.01,
            overhead: 10.0,
            prepay_ratio: 0.2,
            compensation_ratio: 0.8,
            quality_blend: 0.5,
            payment_count: 3,
            deadline_factor: 1.0,
            price_markup: 1.2,
            earned_value_share: 0.9,
            capital_cushion: 0.05,
        }
    }
}

/// Synthesizes a random instance whose baseline schedule (first mode, normal
/// durations, earliest start) satisfies every constraint group.
///
/// Modes are sorted by strictly decreasing normal duration; faster modes carry
/// strictly lower quality, higher cost and higher resource demand.
#[allow(clippy::needless_range_loop)]
pub fn generate_instance(
    seed: u64,
    n: usize,
    max_modes: usize,
    density: f64,
    opts: &GeneratorOptions,
) -> Result<ProjectInstance, InstanceError> {
    if n < 3 {
        return Err(InstanceError::BadParams(format!("n = {n} < 3")));
    }
    if max_modes < 1 {
        return Err(InstanceError::BadParams("max_modes < 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(InstanceError::BadParams(format!("density {density} not in (0, 1]")));
    }
    if opts.min_normal_duration < 1 || opts.max_normal_duration < opts.min_normal_duration {
        return Err(InstanceError::BadParams("bad normal duration range".into()));
    }
    let span_len = (opts.max_normal_duration - opts.min_normal_duration + 1) as usize;
    if span_len < max_modes {
        return Err(InstanceError::BadParams("normal duration range too narrow for distinct modes".into()));
    }
    if opts.deadline_factor < 1.0 || opts.resources == 0 {
        return Err(InstanceError::BadParams("deadline_factor < 1 or no resources".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resources: Vec<String> = (1..=opts.resources).map(|r| format!("r{r}")).collect();

    // precedence among real activities 2..n-1 (0-based 1..n-2)
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut has_pred = vec![false; n];
    for i in 1..n - 1 {
        for j in i + 1..n - 1 {
            if rng.gen_bool(density) {
                succ[i].push(j);
                has_pred[j] = true;
            }
        }
    }
    for i in 1..n - 1 {
        if !has_pred[i] {
            succ[0].push(i);
        }
        if succ[i].is_empty() {
            succ[i].push(n - 1);
        }
    }

    let mut activities = Vec::with_capacity(n);
    for i in 0..n {
        let successors: Vec<usize> = {
            let mut s: Vec<usize> = succ[i].iter().map(|&h| h + 1).collect();
            s.sort_unstable();
            s
        };
        if i == 0 || i == n - 1 {
            activities.push(Activity {
                id: i + 1,
                successors,
                earned_value: 0.0,
                is_dummy: true,
                modes: vec![ActivityMode::dummy()],
            });
            continue;
        }
        let k = rng.gen_range(1..=max_modes);
        let mut normals: Vec<u32> = Vec::with_capacity(k);
        while normals.len() < k {
            let d = rng.gen_range(opts.min_normal_duration..=opts.max_normal_duration);
            if !normals.contains(&d) {
                normals.push(d);
            }
        }
        normals.sort_unstable_by(|a, b| b.cmp(a));

        let mut modes = Vec::with_capacity(k);
        let mut quality = rng.gen_range(85.0..100.0);
        let mut cost = rng.gen_range(50.0..200.0);
        let mut demand: Vec<u32> = resources.iter().map(|_| rng.gen_range(1..=4)).collect();
        for (m, &normal) in normals.iter().enumerate() {
            if m > 0 {
                quality -= rng.gen_range(5.0..15.0);
                cost *= rng.gen_range(1.1..1.4);
                for d in demand.iter_mut() {
                    *d += rng.gen_range(0..=2);
                }
            }
            let crash = normal - rng.gen_range(0..=opts.duration_span.min(normal - 1));
            modes.push(ActivityMode {
                normal_duration: normal,
                crash_duration: crash,
                normal_cost: round2(cost),
                cost_slope: round2(rng.gen_range(5.0..30.0)),
                quality: round2(f64::max(quality, 0.0)),
                demands: resources.iter().cloned().zip(demand.iter().copied()).collect(),
            });
        }
        // rounding may merge qualities that were strictly decreasing
        for m in 1..modes.len() {
            if modes[m].quality >= modes[m - 1].quality {
                modes[m].quality = f64::max(modes[m - 1].quality - 1.0, 0.0);
            }
        }
        activities.push(Activity { id: i + 1, successors, earned_value: 0.0, is_dummy: false, modes });
    }

    let mut resource_capacity = BTreeMap::new();
    for r in &resources {
        let base: u32 = activities.iter().map(|a| a.modes[0].demand(r)).sum();
        let extra: u32 = activities
            .iter()
            .map(|a| a.modes.iter().map(|m| m.demand(r)).max().unwrap_or(0) - a.modes[0].demand(r))
            .sum();
        let cap = base + (opts.resource_slack * extra as f64).round() as u32;
        resource_capacity.insert(r.clone(), cap);
    }

    let mut inst = ProjectInstance {
        schema_version: SCHEMA_VERSION,
        activities,
        resource_capacity,
        interest_rate: opts.interest_rate,
        overhead: opts.overhead,
        prepay_ratio: opts.prepay_ratio,
        compensation_ratio: opts.compensation_ratio,
        deadline: 0,
        price: 0.0,
        initial_capital: 0.0,
        quality_blend: opts.quality_blend,
        payment_count: opts.payment_count,
    };

    // baseline schedule: first mode at normal duration
    let baseline = crate::schedule::Chromosome::baseline(&inst)
        .ok_or_else(|| InstanceError::BadParams("generated graph is cyclic".into()))?;
    let sched = crate::schedule::decode_schedule(&inst, &baseline)
        .map_err(|e| InstanceError::BadParams(e.to_string()))?;
    let makespan = sched.makespan;
    inst.deadline = ((makespan as f64) * opts.deadline_factor).ceil() as u32;

    let direct: Vec<f64> = inst.activities.iter().map(|a| a.modes[0].normal_cost).collect();
    let raw_total: f64 = direct.iter().sum::<f64>() + inst.overhead * makespan as f64;
    inst.price = round2(raw_total * opts.price_markup);
    let direct_sum: f64 = direct.iter().sum();
    let ev_pool = inst.price * opts.earned_value_share;
    for (a, c) in inst.activities.iter_mut().zip(&direct) {
        if !a.is_dummy {
            a.earned_value = (ev_pool * c / direct_sum * 100.0).floor() / 100.0;
        }
    }

    let plan = crate::schedule::compute_payments(&inst, &sched);
    let npv = crate::schedule::npv_cost(&inst, &baseline, &sched);
    let inflow = crate::schedule::discounted_inflow(&inst, &sched, &plan, false);
    let gap = f64::max(npv - inflow, 0.0);
    inst.initial_capital = round2(gap + opts.capital_cushion * npv + 0.01);

    debug_assert!(validate_instance(&inst).is_empty());
    Ok(inst)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn parse_instance(text: &str) -> Result<ProjectInstance, InstanceError> {
    let inst: ProjectInstance = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate_instance(&inst);
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(InstanceError::Invalid(violations))
    }
}

/// Loads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<ProjectInstance, InstanceError> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn to_json(inst: &ProjectInstance) -> String {
    let mut s = serde_json::to_string_pretty(inst).expect("instance serializes");
    s.push('\n');
    s
}

pub fn save_instance(inst: &ProjectInstance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    fs::write(path, to_json(inst))?;
    Ok(())
}
