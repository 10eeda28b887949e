//! Front quality indicators, the Wilcoxon signed-rank test and the pairwise
//! comparison report.
//!
//! Objective vectors are treated as points `(npv_cost, makespan,
//! productivity)` in R³. Distance metrics use raw values unless the caller
//! normalizes first (see [`CompareOptions::normalize`]).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::pareto::{dominates_unchecked, same_point, Front};
use crate::schedule::ObjectiveVector;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("empty front")]
    EmptyFront,
    #[error("need at least {needed} members, got {got}")]
    TooFewMembers { needed: usize, got: usize },
    #[error("need at least 6 non-zero differences, got {effective}")]
    TooFewPairs { effective: usize },
    #[error("objective value is NaN")]
    NaN,
}

type P3 = [f64; 3];

fn points(front: &[ObjectiveVector]) -> Result<Vec<P3>, MetricError> {
    if front.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    let pts: Vec<P3> = front.iter().map(|v| v.to_array()).collect();
    if pts.iter().flatten().any(|x| x.is_nan()) {
        return Err(MetricError::NaN);
    }
    Ok(pts)
}

fn euclid(a: &P3, b: &P3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn manhattan(a: &P3, b: &P3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// (min npv_cost, min makespan, max productivity).
pub fn best_solutions(front: &[ObjectiveVector]) -> Result<(f64, u32, f64), MetricError> {
    points(front)?;
    let npv = front.iter().map(|v| v.npv_cost).fold(f64::INFINITY, f64::min);
    let time = front.iter().map(|v| v.makespan).min().expect("nonempty");
    let prod = front.iter().map(|v| v.productivity).fold(f64::NEG_INFINITY, f64::max);
    Ok((npv, time, prod))
}

/// Ideal point and per-objective range of a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBounds {
    pub best: P3,
    pub min: P3,
    pub max: P3,
}

impl ReferenceBounds {
    pub fn from_points(reference: &[ObjectiveVector]) -> Result<Self, MetricError> {
        let pts = points(reference)?;
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in &pts {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Ok(Self { best: [min[0], min[1], max[2]], min, max })
    }

    fn range(&self, k: usize) -> f64 {
        self.max[k] - self.min[k]
    }

    /// Maps each objective to `(f - min) / range`; zero ranges map to 0.
    pub fn normalize(&self, v: &ObjectiveVector) -> P3 {
        let a = v.to_array();
        std::array::from_fn(|k| {
            let r = self.range(k);
            if r > 0.0 {
                (a[k] - self.min[k]) / r
            } else {
                0.0
            }
        })
    }
}

/// Mean normalized distance to the ideal point.
pub fn mid(front: &[ObjectiveVector], bounds: &ReferenceBounds) -> Result<f64, MetricError> {
    let pts = points(front)?;
    let total: f64 = pts
        .iter()
        .map(|p| {
            (0..3)
                .map(|k| {
                    let r = bounds.range(k);
                    if r > 0.0 {
                        ((p[k] - bounds.best[k]) / r).powi(2)
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / pts.len() as f64)
}

/// Diagonal of the front's objective bounding box.
pub fn diversity_dm(front: &[ObjectiveVector]) -> Result<f64, MetricError> {
    let b = ReferenceBounds::from_points(front)?;
    Ok((0..3).map(|k| b.range(k).powi(2)).sum::<f64>().sqrt())
}

pub fn nps(front: &[ObjectiveVector]) -> usize {
    front.len()
}

/// Share of the combined nondominated set contributed by each front. A point
/// found by several fronts credits all of them.
pub fn quality_measure(fronts: &[Vec<ObjectiveVector>]) -> Result<Vec<f64>, MetricError> {
    let union: Vec<ObjectiveVector> = fronts.iter().flatten().copied().collect();
    points(&union)?;
    let mut combined: Vec<ObjectiveVector> = Vec::new();
    for v in &union {
        if union.iter().any(|u| dominates_unchecked(u, v)) {
            continue;
        }
        if !combined.iter().any(|c| same_point(c, v)) {
            combined.push(*v);
        }
    }
    let total = combined.len() as f64;
    Ok(fronts
        .iter()
        .map(|f| combined.iter().filter(|c| f.iter().any(|v| same_point(c, v))).count() as f64 / total)
        .collect())
}

fn nearest(p: &P3, reference: &[P3]) -> f64 {
    reference.iter().map(|r| euclid(p, r)).fold(f64::INFINITY, f64::min)
}

/// `(1/N) · sqrt(Σ_i min_j ‖y_i − r_j‖²)`.
pub fn generational_distance(front: &[P3], reference: &[P3]) -> Result<f64, MetricError> {
    if front.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    let sum: f64 = front.iter().map(|p| nearest(p, reference).powi(2)).sum();
    Ok(sum.sqrt() / front.len() as f64)
}

/// Largest distance from a front member to its nearest reference point.
pub fn mpfe(front: &[P3], reference: &[P3]) -> Result<f64, MetricError> {
    if front.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    Ok(front.iter().map(|p| nearest(p, reference)).fold(0.0, f64::max))
}

/// Spread of l1 nearest-neighbour distances.
pub fn spacing(front: &[P3]) -> Result<f64, MetricError> {
    let n = front.len();
    if n < 2 {
        return Err(MetricError::TooFewMembers { needed: 2, got: n });
    }
    let d: Vec<f64> = (0..n)
        .map(|i| {
            (0..n).filter(|&j| j != i).map(|j| manhattan(&front[i], &front[j])).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let ss: f64 = d.iter().map(|x| (mean - x).powi(2)).sum();
    Ok((ss / (n - 1) as f64).sqrt())
}

/// Largest gap over mean gap between members adjacent in npv_cost order.
/// A front whose members all coincide has no holes and scores 1.
pub fn hrs(front: &[P3]) -> Result<f64, MetricError> {
    let n = front.len();
    if n < 2 {
        return Err(MetricError::TooFewMembers { needed: 2, got: n });
    }
    let mut sorted = front.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2])));
    let gaps: Vec<f64> = sorted.windows(2).map(|w| euclid(&w[0], &w[1])).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if mean == 0.0 {
        return Ok(1.0);
    }
    Ok(gaps.iter().copied().fold(0.0, f64::max) / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    pub w: f64,
    pub p_value: f64,
    pub n_effective: usize,
}

/// Two-sided signed-rank test, normal approximation with tie and continuity
/// corrections. Zero differences are dropped.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<Wilcoxon, MetricError> {
    let mut d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|x| *x != 0.0).collect();
    if d.iter().any(|x| x.is_nan()) {
        return Err(MetricError::NaN);
    }
    let n = d.len();
    if n < 6 {
        return Err(MetricError::TooFewPairs { effective: n });
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let rank = (i + j) as f64 / 2.0 + 1.0;
        tie_term += t * t * t - t;
        for x in &d[i..=j] {
            if *x > 0.0 {
                w_plus += rank;
            } else {
                w_minus += rank;
            }
        }
        i = j + 1;
    }
    let nf = n as f64;
    let w = f64::min(w_plus, w_minus);
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let mut diff = w - mean;
    if diff != 0.0 {
        diff -= diff.signum() * 0.5;
    }
    let z = diff / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    Ok(Wilcoxon { w, p_value: p, n_effective: n })
}

/// Indicators of one front within a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMetrics {
    pub best_productivity: f64,
    pub best_npv: f64,
    pub best_time: u32,
    pub nps: usize,
    pub qm: f64,
    pub dm: f64,
    pub mid: f64,
    pub gd: f64,
    pub mpfe: f64,
    pub hrs: Option<f64>,
    pub sp: Option<f64>,
}

pub const METRICS_CSV_HEADER: &str =
    "label,best_productivity,best_npv,best_time,nps,qm,dm,mid,gd,mpfe,hrs,sp";

impl FrontMetrics {
    pub fn csv_row(&self, label: &str) -> String {
        use crate::report::fmt_sig12 as f;
        let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
        format!(
            "{label},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.best_productivity),
            f(self.best_npv),
            self.best_time,
            self.nps,
            f(self.qm),
            f(self.dm),
            f(self.mid),
            f(self.gd),
            f(self.mpfe),
            opt(self.hrs),
            opt(self.sp),
        )
    }

    fn fields(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("best_productivity", Some(self.best_productivity)),
            ("best_npv", Some(self.best_npv)),
            ("best_time", Some(self.best_time as f64)),
            ("nps", Some(self.nps as f64)),
            ("qm", Some(self.qm)),
            ("dm", Some(self.dm)),
            ("mid", Some(self.mid)),
            ("gd", Some(self.gd)),
            ("mpfe", Some(self.mpfe)),
            ("hrs", self.hrs),
            ("sp", self.sp),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Rescale every objective by the reference range before computing DM,
    /// GD, MPFE, SP and HRS.
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Supplied,
    CombinedUnion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub a: FrontMetrics,
    pub b: FrontMetrics,
    /// `(a - b) / b · 100` per indicator; absent when `b` is zero or missing.
    pub pct_diff: BTreeMap<String, Option<f64>>,
    pub reference: ReferenceKind,
    pub normalized: bool,
}

pub fn pct_diff(a: f64, b: f64) -> Option<f64> {
    (b != 0.0 && a.is_finite() && b.is_finite()).then(|| (a - b) / b * 100.0)
}

fn nondominated_union(fronts: &[&[ObjectiveVector]]) -> Vec<ObjectiveVector> {
    let all: Vec<ObjectiveVector> = fronts.iter().flat_map(|f| f.iter().copied()).collect();
    let mut out: Vec<ObjectiveVector> = Vec::new();
    for v in &all {
        if !all.iter().any(|u| dominates_unchecked(u, v)) && !out.iter().any(|c| same_point(c, v)) {
            out.push(*v);
        }
    }
    out
}

fn front_metrics(
    front: &[ObjectiveVector],
    qm: f64,
    bounds: &ReferenceBounds,
    reference: &[ObjectiveVector],
    normalize: bool,
) -> Result<FrontMetrics, MetricError> {
    let (best_npv, best_time, best_productivity) = best_solutions(front)?;
    let coords = |v: &[ObjectiveVector]| -> Vec<P3> {
        v.iter().map(|x| if normalize { bounds.normalize(x) } else { x.to_array() }).collect()
    };
    let pts = coords(front);
    let refs = coords(reference);
    let dm = {
        let b = ReferenceBounds::from_points(front)?;
        if normalize {
            (0..3)
                .map(|k| {
                    let r = bounds.range(k);
                    if r > 0.0 {
                        (b.range(k) / r).powi(2)
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                .sqrt()
        } else {
            diversity_dm(front)?
        }
    };
    Ok(FrontMetrics {
        best_productivity,
        best_npv,
        best_time,
        nps: nps(front),
        qm,
        dm,
        mid: mid(front, bounds)?,
        gd: generational_distance(&pts, &refs)?,
        mpfe: mpfe(&pts, &refs)?,
        hrs: hrs(&pts).ok(),
        sp: spacing(&pts).ok(),
    })
}

/// All indicators for two fronts plus their percentage differences. GD and
/// MPFE are measured against `reference` when given, otherwise against the
/// nondominated union of both fronts. MID bounds come from the union of both
/// fronts.
pub fn compare_report(
    a: &Front,
    b: &Front,
    reference: Option<&Front>,
    opts: CompareOptions,
) -> Result<MetricReport, MetricError> {
    let fa = a.objectives();
    let fb = b.objectives();
    if fa.is_empty() || fb.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    let qm = quality_measure(&[fa.clone(), fb.clone()])?;
    let (kind, refs) = match reference {
        Some(r) => (ReferenceKind::Supplied, r.objectives()),
        None => (ReferenceKind::CombinedUnion, nondominated_union(&[&fa, &fb])),
    };
    let mut all = fa.clone();
    all.extend_from_slice(&fb);
    let bounds = ReferenceBounds::from_points(&all)?;
    let ma = front_metrics(&fa, qm[0], &bounds, &refs, opts.normalize)?;
    let mb = front_metrics(&fb, qm[1], &bounds, &refs, opts.normalize)?;
    let pct = ma
        .fields()
        .into_iter()
        .zip(mb.fields())
        .map(|((name, x), (_, y))| {
            let d = match (x, y) {
                (Some(x), Some(y)) => pct_diff(x, y),
                _ => None,
            };
            (name.to_string(), d)
        })
        .collect();
    Ok(MetricReport { a: ma, b: mb, pct_diff: pct, reference: kind, normalized: opts.normalize })
}

/// Per-indicator means over a set of comparisons, with a Wilcoxon test on the
/// paired values where enough non-tied pairs exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub mean_a: BTreeMap<String, f64>,
    pub mean_b: BTreeMap<String, f64>,
    pub mean_pct_diff: BTreeMap<String, Option<f64>>,
    pub wilcoxon: BTreeMap<String, Option<Wilcoxon>>,
}

pub fn summarize(reports: &[MetricReport]) -> Summary {
    let mut mean_a = BTreeMap::new();
    let mut mean_b = BTreeMap::new();
    let mut mean_pct = BTreeMap::new();
    let mut wilcoxon = BTreeMap::new();
    let Some(first) = reports.first() else {
        return Summary { instances: 0, mean_a, mean_b, mean_pct_diff: mean_pct, wilcoxon };
    };
    for (name, _) in first.a.fields() {
        let pairs: Vec<(f64, f64)> = reports
            .iter()
            .filter_map(|r| {
                let x = r.a.fields().into_iter().find(|f| f.0 == name)?.1?;
                let y = r.b.fields().into_iter().find(|f| f.0 == name)?.1?;
                Some((x, y))
            })
            .collect();
        if !pairs.is_empty() {
            let n = pairs.len() as f64;
            mean_a.insert(name.to_string(), pairs.iter().map(|p| p.0).sum::<f64>() / n);
            mean_b.insert(name.to_string(), pairs.iter().map(|p| p.1).sum::<f64>() / n);
        }
        let pcts: Vec<f64> = reports.iter().filter_map(|r| r.pct_diff.get(name).copied().flatten()).collect();
        mean_pct.insert(
            name.to_string(),
            (!pcts.is_empty()).then(|| pcts.iter().sum::<f64>() / pcts.len() as f64),
        );
        wilcoxon.insert(name.to_string(), wilcoxon_signed_rank(&pairs).ok());
    }
    Summary { instances: reports.len(), mean_a, mean_b, mean_pct_diff: mean_pct, wilcoxon }
}
