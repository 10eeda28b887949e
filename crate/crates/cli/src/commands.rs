use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crashplan::danp::{
    apply_quality_patch, danp_weights, dematel_total, quality_scores, read_influence_csv, read_scores_csv,
};
use crashplan::instance::{generate_instance, load_instance, GeneratorOptions, InstanceError};
use crashplan::metrics::{best_solutions, compare_report, summarize, CompareOptions, METRICS_CSV_HEADER};
use crashplan::moga::run_moga;
use crashplan::nsga2::{run_nsga2, Nsga2Params};
use crashplan::oracle::{run_oracle, true_pareto_front, OracleError, OracleLimits};
use crashplan::report::{fmt_sig12, read_front_csv};
use crashplan::schedule::EvalOptions;
use crashplan::tuning::{tune, FactorLevels};
use crashplan::{Chromosome, Evaluator, Front, MetricReport, MogaParams, ProjectInstance};
use serde_json::json;

use crate::output::{pretty, usage_error, Classify, Failure, Provenance};
use crate::{Algo, Cli, Command, SweepParam};

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let opts = EvalOptions { literal_eq15: cli.literal_eq15 };
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a, opts),
        Command::Oracle(a) => oracle(a, opts),
        Command::Metrics(a) => metrics(a),
        Command::Tune(a) => tune_cmd(a, opts),
        Command::Sweep(a) => sweep(a, opts),
        Command::Danp(a) => danp(a),
        Command::Eval(a) => eval(a, opts),
    }
}

fn read_instance(path: &Path) -> Result<ProjectInstance, Failure> {
    match load_instance(path) {
        Ok(i) => Ok(i),
        Err(e @ InstanceError::Infeasible { .. }) => Err(e).domain(),
        Err(e) => Err(anyhow::anyhow!("{}: {e}", path.display())).usage(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display())).usage()?;
    serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display())).usage()
}

fn gen(a: &crate::GenArgs) -> Result<(), Failure> {
    let opts = GeneratorOptions {
        duration_span: a.span,
        resources: a.resources,
        deadline_factor: a.deadline_factor,
        ..Default::default()
    };
    let inst = generate_instance(a.seed, a.activities, a.modes, a.density, &opts).usage()?;
    let text = crashplan::instance::to_json(&inst);
    Provenance::new(Some(a.seed), Some(inst.content_hash())).write(
        &a.out,
        &text,
        json!({
            "activities": a.activities,
            "modes": a.modes,
            "density": a.density,
            "span": a.span,
            "resources": a.resources,
            "deadline_factor": a.deadline_factor,
        }),
    )
}

fn solve(a: &crate::SolveArgs, opts: EvalOptions) -> Result<(), Failure> {
    let inst = read_instance(&a.instance)?;
    let ev = Evaluator::with_options(&inst, opts);
    let report = match a.algo {
        Algo::Moga => {
            if a.archive {
                return Err(usage_error("--archive applies to nsga2; moga reports its archive by default"));
            }
            let mut p: MogaParams = match &a.params {
                Some(f) => read_json(f)?,
                None => MogaParams::default(),
            };
            p.seed = a.seed;
            p.pop_size = a.pop.unwrap_or(p.pop_size);
            p.iterations = a.iterations.unwrap_or(p.iterations);
            p.crossover_rate = a.crossover.unwrap_or(p.crossover_rate);
            p.mutation_rate = a.mutation.unwrap_or(p.mutation_rate);
            p.hill_climb_rate = a.hill_climb.unwrap_or(p.hill_climb_rate);
            p.elitism_rate = a.elitism.unwrap_or(p.elitism_rate);
            p.max_evaluations = a.max_evaluations.or(p.max_evaluations);
            p.final_population_only |= a.final_population;
            p.validate().usage()?;
            run_moga(&ev, &p).domain()?
        }
        Algo::Nsga2 => {
            if a.hill_climb.is_some() || a.elitism.is_some() || a.final_population {
                return Err(usage_error("--hill-climb, --elitism and --final-population apply to moga only"));
            }
            let mut p: Nsga2Params = match &a.params {
                Some(f) => read_json(f)?,
                None => Nsga2Params::default(),
            };
            p.seed = a.seed;
            p.pop_size = a.pop.unwrap_or(p.pop_size);
            p.iterations = a.iterations.unwrap_or(p.iterations);
            p.crossover_rate = a.crossover.unwrap_or(p.crossover_rate);
            p.mutation_rate = a.mutation.unwrap_or(p.mutation_rate);
            p.max_evaluations = a.max_evaluations.or(p.max_evaluations);
            p.archive_output |= a.archive;
            p.validate().usage()?;
            run_nsga2(&ev, &p).domain()?
        }
    };
    Provenance::new(Some(a.seed), Some(report.instance_hash.clone())).write(
        &a.out,
        &report.to_csv(),
        report.metadata(),
    )
}

fn oracle(a: &crate::OracleArgs, opts: EvalOptions) -> Result<(), Failure> {
    let inst = read_instance(&a.instance)?;
    let ev = Evaluator::with_options(&inst, opts);
    let report = run_oracle(&ev, OracleLimits { max_points: a.max_points }).domain()?;
    Provenance::new(None, Some(report.instance_hash.clone())).write(
        &a.out,
        &report.to_csv(),
        report.metadata(),
    )
}

fn read_front(path: &Path) -> Result<(Front, Option<String>), Failure> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display())).usage()?;
    let file = read_front_csv(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display())).usage()?;
    if file.solutions.is_empty() {
        return Err(usage_error(format!("{}: front is empty", path.display())));
    }
    Ok((Front::from_solutions(file.solutions), file.instance_hash))
}

fn metrics(a: &crate::MetricsArgs) -> Result<(), Failure> {
    if !a.summarize.is_empty() {
        let reports: Vec<MetricReport> =
            a.summarize.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
        let summary = summarize(&reports);
        return Provenance::new(None, None).write(
            &a.out,
            &pretty(&summary),
            json!({ "reports": a.summarize.len() }),
        );
    }
    let (Some(pa), Some(pb)) = (&a.a, &a.b) else {
        return Err(usage_error("--a and --b are required"));
    };
    let (fa, ha) = read_front(pa)?;
    let (fb, hb) = read_front(pb)?;
    let reference = match &a.reference {
        Some(p) => Some(read_front(p)?),
        None => None,
    };
    let hashes: Vec<&String> =
        [&ha, &hb].into_iter().chain(reference.as_ref().map(|r| &r.1)).flatten().collect();
    if hashes.windows(2).any(|w| w[0] != w[1]) {
        return Err(usage_error("fronts come from different instances"));
    }
    let report =
        compare_report(&fa, &fb, reference.as_ref().map(|r| &r.0), CompareOptions { normalize: a.normalize })
            .domain()?;
    let prov = Provenance::new(None, hashes.first().map(|h| h.to_string()));
    prov.write(&a.out, &pretty(&report), json!({ "normalize": a.normalize }))?;
    if let Some(csv) = &a.csv {
        let text = format!("{METRICS_CSV_HEADER}\n{}\n{}\n", report.a.csv_row("a"), report.b.csv_row("b"));
        prov.write(csv, &text, json!({ "normalize": a.normalize }))?;
    }
    Ok(())
}

fn tune_cmd(a: &crate::TuneArgs, opts: EvalOptions) -> Result<(), Failure> {
    let inst = read_instance(&a.instance)?;
    let ev = Evaluator::with_options(&inst, opts);
    let levels: FactorLevels = match &a.levels {
        Some(p) => read_json(p)?,
        None => FactorLevels::default(),
    };
    let base = MogaParams { seed: a.seed, max_evaluations: a.max_evaluations, ..Default::default() };
    let report = tune(&ev, &levels, &base).domain()?;
    let prov = Provenance::new(Some(a.seed), Some(report.instance_hash.clone()));
    let extra = json!({ "max_evaluations": a.max_evaluations });
    prov.write(&a.out_dir.join("tuning.json"), &pretty(&report), extra.clone())?;
    prov.write(&a.out_dir.join("means.csv"), &report.means_csv(), extra)
}

fn parse_chromosome(text: &str, inst: &ProjectInstance) -> Result<Chromosome, Failure> {
    let c: Chromosome = text.parse().map_err(|e| anyhow::anyhow!("chromosome: {e}")).usage()?;
    c.check(inst).map_err(|e| anyhow::anyhow!("chromosome: {e}")).usage()?;
    Ok(c)
}

fn sweep(a: &crate::SweepArgs, opts: EvalOptions) -> Result<(), Failure> {
    let base = read_instance(&a.instance)?;
    let mut out = String::new();
    match a.param {
        SweepParam::Discount => {
            let chrom = match &a.chromosome {
                Some(t) => parse_chromosome(t, &base)?,
                None => Chromosome::baseline(&base).ok_or_else(|| usage_error("instance is cyclic"))?,
            };
            out.push_str("interest_rate,npv_cost,makespan,productivity,valid_number\n");
            for &k in &a.values {
                if k.is_nan() || k <= -1.0 {
                    return Err(usage_error(format!("interest rate {k} must exceed -1")));
                }
                let inst = ProjectInstance { interest_rate: k, ..base.clone() };
                let (obj, feas) = Evaluator::with_options(&inst, opts).evaluate(&chrom).domain()?;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_sig12(k),
                    fmt_sig12(obj.npv_cost),
                    obj.makespan,
                    fmt_sig12(obj.productivity),
                    feas.valid_number
                );
            }
        }
        SweepParam::Deadline => {
            if a.chromosome.is_some() {
                return Err(usage_error("--chromosome applies to the discount sweep"));
            }
            out.push_str("deadline,front_size,best_npv,best_time,best_productivity\n");
            for &d in &a.values {
                if d < 0.0 || d.fract() != 0.0 {
                    return Err(usage_error(format!("deadline {d} is not a whole number")));
                }
                let inst = ProjectInstance { deadline: d as u32, ..base.clone() };
                let ev = Evaluator::with_options(&inst, opts);
                match true_pareto_front(&ev, OracleLimits { max_points: a.max_points }) {
                    Ok(front) => {
                        let (npv, time, prod) = best_solutions(&front.objectives()).domain()?;
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            d as u32,
                            front.len(),
                            fmt_sig12(npv),
                            time,
                            fmt_sig12(prod)
                        );
                    }
                    Err(OracleError::NoFeasible) => {
                        let _ = writeln!(out, "{},0,,,", d as u32);
                    }
                    Err(e) => return Err(e).domain(),
                }
            }
        }
    }
    Provenance::new(None, Some(base.content_hash())).write(
        &a.out,
        &out,
        json!({ "param": format!("{:?}", a.param).to_lowercase(), "values": a.values }),
    )
}

fn danp(a: &crate::DanpArgs) -> Result<(), Failure> {
    let open = |p: &Path| fs::File::open(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())).usage();
    let m = read_influence_csv(open(&a.influence)?).usage()?;
    let (criteria, scores) = read_scores_csv(open(&a.scores)?).usage()?;
    if criteria != m.criteria {
        return Err(usage_error("score columns must match the influence matrix criteria"));
    }
    let t = dematel_total(&m.a).domain()?;
    let weights = danp_weights(&t).domain()?;
    let patch = quality_scores(&criteria, &weights, &scores).usage()?;

    let total: Vec<Vec<f64>> = t.row_iter().map(|r| r.iter().copied().collect()).collect();
    let weights_json = json!({
        "criteria": criteria,
        "weights": weights,
        "total_relation": total,
    });
    let prov = Provenance::new(None, None);
    prov.write(&a.out_dir.join("weights.json"), &pretty(&weights_json), json!({}))?;
    prov.write(&a.out_dir.join("quality_patch.json"), &pretty(&patch), json!({}))?;
    if let (Some(src), Some(dst)) = (&a.instance, &a.patched_out) {
        let mut inst = read_instance(src)?;
        apply_quality_patch(&mut inst, &patch).usage()?;
        Provenance::new(None, Some(inst.content_hash())).write(
            dst,
            &crashplan::instance::to_json(&inst),
            json!({ "patched_from": src }),
        )?;
    }
    Ok(())
}

fn eval(a: &crate::EvalArgs, opts: EvalOptions) -> Result<(), Failure> {
    let inst = read_instance(&a.instance)?;
    let chrom = parse_chromosome(&a.chromosome, &inst)?;
    let inspection = Evaluator::with_options(&inst, opts).inspect(&chrom).domain()?;
    let text = pretty(&inspection);
    match &a.out {
        Some(p) => Provenance::new(None, Some(inst.content_hash())).write(
            p,
            &text,
            json!({ "chromosome": a.chromosome }),
        ),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
