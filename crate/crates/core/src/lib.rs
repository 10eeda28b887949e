//! Multi-objective time-cost-quality tradeoff scheduling with discounted cash
//! flows and milestone payments.
//!
//! The crate covers instance handling ([`instance`]), chromosome evaluation
//! ([`schedule`]), Pareto machinery ([`pareto`]), two evolutionary solvers
//! ([`moga`], [`nsga2`]), an exhaustive small-instance solver ([`oracle`]),
//! front quality indicators ([`metrics`]), Taguchi parameter tuning
//! ([`tuning`]) and DEMATEL-based ANP quality weighting ([`danp`]).

pub mod danp;
pub mod instance;
pub mod metrics;
pub mod moga;
pub mod nsga2;
pub mod operators;
pub mod oracle;
pub mod pareto;
pub mod report;
pub mod schedule;
pub mod tuning;

pub use instance::{Activity, ActivityMode, ProjectInstance};
pub use metrics::MetricReport;
pub use moga::MogaParams;
pub use nsga2::Nsga2Params;
pub use operators::SolverError;
pub use pareto::{Front, Solution};
pub use report::FrontReport;
pub use schedule::{Chromosome, Evaluator, FeasibilityReport, ObjectiveVector};
