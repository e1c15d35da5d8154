//! End-to-end solving: optional reduction, model build, branch-and-bound,
//! decoding back to the input instance and verification.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::bnb::{solve_milp_with_start, SolveError, SolveParams, SolveReport, SolveStatus, Start};
use crate::instance::Instance;
use crate::pop::{build_pop, decode_solution, BuildError, DecodeError, ModelVariant};
use crate::reduce::{reduce_all, GraphSize, ReductionLog};
use crate::simplex::{solve_lp, LpError, LpStatus};
use crate::verify::{verify_solution, SteinerTree, TreeError, VerifyReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("could not map the tree back to the input instance: {0}")]
    Relabel(#[from] TreeError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("relaxation ended with status {0:?}")]
    RelaxationStatus(LpStatus),
    #[error("solver incumbent failed verification: {0:?}")]
    Rejected(VerifyReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub instance: String,
    pub variant: String,
    pub original_sizes: GraphSize,
    pub reduced_sizes: GraphSize,
    pub columns: usize,
    pub rows: usize,
    pub report: SolveReport,
    /// Best tree found, in the ids of the input instance.
    pub tree: SteinerTree,
    pub verification: VerifyReport,
}

/// Solves `instance` with the given model variant.
///
/// The root-only tree seeds the search as a value: with the root cut or the
/// leaf rows it has no assignment in the model, yet it is always a solution.
pub fn solve_instance(instance: &Instance, variant: ModelVariant, params: &SolveParams) -> Result<SolveOutcome, PipelineError> {
    let (work, log) = if variant.apply_eurc { reduce_all(instance) } else { (instance.clone(), ReductionLog::identity(instance)) };
    let root_only = SteinerTree::root_only(instance);
    assert!(verify_solution(instance, &root_only).feasible, "root-only tree must always be feasible");

    let (report, tree, columns, rows) = if work.edge_count() == 0 {
        let value = root_only.objective;
        let report = SolveReport {
            status: SolveStatus::Optimal,
            lb: value,
            ub: value,
            gap: 0.0,
            nodes: 0,
            iterations: 0,
            wall_time: 0.0,
            assignment: Some(Vec::new()),
            root_lp: Some(value),
            message: None,
        };
        (report, root_only, 0, 0)
    } else {
        let (model, index) = build_pop(&work, variant)?;
        let report = solve_milp_with_start(&model, params, Some(Start::Value(root_only.objective)))?;
        let tree = match &report.assignment {
            Some(x) => {
                let local = decode_solution(&work, &index, x)?;
                let map: Vec<usize> = log.kept_nodes.iter().map(|&id| id - 1).collect();
                local.relabel(instance, &map)?
            }
            None => root_only,
        };
        (report, tree, model.column_count(), model.row_count())
    };

    let verification = verify_solution(instance, &tree);
    if !verification.feasible {
        return Err(PipelineError::Rejected(verification));
    }
    Ok(SolveOutcome {
        instance: instance.name().to_string(),
        variant: variant.name(),
        original_sizes: log.original_sizes.clone(),
        reduced_sizes: log.reduced_sizes.clone(),
        columns,
        rows,
        report,
        tree,
        verification,
    })
}

/// Value of the linear relaxation of the model built for `variant`
/// (after reduction when the variant asks for it).
pub fn relaxation_value(instance: &Instance, variant: ModelVariant) -> Result<f64, PipelineError> {
    let work = if variant.apply_eurc { reduce_all(instance).0 } else { instance.clone() };
    if work.edge_count() == 0 {
        return Ok(work.revenue(work.root()));
    }
    let (model, _) = build_pop(&work, variant)?;
    let lp = solve_lp(&model)?;
    match lp.status {
        LpStatus::Optimal => Ok(lp.objective),
        s => Err(PipelineError::RelaxationStatus(s)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrengthReport {
    pub lp_value: f64,
    pub opt_value: f64,
    /// `lp_value / opt_value`, undefined when the optimum is zero.
    pub strength: Option<f64>,
    pub opt_status: SolveStatus,
}

/// Ratio of the basic model's relaxation to the optimum (found with POP2).
pub fn strength(instance: &Instance, params: &SolveParams) -> Result<StrengthReport, PipelineError> {
    let lp_value = relaxation_value(instance, ModelVariant::BASIC)?;
    let opt = solve_instance(instance, ModelVariant::POP2, params)?;
    let opt_value = opt.report.lb;
    let strength = (opt_value > 0.0).then(|| lp_value / opt_value);
    Ok(StrengthReport { lp_value, opt_value, strength, opt_status: opt.report.status })
}

pub const CSV_HEADER: &str = "instance,V,E,Vr,Er,variant,status,lb,ub,time_s";

/// One line of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub nodes: usize,
    pub edges: usize,
    pub reduced_nodes: usize,
    pub reduced_edges: usize,
    pub variant: String,
    pub status: SolveStatus,
    pub lb: f64,
    pub ub: f64,
    pub time_s: f64,
}

impl BenchRow {
    pub fn from_outcome(outcome: &SolveOutcome) -> BenchRow {
        BenchRow {
            instance: outcome.instance.clone(),
            nodes: outcome.original_sizes.nodes,
            edges: outcome.original_sizes.edges,
            reduced_nodes: outcome.reduced_sizes.nodes,
            reduced_edges: outcome.reduced_sizes.edges,
            variant: outcome.variant.clone(),
            status: outcome.report.status,
            lb: outcome.report.lb,
            ub: outcome.report.ub,
            time_s: outcome.report.wall_time,
        }
    }

    pub fn to_csv(&self) -> String {
        let status = match self.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Limit => "limit",
        };
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{:.3}",
            csv_field(&self.instance),
            self.nodes,
            self.edges,
            self.reduced_nodes,
            self.reduced_edges,
            self.variant,
            status,
            self.lb,
            self.ub,
            self.time_s
        )
        .unwrap();
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
