//! Branch-and-bound over the binary columns of a [`MilpModel`].
//!
//! Nodes are chosen best-bound first; after branching the search plunges
//! into the preferred child before returning to the best open node. Every
//! node's relaxation is solved from scratch with [`solve_lp_with_bounds`]
//! after bound propagation on the rows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MilpModel, Sense, VarKind};
use crate::simplex::{solve_lp_with_bounds, LpError, LpSolution, LpStatus};

/// Values within this distance of an integer count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BranchingRule {
    /// Column whose value is closest to 0.5, lowest index on ties.
    #[default]
    MostFractional,
    /// Scores columns by average bound degradation observed in earlier
    /// branchings; unscored columns fall back to fractionality.
    PseudoCostLite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub time_limit_seconds: Option<f64>,
    pub mip_gap: f64,
    pub node_limit: Option<u64>,
    pub branching_rule: BranchingRule,
    /// Recorded in reports. All rules are deterministic, so the seed does not
    /// change the search today.
    pub seed: u64,
    /// Nodes whose relaxations are solved concurrently per round.
    pub threads: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { time_limit_seconds: None, mip_gap: 1e-5, node_limit: None, branching_rule: BranchingRule::MostFractional, seed: 0, threads: 1 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("mip gap {0} must be finite and nonnegative")]
    BadGap(f64),
    #[error("time limit {0} must be nonnegative")]
    BadTimeLimit(f64),
    #[error("column {0} is not binary")]
    NonBinaryColumn(String),
    #[error("starting assignment violates the model")]
    InfeasibleStart,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal within the gap tolerance.
    Optimal,
    /// Stopped by a limit after the search found an assignment of its own.
    Feasible,
    /// Search space exhausted without any feasible point.
    Infeasible,
    /// Stopped by a limit (or a numerical failure) before finding one.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Incumbent objective (constant included).
    pub lb: f64,
    /// Proven upper bound.
    pub ub: f64,
    pub gap: f64,
    pub nodes: u64,
    pub iterations: u64,
    pub wall_time: f64,
    /// Incumbent assignment, absent when the incumbent was only a supplied value.
    pub assignment: Option<Vec<f64>>,
    /// Relaxation value at the root node, when it was solved.
    pub root_lp: Option<f64>,
    pub message: Option<String>,
}

/// An incumbent supplied before the search starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// A feasible assignment; checked against the model.
    Assignment(Vec<f64>),
    /// A value known to be attainable (for instance by a solution of the
    /// underlying problem the model cannot express), used only for pruning.
    Value(f64),
}

pub fn solve_milp(model: &MilpModel, params: &SolveParams) -> Result<SolveReport, SolveError> {
    solve_milp_with_start(model, params, None)
}

pub fn solve_milp_with_start(model: &MilpModel, params: &SolveParams, start: Option<Start>) -> Result<SolveReport, SolveError> {
    if !params.mip_gap.is_finite() || params.mip_gap < 0.0 {
        return Err(SolveError::BadGap(params.mip_gap));
    }
    if let Some(t) = params.time_limit_seconds {
        if t.is_nan() || t < 0.0 {
            return Err(SolveError::BadTimeLimit(t));
        }
    }
    if let Some(col) = model.columns().iter().find(|c| c.kind != VarKind::Binary) {
        return Err(SolveError::NonBinaryColumn(col.name.clone()));
    }
    let mut search = Search::new(model, params);
    match start {
        Some(Start::Assignment(x)) => {
            if !model.is_feasible(&x, 1e-9) || !model.is_integral(&x, 0.0) {
                return Err(SolveError::InfeasibleStart);
            }
            search.lb = model.objective_value(&x);
            search.incumbent = Some(x);
        }
        Some(Start::Value(v)) => search.lb = v,
        None => {}
    }
    Ok(search.run())
}

#[derive(Debug, Clone)]
struct Node {
    /// Bound inherited from the parent relaxation.
    bound: f64,
    depth: usize,
    seq: u64,
    /// `(column, value)` fixings from the root.
    fixings: Vec<(usize, f64)>,
    /// Branching that created this node: column, went up, fractional part
    /// moved, parent value.
    origin: Option<(usize, bool, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: higher bound first, then deeper, then older
        self.bound.total_cmp(&other.bound).then(self.depth.cmp(&other.depth)).then(other.seq.cmp(&self.seq))
    }
}

enum Evaluated {
    Pruned,
    Infeasible,
    Solved { lp: LpSolution, lower: Vec<f64>, upper: Vec<f64> },
    Failed(LpError),
}

struct Search<'a> {
    model: &'a MilpModel,
    params: &'a SolveParams,
    started: Instant,
    lb: f64,
    incumbent: Option<Vec<f64>>,
    found_by_search: bool,
    nodes: u64,
    iterations: u64,
    seq: u64,
    integral_objective: bool,
    trivial_ub: f64,
    pseudo: Vec<[(f64, u32); 2]>,
    root_lp: Option<f64>,
    /// Largest bound discarded only because it was within the gap.
    gap_pruned: f64,
}

impl<'a> Search<'a> {
    fn new(model: &'a MilpModel, params: &'a SolveParams) -> Self {
        let obj = model.objective();
        let integral_objective = obj.constant.fract() == 0.0 && obj.coeffs.iter().all(|&(_, c)| c.fract() == 0.0);
        let trivial_ub = obj.constant
            + obj.coeffs.iter().map(|&(j, c)| if c > 0.0 { c * model.columns()[j].upper } else { c * model.columns()[j].lower }).sum::<f64>();
        Search {
            model,
            params,
            started: Instant::now(),
            lb: f64::NEG_INFINITY,
            incumbent: None,
            found_by_search: false,
            nodes: 0,
            iterations: 0,
            seq: 0,
            integral_objective,
            trivial_ub,
            pseudo: vec![[(0.0, 0); 2]; model.column_count()],
            root_lp: None,
            gap_pruned: f64::NEG_INFINITY,
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        if self.lb == f64::NEG_INFINITY {
            return false;
        }
        if self.integral_objective && (bound + INTEGRALITY_TOL).floor() <= self.lb {
            return true;
        }
        bound - self.lb <= self.params.mip_gap * bound.abs().max(1.0)
    }

    /// Like [`Self::prunable`], remembering bounds dropped only by the gap.
    fn can_prune(&mut self, bound: f64) -> bool {
        let prune = self.prunable(bound);
        let integral_cut = self.integral_objective && (bound + INTEGRALITY_TOL).floor() <= self.lb;
        if prune && !integral_cut && bound > self.lb {
            self.gap_pruned = self.gap_pruned.max(bound);
        }
        prune
    }

    fn out_of_time(&self) -> bool {
        self.params.time_limit_seconds.is_some_and(|t| self.started.elapsed().as_secs_f64() >= t)
    }

    fn run(mut self) -> SolveReport {
        let root = Node { bound: self.trivial_ub, depth: 0, seq: 0, fixings: Vec::new(), origin: None };
        let mut heap = BinaryHeap::new();
        let mut plunge: Option<Node> = Some(root);
        let mut message = None;
        let mut limit_hit = false;
        let threads = self.params.threads.max(1);

        loop {
            // global bound over everything still open
            let open_bound = heap.peek().map(|n: &Node| n.bound).into_iter().chain(plunge.as_ref().map(|n| n.bound)).fold(f64::NEG_INFINITY, f64::max);
            if plunge.is_none() && heap.is_empty() {
                break;
            }
            if self.can_prune(open_bound) {
                heap.clear();
                break;
            }
            if self.out_of_time() || self.params.node_limit.is_some_and(|l| self.nodes >= l) {
                limit_hit = true;
                // remaining nodes keep their bounds for the report
                if let Some(p) = plunge.take() {
                    heap.push(p);
                }
                break;
            }

            let mut batch = Vec::with_capacity(threads);
            if let Some(p) = plunge.take() {
                batch.push(p);
            }
            while batch.len() < threads {
                match heap.pop() {
                    Some(n) => batch.push(n),
                    None => break,
                }
            }
            if let Some(l) = self.params.node_limit {
                let room = (l - self.nodes) as usize;
                while batch.len() > room.max(1) {
                    heap.push(batch.pop().unwrap());
                }
            }

            let results: Vec<Evaluated> = if batch.len() == 1 {
                vec![self.evaluate(&batch[0])]
            } else {
                let this = &self;
                std::thread::scope(|s| {
                    let handles: Vec<_> = batch.iter().map(|node| s.spawn(move || this.evaluate(node))).collect();
                    handles.into_iter().map(|h| h.join().expect("node worker panicked")).collect()
                })
            };

            for (node, result) in batch.into_iter().zip(results) {
                self.nodes += 1;
                let (lp, lower, upper) = match result {
                    Evaluated::Pruned => {
                        self.can_prune(node.bound);
                        continue;
                    }
                    Evaluated::Infeasible => continue,
                    Evaluated::Failed(e) => {
                        message = Some(e.to_string());
                        limit_hit = true;
                        heap.push(node);
                        continue;
                    }
                    Evaluated::Solved { lp, lower, upper } => (lp, lower, upper),
                };
                self.iterations += lp.iterations as u64;
                if node.depth == 0 {
                    self.root_lp = Some(lp.objective);
                }
                if let Some((col, up, frac, parent)) = node.origin {
                    let per_unit = ((parent - lp.objective).max(0.0)) / frac.max(1e-6);
                    let slot = &mut self.pseudo[col][up as usize];
                    slot.0 += per_unit;
                    slot.1 += 1;
                }
                if self.can_prune(lp.objective) {
                    continue;
                }
                match self.pick_branch(&lp.x, &lower, &upper) {
                    None => self.offer_incumbent(&lp),
                    Some(col) => {
                        let value = lp.x[col];
                        let up_first = value >= 0.5;
                        let mut children = Vec::with_capacity(2);
                        for up in [up_first, !up_first] {
                            self.seq += 1;
                            let mut fixings = node.fixings.clone();
                            fixings.push((col, if up { 1.0 } else { 0.0 }));
                            let frac = if up { 1.0 - value } else { value };
                            children.push(Node { bound: lp.objective, depth: node.depth + 1, seq: self.seq, fixings, origin: Some((col, up, frac, lp.objective)) });
                        }
                        let second = children.pop().unwrap();
                        let first = children.pop().unwrap();
                        heap.push(second);
                        match plunge.take() {
                            None => plunge = Some(first),
                            Some(p) => {
                                heap.push(p);
                                plunge = Some(first);
                            }
                        }
                    }
                }
            }
            if limit_hit {
                if let Some(p) = plunge.take() {
                    heap.push(p);
                }
                break;
            }
        }

        let open_bound = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
        let exhausted = !limit_hit;
        let ub = if exhausted {
            self.lb.max(self.gap_pruned)
        } else if self.nodes == 0 {
            self.trivial_ub.max(self.lb)
        } else {
            open_bound.max(self.lb).max(self.gap_pruned)
        };
        let gap = if self.lb == f64::NEG_INFINITY { f64::INFINITY } else { (ub - self.lb) / ub.abs().max(1.0) };
        let status = if self.lb == f64::NEG_INFINITY {
            if exhausted { SolveStatus::Infeasible } else { SolveStatus::Limit }
        } else if exhausted || gap <= self.params.mip_gap {
            SolveStatus::Optimal
        } else if self.found_by_search {
            SolveStatus::Feasible
        } else {
            SolveStatus::Limit
        };
        SolveReport {
            status,
            lb: self.lb,
            ub,
            gap,
            nodes: self.nodes,
            iterations: self.iterations,
            wall_time: self.started.elapsed().as_secs_f64(),
            assignment: self.incumbent,
            root_lp: self.root_lp,
            message,
        }
    }

    fn evaluate(&self, node: &Node) -> Evaluated {
        if node.depth > 0 && self.prunable(node.bound) {
            return Evaluated::Pruned;
        }
        let mut lower: Vec<f64> = self.model.columns().iter().map(|c| c.lower).collect();
        let mut upper: Vec<f64> = self.model.columns().iter().map(|c| c.upper).collect();
        for &(j, v) in &node.fixings {
            if v < lower[j] || v > upper[j] {
                return Evaluated::Infeasible;
            }
            lower[j] = v;
            upper[j] = v;
        }
        if !propagate(self.model, &mut lower, &mut upper) {
            return Evaluated::Infeasible;
        }
        match solve_lp_with_bounds(self.model, &lower, &upper) {
            Ok(lp) if lp.status == LpStatus::Optimal => Evaluated::Solved { lp, lower, upper },
            Ok(lp) if lp.status == LpStatus::Infeasible => Evaluated::Infeasible,
            Ok(_) => Evaluated::Failed(LpError::NumericalBreakdown("bounded relaxation reported unbounded".into())),
            Err(e) => Evaluated::Failed(e),
        }
    }

    fn pick_branch(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> Option<usize> {
        let fractional = (0..x.len()).filter(|&j| lower[j] < upper[j] && (x[j] - x[j].round()).abs() > INTEGRALITY_TOL);
        match self.params.branching_rule {
            BranchingRule::MostFractional => {
                fractional.min_by(|&a, &b| (x[a] - 0.5).abs().total_cmp(&(x[b] - 0.5).abs()).then(a.cmp(&b)))
            }
            BranchingRule::PseudoCostLite => {
                let score = |j: usize| -> f64 {
                    let f = x[j] - x[j].floor();
                    let [down, up] = self.pseudo[j];
                    if down.1 == 0 || up.1 == 0 {
                        // unscored: fractionality, kept below any real score
                        return f.min(1.0 - f) * 1e-3;
                    }
                    let d = (down.0 / down.1 as f64) * f;
                    let u = (up.0 / up.1 as f64) * (1.0 - f);
                    d.max(1e-6) * u.max(1e-6)
                };
                fractional.max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
            }
        }
    }

    fn offer_incumbent(&mut self, lp: &LpSolution) {
        let rounded: Vec<f64> = lp.x.iter().map(|v| v.round()).collect();
        let (x, value) = if self.model.is_feasible(&rounded, 1e-9) {
            let v = self.model.objective_value(&rounded);
            (rounded, v)
        } else {
            (lp.x.clone(), lp.objective)
        };
        if value > self.lb {
            self.lb = value;
            self.incumbent = Some(x);
            self.found_by_search = true;
        }
    }
}

/// Tightens binary bounds implied by rows. Returns false when some row
/// cannot be satisfied.
pub fn propagate(model: &MilpModel, lower: &mut [f64], upper: &mut [f64]) -> bool {
    const TOL: f64 = 1e-9;
    for _pass in 0..50 {
        let mut changed = false;
        for row in model.rows() {
            let (mut min_act, mut max_act) = (0.0, 0.0);
            for &(j, a) in &row.coeffs {
                if a > 0.0 {
                    min_act += a * lower[j];
                    max_act += a * upper[j];
                } else {
                    min_act += a * upper[j];
                    max_act += a * lower[j];
                }
            }
            let tol = TOL * row.rhs.abs().max(1.0);
            let check_le = matches!(row.sense, Sense::Le | Sense::Eq);
            let check_ge = matches!(row.sense, Sense::Ge | Sense::Eq);
            if (check_le && min_act > row.rhs + tol) || (check_ge && max_act < row.rhs - tol) {
                return false;
            }
            for &(j, a) in &row.coeffs {
                if lower[j] == upper[j] {
                    continue;
                }
                let width = upper[j] - lower[j];
                // activity range of the other columns
                let (self_min, self_max) = if a > 0.0 { (a * lower[j], a * upper[j]) } else { (a * upper[j], a * lower[j]) };
                let others_min = min_act - self_min;
                let others_max = max_act - self_max;
                let mut fix = None;
                if check_le {
                    // a·x ≤ rhs − others_min
                    let room = row.rhs - others_min;
                    if a > 0.0 && a * upper[j] > room + tol && a * lower[j] <= room + tol {
                        fix = Some(lower[j]);
                    } else if a < 0.0 && a * lower[j] > room + tol && a * upper[j] <= room + tol {
                        fix = Some(upper[j]);
                    }
                }
                if fix.is_none() && check_ge {
                    let need = row.rhs - others_max;
                    if a > 0.0 && a * lower[j] < need - tol && a * upper[j] >= need - tol {
                        fix = Some(upper[j]);
                    } else if a < 0.0 && a * upper[j] < need - tol && a * lower[j] >= need - tol {
                        fix = Some(lower[j]);
                    }
                }
                if let Some(v) = fix {
                    debug_assert!(width > 0.0);
                    lower[j] = v;
                    upper[j] = v;
                    changed = true;
                    // recompute this row's activities on the next pass
                    break;
                }
            }
        }
        if !changed {
            return true;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sense;

    fn knapsack() -> MilpModel {
        // max 5a + 4b + 3c, 2a + 3b + c ≤ 4 → a, c (8) vs b, c (7) vs a alone
        let mut m = MilpModel::new("k");
        let a = m.add_column("a", VarKind::Binary, 0.0, 1.0).unwrap();
        let b = m.add_column("b", VarKind::Binary, 0.0, 1.0).unwrap();
        let c = m.add_column("c", VarKind::Binary, 0.0, 1.0).unwrap();
        m.add_row("cap", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 4.0).unwrap();
        m.set_objective(vec![(a, 5.0), (b, 4.0), (c, 3.0)], 1.0).unwrap();
        m
    }

    #[test]
    fn solves_small_knapsack() {
        let r = solve_milp(&knapsack(), &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.lb, 9.0);
        assert_eq!(r.ub, 9.0);
        assert_eq!(r.assignment.unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn both_rules_and_threads_agree() {
        let m = knapsack();
        for rule in [BranchingRule::MostFractional, BranchingRule::PseudoCostLite] {
            for threads in [1, 3] {
                let p = SolveParams { branching_rule: rule, threads, ..SolveParams::default() };
                assert_eq!(solve_milp(&m, &p).unwrap().lb, 9.0);
            }
        }
    }

    #[test]
    fn zero_time_limit_keeps_start_value() {
        let p = SolveParams { time_limit_seconds: Some(0.0), ..SolveParams::default() };
        let r = solve_milp_with_start(&knapsack(), &p, Some(Start::Value(1.0))).unwrap();
        assert_eq!(r.status, SolveStatus::Limit);
        assert_eq!(r.lb, 1.0);
        assert_eq!(r.nodes, 0);
        assert!(r.lb <= r.ub);
        assert_eq!(r.ub, 13.0);
    }

    #[test]
    fn infeasible_model() {
        let mut m = MilpModel::new("i");
        let a = m.add_column("a", VarKind::Binary, 0.0, 1.0).unwrap();
        let b = m.add_column("b", VarKind::Binary, 0.0, 1.0).unwrap();
        m.add_row("r", vec![(a, 2.0), (b, 2.0)], Sense::Eq, 1.0).unwrap();
        m.set_objective(vec![(a, 1.0)], 0.0).unwrap();
        let r = solve_milp(&m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.assignment.is_none());
    }

    #[test]
    fn start_assignment_is_checked() {
        let m = knapsack();
        assert_eq!(solve_milp_with_start(&m, &SolveParams::default(), Some(Start::Assignment(vec![1.0, 1.0, 0.0]))), Err(SolveError::InfeasibleStart));
        let r = solve_milp_with_start(&m, &SolveParams::default(), Some(Start::Assignment(vec![0.0, 1.0, 0.0]))).unwrap();
        assert_eq!(r.lb, 9.0);
    }

    #[test]
    fn node_limit_stops() {
        let p = SolveParams { node_limit: Some(1), ..SolveParams::default() };
        let r = solve_milp(&knapsack(), &p).unwrap();
        assert_eq!(r.nodes, 1);
        assert!(r.lb <= r.ub + 1e-6);
    }

    #[test]
    fn bad_params() {
        let m = knapsack();
        assert!(matches!(solve_milp(&m, &SolveParams { mip_gap: -1.0, ..SolveParams::default() }), Err(SolveError::BadGap(_))));
        assert!(matches!(solve_milp(&m, &SolveParams { time_limit_seconds: Some(-1.0), ..SolveParams::default() }), Err(SolveError::BadTimeLimit(_))));
    }

    #[test]
    fn propagation_fixes_forced_columns() {
        let mut m = MilpModel::new("p");
        let a = m.add_column("a", VarKind::Binary, 0.0, 1.0).unwrap();
        let b = m.add_column("b", VarKind::Binary, 0.0, 1.0).unwrap();
        let c = m.add_column("c", VarKind::Binary, 0.0, 1.0).unwrap();
        m.add_row("ge", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.0).unwrap();
        m.add_row("le", vec![(b, 1.0), (c, 1.0)], Sense::Le, 0.0).unwrap();
        let mut lo = vec![0.0; 3];
        let mut hi = vec![1.0; 3];
        assert!(propagate(&m, &mut lo, &mut hi));
        assert_eq!((lo, hi), (vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]));
        let mut lo = vec![0.0, 0.0, 0.0];
        let mut hi = vec![0.0, 1.0, 1.0];
        assert!(!propagate(&m, &mut lo, &mut hi));
    }
}
