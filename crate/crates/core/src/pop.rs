//! The partial-ordering binary program.
//!
//! Every node `v` gets a position `π_v ∈ {0..H}` encoded by indicators
//! `g_{i,v} = [π_v > i]`; the root sits at 0, every other node in `1..=H`.
//! The "less than" indicators satisfy `l_{v,i+1} = 1 − g_{i,v}` and are
//! substituted away at build time, as are all `g` values the model fixes.
//! An arc variable `x_{u,v}` selects edge `uv` oriented from `u` to `v`.
//!
//! After elimination the basic model has exactly `(H−1)(|V|−1) + 2|E|`
//! columns. Arc columns forced to zero by the rows (arcs into the root, for
//! example) stay as columns with upper bound 0 so that this count holds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::model::{MilpModel, ModelError, Sense, VarKind};
use crate::reduce::{hop_distances, COST_TOLERANCE};
use crate::verify::{SteinerTree, TreeError};

/// Which optional parts of the model are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    /// Fix `g_{len(r,v)−1,v} = 1`, and `g_{H−1,v} = 0` for zero-revenue nodes
    /// with `len(r,v) ≤ H−1`.
    pub use_strengthening_fixings: bool,
    /// At least one affordable root edge is used.
    pub use_root_cut: bool,
    /// Revenue nodes without outgoing arcs are placed at position `H`.
    pub use_leaf_symmetry: bool,
    /// Run the EURC reduction (and hop trimming) before building.
    pub apply_eurc: bool,
}

impl ModelVariant {
    pub const BASIC: ModelVariant =
        ModelVariant { use_strengthening_fixings: false, use_root_cut: false, use_leaf_symmetry: false, apply_eurc: false };
    pub const POP1: ModelVariant =
        ModelVariant { use_strengthening_fixings: true, use_root_cut: true, use_leaf_symmetry: false, apply_eurc: false };
    pub const POP1R: ModelVariant = ModelVariant { apply_eurc: true, ..Self::POP1 };
    pub const POP2: ModelVariant = ModelVariant { use_leaf_symmetry: true, ..Self::POP1 };
    pub const POP2R: ModelVariant = ModelVariant { apply_eurc: true, ..Self::POP2 };

    pub const NAMED: [(&'static str, ModelVariant); 5] =
        [("basic", Self::BASIC), ("pop1", Self::POP1), ("pop1r", Self::POP1R), ("pop2", Self::POP2), ("pop2r", Self::POP2R)];

    pub fn from_name(name: &str) -> Option<ModelVariant> {
        let lower = name.to_ascii_lowercase();
        Self::NAMED.iter().find(|(n, _)| *n == lower).map(|&(_, v)| v)
    }

    pub fn name(&self) -> String {
        match Self::NAMED.iter().find(|(_, v)| v == self) {
            Some((n, _)) => n.to_string(),
            None => format!(
                "custom(fix={},root={},leaf={},eurc={})",
                self.use_strengthening_fixings, self.use_root_cut, self.use_leaf_symmetry, self.apply_eurc
            ),
        }
    }
}

/// Maps model symbols to columns or constants. Nodes are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopVariableIndex {
    pub root: usize,
    pub node_count: usize,
    pub hop_limit: usize,
    /// `(i, v)` → column, for the `g` variables that survived elimination.
    pub g_index: BTreeMap<(usize, usize), usize>,
    /// Ordered arc `(u, v)` → column; two entries per edge.
    pub x_index: BTreeMap<(usize, usize), usize>,
    /// `(i, v)` → constant, for every eliminated or fixed `g`.
    pub fixed_g: BTreeMap<(usize, usize), u8>,
    /// Arcs whose column bounds collapsed to a single value.
    pub fixed_x: BTreeMap<(usize, usize), u8>,
}

impl PopVariableIndex {
    pub fn g_value(&self, i: usize, v: usize, assignment: &[f64]) -> f64 {
        match self.g_index.get(&(i, v)) {
            Some(&col) => assignment[col],
            None => f64::from(*self.fixed_g.get(&(i, v)).expect("every g is either a column or fixed")),
        }
    }

    pub fn arc_value(&self, u: usize, v: usize, assignment: &[f64]) -> f64 {
        self.x_index.get(&(u, v)).map_or(0.0, |&col| assignment[col])
    }

    /// `π_v = min { i : g_{i,v} = 0 }`.
    pub fn position(&self, v: usize, assignment: &[f64]) -> usize {
        (0..=self.hop_limit).find(|&i| self.g_value(i, v, assignment) < 0.5).unwrap_or(self.hop_limit)
    }

    pub fn positions(&self, assignment: &[f64]) -> Vec<usize> {
        (0..self.node_count).map(|v| self.position(v, assignment)).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("instance has no edges")]
    EmptyGraph,
    #[error("row {0} cannot be satisfied")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("assignment has {got} values, model has {expected} columns")]
    Length { got: usize, expected: usize },
    #[error("arc value {value} for x_{u}_{v} is not integral")]
    NotIntegral { u: usize, v: usize, value: f64 },
    #[error("selected arcs do not form a rooted tree: {0}")]
    NotATree(#[from] TreeError),
}

/// A value that is either a column or a constant once fixings are applied.
#[derive(Clone, Copy)]
enum Sym {
    Col(usize),
    Const(f64),
}

/// A row under construction: `Σ coeffs + constant (sense) rhs`.
struct Draft {
    name: String,
    terms: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
    active: bool,
}

impl Draft {
    fn new(name: String, parts: &[(Sym, f64)], sense: Sense, rhs: f64) -> Draft {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut rhs = rhs;
        for &(sym, coef) in parts {
            match sym {
                Sym::Const(c) => rhs -= coef * c,
                Sym::Col(j) => match terms.iter_mut().find(|(k, _)| *k == j) {
                    Some(t) => t.1 += coef,
                    None => terms.push((j, coef)),
                },
            }
        }
        terms.retain(|&(_, a)| a != 0.0);
        Draft { name, terms, sense, rhs, active: true }
    }
}

const ROW_TOL: f64 = 1e-9;

/// Folds fixed columns into right-hand sides, turns single-column rows into
/// bound changes and drops rows implied by bounds, until nothing changes.
fn presolve(drafts: &mut [Draft], lower: &mut [f64], upper: &mut [f64]) -> Result<(), BuildError> {
    loop {
        let mut changed = false;
        for d in drafts.iter_mut().filter(|d| d.active) {
            let mut rhs = d.rhs;
            d.terms.retain(|&(j, a)| {
                if lower[j] == upper[j] {
                    rhs -= a * lower[j];
                    false
                } else {
                    true
                }
            });
            d.rhs = rhs;

            match d.terms.as_slice() {
                [] => {
                    let ok = match d.sense {
                        Sense::Le => 0.0 <= d.rhs + ROW_TOL,
                        Sense::Ge => 0.0 >= d.rhs - ROW_TOL,
                        Sense::Eq => d.rhs.abs() <= ROW_TOL,
                    };
                    if !ok {
                        return Err(BuildError::Infeasible(d.name.clone()));
                    }
                    d.active = false;
                }
                &[(j, a)] => {
                    let bound = d.rhs / a;
                    // a·x ≥ rhs gives a lower bound when a > 0
                    let (raise_lower, cut_upper) = match (d.sense, a > 0.0) {
                        (Sense::Ge, true) | (Sense::Le, false) => (true, false),
                        (Sense::Le, true) | (Sense::Ge, false) => (false, true),
                        (Sense::Eq, _) => (true, true),
                    };
                    if raise_lower {
                        let lb = (bound - ROW_TOL).ceil();
                        if lb > lower[j] {
                            lower[j] = lb;
                            changed = true;
                        }
                    }
                    if cut_upper {
                        let ub = (bound + ROW_TOL).floor();
                        if ub < upper[j] {
                            upper[j] = ub;
                            changed = true;
                        }
                    }
                    if lower[j] > upper[j] {
                        return Err(BuildError::Infeasible(d.name.clone()));
                    }
                    d.active = false;
                }
                terms => {
                    let (mut min_act, mut max_act) = (0.0, 0.0);
                    for &(j, a) in terms {
                        if a > 0.0 {
                            min_act += a * lower[j];
                            max_act += a * upper[j];
                        } else {
                            min_act += a * upper[j];
                            max_act += a * lower[j];
                        }
                    }
                    let redundant = match d.sense {
                        Sense::Le => max_act <= d.rhs + ROW_TOL,
                        Sense::Ge => min_act >= d.rhs - ROW_TOL,
                        Sense::Eq => false,
                    };
                    if redundant {
                        d.active = false;
                    }
                }
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

/// Position fixings implied by the model (and, if enabled, by the
/// strengthening equations). Returns `(i, v) → 0/1`.
fn fixed_positions(instance: &Instance, variant: ModelVariant) -> BTreeMap<(usize, usize), u8> {
    let h = instance.hop_limit();
    let r = instance.root();
    let lens = hop_distances(instance);
    let mut fixed = BTreeMap::new();
    for v in 0..instance.node_count() {
        if v == r {
            for i in 0..=h {
                fixed.insert((i, v), 0);
            }
            continue;
        }
        fixed.insert((0, v), 1);
        fixed.insert((h, v), 0);
        if !variant.use_strengthening_fixings {
            continue;
        }
        if let Some(len) = lens[v] {
            if len <= h {
                for i in 0..len {
                    fixed.insert((i, v), 1);
                }
            }
            if instance.revenue(v) == 0.0 && len < h {
                fixed.insert((h - 1, v), 0);
            }
        }
    }
    fixed
}

/// Builds the model for `instance`. With `variant.apply_eurc` the caller is
/// expected to pass an already reduced instance.
pub fn build_pop(instance: &Instance, variant: ModelVariant) -> Result<(MilpModel, PopVariableIndex), BuildError> {
    if instance.edge_count() == 0 {
        return Err(BuildError::EmptyGraph);
    }
    let h = instance.hop_limit();
    let r = instance.root();
    let n = instance.node_count();
    let id = |v: usize| v + 1;

    let mut model = MilpModel::new(format!("{}-{}", instance.name(), variant.name()));
    let mut x_index = BTreeMap::new();
    for e in instance.edges() {
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            let col = model.add_column(format!("x_{}_{}", id(a), id(b)), VarKind::Binary, 0.0, 1.0)?;
            x_index.insert((a, b), col);
        }
    }

    let fixed_g = fixed_positions(instance, variant);
    let mut g_index = BTreeMap::new();
    for v in (0..n).filter(|&v| v != r) {
        for i in 1..h {
            if !fixed_g.contains_key(&(i, v)) {
                let col = model.add_column(format!("g_{}_{}", i, id(v)), VarKind::Binary, 0.0, 1.0)?;
                g_index.insert((i, v), col);
            }
        }
    }

    let g = |i: usize, v: usize| -> Sym {
        match g_index.get(&(i, v)) {
            Some(&col) => Sym::Col(col),
            None => Sym::Const(f64::from(fixed_g[&(i, v)])),
        }
    };
    let x = |u: usize, v: usize| Sym::Col(x_index[&(u, v)]);

    let mut drafts = Vec::new();

    for v in (0..n).filter(|&v| v != r) {
        for i in 1..h.saturating_sub(1) {
            drafts.push(Draft::new(format!("mono_{}_{}", i, id(v)), &[(g(i, v), 1.0), (g(i + 1, v), -1.0)], Sense::Ge, 0.0));
        }
    }

    for e in instance.edges() {
        for (u, v, tag) in [(e.u, e.v, "fwd"), (e.v, e.u, "rev")] {
            for i in 0..=h {
                // l_{u,i} + g_{i,v} − x_{u,v} ≥ 0 with l_{u,0} = 0 and l_{u,i} = 1 − g_{i−1,u}
                let mut parts = vec![(g(i, v), 1.0), (x(u, v), -1.0)];
                let mut rhs = 0.0;
                if i > 0 {
                    parts.push((g(i - 1, u), -1.0));
                    rhs = -1.0;
                }
                drafts.push(Draft::new(format!("{tag}_{}_{}_{}", i, id(e.u), id(e.v)), &parts, Sense::Ge, rhs));
            }
        }
    }

    for v in (0..n).filter(|&v| v != r) {
        let parts: Vec<(Sym, f64)> = instance.neighbors(v).iter().map(|&(u, _)| (x(u, v), 1.0)).collect();
        if !parts.is_empty() {
            drafts.push(Draft::new(format!("indeg_{}", id(v)), &parts, Sense::Le, 1.0));
        }
    }

    for v in (0..n).filter(|&v| v != r) {
        for &(w, _) in instance.neighbors(v) {
            let mut parts: Vec<(Sym, f64)> =
                instance.neighbors(v).iter().filter(|&&(u, _)| u != w).map(|&(u, _)| (x(u, v), 1.0)).collect();
            parts.push((x(v, w), -1.0));
            drafts.push(Draft::new(format!("outdeg_{}_{}", id(v), id(w)), &parts, Sense::Ge, 0.0));
        }
    }

    let budget_parts: Vec<(Sym, f64)> =
        instance.edges().iter().flat_map(|e| [(x(e.u, e.v), e.cost), (x(e.v, e.u), e.cost)]).collect();
    drafts.push(Draft::new("budget".into(), &budget_parts, Sense::Le, instance.budget()));

    if variant.use_root_cut {
        let cut: Vec<(Sym, f64)> = instance
            .neighbors(r)
            .iter()
            .filter(|&&(_, e)| instance.edges()[e].cost <= instance.budget() + COST_TOLERANCE)
            .map(|&(v, _)| (x(r, v), 1.0))
            .collect();
        if !cut.is_empty() {
            drafts.push(Draft::new("rootcut".into(), &cut, Sense::Ge, 1.0));
        }
    }

    if variant.use_leaf_symmetry {
        for v in (0..n).filter(|&v| v != r && instance.revenue(v) > 0.0) {
            let mut parts: Vec<(Sym, f64)> = instance.neighbors(v).iter().map(|&(w, _)| (x(v, w), 1.0)).collect();
            parts.push((g(h - 1, v), 1.0));
            drafts.push(Draft::new(format!("leafsym_{}", id(v)), &parts, Sense::Ge, 1.0));
        }
    }

    let mut lower: Vec<f64> = model.columns().iter().map(|c| c.lower).collect();
    let mut upper: Vec<f64> = model.columns().iter().map(|c| c.upper).collect();
    presolve(&mut drafts, &mut lower, &mut upper)?;
    for j in 0..model.column_count() {
        model.set_bounds(j, lower[j], upper[j])?;
    }
    for d in drafts.into_iter().filter(|d| d.active) {
        model.add_row(d.name, d.terms, d.sense, d.rhs)?;
    }

    let mut objective = Vec::new();
    for e in instance.edges() {
        for (u, v) in [(e.u, e.v), (e.v, e.u)] {
            let rev = instance.revenue(v);
            if v != r && rev != 0.0 {
                objective.push((x_index[&(u, v)], rev));
            }
        }
    }
    model.set_objective(objective, instance.revenue(r))?;

    let fixed_x = x_index
        .iter()
        .filter(|&(_, &col)| lower[col] == upper[col])
        .map(|(&arc, &col)| (arc, lower[col] as u8))
        .collect();

    let index = PopVariableIndex { root: r, node_count: n, hop_limit: h, g_index, x_index, fixed_g, fixed_x };
    Ok((model, index))
}

/// Reads the tree selected by an (integral) assignment.
pub fn decode_solution(instance: &Instance, index: &PopVariableIndex, assignment: &[f64]) -> Result<SteinerTree, DecodeError> {
    let expected = index.g_index.len() + index.x_index.len();
    if assignment.len() < expected {
        return Err(DecodeError::Length { got: assignment.len(), expected });
    }
    let mut arcs = Vec::new();
    for (&(u, v), &col) in &index.x_index {
        let value = assignment[col];
        if (value - value.round()).abs() > 1e-6 {
            return Err(DecodeError::NotIntegral { u, v, value });
        }
        if value >= 0.5 {
            arcs.push((u, v));
        }
    }
    Ok(SteinerTree::from_arcs(instance, &arcs)?)
}

/// The assignment that represents `tree` in the model, or `None` when the
/// tree cannot be expressed (for instance, it violates the root cut).
///
/// Zero-revenue leaves are kept at their depth when that is feasible and
/// pruned otherwise; either way the objective is unchanged.
pub fn encode_tree(instance: &Instance, index: &PopVariableIndex, model: &MilpModel, tree: &SteinerTree) -> Option<Vec<f64>> {
    encode_with(instance, index, model, tree, false).or_else(|| encode_with(instance, index, model, tree, true))
}

fn encode_with(instance: &Instance, index: &PopVariableIndex, model: &MilpModel, tree: &SteinerTree, prune: bool) -> Option<Vec<f64>> {
    let h = index.hop_limit;
    let r = index.root;
    let n = instance.node_count();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    for &(u, v) in &tree.arcs {
        parent[v] = Some(u);
    }
    let mut in_tree = vec![false; n];
    in_tree[r] = true;
    for &(u, v) in &tree.arcs {
        in_tree[u] = true;
        in_tree[v] = true;
    }
    let mut children = vec![0usize; n];
    for &(u, _) in &tree.arcs {
        children[u] += 1;
    }
    // prune zero-revenue leaves until none remain
    let mut stack: Vec<usize> =
        if prune { (0..n).filter(|&v| v != r && in_tree[v] && children[v] == 0).collect() } else { Vec::new() };
    while let Some(v) = stack.pop() {
        if instance.revenue(v) == 0.0 && children[v] == 0 && in_tree[v] && v != r {
            in_tree[v] = false;
            if let Some(p) = parent[v] {
                children[p] -= 1;
                if children[p] == 0 {
                    stack.push(p);
                }
            }
        }
    }

    let depth = &tree.depth;
    let lens = hop_distances(instance);
    let mut pos = vec![0usize; n];
    for v in (0..n).filter(|&v| v != r) {
        pos[v] = if in_tree[v] {
            if children[v] > 0 || instance.revenue(v) == 0.0 {
                depth[v]?
            } else {
                h
            }
        } else if instance.revenue(v) > 0.0 {
            h
        } else {
            lens[v].map_or(h, |l| l.clamp(1, h))
        };
    }

    let mut x = vec![0.0; model.column_count()];
    for (&(u, v), &col) in &index.x_index {
        if in_tree[v] && parent[v] == Some(u) {
            x[col] = 1.0;
        }
    }
    for (&(i, v), &col) in &index.g_index {
        x[col] = if i < pos[v] { 1.0 } else { 0.0 };
    }
    model.is_feasible(&x, 1e-9).then_some(x)
}

/// A tree that is feasible for every variant's model: the root alone, or when
/// the root cut applies, the single affordable root edge of highest revenue.
pub fn starting_tree(instance: &Instance, variant: ModelVariant) -> SteinerTree {
    let r = instance.root();
    if variant.use_root_cut {
        let best = instance
            .neighbors(r)
            .iter()
            .filter(|&&(_, e)| instance.edges()[e].cost <= instance.budget() + COST_TOLERANCE)
            .map(|&(v, _)| v)
            .fold(None, |best: Option<usize>, v| match best {
                Some(b) if instance.revenue(b) >= instance.revenue(v) => Some(b),
                _ => Some(v),
            });
        if let Some(v) = best {
            return SteinerTree::from_arcs(instance, &[(r, v)]).expect("a single root arc is a tree");
        }
    }
    SteinerTree::root_only(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Edge;

    fn star() -> Instance {
        let edges = vec![Edge { u: 0, v: 1, cost: 1.0 }, Edge { u: 0, v: 2, cost: 1.0 }];
        Instance::new("star", 3, edges, vec![0.0, 5.0, 3.0], 0, 1.0, 1).unwrap()
    }

    fn binary_vectors(len: usize) -> impl Iterator<Item = Vec<f64>> {
        (0u64..1 << len).map(move |mask| (0..len).map(|k| ((mask >> k) & 1) as f64).collect())
    }

    #[test]
    fn variant_names() {
        for (name, v) in ModelVariant::NAMED {
            assert_eq!(ModelVariant::from_name(name), Some(v));
            assert_eq!(v.name(), name);
        }
        assert_eq!(ModelVariant::from_name("POP2R"), Some(ModelVariant::POP2R));
        assert!(ModelVariant::POP2.use_leaf_symmetry && !ModelVariant::POP1.use_leaf_symmetry);
    }

    #[test]
    fn hop_one_has_only_arc_columns() {
        let (model, index) = build_pop(&star(), ModelVariant::BASIC).unwrap();
        assert_eq!(model.column_count(), 4);
        assert!(index.g_index.is_empty());
        // arcs into the root are forced to zero
        assert_eq!(index.fixed_x.get(&(1, 0)), Some(&0));
        assert_eq!(index.fixed_x.get(&(2, 0)), Some(&0));
        assert!(index.fixed_x.get(&(0, 1)).is_none());
    }

    #[test]
    fn star_optimum_by_enumeration() {
        // exhaustive search over every binary assignment of the model
        for variant in [ModelVariant::BASIC, ModelVariant::POP1, ModelVariant::POP2] {
            let inst = star();
            let (model, _) = build_pop(&inst, variant).unwrap();
            let best = binary_vectors(model.column_count())
                .filter(|x| model.is_feasible(x, 1e-9))
                .map(|x| model.objective_value(&x))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(best, 5.0, "{}", variant.name());
        }
    }

    #[test]
    fn every_feasible_assignment_is_a_tree() {
        let edges = vec![
            Edge { u: 0, v: 1, cost: 1.0 },
            Edge { u: 1, v: 2, cost: 1.0 },
            Edge { u: 0, v: 2, cost: 2.0 },
            Edge { u: 2, v: 3, cost: 1.0 },
        ];
        let inst = Instance::new("sq", 4, edges, vec![1.0, 2.0, 0.0, 4.0], 0, 3.0, 2).unwrap();
        for variant in [ModelVariant::BASIC, ModelVariant::POP2] {
            let (model, index) = build_pop(&inst, variant).unwrap();
            assert!(model.column_count() <= 16);
            let mut feasible = 0;
            let mut best = f64::NEG_INFINITY;
            for x in binary_vectors(model.column_count()).filter(|x| model.is_feasible(x, 1e-9)) {
                feasible += 1;
                let tree = decode_solution(&inst, &index, &x).expect("feasible assignments decode");
                assert!(tree.total_cost <= inst.budget());
                for v in tree.nodes() {
                    let pi = index.position(v, &x);
                    assert!(tree.depth[v].unwrap() <= pi && pi <= 2);
                }
                assert_eq!(tree.objective, model.objective_value(&x));
                best = best.max(tree.objective);
            }
            assert!(feasible > 0);
            // 0-1-2-3 costs 3 with depth 3 > H; 0-2-3 costs 3 and collects 1+0+4, plus 0-1 would exceed budget
            assert_eq!(best, 1.0 + 2.0 + 4.0 - 2.0, "{}", variant.name());
        }
    }

    #[test]
    fn basic_column_count_law() {
        let edges = vec![
            Edge { u: 0, v: 1, cost: 1.0 },
            Edge { u: 1, v: 2, cost: 1.0 },
            Edge { u: 2, v: 3, cost: 1.0 },
            Edge { u: 3, v: 4, cost: 1.0 },
        ];
        let inst = Instance::new("p", 5, edges, vec![0.0, 1.0, 0.0, 1.0, 1.0], 0, 3.0, 4).unwrap();
        let (model, index) = build_pop(&inst, ModelVariant::BASIC).unwrap();
        assert_eq!(model.column_count(), 3 * 4 + 2 * 4);
        assert_eq!(index.g_index.len() + index.fixed_g.len(), 5 * 5);
        let (pop1, _) = build_pop(&inst, ModelVariant::POP1).unwrap();
        assert!(pop1.column_count() < model.column_count());
    }

    #[test]
    fn strengthening_fixings() {
        // path 0-1-2-3 with H = 3; node 2 has zero revenue
        let edges = vec![Edge { u: 0, v: 1, cost: 1.0 }, Edge { u: 1, v: 2, cost: 1.0 }, Edge { u: 2, v: 3, cost: 1.0 }];
        let inst = Instance::new("p", 4, edges, vec![0.0, 1.0, 0.0, 1.0], 0, 3.0, 3).unwrap();
        let (_, index) = build_pop(&inst, ModelVariant::POP1).unwrap();
        // len(r,3) = 3: g_{0..2,3} = 1
        for i in 0..3 {
            assert_eq!(index.fixed_g.get(&(i, 3)), Some(&1));
        }
        // len(r,2) = 2 ≤ H−1 and zero revenue: g_{1,2} = 1 and g_{2,2} = 0
        assert_eq!(index.fixed_g.get(&(1, 2)), Some(&1));
        assert_eq!(index.fixed_g.get(&(2, 2)), Some(&0));
        // node 1 keeps g_{1,1}, g_{2,1}
        assert!(index.g_index.contains_key(&(1, 1)) && index.g_index.contains_key(&(2, 1)));
    }

    #[test]
    fn root_cut_and_leaf_rows() {
        let (model, _) = build_pop(&star(), ModelVariant::POP2).unwrap();
        let cut = model.rows().iter().find(|r| r.name == "rootcut").expect("root cut emitted");
        assert_eq!(cut.coeffs.len(), 2);
        // H = 1 makes the leaf rows tautologies
        assert!(model.rows().iter().all(|r| !r.name.starts_with("leafsym")));

        let expensive = star().with_budget(0.5).unwrap();
        let (model, _) = build_pop(&expensive, ModelVariant::POP2).unwrap();
        assert!(model.rows().iter().all(|r| r.name != "rootcut"));
    }

    #[test]
    fn objective_layout() {
        let inst = Instance::new("s", 3, vec![Edge { u: 0, v: 1, cost: 1.0 }, Edge { u: 1, v: 2, cost: 1.0 }], vec![2.0, 5.0, 3.0], 0, 1.0, 2)
            .unwrap();
        let (model, index) = build_pop(&inst, ModelVariant::BASIC).unwrap();
        assert_eq!(model.objective().constant, 2.0);
        let c = model.objective_dense();
        assert_eq!(c[index.x_index[&(0, 1)]], 5.0);
        assert_eq!(c[index.x_index[&(1, 0)]], 0.0, "arcs into the root earn nothing");
        assert_eq!(c[index.x_index[&(1, 2)]], 3.0);
        assert_eq!(c[index.x_index[&(2, 1)]], 5.0);
    }

    #[test]
    fn decode_edge_cases() {
        let inst = star();
        let (model, index) = build_pop(&inst, ModelVariant::BASIC).unwrap();
        let zero = vec![0.0; model.column_count()];
        let tree = decode_solution(&inst, &index, &zero).unwrap();
        assert!(tree.arcs.is_empty());
        assert_eq!(tree.objective, 0.0);

        let mut one = zero.clone();
        one[index.x_index[&(0, 1)]] = 1.0;
        let tree = decode_solution(&inst, &index, &one).unwrap();
        assert_eq!(tree.arcs, vec![(0, 1)]);
        assert_eq!(tree.depth[1], Some(1));
        assert_eq!(tree.objective, 5.0);

        let mut frac = zero.clone();
        frac[0] = 0.5;
        assert!(matches!(decode_solution(&inst, &index, &frac), Err(DecodeError::NotIntegral { .. })));
    }

    #[test]
    fn decode_rejects_two_parents() {
        let edges = vec![Edge { u: 0, v: 1, cost: 1.0 }, Edge { u: 0, v: 2, cost: 1.0 }, Edge { u: 1, v: 2, cost: 1.0 }];
        let inst = Instance::new("t", 3, edges, vec![0.0; 3], 0, 9.0, 2).unwrap();
        let (model, index) = build_pop(&inst, ModelVariant::BASIC).unwrap();
        let mut x = vec![0.0; model.column_count()];
        x[index.x_index[&(0, 1)]] = 1.0;
        x[index.x_index[&(0, 2)]] = 1.0;
        x[index.x_index[&(1, 2)]] = 1.0;
        assert!(matches!(decode_solution(&inst, &index, &x), Err(DecodeError::NotATree(TreeError::MultipleParents(2)))));
    }

    #[test]
    fn starting_trees_are_model_feasible() {
        for variant in [ModelVariant::BASIC, ModelVariant::POP1, ModelVariant::POP2] {
            let inst = star();
            let (model, index) = build_pop(&inst, variant).unwrap();
            let tree = starting_tree(&inst, variant);
            let x = encode_tree(&inst, &index, &model, &tree).expect("starting tree encodes");
            assert_eq!(model.objective_value(&x), tree.objective);
        }
    }

    #[test]
    fn empty_graph_is_an_error() {
        let inst = Instance::new("e", 2, vec![], vec![1.0, 1.0], 0, 1.0, 2).unwrap();
        assert_eq!(build_pop(&inst, ModelVariant::POP1).unwrap_err(), BuildError::EmptyGraph);
    }
}
