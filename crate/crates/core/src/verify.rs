//! Rooted trees, an independent feasibility checker, solution files and an
//! exhaustive oracle for small instances.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;

/// Slack allowed when comparing a tree's cost to the budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("arc ({0}, {1}) is not an edge of the graph")]
    UnknownArc(usize, usize),
    #[error("node {0} has more than one parent")]
    MultipleParents(usize),
    #[error("the root has a parent")]
    RootHasParent,
    #[error("node {0} is not reachable from the root")]
    Disconnected(usize),
}

/// An arborescence rooted at the instance root, with 0-based node ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinerTree {
    /// Arcs `(parent, child)`, sorted.
    pub arcs: Vec<(usize, usize)>,
    /// Depth of each node; `None` for nodes outside the tree.
    pub depth: Vec<Option<usize>>,
    pub objective: f64,
    pub total_cost: f64,
}

impl SteinerTree {
    pub fn root_only(instance: &Instance) -> SteinerTree {
        let mut depth = vec![None; instance.node_count()];
        depth[instance.root()] = Some(0);
        SteinerTree { arcs: Vec::new(), depth, objective: instance.revenue(instance.root()), total_cost: 0.0 }
    }

    /// Builds a tree from its arcs, rejecting anything that is not an
    /// arborescence rooted at the instance root. Budget and hop limit are not
    /// checked here; see [`verify_solution`].
    pub fn from_arcs(instance: &Instance, arcs: &[(usize, usize)]) -> Result<SteinerTree, TreeError> {
        let n = instance.node_count();
        let r = instance.root();
        let mut parent = vec![None; n];
        let mut total_cost = 0.0;
        for &(u, v) in arcs {
            let e = if u < n && v < n { instance.edge_index(u, v) } else { None };
            let Some(e) = e else {
                return Err(TreeError::UnknownArc(u, v));
            };
            if v == r {
                return Err(TreeError::RootHasParent);
            }
            if parent[v].is_some() {
                return Err(TreeError::MultipleParents(v));
            }
            parent[v] = Some(u);
            total_cost += instance.edges()[e].cost;
        }
        let depth = depths_from_parents(instance, &parent);
        for &(_, v) in arcs {
            if depth[v].is_none() {
                return Err(TreeError::Disconnected(v));
            }
        }
        let objective = depth.iter().enumerate().filter(|(_, d)| d.is_some()).map(|(v, _)| instance.revenue(v)).sum();
        let mut arcs = arcs.to_vec();
        arcs.sort_unstable();
        Ok(SteinerTree { arcs, depth, objective, total_cost })
    }

    /// Nodes of the tree, root included, in increasing id order.
    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.depth.iter().enumerate().filter(|(_, d)| d.is_some()).map(|(v, _)| v)
    }

    pub fn node_count(&self) -> usize {
        self.nodes().count()
    }

    /// Renames nodes through `map` (reduced id to original id) into a tree
    /// of `instance`.
    pub fn relabel(&self, instance: &Instance, map: &[usize]) -> Result<SteinerTree, TreeError> {
        let arcs: Vec<(usize, usize)> = self.arcs.iter().map(|&(u, v)| (map[u], map[v])).collect();
        SteinerTree::from_arcs(instance, &arcs)
    }
}

fn depths_from_parents(instance: &Instance, parent: &[Option<usize>]) -> Vec<Option<usize>> {
    let n = instance.node_count();
    let mut children = vec![Vec::new(); n];
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(v);
        }
    }
    let mut depth = vec![None; n];
    depth[instance.root()] = Some(0);
    let mut queue = VecDeque::from([instance.root()]);
    while let Some(u) = queue.pop_front() {
        for &w in &children[u] {
            if depth[w].is_none() {
                depth[w] = Some(depth[u].unwrap() + 1);
                queue.push_back(w);
            }
        }
    }
    depth
}

/// A single broken requirement. Node ids are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownArc { u: usize, v: usize },
    MultipleParents { node: usize },
    RootHasParent,
    Cycle { node: usize },
    Disconnected { node: usize },
    HopLimitExceeded { node: usize, depth: usize, limit: usize },
    BudgetExceeded { cost: f64, budget: f64 },
    ObjectiveMismatch { claimed: f64, actual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub feasible: bool,
    pub objective: f64,
    pub cost: f64,
    pub violations: Vec<Violation>,
}

/// Checks `arcs` against the instance and recomputes the objective from
/// scratch. Every violated requirement is listed, not only the first.
pub fn verify_arcs(instance: &Instance, arcs: &[(usize, usize)], claimed_objective: Option<f64>) -> VerifyReport {
    let n = instance.node_count();
    let r = instance.root();
    let mut violations = Vec::new();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut cost = 0.0;
    for &(u, v) in arcs {
        let e = if u < n && v < n { instance.edge_index(u, v) } else { None };
        let Some(e) = e else {
            violations.push(Violation::UnknownArc { u, v });
            continue;
        };
        cost += instance.edges()[e].cost;
        if v == r {
            violations.push(Violation::RootHasParent);
            continue;
        }
        if parent[v].is_some() {
            violations.push(Violation::MultipleParents { node: v });
            continue;
        }
        parent[v] = Some(u);
    }

    // walk every parent chain; one that never reaches the root is either a
    // cycle or hangs off a node outside the tree
    let mut state = vec![0u8; n]; // 0 unseen, 1 on path, 2 done
    let mut depth: Vec<Option<usize>> = vec![None; n];
    depth[r] = Some(0);
    state[r] = 2;
    let mut reported_cycle = vec![false; n];
    for start in 0..n {
        if parent[start].is_none() || state[start] == 2 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        let mut hit_cycle = None;
        loop {
            if state[cur] == 2 {
                break;
            }
            if state[cur] == 1 {
                hit_cycle = Some(cur);
                break;
            }
            state[cur] = 1;
            path.push(cur);
            match parent[cur] {
                Some(p) => cur = p,
                None => break,
            }
        }
        if let Some(c) = hit_cycle {
            let smallest = {
                let pos = path.iter().position(|&x| x == c).unwrap();
                *path[pos..].iter().min().unwrap()
            };
            if !reported_cycle[smallest] {
                reported_cycle[smallest] = true;
                violations.push(Violation::Cycle { node: smallest });
            }
        }
        // assign depths back along the path where the top is rooted
        let base = if hit_cycle.is_none() && state[cur] == 2 { depth[cur] } else { None };
        for (k, &v) in path.iter().rev().enumerate() {
            depth[v] = base.map(|b| b + k + 1);
            state[v] = 2;
        }
    }
    // nodes on or below a cycle are reported once through the cycle
    for v in 0..n {
        if parent[v].is_none() || depth[v].is_some() {
            continue;
        }
        let mut seen = vec![false; n];
        let mut cur = v;
        let mut on_cycle = false;
        while let Some(q) = parent[cur] {
            if seen[cur] {
                on_cycle = true;
                break;
            }
            seen[cur] = true;
            cur = q;
        }
        if !on_cycle {
            violations.push(Violation::Disconnected { node: v });
        }
    }

    let h = instance.hop_limit();
    for (v, d) in depth.iter().enumerate() {
        if let Some(d) = *d {
            if d > h {
                violations.push(Violation::HopLimitExceeded { node: v, depth: d, limit: h });
            }
        }
    }
    if cost > instance.budget() + BUDGET_TOLERANCE {
        violations.push(Violation::BudgetExceeded { cost, budget: instance.budget() });
    }
    let objective: f64 = depth.iter().enumerate().filter(|(_, d)| d.is_some()).map(|(v, _)| instance.revenue(v)).sum();
    if let Some(claimed) = claimed_objective {
        if (claimed - objective).abs() > 1e-6 * objective.abs().max(1.0) {
            violations.push(Violation::ObjectiveMismatch { claimed, actual: objective });
        }
    }
    VerifyReport { feasible: violations.is_empty(), objective, cost, violations }
}

pub fn verify_solution(instance: &Instance, tree: &SteinerTree) -> VerifyReport {
    verify_arcs(instance, &tree.arcs, Some(tree.objective))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BruteForceError {
    #[error("instance too large for exhaustive search: {nodes} nodes, {edges} edges")]
    InstanceTooLarge { nodes: usize, edges: usize },
}

pub const BRUTE_FORCE_MAX_NODES: usize = 12;
pub const BRUTE_FORCE_MAX_EDGES: usize = 24;

/// Enumerates every edge subset and returns the best feasible tree.
/// Ties go to the lexicographically smallest sorted arc list.
pub fn brute_force(instance: &Instance) -> Result<SteinerTree, BruteForceError> {
    let n = instance.node_count();
    let m = instance.edge_count();
    if n > BRUTE_FORCE_MAX_NODES || m > BRUTE_FORCE_MAX_EDGES {
        return Err(BruteForceError::InstanceTooLarge { nodes: n, edges: m });
    }
    let mut search = Search { instance, chosen: Vec::new(), best: SteinerTree::root_only(instance) };
    search.recurse(0, 0.0);
    Ok(search.best)
}

struct Search<'a> {
    instance: &'a Instance,
    chosen: Vec<usize>,
    best: SteinerTree,
}

impl Search<'_> {
    fn recurse(&mut self, next: usize, cost: f64) {
        let inst = self.instance;
        if next == inst.edge_count() {
            self.evaluate();
            return;
        }
        self.recurse(next + 1, cost);
        let c = inst.edges()[next].cost;
        if self.chosen.len() + 1 < inst.node_count() && cost + c <= inst.budget() + BUDGET_TOLERANCE {
            self.chosen.push(next);
            self.recurse(next + 1, cost + c);
            self.chosen.pop();
        }
    }

    fn evaluate(&mut self) {
        if self.chosen.is_empty() {
            return;
        }
        let inst = self.instance;
        let n = inst.node_count();
        let mut adj = vec![Vec::new(); n];
        for &e in &self.chosen {
            let edge = inst.edges()[e];
            adj[edge.u].push(edge.v);
            adj[edge.v].push(edge.u);
        }
        let r = inst.root();
        let mut depth = vec![None; n];
        depth[r] = Some(0usize);
        let mut arcs = Vec::with_capacity(self.chosen.len());
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if depth[w].is_none() {
                    depth[w] = Some(depth[u].unwrap() + 1);
                    arcs.push((u, w));
                    queue.push_back(w);
                }
            }
        }
        // a tree on the reached nodes uses exactly all chosen edges
        if arcs.len() != self.chosen.len() {
            return;
        }
        if depth.iter().flatten().any(|&d| d > inst.hop_limit()) {
            return;
        }
        let objective: f64 = depth.iter().enumerate().filter(|(_, d)| d.is_some()).map(|(v, _)| inst.revenue(v)).sum();
        arcs.sort_unstable();
        let better = objective > self.best.objective || (objective == self.best.objective && arcs < self.best.arcs);
        if better {
            let total_cost = self.chosen.iter().map(|&e| inst.edges()[e].cost).sum();
            self.best = SteinerTree { arcs, depth, objective, total_cost };
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolutionParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// A solution file: an optional claimed objective and 0-based arcs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionFile {
    pub objective: Option<f64>,
    pub arcs: Vec<(usize, usize)>,
}

/// Parses `OBJ <value>` and `ARC <u> <v>` lines (node ids 1-based).
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_solution(text: &str) -> Result<SolutionFile, SolutionParseError> {
    let mut out = SolutionFile::default();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let bad = |message: String| SolutionParseError::Malformed { line, message };
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match parts[0].to_ascii_uppercase().as_str() {
            "OBJ" => {
                if parts.len() != 2 {
                    return Err(bad("expected OBJ <value>".into()));
                }
                let v: f64 = parts[1].parse().map_err(|_| bad(format!("bad objective {:?}", parts[1])))?;
                if !v.is_finite() {
                    return Err(bad("objective must be finite".into()));
                }
                if out.objective.is_some() {
                    return Err(bad("duplicate OBJ line".into()));
                }
                out.objective = Some(v);
            }
            "ARC" => {
                if parts.len() != 3 {
                    return Err(bad("expected ARC <u> <v>".into()));
                }
                let id = |s: &str| -> Result<usize, SolutionParseError> {
                    match s.parse::<usize>() {
                        Ok(x) if x >= 1 => Ok(x - 1),
                        _ => Err(bad(format!("bad node id {s:?}"))),
                    }
                };
                out.arcs.push((id(parts[1])?, id(parts[2])?));
            }
            other => return Err(bad(format!("unknown keyword {other:?}"))),
        }
    }
    Ok(out)
}

pub fn write_solution(tree: &SteinerTree) -> String {
    let mut s = String::new();
    writeln!(s, "OBJ {}", tree.objective).unwrap();
    for &(u, v) in &tree.arcs {
        writeln!(s, "ARC {} {}", u + 1, v + 1).unwrap();
    }
    s
}
