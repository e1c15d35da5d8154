//! Root distance tables and the graph reductions applied before model building.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::Serialize;

use crate::instance::{Edge, Instance};

/// Absolute slack for cost comparisons; exact on integral data.
pub const COST_TOLERANCE: f64 = 1e-9;

/// Shortest paths from the root: one weighted shortest-path tree plus hop
/// distances from a breadth-first search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceTable {
    pub root: usize,
    /// `f64::INFINITY` for unreachable nodes.
    pub weighted_cost: Vec<f64>,
    pub weighted_pred: Vec<Option<usize>>,
    /// Edge count of the stored weighted path.
    pub weighted_len: Vec<Option<usize>>,
    /// Hop distance from the root.
    pub unweighted_len: Vec<Option<usize>>,
}

impl DistanceTable {
    pub fn is_reachable(&self, v: usize) -> bool {
        self.unweighted_len[v].is_some()
    }

    /// The stored weighted path from the root to `v`, root first.
    pub fn weighted_path(&self, v: usize) -> Option<Vec<usize>> {
        self.weighted_len[v]?;
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.weighted_pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    len: usize,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, len, node)
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.len.cmp(&self.len))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from the root with deterministic tie-breaking (equal cost: fewer
/// edges, then smaller predecessor id), plus BFS hop distances.
pub fn shortest_paths(instance: &Instance) -> DistanceTable {
    let n = instance.node_count();
    let root = instance.root();
    let mut cost = vec![f64::INFINITY; n];
    let mut len: Vec<Option<usize>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();

    cost[root] = 0.0;
    len[root] = Some(0);
    heap.push(HeapEntry { cost: 0.0, len: 0, node: root });
    while let Some(HeapEntry { node: u, .. }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        let u_len = len[u].expect("queued nodes have a length");
        for &(v, e) in instance.neighbors(u) {
            if settled[v] {
                continue;
            }
            let cand_cost = cost[u] + instance.edges()[e].cost;
            let cand_len = u_len + 1;
            let better = match len[v] {
                None => true,
                Some(v_len) => {
                    if cand_cost < cost[v] - COST_TOLERANCE {
                        true
                    } else if cand_cost <= cost[v] + COST_TOLERANCE {
                        (cand_len, u) < (v_len, pred[v].unwrap_or(usize::MAX))
                    } else {
                        false
                    }
                }
            };
            if better {
                cost[v] = cand_cost;
                len[v] = Some(cand_len);
                pred[v] = Some(u);
                heap.push(HeapEntry { cost: cand_cost, len: cand_len, node: v });
            }
        }
    }

    DistanceTable { root, weighted_cost: cost, weighted_pred: pred, weighted_len: len, unweighted_len: hop_distances(instance) }
}

/// Breadth-first hop distances from the root.
pub fn hop_distances(instance: &Instance) -> Vec<Option<usize>> {
    let mut dist = vec![None; instance.node_count()];
    let mut queue = VecDeque::new();
    dist[instance.root()] = Some(0);
    queue.push_back(instance.root());
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or_default();
        for &(v, _) in instance.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    /// Both endpoints have cheap, short enough root paths.
    Eurc,
    /// An endpoint lies beyond the hop limit.
    TrimmedNode,
}

/// A removed edge. Node ids are 1-based file ids of the input instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovedEdge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSize {
    pub nodes: usize,
    pub edges: usize,
}

/// What a reduction did. Node ids are 1-based ids of the input instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionLog {
    pub removed_edges: Vec<RemovedEdge>,
    pub trimmed_nodes: Vec<usize>,
    /// For each node of the reduced instance, its id in the input instance.
    pub kept_nodes: Vec<usize>,
    pub original_sizes: GraphSize,
    pub reduced_sizes: GraphSize,
}

impl ReductionLog {
    pub fn identity(instance: &Instance) -> Self {
        let size = GraphSize { nodes: instance.node_count(), edges: instance.edge_count() };
        ReductionLog {
            removed_edges: Vec::new(),
            trimmed_nodes: Vec::new(),
            kept_nodes: (1..=instance.node_count()).collect(),
            original_sizes: size.clone(),
            reduced_sizes: size,
        }
    }

    pub fn eurc_removals(&self) -> usize {
        self.removed_edges.iter().filter(|e| e.reason == RemovalReason::Eurc).count()
    }

    /// Chains `self` (applied first) with `next` (applied to its output).
    pub fn then(mut self, next: ReductionLog) -> ReductionLog {
        let map = |id: usize| self.kept_nodes[id - 1];
        let mut removed: Vec<RemovedEdge> = next
            .removed_edges
            .iter()
            .map(|e| RemovedEdge { u: map(e.u), v: map(e.v), cost: e.cost, reason: e.reason })
            .collect();
        let trimmed: Vec<usize> = next.trimmed_nodes.iter().map(|&t| map(t)).collect();
        let kept: Vec<usize> = next.kept_nodes.iter().map(|&k| map(k)).collect();
        self.removed_edges.append(&mut removed);
        self.trimmed_nodes.extend(trimmed);
        self.kept_nodes = kept;
        self.reduced_sizes = next.reduced_sizes;
        self
    }
}

/// Removes every non-root edge `uv` whose endpoints both have stored weighted
/// root paths that are no more expensive than `uv` and no longer (in edges)
/// than the hop distance of the opposite endpoint plus one.
///
/// Edges are visited once in ascending `(u, v)` order; `distances` is not
/// recomputed between removals.
pub fn eurc_reduce(instance: &Instance, distances: &DistanceTable) -> (Instance, ReductionLog) {
    let root = instance.root();
    let mut log = ReductionLog::identity(instance);
    let mut kept = Vec::with_capacity(instance.edge_count());

    let has_alternate = |e: &Edge| -> bool {
        let (u, v) = (e.u, e.v);
        if u == root || v == root {
            return false;
        }
        let (Some(wl_u), Some(wl_v), Some(hl_u), Some(hl_v)) =
            (distances.weighted_len[u], distances.weighted_len[v], distances.unweighted_len[u], distances.unweighted_len[v])
        else {
            return false;
        };
        let via_v = distances.weighted_cost[v] <= e.cost + COST_TOLERANCE && wl_v <= hl_u + 1;
        let via_u = distances.weighted_cost[u] <= e.cost + COST_TOLERANCE && wl_u <= hl_v + 1;
        via_v && via_u
    };

    for e in instance.edges() {
        if has_alternate(e) {
            log.removed_edges.push(RemovedEdge { u: e.u + 1, v: e.v + 1, cost: e.cost, reason: RemovalReason::Eurc });
        } else {
            kept.push(*e);
        }
    }
    let reduced = instance.with_edges(kept).expect("a subset of valid edges stays valid");
    log.reduced_sizes = GraphSize { nodes: reduced.node_count(), edges: reduced.edge_count() };
    (reduced, log)
}

/// Deletes every non-root node whose hop distance from the root exceeds the
/// hop limit (including unreachable nodes) and renumbers the survivors in
/// their original order.
pub fn trim_unreachable(instance: &Instance, distances: &DistanceTable) -> (Instance, ReductionLog) {
    let h = instance.hop_limit();
    let n = instance.node_count();
    let keep: Vec<bool> =
        (0..n).map(|v| v == instance.root() || matches!(distances.unweighted_len[v], Some(d) if d <= h)).collect();

    let mut new_id = vec![usize::MAX; n];
    let mut kept_nodes = Vec::new();
    let mut trimmed_nodes = Vec::new();
    for v in 0..n {
        if keep[v] {
            new_id[v] = kept_nodes.len();
            kept_nodes.push(v + 1);
        } else {
            trimmed_nodes.push(v + 1);
        }
    }

    let mut removed_edges = Vec::new();
    let mut edges = Vec::new();
    for e in instance.edges() {
        if keep[e.u] && keep[e.v] {
            edges.push(Edge { u: new_id[e.u], v: new_id[e.v], cost: e.cost });
        } else {
            removed_edges.push(RemovedEdge { u: e.u + 1, v: e.v + 1, cost: e.cost, reason: RemovalReason::TrimmedNode });
        }
    }
    let revenues: Vec<f64> = (0..n).filter(|&v| keep[v]).map(|v| instance.revenue(v)).collect();
    let reduced = Instance::new(
        instance.name(),
        kept_nodes.len(),
        edges,
        revenues,
        new_id[instance.root()],
        instance.budget(),
        h,
    )
    .expect("an induced subgraph of a valid instance is valid");

    let log = ReductionLog {
        removed_edges,
        trimmed_nodes,
        kept_nodes,
        original_sizes: GraphSize { nodes: n, edges: instance.edge_count() },
        reduced_sizes: GraphSize { nodes: reduced.node_count(), edges: reduced.edge_count() },
    };
    (reduced, log)
}

/// EURC followed by hop trimming, with distances recomputed in between.
pub fn reduce_all(instance: &Instance) -> (Instance, ReductionLog) {
    let distances = shortest_paths(instance);
    let (after_eurc, eurc_log) = eurc_reduce(instance, &distances);
    let distances = shortest_paths(&after_eurc);
    let (trimmed, trim_log) = trim_unreachable(&after_eurc, &distances);
    (trimmed, eurc_log.then(trim_log))
}
