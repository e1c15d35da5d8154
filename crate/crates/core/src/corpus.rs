//! Seeded random instances for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{Edge, Instance};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_hop: usize,
    /// Upper bound on edges per instance, beyond the spanning tree.
    pub max_edges: usize,
    pub max_cost: u32,
    pub max_revenue: u32,
}

impl CorpusSpec {
    /// Instances small enough for exhaustive search.
    pub const SMALL: CorpusSpec = CorpusSpec { min_nodes: 3, max_nodes: 10, max_hop: 4, max_edges: 18, max_cost: 9, max_revenue: 10 };
}

/// A connected random graph with integer data. The same `(spec, seed)` always
/// yields the same instance.
pub fn random_instance(spec: &CorpusSpec, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(spec.min_nodes..=spec.max_nodes);
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    // random spanning tree
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for k in 1..n {
        let u = order[rng.gen_range(0..k)];
        let v = order[k];
        present.insert((u.min(v), u.max(v)));
        edges.push((u, v));
    }
    let max_edges = spec.max_edges.min(n * (n - 1) / 2).max(n - 1);
    let target = rng.gen_range(n - 1..=max_edges);
    let mut attempts = 0;
    while edges.len() < target && attempts < 1000 {
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && present.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    let edges: Vec<Edge> = edges.into_iter().map(|(u, v)| Edge { u, v, cost: rng.gen_range(1..=spec.max_cost) as f64 }).collect();
    let revenues: Vec<f64> =
        (0..n).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(1..=spec.max_revenue) as f64 }).collect();
    let root = rng.gen_range(0..n);
    let total: f64 = edges.iter().map(|e| e.cost).sum();
    let budget = (total * rng.gen_range(0.1..0.7)).floor();
    let hop = rng.gen_range(1..=spec.max_hop);
    Instance::new(format!("rand-{seed}"), n, edges, revenues, root, budget, hop).expect("generated data is valid")
}

pub fn corpus(spec: &CorpusSpec, first_seed: u64, count: usize) -> Vec<Instance> {
    (0..count as u64).map(|k| random_instance(spec, first_seed + k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        for seed in 0..50 {
            let a = random_instance(&CorpusSpec::SMALL, seed);
            assert_eq!(a, random_instance(&CorpusSpec::SMALL, seed));
            assert!((3..=10).contains(&a.node_count()));
            assert!(a.edge_count() <= 18.max(a.node_count() - 1));
            assert!(a.hop_limit() <= 4);
            assert!(a.is_integral());
        }
    }
}
