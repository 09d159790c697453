//! Shared helpers for integration tests: seeded random structures and
//! implementation-independent oracles that work on raw edge lists.
#![allow(dead_code)] // each test target uses a different subset

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use csp_core::dag::{Dag, ScoreVector, ValidationMode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG on up to `max_nodes` nodes. Edges only go from lower to higher
/// ids, so acyclicity holds by construction; multi-root and multi-parent
/// shapes all occur.
pub fn random_dag(rng: &mut ChaCha8Rng, max_nodes: usize) -> Dag {
    let n = rng.gen_range(1..=max_nodes);
    if n == 1 {
        return Dag::new(1, vec![], None).unwrap();
    }
    let p = rng.gen_range(0.15..0.6);
    let mut edges = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, n as u32 - 1));
    }
    Dag::new(n, edges, None).unwrap()
}

/// Uniform Dirichlet scores over the leaves (normalized Exp(1) draws).
pub fn random_strict_scores(rng: &mut ChaCha8Rng, dag: &Dag) -> ScoreVector {
    let raw: Vec<f64> = (0..dag.leaf_count())
        .map(|_| -(rng.gen::<f64>().max(1e-12)).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let probs = raw.iter().map(|v| v / total).collect();
    ScoreVector::new(dag, probs, ValidationMode::Strict).unwrap()
}

/// Brute-force descendant-leaf oracle on the raw edge list: leaves (zero
/// out-degree nodes) reachable from `start`, including `start` itself when
/// it is a leaf.
pub fn dfs_descendant_leaves(node_count: usize, edges: &[(u32, u32)], start: u32) -> BTreeSet<u32> {
    let mut children = vec![Vec::new(); node_count];
    let mut has_out = vec![false; node_count];
    for &(p, c) in edges {
        children[p as usize].push(c);
        has_out[p as usize] = true;
    }
    let mut stack = vec![start];
    let mut seen = vec![false; node_count];
    let mut leaves = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if seen[v as usize] {
            continue;
        }
        seen[v as usize] = true;
        if !has_out[v as usize] {
            leaves.insert(v);
        }
        for &c in &children[v as usize] {
            stack.push(c);
        }
    }
    leaves
}

/// Random node subset (possibly empty).
pub fn random_subset(rng: &mut ChaCha8Rng, dag: &Dag) -> Vec<u32> {
    dag.node_ids()
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(0.4))
        .collect()
}
