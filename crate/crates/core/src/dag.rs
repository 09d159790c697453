//! Immutable DAG model with validation, reachability, and leaf-coverage
//! queries.
//!
//! A [`Dag`] is a validated directed acyclic graph over integer node ids with
//! a designated leaf set (exactly the nodes with zero outgoing edges). At
//! construction we cache a topological order and, for every node, a bitmask
//! of the leaves reachable from it, so that downstream set optimization can
//! accumulate coverage and mass in O(words) per step.
//!
//! Node ids are "external": a freshly built DAG uses the dense range
//! `0..node_count`, while a DAG returned by [`Dag::contract`] keeps the
//! surviving original ids. All public operations speak external ids.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from DAG construction and queries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DagError {
    #[error("edge list has a directed cycle")]
    CycleDetected,
    #[error("node id {0} out of range")]
    InvalidId(u32),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(u32, u32),
    #[error("node count must be positive")]
    EmptyDag,
    #[error("edge list empty for a multi-node graph")]
    MissingEdges,
    #[error("node {0} is a leaf and may not be contracted")]
    IsLeaf(u32),
    #[error("scores were built for a different dag (leaf structure mismatch)")]
    DagMismatch,
    #[error("probability at leaf index {index} is {value}, expected >= 0 and finite")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, outside the allowed range for {mode:?} validation")]
    ProbSumOutOfRange { sum: f64, mode: ValidationMode },
    #[error("score vector has {got} entries, dag has {expected} leaves")]
    WrongLeafCount { got: usize, expected: usize },
    #[error("declared leaf set does not match nodes with zero outgoing edges")]
    LeafFieldMismatch,
    #[error("label key {0:?} is not a node id")]
    BadLabelKey(String),
}

/// Fixed-capacity bitset over leaf indices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LeafSet {
    words: Box<[u64]>,
    nbits: u32,
}

impl LeafSet {
    pub fn empty(nbits: u32) -> Self {
        let words = vec![0u64; (nbits as usize).div_ceil(64)].into_boxed_slice();
        LeafSet { words, nbits }
    }

    pub fn full(nbits: u32) -> Self {
        let mut s = Self::empty(nbits);
        for i in 0..nbits {
            s.set(i);
        }
        s
    }

    pub fn nbits(&self) -> u32 {
        self.nbits
    }

    #[inline]
    pub fn set(&mut self, i: u32) {
        debug_assert!(i < self.nbits);
        self.words[(i / 64) as usize] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn contains(&self, i: u32) -> bool {
        if i >= self.nbits {
            return false;
        }
        self.words[(i / 64) as usize] & (1u64 << (i % 64)) != 0
    }

    #[inline]
    pub fn union_in_place(&mut self, other: &LeafSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (w, o) in self.words.iter_mut().zip(other.words.iter()) {
            *w |= o;
        }
    }

    /// True when every bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &LeafSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Number of bits set in `other` but not in `self`.
    pub fn count_new(&self, other: &LeafSet) -> u32 {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (b & !a).count_ones())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, w)| {
            let mut w = *w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(wi as u32 * 64 + b)
            })
        })
    }
}

impl fmt::Debug for LeafSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter_ones()).finish()
    }
}

/// How strictly [`ScoreVector`] validation treats the probability sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    /// Entries must sum to 1 within 1e-9.
    #[default]
    Strict,
    /// Entries may sum to anything in [0, 1 + 1e-9]; truncated model outputs.
    Lenient,
}

pub const SUM_TOLERANCE: f64 = 1e-9;

/// Per-leaf probabilities for one input, dense in leaf-index order.
///
/// Leaf index `i` is the position of the i-th smallest leaf id; a separate
/// id<->index table on the [`Dag`] maps between them. Compatibility with a
/// dag is tracked by a fingerprint of the ordered leaf-id list, so scores
/// survive [`Dag::contract`] (which keeps the leaf set intact).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    probs: Vec<f64>,
    leaf_sig: u64,
    mode: ValidationMode,
}

impl ScoreVector {
    pub fn new(dag: &Dag, probs: Vec<f64>, mode: ValidationMode) -> Result<Self, DagError> {
        if probs.len() != dag.leaf_count() {
            return Err(DagError::WrongLeafCount {
                got: probs.len(),
                expected: dag.leaf_count(),
            });
        }
        let mut sum = 0.0;
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DagError::InvalidProbability { index, value });
            }
            sum += value;
        }
        let ok = match mode {
            ValidationMode::Strict => (sum - 1.0).abs() <= SUM_TOLERANCE,
            ValidationMode::Lenient => sum <= 1.0 + SUM_TOLERANCE,
        };
        if !ok {
            return Err(DagError::ProbSumOutOfRange { sum, mode });
        }
        Ok(ScoreVector {
            probs,
            leaf_sig: dag.leaf_sig(),
            mode,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mode(&self) -> ValidationMode {
        self.mode
    }

    /// Checks that these scores were built for (the leaf structure of) `dag`.
    pub fn check_dag(&self, dag: &Dag) -> Result<(), DagError> {
        if self.leaf_sig != dag.leaf_sig() || self.probs.len() != dag.leaf_count() {
            return Err(DagError::DagMismatch);
        }
        Ok(())
    }

    /// Probability mass of the leaves in `set`, summed in ascending
    /// leaf-index order so repeated calls are bit-identical.
    pub fn mass_of(&self, set: &LeafSet) -> f64 {
        let mut total = 0.0;
        for i in set.iter_ones() {
            total += self.probs[i as usize];
        }
        total
    }

    pub fn total_mass(&self) -> f64 {
        let mut total = 0.0;
        for &p in &self.probs {
            total += p;
        }
        total
    }

    /// Content fingerprint (leaf signature plus raw prob bits); used as a
    /// memo key by callers that dedup repeated score vectors.
    pub fn content_sig(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.leaf_sig);
        for &p in &self.probs {
            h.write_u64(p.to_bits());
        }
        h.finish()
    }
}

/// A chosen node subset together with its derived leaf cover, mass, and size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredSet {
    /// Selected node ids, ascending.
    pub node_ids: Vec<u32>,
    /// Leaf ids covered by the selection, ascending.
    pub covered_leaves: Vec<u32>,
    /// Total probability mass of the covered leaves.
    pub mass: f64,
    /// Number of covered leaves.
    pub size: usize,
}

impl StructuredSet {
    pub fn from_nodes(dag: &Dag, scores: &ScoreVector, node_ids: &[u32]) -> Result<Self, DagError> {
        scores.check_dag(dag)?;
        let cover = dag.leaf_cover(node_ids)?;
        let mass = scores.mass_of(&cover);
        let covered_leaves: Vec<u32> = cover.iter_ones().map(|i| dag.leaf_id(i)).collect();
        let mut node_ids = node_ids.to_vec();
        node_ids.sort_unstable();
        node_ids.dedup();
        Ok(StructuredSet {
            node_ids,
            size: covered_leaves.len(),
            covered_leaves,
            mass,
        })
    }
}

/// Validated immutable DAG with cached topological order and per-node
/// descendant-leaf bitmasks.
#[derive(Clone)]
pub struct Dag {
    /// External id of each internal position; strictly ascending.
    ids: Vec<u32>,
    /// Canonical edge list in external ids, sorted.
    edges: Vec<(u32, u32)>,
    children: Vec<Vec<u32>>,
    parents: Vec<Vec<u32>>,
    /// Positions in topological order (parents before children).
    topo: Vec<u32>,
    /// Positions of leaves, ascending.
    leaf_positions: Vec<u32>,
    /// Position -> leaf index (None for internal nodes).
    leaf_index: Vec<Option<u32>>,
    /// Position -> descendant-leaf bitmask (a leaf's mask is itself).
    masks: Vec<LeafSet>,
    labels: Vec<Option<String>>,
    leaf_sig: u64,
    structure_sig: u64,
}

impl Dag {
    /// Builds and validates a DAG over the dense id range `0..node_count`.
    ///
    /// `labels` is an optional sparse list of `(id, label)` pairs.
    pub fn new(
        node_count: usize,
        edges: Vec<(u32, u32)>,
        labels: Option<Vec<(u32, String)>>,
    ) -> Result<Self, DagError> {
        if node_count == 0 {
            return Err(DagError::EmptyDag);
        }
        if edges.is_empty() && node_count > 1 {
            return Err(DagError::MissingEdges);
        }
        let ids: Vec<u32> = (0..node_count as u32).collect();
        let mut label_vec = vec![None; node_count];
        if let Some(pairs) = labels {
            for (id, label) in pairs {
                if id as usize >= node_count {
                    return Err(DagError::InvalidId(id));
                }
                label_vec[id as usize] = Some(label);
            }
        }
        Self::build(ids, edges, label_vec)
    }

    /// Internal constructor over an arbitrary ascending id set.
    fn build(
        ids: Vec<u32>,
        mut edges: Vec<(u32, u32)>,
        labels: Vec<Option<String>>,
    ) -> Result<Self, DagError> {
        let n = ids.len();
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(labels.len(), n);

        let pos_of = |id: u32| -> Result<u32, DagError> {
            ids.binary_search(&id)
                .map(|p| p as u32)
                .map_err(|_| DagError::InvalidId(id))
        };

        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(DagError::DuplicateEdge(w[0].0, w[0].1));
            }
        }

        let mut children = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for &(p, c) in &edges {
            if p == c {
                return Err(DagError::CycleDetected);
            }
            let pp = pos_of(p)?;
            let cp = pos_of(c)?;
            children[pp as usize].push(cp);
            parents[cp as usize].push(pp);
        }

        // Kahn's algorithm; a leftover node means a cycle.
        let mut indeg: Vec<u32> = parents.iter().map(|p| p.len() as u32).collect();
        let mut queue: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            topo.push(v);
            for &c in &children[v as usize] {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    queue.push(c);
                }
            }
        }
        if topo.len() != n {
            return Err(DagError::CycleDetected);
        }

        let leaf_positions: Vec<u32> = (0..n as u32)
            .filter(|&v| children[v as usize].is_empty())
            .collect();
        let mut leaf_index = vec![None; n];
        for (i, &p) in leaf_positions.iter().enumerate() {
            leaf_index[p as usize] = Some(i as u32);
        }
        let nleaves = leaf_positions.len() as u32;

        // Children before parents: walk the topological order in reverse.
        let mut masks = vec![LeafSet::empty(nleaves); n];
        for &v in topo.iter().rev() {
            if let Some(li) = leaf_index[v as usize] {
                masks[v as usize].set(li);
            } else {
                let mut m = LeafSet::empty(nleaves);
                for &c in &children[v as usize] {
                    m.union_in_place(&masks[c as usize]);
                }
                masks[v as usize] = m;
            }
        }

        let mut sig = Fnv::new();
        sig.write_u64(nleaves as u64);
        for &p in &leaf_positions {
            sig.write_u64(ids[p as usize] as u64);
        }

        let mut ssig = Fnv::new();
        ssig.write_u64(n as u64);
        for &id in &ids {
            ssig.write_u64(id as u64);
        }
        for &(p, c) in &edges {
            ssig.write_u64((p as u64) << 32 | c as u64);
        }

        Ok(Dag {
            leaf_sig: sig.finish(),
            structure_sig: ssig.finish(),
            ids,
            edges,
            children,
            parents,
            topo,
            leaf_positions,
            leaf_index,
            masks,
            labels,
        })
    }

    /// Number of (live) nodes.
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_positions.len()
    }

    /// External node ids, ascending. Dense `0..node_count` unless the dag was
    /// produced by [`Dag::contract`].
    pub fn node_ids(&self) -> &[u32] {
        &self.ids
    }

    /// Canonical sorted edge list in external ids.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Leaf ids, ascending.
    pub fn leaf_ids(&self) -> Vec<u32> {
        self.leaf_positions
            .iter()
            .map(|&p| self.ids[p as usize])
            .collect()
    }

    /// Root ids (no incoming edges), ascending.
    pub fn root_ids(&self) -> Vec<u32> {
        (0..self.ids.len())
            .filter(|&v| self.parents[v].is_empty())
            .map(|v| self.ids[v])
            .collect()
    }

    /// Cached topological order (parents before children), as external ids.
    pub fn topo_order(&self) -> Vec<u32> {
        self.topo.iter().map(|&p| self.ids[p as usize]).collect()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn is_leaf(&self, id: u32) -> Result<bool, DagError> {
        let p = self.pos(id)?;
        Ok(self.leaf_index[p as usize].is_some())
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        let p = self.pos(id).ok()?;
        self.labels[p as usize].as_deref()
    }

    /// Fingerprint of the ordered leaf-id list; score compatibility key.
    pub fn leaf_sig(&self) -> u64 {
        self.leaf_sig
    }

    /// Fingerprint of the full node/edge structure; solver memo key.
    pub fn structure_sig(&self) -> u64 {
        self.structure_sig
    }

    /// External id of the i-th leaf (ascending order).
    pub fn leaf_id(&self, leaf_index: u32) -> u32 {
        self.ids[self.leaf_positions[leaf_index as usize] as usize]
    }

    /// Leaf index of `id`, or None when `id` is internal.
    pub fn leaf_index_of(&self, id: u32) -> Result<Option<u32>, DagError> {
        let p = self.pos(id)?;
        Ok(self.leaf_index[p as usize])
    }

    fn pos(&self, id: u32) -> Result<u32, DagError> {
        self.ids
            .binary_search(&id)
            .map(|p| p as u32)
            .map_err(|_| DagError::InvalidId(id))
    }

    /// Descendant-leaf bitmask of one node (the node's own bit when a leaf).
    pub fn desc_leaf_mask(&self, id: u32) -> Result<&LeafSet, DagError> {
        let p = self.pos(id)?;
        Ok(&self.masks[p as usize])
    }

    /// Bitmask union of descendant leaves over a node set.
    pub fn leaf_cover(&self, node_ids: &[u32]) -> Result<LeafSet, DagError> {
        let mut cover = LeafSet::empty(self.leaf_count() as u32);
        for &id in node_ids {
            cover.union_in_place(self.desc_leaf_mask(id)?);
        }
        Ok(cover)
    }

    /// Leaf ids covered by `node_ids`: every leaf that descends from (or is)
    /// a selected node. Ascending.
    pub fn leaves_of(&self, node_ids: &[u32]) -> Result<Vec<u32>, DagError> {
        let cover = self.leaf_cover(node_ids)?;
        Ok(cover.iter_ones().map(|i| self.leaf_id(i)).collect())
    }

    /// Sum of leaf probabilities over the cover of `node_ids`.
    pub fn coverage_mass(&self, scores: &ScoreVector, node_ids: &[u32]) -> Result<f64, DagError> {
        scores.check_dag(self)?;
        let cover = self.leaf_cover(node_ids)?;
        Ok(scores.mass_of(&cover))
    }

    /// Removes an internal node, wiring each parent to each child, and
    /// returns the simplified DAG. Surviving nodes keep their ids; the leaf
    /// set (and hence score compatibility) is unchanged.
    pub fn contract(&self, node_id: u32) -> Result<Dag, DagError> {
        let p = self.pos(node_id)?;
        if self.leaf_index[p as usize].is_some() {
            return Err(DagError::IsLeaf(node_id));
        }
        let mut ids = Vec::with_capacity(self.ids.len() - 1);
        let mut labels = Vec::with_capacity(self.ids.len() - 1);
        for (i, &id) in self.ids.iter().enumerate() {
            if id != node_id {
                ids.push(id);
                labels.push(self.labels[i].clone());
            }
        }
        let mut edges: Vec<(u32, u32)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| a != node_id && b != node_id)
            .collect();
        for &pp in &self.parents[p as usize] {
            for &cp in &self.children[p as usize] {
                edges.push((self.ids[pp as usize], self.ids[cp as usize]));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Self::build(ids, edges, labels)
    }

    /// Serializable snapshot with dense ids (positions), suitable for the
    /// on-disk JSON format.
    pub fn to_json(&self) -> DagJson {
        let labels: BTreeMap<String, String> = self
            .labels
            .iter()
            .enumerate()
            .filter_map(|(pos, l)| l.as_ref().map(|s| (pos.to_string(), s.clone())))
            .collect();
        let pos_of = |id: u32| self.ids.binary_search(&id).unwrap() as u32;
        let mut edges: Vec<(u32, u32)> = self
            .edges
            .iter()
            .map(|&(p, c)| (pos_of(p), pos_of(c)))
            .collect();
        edges.sort_unstable();
        DagJson {
            nodes: self.ids.len(),
            edges,
            leaves: self.leaf_positions.to_vec(),
            labels: if labels.is_empty() {
                None
            } else {
                Some(labels)
            },
        }
    }

    pub fn from_json(json: DagJson) -> Result<Self, DagError> {
        let mut labels = None;
        if let Some(map) = json.labels {
            let mut pairs = Vec::with_capacity(map.len());
            for (k, v) in map {
                let id: u32 = k.parse().map_err(|_| DagError::BadLabelKey(k.clone()))?;
                pairs.push((id, v));
            }
            labels = Some(pairs);
        }
        let dag = Dag::new(json.nodes, json.edges, labels)?;
        let mut declared = json.leaves;
        declared.sort_unstable();
        declared.dedup();
        if declared != dag.leaf_ids() {
            return Err(DagError::LeafFieldMismatch);
        }
        Ok(dag)
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dag")
            .field("nodes", &self.ids.len())
            .field("edges", &self.edges.len())
            .field("leaves", &self.leaf_positions.len())
            .finish()
    }
}

/// On-disk DAG format: `{"nodes": N, "edges": [[p,c],...], "leaves": [ids],
/// "labels": {"id": "text"}?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagJson {
    pub nodes: usize,
    pub edges: Vec<(u32, u32)>,
    pub leaves: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<String, String>>,
}

/// FNV-1a, fixed offset/prime so fingerprints are stable across runs.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
