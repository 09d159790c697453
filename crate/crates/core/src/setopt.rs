//! Exact solver for structured prediction set optimization: choose at most
//! `m` DAG nodes whose covered leaves carry probability mass at least `tau`,
//! minimizing the number of covered leaves.
//!
//! [`solve`] runs a branch-and-bound over node selections using the DAG's
//! precomputed descendant-leaf bitmasks. [`solve_brute_force`] is the
//! exhaustive oracle with an identical contract, guarded to small graphs.
//!
//! Both report the same deterministic optimum: the minimum covered-leaf
//! count, with ties broken by covered mass (under [`TieBreak::MinMass`]),
//! then selection cardinality, then the lexicographically smallest sorted
//! node-id tuple. Cardinality enters the key so that a selection padded with
//! nodes that add no coverage never displaces its minimal counterpart.

use thiserror::Error;

use crate::dag::{Dag, DagError, LeafSet, ScoreVector, StructuredSet};

/// Feasibility slack on the mass constraint, so that summation order cannot
/// flip a solution in or out of feasibility.
pub const MASS_SLACK: f64 = 1e-12;

/// Node-count guard for the exhaustive oracle.
pub const BRUTE_FORCE_MAX_NODES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no node subset of size <= {m} reaches mass {tau} (best mass found {best_mass})")]
    Infeasible { tau: f64, m: u32, best_mass: f64 },
    #[error("dag has {nodes} nodes, exceeding the brute-force guard of {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("invalid solve request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// Deterministic tie-breaking rule among equal-size optima.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Smallest covered mass, then fewest nodes, then smallest id tuple.
    #[default]
    MinMass,
    /// Fewest nodes, then smallest id tuple.
    MinNodeIds,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveRequest<'a> {
    pub dag: &'a Dag,
    pub scores: &'a ScoreVector,
    pub tau: f64,
    pub m: u32,
    pub tie_break: TieBreak,
}

impl<'a> SolveRequest<'a> {
    pub fn new(dag: &'a Dag, scores: &'a ScoreVector, tau: f64, m: u32) -> Self {
        SolveRequest {
            dag,
            scores,
            tau,
            m,
            tie_break: TieBreak::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub set: StructuredSet,
    /// Covered-leaf count of the returned set.
    pub objective: usize,
    /// Always true: both solvers here are exact.
    pub optimal: bool,
}

/// Full comparison key of one candidate selection.
#[derive(Debug, Clone)]
struct Key {
    sigma: u32,
    mass: f64,
    ids: Vec<u32>,
}

impl Key {
    fn better_than(&self, other: &Key, tie_break: TieBreak) -> bool {
        if self.sigma != other.sigma {
            return self.sigma < other.sigma;
        }
        if tie_break == TieBreak::MinMass && self.mass != other.mass {
            return self.mass < other.mass;
        }
        if self.ids.len() != other.ids.len() {
            return self.ids.len() < other.ids.len();
        }
        self.ids < other.ids
    }
}

fn feasible(mass: f64, tau: f64) -> bool {
    mass >= tau - MASS_SLACK
}

fn validate(req: &SolveRequest) -> Result<(), SolveError> {
    req.scores.check_dag(req.dag)?;
    if req.m < 1 {
        return Err(SolveError::BadRequest("m must be >= 1".into()));
    }
    if !req.tau.is_finite() || req.tau < 0.0 {
        return Err(SolveError::BadRequest(format!(
            "tau must be finite and >= 0, got {}",
            req.tau
        )));
    }
    Ok(())
}

fn empty_result(dag: &Dag, scores: &ScoreVector) -> SolveResult {
    let set = StructuredSet::from_nodes(dag, scores, &[]).expect("empty set is always valid");
    SolveResult {
        objective: set.size,
        set,
        optimal: true,
    }
}

fn result_from_key(dag: &Dag, scores: &ScoreVector, key: Key) -> SolveResult {
    let set = StructuredSet::from_nodes(dag, scores, &key.ids).expect("solution nodes are valid");
    debug_assert_eq!(set.size as u32, key.sigma);
    SolveResult {
        objective: set.size,
        set,
        optimal: true,
    }
}

/// Exhaustive oracle: enumerates every node subset of size at most `m` and
/// returns the key-minimal feasible one. Guarded to
/// [`BRUTE_FORCE_MAX_NODES`] nodes.
pub fn solve_brute_force(req: &SolveRequest) -> Result<SolveResult, SolveError> {
    validate(req)?;
    let n = req.dag.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(SolveError::TooLarge {
            nodes: n,
            limit: BRUTE_FORCE_MAX_NODES,
        });
    }
    if feasible(0.0, req.tau) {
        return Ok(empty_result(req.dag, req.scores));
    }
    let ids: Vec<u32> = req.dag.node_ids().to_vec();
    let m_eff = (req.m as usize).min(n);
    let mut best: Option<Key> = None;
    let mut best_mass_seen: f64 = 0.0;
    let mut chosen: Vec<u32> = Vec::with_capacity(m_eff);

    fn recurse(
        req: &SolveRequest,
        ids: &[u32],
        start: usize,
        chosen: &mut Vec<u32>,
        m_eff: usize,
        best: &mut Option<Key>,
        best_mass_seen: &mut f64,
    ) {
        if !chosen.is_empty() {
            let cover = req.dag.leaf_cover(chosen).expect("ids are valid");
            let mass = req.scores.mass_of(&cover);
            if mass > *best_mass_seen {
                *best_mass_seen = mass;
            }
            if feasible(mass, req.tau) {
                let key = Key {
                    sigma: cover.count(),
                    mass,
                    ids: chosen.clone(),
                };
                if best
                    .as_ref()
                    .is_none_or(|b| key.better_than(b, req.tie_break))
                {
                    *best = Some(key);
                }
            }
        }
        if chosen.len() == m_eff {
            return;
        }
        for i in start..ids.len() {
            chosen.push(ids[i]);
            recurse(req, ids, i + 1, chosen, m_eff, best, best_mass_seen);
            chosen.pop();
        }
    }

    recurse(
        req,
        &ids,
        0,
        &mut chosen,
        m_eff,
        &mut best,
        &mut best_mass_seen,
    );
    match best {
        Some(key) => Ok(result_from_key(req.dag, req.scores, key)),
        None => Err(SolveError::Infeasible {
            tau: req.tau,
            m: req.m,
            best_mass: best_mass_seen,
        }),
    }
}

struct Cand {
    id: u32,
    mask: LeafSet,
    mass: f64,
    leaves: u32,
}

struct Search<'a> {
    req: &'a SolveRequest<'a>,
    cands: Vec<Cand>,
    /// Leaf probabilities sorted descending, with leaf indices.
    sorted_probs: Vec<(f64, u32)>,
    /// Per candidate position: masses of the up-to-`TOP_CAP` heaviest
    /// candidates at or after that position, descending.
    suffix_top: Vec<Vec<f64>>,
    /// Per candidate position: total candidate mass at or after it.
    suffix_sum: Vec<f64>,
    nleaves: u32,
    total_mass: f64,
    m_eff: usize,
    best: Option<Key>,
    best_mass_seen: f64,
    explored: u64,
}

const TOP_CAP: usize = 16;

impl<'a> Search<'a> {
    fn new(req: &'a SolveRequest<'a>) -> Self {
        let dag = req.dag;
        let nleaves = dag.leaf_count() as u32;
        let mut cands: Vec<Cand> = dag
            .node_ids()
            .iter()
            .map(|&id| {
                let mask = dag.desc_leaf_mask(id).expect("own ids are valid").clone();
                let mass = req.scores.mass_of(&mask);
                let leaves = mask.count();
                Cand {
                    id,
                    mask,
                    mass,
                    leaves,
                }
            })
            .collect();
        // Descending mass-per-leaf density, then heavier mass, then lower id.
        cands.sort_by(|a, b| {
            let da = a.mass / a.leaves.max(1) as f64;
            let db = b.mass / b.leaves.max(1) as f64;
            db.partial_cmp(&da)
                .unwrap()
                .then(b.mass.partial_cmp(&a.mass).unwrap())
                .then(a.id.cmp(&b.id))
        });

        let mut sorted_probs: Vec<(f64, u32)> = req
            .scores
            .probs()
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        sorted_probs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

        let n = cands.len();
        let mut suffix_top: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        let mut suffix_sum = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let mut tops = suffix_top[i + 1].clone();
            tops.push(cands[i].mass);
            tops.sort_by(|a, b| b.partial_cmp(a).unwrap());
            tops.truncate(TOP_CAP);
            suffix_top[i] = tops;
            suffix_sum[i] = suffix_sum[i + 1] + cands[i].mass;
        }

        Search {
            m_eff: (req.m as usize).min(n),
            total_mass: req.scores.total_mass(),
            req,
            cands,
            sorted_probs,
            suffix_top,
            suffix_sum,
            nleaves,
            best: None,
            best_mass_seen: 0.0,
            explored: 0,
        }
    }

    /// Upper bound on the mass addable by up to `r` candidates at or after
    /// position `i`.
    fn mass_available(&self, i: usize, r: usize) -> f64 {
        if r >= TOP_CAP {
            return self.suffix_sum[i];
        }
        self.suffix_top[i].iter().take(r).sum()
    }

    /// Minimum number of additional leaves any extension must cover to close
    /// the mass gap, scanning uncovered leaf probabilities descending.
    /// `None` means the gap cannot be closed even by all remaining leaves.
    /// The gap carries a 1e-9 guard so summation-order noise can only weaken
    /// the bound, never overstate it.
    fn min_extra_leaves(&self, covered: &LeafSet, mass: f64) -> Option<u32> {
        let gap = self.req.tau - MASS_SLACK - mass - 1e-9;
        if gap <= 0.0 {
            return Some(0);
        }
        let mut cum = 0.0;
        let mut k = 0u32;
        for &(p, idx) in &self.sorted_probs {
            if covered.contains(idx) {
                continue;
            }
            cum += p;
            k += 1;
            if cum >= gap {
                return Some(k);
            }
        }
        None
    }

    /// Sum of the `k` largest uncovered leaf probabilities.
    fn top_uncovered_mass(&self, covered: &LeafSet, k: u32) -> f64 {
        let mut cum = 0.0;
        let mut taken = 0u32;
        for &(p, idx) in &self.sorted_probs {
            if taken == k {
                break;
            }
            if covered.contains(idx) {
                continue;
            }
            cum += p;
            taken += 1;
        }
        cum
    }

    /// Sum of the `k` smallest uncovered leaf probabilities.
    fn bottom_uncovered_mass(&self, covered: &LeafSet, k: u32) -> f64 {
        let mut cum = 0.0;
        let mut taken = 0u32;
        for &(p, idx) in self.sorted_probs.iter().rev() {
            if taken == k {
                break;
            }
            if covered.contains(idx) {
                continue;
            }
            cum += p;
            taken += 1;
        }
        cum
    }

    fn offer(&mut self, sigma: u32, mass: f64, ids: Vec<u32>) {
        let key = Key { sigma, mass, ids };
        if self
            .best
            .as_ref()
            .is_none_or(|b| key.better_than(b, self.req.tie_break))
        {
            self.best = Some(key);
        }
    }

    /// Seed the incumbent from cheap feasible covers: the all-roots
    /// selection, a density-greedy cover, and greedy completions anchored at
    /// each of the heaviest nodes. Purely a bound: the search below finds
    /// the optimum regardless, just more slowly.
    fn seed_incumbents(&mut self) {
        let roots = self.req.dag.root_ids();
        if !roots.is_empty() && roots.len() <= self.m_eff {
            let cover = self.req.dag.leaf_cover(&roots).expect("roots are valid");
            let mass = self.req.scores.mass_of(&cover);
            self.note_mass(mass);
            if feasible(mass, self.req.tau) {
                let mut ids = roots;
                ids.sort_unstable();
                self.offer(cover.count(), mass, ids);
            }
        }

        self.greedy_from(None);
        let mut by_mass: Vec<usize> = (0..self.cands.len()).collect();
        by_mass.sort_by(|&a, &b| {
            self.cands[b]
                .mass
                .partial_cmp(&self.cands[a].mass)
                .unwrap()
                .then(self.cands[a].id.cmp(&self.cands[b].id))
        });
        for &anchor in by_mass.iter().take(16) {
            self.greedy_from(Some(anchor));
        }
    }

    /// Density-greedy completion starting from an optional anchor node;
    /// offers the resulting cover as an incumbent when it reaches
    /// feasibility within the node budget.
    fn greedy_from(&mut self, anchor: Option<usize>) {
        let mut covered = LeafSet::empty(self.nleaves);
        let mut chosen: Vec<u32> = Vec::new();
        if let Some(ci) = anchor {
            covered.union_in_place(&self.cands[ci].mask);
            chosen.push(self.cands[ci].id);
        }
        loop {
            let mass = self.req.scores.mass_of(&covered);
            self.note_mass(mass);
            if feasible(mass, self.req.tau) {
                let mut ids = chosen.clone();
                ids.sort_unstable();
                self.offer(covered.count(), mass, ids);
                return;
            }
            if chosen.len() == self.m_eff {
                return;
            }
            let mut pick: Option<(f64, u32, usize)> = None;
            for (ci, c) in self.cands.iter().enumerate() {
                let new_leaves = covered.count_new(&c.mask);
                if new_leaves == 0 {
                    continue;
                }
                let mut gain = 0.0;
                for li in c.mask.iter_ones() {
                    if !covered.contains(li) {
                        gain += self.req.scores.probs()[li as usize];
                    }
                }
                let density = gain / new_leaves as f64;
                if pick.is_none_or(|(d, _, _)| density > d) {
                    pick = Some((density, c.id, ci));
                }
            }
            match pick {
                Some((_, id, ci)) => {
                    covered.union_in_place(&self.cands[ci].mask);
                    chosen.push(id);
                }
                None => return,
            }
        }
    }

    fn note_mass(&mut self, mass: f64) {
        if mass > self.best_mass_seen {
            self.best_mass_seen = mass;
        }
    }

    fn run(&mut self) {
        self.seed_incumbents();
        let mut sel: Vec<u32> = Vec::with_capacity(self.m_eff);
        let covered = LeafSet::empty(self.nleaves);
        self.dfs(0, &mut sel, &covered);
    }

    fn dfs(&mut self, start: usize, sel: &mut Vec<u32>, covered: &LeafSet) {
        for i in start..self.cands.len() {
            self.explored += 1;
            let cand_id = self.cands[i].id;
            // Dominated: contributes no new leaves, so it can only pad a
            // selection, and padded selections lose on cardinality.
            if self.cands[i].mask.is_subset_of(covered) {
                continue;
            }
            let mut child = covered.clone();
            child.union_in_place(&self.cands[i].mask);
            // Canonical mass: recomputed from the covered set in ascending
            // leaf order so solve and solve_brute_force agree bit-for-bit.
            let mass = self.req.scores.mass_of(&child);
            self.note_mass(mass);
            let sigma = child.count();

            if let Some(best) = &self.best {
                if sigma > best.sigma {
                    continue;
                }
            }

            if feasible(mass, self.req.tau) {
                let mut ids = sel.clone();
                ids.push(cand_id);
                ids.sort_unstable();
                self.offer(sigma, mass, ids);
                // Proper extensions of a feasible selection cover at least as
                // much and use more nodes: never better.
                continue;
            }

            // The child is infeasible, so everything below it adds at least
            // one more uncovered leaf per selected node.
            if let Some(best) = &self.best {
                if sigma >= best.sigma {
                    continue;
                }
            }
            if sel.len() + 1 >= self.m_eff {
                continue;
            }
            let r = self.m_eff - sel.len() - 1;
            // Mass-reach bound: even the heaviest r remaining candidates
            // cannot close the gap from here.
            if mass + self.mass_available(i + 1, r) + 1e-9 < self.req.tau - MASS_SLACK {
                continue;
            }
            let Some(extra) = self.min_extra_leaves(&child, mass) else {
                continue;
            };
            if let Some(best) = &self.best {
                let lb = sigma + extra;
                if lb > best.sigma {
                    continue;
                }
                if lb == best.sigma {
                    // Any improving descendant covers exactly best.sigma
                    // leaves; bound its mass from both sides.
                    let k_exact = best.sigma - sigma;
                    if self.req.tie_break == TieBreak::MinMass && mass > best.mass {
                        continue;
                    }
                    if mass + self.top_uncovered_mass(&child, k_exact) + 1e-9
                        < self.req.tau - MASS_SLACK
                    {
                        continue;
                    }
                    match self.req.tie_break {
                        TieBreak::MinMass => {
                            if mass + self.bottom_uncovered_mass(&child, k_exact) - 1e-9 > best.mass
                            {
                                continue;
                            }
                            // Full-cover incumbents tie every same-sigma
                            // rival on mass, so deeper selections cannot win.
                            if best.sigma == self.nleaves
                                && best.mass == self.total_mass
                                && sel.len() + 2 > best.ids.len()
                            {
                                continue;
                            }
                        }
                        TieBreak::MinNodeIds => {
                            if sel.len() + 2 > best.ids.len() {
                                continue;
                            }
                        }
                    }
                }
            }
            sel.push(cand_id);
            self.dfs(i + 1, sel, &child);
            sel.pop();
        }
    }
}

/// Exact branch-and-bound solve. Returns a globally optimal selection under
/// the request's tie-break; identical inputs yield identical node ids.
pub fn solve(req: &SolveRequest) -> Result<SolveResult, SolveError> {
    validate(req)?;
    if feasible(0.0, req.tau) {
        return Ok(empty_result(req.dag, req.scores));
    }
    let mut search = Search::new(req);
    search.run();
    match search.best.take() {
        Some(key) => Ok(result_from_key(req.dag, req.scores, key)),
        None => Err(SolveError::Infeasible {
            tau: req.tau,
            m: req.m,
            best_mass: search.best_mass_seen,
        }),
    }
}

/// Drops every node whose descendant leaves are already covered by the rest
/// of the set, processing candidates in ascending id order. The covered leaf
/// set is unchanged.
pub fn redundancy_reduce(dag: &Dag, node_ids: &[u32]) -> Result<Vec<u32>, DagError> {
    let mut keep: Vec<u32> = node_ids.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let order = keep.clone();
    for id in order {
        let others: Vec<u32> = keep.iter().copied().filter(|&k| k != id).collect();
        let union = dag.leaf_cover(&others)?;
        if dag.desc_leaf_mask(id)?.is_subset_of(&union) {
            keep = others;
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::ValidationMode;

    /// root 0 -> {A=1, B=2}, A -> {a1=3, a2=4}, B -> {b1=5};
    /// probs a1=0.5, a2=0.2, b1=0.3.
    fn tree6() -> (Dag, ScoreVector) {
        let dag = Dag::new(6, vec![(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)], None).unwrap();
        let scores = ScoreVector::new(&dag, vec![0.5, 0.2, 0.3], ValidationMode::Strict).unwrap();
        (dag, scores)
    }

    #[test]
    fn single_best_leaf() {
        let (dag, scores) = tree6();
        let res = solve(&SolveRequest::new(&dag, &scores, 0.5, 1)).unwrap();
        assert_eq!(res.set.node_ids, vec![3]);
        assert_eq!(res.objective, 1);
        let oracle = solve_brute_force(&SolveRequest::new(&dag, &scores, 0.5, 1)).unwrap();
        assert_eq!(oracle.set.node_ids, vec![3]);
    }

    #[test]
    fn internal_node_beats_root() {
        let (dag, scores) = tree6();
        let res = solve(&SolveRequest::new(&dag, &scores, 0.6, 1)).unwrap();
        assert_eq!(res.set.node_ids, vec![1]);
        assert_eq!(res.objective, 2);
        assert!((res.set.mass - 0.7).abs() < 1e-15);
        let oracle = solve_brute_force(&SolveRequest::new(&dag, &scores, 0.6, 1)).unwrap();
        assert_eq!(oracle.set.node_ids, vec![1]);
        assert_eq!(oracle.objective, 2);
    }

    #[test]
    fn zero_tau_yields_empty_set() {
        let (dag, scores) = tree6();
        for solver in [solve, solve_brute_force] {
            let res = solver(&SolveRequest::new(&dag, &scores, 0.0, 1)).unwrap();
            assert!(res.set.node_ids.is_empty());
            assert_eq!(res.objective, 0);
        }
    }

    #[test]
    fn two_root_forest_infeasible() {
        let dag = Dag::new(4, vec![(0, 2), (1, 3)], None).unwrap();
        let scores = ScoreVector::new(&dag, vec![0.5, 0.5], ValidationMode::Strict).unwrap();
        for solver in [solve, solve_brute_force] {
            let err = solver(&SolveRequest::new(&dag, &scores, 0.9, 1)).unwrap_err();
            assert!(matches!(err, SolveError::Infeasible { .. }));
        }
        // With room for both roots it becomes feasible.
        let res = solve(&SolveRequest::new(&dag, &scores, 0.9, 2)).unwrap();
        assert_eq!(res.set.node_ids, vec![0, 1]);
    }

    #[test]
    fn single_node_dag() {
        let dag = Dag::new(1, vec![], None).unwrap();
        let scores = ScoreVector::new(&dag, vec![1.0], ValidationMode::Strict).unwrap();
        let res = solve_brute_force(&SolveRequest::new(&dag, &scores, 1.0, 1)).unwrap();
        assert_eq!(res.set.node_ids, vec![0]);
        assert_eq!(res.objective, 1);
    }

    #[test]
    fn brute_force_guard() {
        let n = 21;
        let edges: Vec<(u32, u32)> = (1..n as u32).map(|c| (0, c)).collect();
        let dag = Dag::new(n, edges, None).unwrap();
        let probs = vec![1.0 / 20.0; 20];
        let scores = ScoreVector::new(&dag, probs, ValidationMode::Strict).unwrap();
        let err = solve_brute_force(&SolveRequest::new(&dag, &scores, 0.5, 2)).unwrap_err();
        assert!(matches!(
            err,
            SolveError::TooLarge {
                nodes: 21,
                limit: 20
            }
        ));
    }

    #[test]
    fn result_mass_respects_slack() {
        let (dag, scores) = tree6();
        let res = solve(&SolveRequest::new(&dag, &scores, 0.7, 2)).unwrap();
        assert!(res.set.mass >= 0.7 - MASS_SLACK);
    }

    #[test]
    fn min_node_ids_tie_break() {
        // Two disjoint equal-mass leaves under one root: sigma ties at 1,
        // mass ties, id decides for both rules.
        let dag = Dag::new(3, vec![(0, 1), (0, 2)], None).unwrap();
        let scores = ScoreVector::new(&dag, vec![0.5, 0.5], ValidationMode::Strict).unwrap();
        let mut req = SolveRequest::new(&dag, &scores, 0.4, 1);
        req.tie_break = TieBreak::MinNodeIds;
        assert_eq!(solve(&req).unwrap().set.node_ids, vec![1]);
        req.tie_break = TieBreak::MinMass;
        assert_eq!(solve(&req).unwrap().set.node_ids, vec![1]);
    }

    #[test]
    fn invalid_request_rejected() {
        let (dag, scores) = tree6();
        assert!(matches!(
            solve(&SolveRequest::new(&dag, &scores, -0.5, 1)),
            Err(SolveError::BadRequest(_))
        ));
        assert!(matches!(
            solve(&SolveRequest::new(&dag, &scores, 0.5, 0)),
            Err(SolveError::BadRequest(_))
        ));
    }

    #[test]
    fn redundancy_reduce_examples() {
        let dag = Dag::new(3, vec![(0, 1), (0, 2)], None).unwrap();
        assert_eq!(redundancy_reduce(&dag, &[0, 1]).unwrap(), vec![0]);
        let (tree, _) = tree6();
        assert_eq!(redundancy_reduce(&tree, &[3, 5]).unwrap(), vec![3, 5]);
        assert_eq!(redundancy_reduce(&tree, &[]).unwrap(), Vec::<u32>::new());
    }
}
