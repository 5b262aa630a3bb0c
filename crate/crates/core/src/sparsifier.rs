//! Minimal extra-decode sparsification of the interference graph.
//!
//! For a connected component with `k` sources, `m` interference nodes and
//! `f` edges, a spanning tree keeps `k + m - 1` edges, so exactly
//! `f - k - m + 1` edges must go. An edge set `I` is admissible for a quota
//! `d` when `F \ I` stays connected (independence in the bond matroid) and
//! no `W_i` loses more than `d` edges (independence in the partition
//! matroid). The search raises `d` from its counting lower bound until an
//! admissible set of the required size exists.
//!
//! The candidate set for each `d` is first grown greedily in label order.
//! The admissible sets are the common independent sets of two matroids,
//! which in general do not form a matroid themselves, so a greedy set can be
//! maximal without being maximum. When that happens the greedy set is
//! extended by shortest augmenting paths in the exchange graph, which
//! reaches the maximum common independent set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::igraph::{Dsu, Edge, InterferenceGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparsifyError {
    #[error("brute force limited to 14 edges, graph has {0}")]
    TooLarge(usize),
    #[error("labeling is not a permutation of the edge set")]
    BadLabeling,
}

/// An ordering `e_1, ..., e_|F|` of the interference edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeLabeling(Vec<Edge>);

impl EdgeLabeling {
    /// Lexicographic by (destination, source).
    pub fn default_for(g: &InterferenceGraph) -> Self {
        EdgeLabeling(g.edges().to_vec())
    }

    pub fn from_order(g: &InterferenceGraph, order: Vec<Edge>) -> Result<Self, SparsifyError> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != g.edges() {
            return Err(SparsifyError::BadLabeling);
        }
        Ok(EdgeLabeling(order))
    }

    pub fn random<R: Rng + ?Sized>(g: &InterferenceGraph, rng: &mut R) -> Self {
        let mut order = g.edges().to_vec();
        order.shuffle(rng);
        EdgeLabeling(order)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.0
    }
}

fn component_count(g: &InterferenceGraph, removed: &BTreeSet<Edge>) -> usize {
    let k = g.source_count();
    let mut dsu = Dsu::new(k + g.dest_count());
    let mut merges = 0;
    for e in g.edges() {
        if !removed.contains(e) && dsu.union(e.source, k + e.dest) {
            merges += 1;
        }
    }
    k + g.dest_count() - merges
}

fn within_quota(candidate: &BTreeSet<Edge>, d: usize) -> bool {
    let mut per_dest: BTreeMap<usize, usize> = BTreeMap::new();
    for e in candidate {
        *per_dest.entry(e.dest).or_default() += 1;
    }
    per_dest.values().all(|&c| c <= d)
}

/// Whether removing `candidate` keeps every component of `g` connected and
/// takes at most `d` edges from each `W_i`.
pub fn independence_check(g: &InterferenceGraph, candidate: &BTreeSet<Edge>, d: usize) -> bool {
    within_quota(candidate, d)
        && component_count(g, candidate) == component_count(g, &BTreeSet::new())
}

/// Greedy maximal admissible set for quota `d`, scanning in label order.
pub fn greedy_d(g: &InterferenceGraph, labeling: &EdgeLabeling, d: usize) -> BTreeSet<Edge> {
    greedy_counted(g, labeling, d, &mut 0)
}

fn greedy_counted(
    g: &InterferenceGraph,
    labeling: &EdgeLabeling,
    d: usize,
    checks: &mut usize,
) -> BTreeSet<Edge> {
    let baseline = component_count(g, &BTreeSet::new());
    let mut chosen = BTreeSet::new();
    for &e in labeling.edges() {
        chosen.insert(e);
        *checks += 1;
        let ok = within_quota(&chosen, d) && component_count(g, &chosen) == baseline;
        if !ok {
            chosen.remove(&e);
        }
    }
    chosen
}

/// Grows `current` to a maximum common independent set of the bond matroid
/// of `g` and the partition matroid with quota `d`.
fn augment(
    g: &InterferenceGraph,
    mut current: BTreeSet<Edge>,
    d: usize,
    checks: &mut usize,
) -> BTreeSet<Edge> {
    let baseline = component_count(g, &BTreeSet::new());
    let mut bond = |set: &BTreeSet<Edge>| {
        *checks += 1;
        component_count(g, set) == baseline
    };
    loop {
        let inside: Vec<Edge> = current.iter().copied().collect();
        let outside: Vec<Edge> = g
            .edges()
            .iter()
            .copied()
            .filter(|e| !current.contains(e))
            .collect();
        let with = |x: Edge| {
            let mut s = current.clone();
            s.insert(x);
            s
        };
        let swap = |y: Edge, x: Edge| {
            let mut s = current.clone();
            s.remove(&y);
            s.insert(x);
            s
        };
        let sources: Vec<bool> = outside.iter().map(|&x| bond(&with(x))).collect();
        let sinks: Vec<bool> = outside.iter().map(|&x| within_quota(&with(x), d)).collect();

        // Exchange graph over inside ++ outside.
        let n_in = inside.len();
        let mut arcs = vec![Vec::new(); n_in + outside.len()];
        for (a, &y) in inside.iter().enumerate() {
            for (b, &x) in outside.iter().enumerate() {
                let s = swap(y, x);
                if bond(&s) {
                    arcs[a].push(n_in + b);
                }
                if within_quota(&s, d) {
                    arcs[n_in + b].push(a);
                }
            }
        }
        let mut prev = vec![usize::MAX; arcs.len()];
        let mut queue = VecDeque::new();
        for (b, &s) in sources.iter().enumerate() {
            if s {
                prev[n_in + b] = n_in + b;
                queue.push_back(n_in + b);
            }
        }
        let mut end = None;
        while let Some(v) = queue.pop_front() {
            if v >= n_in && sinks[v - n_in] {
                end = Some(v);
                break;
            }
            for &w in &arcs[v] {
                if prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        let Some(mut v) = end else {
            return current;
        };
        loop {
            if v >= n_in {
                current.insert(outside[v - n_in]);
            } else {
                current.remove(&inside[v]);
            }
            if prev[v] == v {
                break;
            }
            v = prev[v];
        }
    }
}

/// Search record for one connected component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSearch {
    pub sources: Vec<usize>,
    pub dests: Vec<usize>,
    pub edge_count: usize,
    /// `f - k - m + 1`, the number of edges outside a spanning tree.
    pub target: usize,
    pub lower_bound: usize,
    pub d: usize,
    /// Size of the greedy set at the final `d`.
    pub greedy_size: usize,
    /// Whether augmenting paths were needed on top of the greedy set.
    pub augmented: bool,
    pub iterations: usize,
    pub removed: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsificationResult {
    pub d_star: usize,
    /// Union of the per-component removal sets `I`.
    pub removed: Vec<Edge>,
    /// `H` with `removed` taken out: a spanning tree per component.
    pub spanning_forest: InterferenceGraph,
    /// Final sparsified graph after trimming each `W_i` to `min(d*, |B_i|)` removals.
    pub h_bar: InterferenceGraph,
    /// `E_i` per destination, sorted source indices.
    pub extra_decode: Vec<Vec<usize>>,
    /// `B̄_i = B_i \ E_i` per destination.
    pub new_interference: Vec<Vec<usize>>,
    pub components: Vec<ComponentSearch>,
    /// Admissibility tests made by the greedy scans.
    pub independence_checks: usize,
    /// Bond-matroid tests made while augmenting.
    pub exchange_checks: usize,
}

impl SparsificationResult {
    /// `Ā_i = A_i ∪ E_i` for the given original demand sets.
    pub fn new_demands(&self, demands: &[Vec<usize>]) -> Vec<Vec<usize>> {
        demands
            .iter()
            .zip(&self.extra_decode)
            .map(|(a, e)| {
                let mut s: Vec<usize> = a.iter().chain(e).copied().collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }
}

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Finds `d*` and a sparsified forest, one component at a time.
pub fn find_dstar(g: &InterferenceGraph, labeling: &EdgeLabeling) -> SparsificationResult {
    let mut checks = 0;
    let mut exchange_checks = 0;
    let mut searches = Vec::new();
    for comp in g.components() {
        let (k, m, f) = (comp.sources.len(), comp.dests.len(), comp.edges.len());
        let sub =
            InterferenceGraph::new(g.source_count(), g.dest_count(), comp.edges.iter().copied());
        let order: Vec<Edge> = labeling
            .edges()
            .iter()
            .copied()
            .filter(|e| sub.contains(*e))
            .collect();
        let sub_labels = EdgeLabeling(order);
        let target = (f + 1).saturating_sub(k + m);
        let lower = if m == 0 { 0 } else { div_ceil(target, m) };
        let max_degree = comp
            .dests
            .iter()
            .map(|&i| sub.degree_of_dest(i))
            .max()
            .unwrap_or(0);
        let mut d = lower;
        let mut iterations = 0;
        let (removed, greedy_size, augmented) = loop {
            iterations += 1;
            let greedy = greedy_counted(&sub, &sub_labels, d, &mut checks);
            let greedy_size = greedy.len();
            if greedy_size == target {
                break (greedy, greedy_size, false);
            }
            let best = augment(&sub, greedy, d, &mut exchange_checks);
            if best.len() == target {
                break (best, greedy_size, true);
            }
            // With d at the largest W degree the quota no longer binds.
            assert!(d < max_degree, "quota search exceeded the maximum degree");
            d += 1;
        };
        searches.push(ComponentSearch {
            sources: comp.sources,
            dests: comp.dests,
            edge_count: f,
            target,
            lower_bound: lower,
            d,
            greedy_size,
            augmented,
            iterations,
            removed: removed.into_iter().collect(),
        });
    }

    let d_star = searches.iter().map(|s| s.d).max().unwrap_or(0);
    let mut removed: Vec<Edge> = searches
        .iter()
        .flat_map(|s| s.removed.iter().copied())
        .collect();
    removed.sort_unstable();
    let spanning_forest = g.without(&removed);

    // Trim: every W_i ends up losing exactly min(d*, |B_i|) edges.
    let mut lost = vec![0usize; g.dest_count()];
    for e in &removed {
        lost[e.dest] += 1;
    }
    let mut trimmed = removed.clone();
    for &e in labeling.edges() {
        if !spanning_forest.contains(e) {
            continue;
        }
        let quota = d_star.min(g.degree_of_dest(e.dest));
        if lost[e.dest] < quota {
            lost[e.dest] += 1;
            trimmed.push(e);
        }
    }
    let h_bar = g.without(&trimmed);
    let mut extra_decode = vec![Vec::new(); g.dest_count()];
    for e in &trimmed {
        extra_decode[e.dest].push(e.source);
    }
    for set in &mut extra_decode {
        set.sort_unstable();
    }
    let new_interference = (0..g.dest_count())
        .map(|i| h_bar.interferers(i).collect())
        .collect();

    SparsificationResult {
        d_star,
        removed,
        spanning_forest,
        h_bar,
        extra_decode,
        new_interference,
        components: searches,
        independence_checks: checks,
        exchange_checks,
    }
}

/// Smallest per-node removal quota that leaves `g` acyclic, by exhaustive
/// enumeration of removal sets.
pub fn brute_force_dstar(g: &InterferenceGraph) -> Result<usize, SparsifyError> {
    let f = g.edges().len();
    if f > 14 {
        return Err(SparsifyError::TooLarge(f));
    }
    let k = g.source_count();
    let mut best = usize::MAX;
    for mask in 0u32..1 << f {
        let mut per_dest = vec![0usize; g.dest_count()];
        let mut dsu = Dsu::new(k + g.dest_count());
        let mut acyclic = true;
        for (b, e) in g.edges().iter().enumerate() {
            if mask >> b & 1 == 1 {
                per_dest[e.dest] += 1;
            } else if !dsu.union(e.source, k + e.dest) {
                acyclic = false;
                break;
            }
        }
        if acyclic {
            best = best.min(per_dest.into_iter().max().unwrap_or(0));
        }
    }
    Ok(best)
}
