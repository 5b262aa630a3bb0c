//! Bipartite interference graph `H = (X, Y, F)`.
//!
//! `X` holds the sources, `Y` one node `W_i` per destination, and
//! `(S_j, W_i) ∈ F` iff `S_j` is an undesired source whose transfer function
//! to `D_i` is not identically zero.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{Network, NetworkRealization};

#[derive(Debug, Error)]
pub enum IgraphError {
    #[error("destinations {} have no interfering source", fmt_dests(.destinations))]
    EmptyInterference {
        destinations: Vec<usize>,
        graph: Box<InterferenceGraph>,
    },
    #[error("interference graph has a cycle")]
    CyclicGraph,
}

fn fmt_dests(d: &[usize]) -> String {
    d.iter()
        .map(|i| format!("D{}", i + 1))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Interference edge `(S_source, W_dest)`. Ordering is by destination, then
/// source, which is also the default edge labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub dest: usize,
    pub source: usize,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(S{}, W{})", self.source + 1, self.dest + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    Source(usize),
    Dest(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Source(j) => write!(f, "S{}", j + 1),
            Node::Dest(i) => write!(f, "W{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceGraph {
    k: usize,
    m: usize,
    edges: Vec<Edge>,
}

/// Node and edge sets of one connected component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub sources: Vec<usize>,
    pub dests: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl InterferenceGraph {
    /// Builds a graph over `k` sources and `m` destinations; duplicate
    /// edges collapse.
    pub fn new(k: usize, m: usize, edges: impl IntoIterator<Item = Edge>) -> Self {
        let set: BTreeSet<Edge> = edges.into_iter().collect();
        for e in &set {
            assert!(e.source < k && e.dest < m, "edge {e} out of range");
        }
        InterferenceGraph {
            k,
            m,
            edges: set.into_iter().collect(),
        }
    }

    pub fn source_count(&self) -> usize {
        self.k
    }

    pub fn dest_count(&self) -> usize {
        self.m
    }

    /// Edges in default label order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    /// The interfering set `B_i` as sorted source indices.
    pub fn interferers(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.dest == i)
            .map(|e| e.source)
    }

    pub fn degree_of_dest(&self, i: usize) -> usize {
        self.interferers(i).count()
    }

    pub fn without<'a>(&self, removed: impl IntoIterator<Item = &'a Edge>) -> Self {
        let removed: BTreeSet<&Edge> = removed.into_iter().collect();
        InterferenceGraph {
            k: self.k,
            m: self.m,
            edges: self
                .edges
                .iter()
                .filter(|e| !removed.contains(e))
                .copied()
                .collect(),
        }
    }

    fn node_id(&self, n: Node) -> usize {
        match n {
            Node::Source(j) => j,
            Node::Dest(i) => self.k + i,
        }
    }

    fn node_at(&self, id: usize) -> Node {
        if id < self.k {
            Node::Source(id)
        } else {
            Node::Dest(id - self.k)
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.k + self.m];
        for e in &self.edges {
            adj[e.source].push(self.k + e.dest);
            adj[self.k + e.dest].push(e.source);
        }
        adj
    }

    /// Connected components, ordered by smallest source index; components
    /// without sources (isolated `W_i`) come last in destination order.
    pub fn components(&self) -> Vec<Component> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.k + self.m];
        let mut comps = Vec::new();
        for start in 0..self.k + self.m {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            label[start] = id;
            let mut members = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        members.push(w);
                        queue.push_back(w);
                    }
                }
            }
            members.sort_unstable();
            comps.push(Component {
                sources: members.iter().filter(|&&v| v < self.k).copied().collect(),
                dests: members
                    .iter()
                    .filter(|&&v| v >= self.k)
                    .map(|v| v - self.k)
                    .collect(),
                edges: Vec::new(),
            });
        }
        for e in &self.edges {
            comps[label[e.source]].edges.push(*e);
        }
        // Scanning ids in order already sorts source-bearing components by
        // their minimum source, ahead of the destination-only ones.
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn has_cycle(&self) -> bool {
        let mut dsu = Dsu::new(self.k + self.m);
        self.edges
            .iter()
            .any(|e| !dsu.union(e.source, self.k + e.dest))
    }

    /// A shortest cycle as an alternating node sequence (the closing edge
    /// back to the first node is implicit). Ties go to the earliest edge in
    /// label order; the cycle starts at that edge's `W` node.
    pub fn shortest_cycle(&self) -> Option<Vec<Node>> {
        let adj = self.adjacency();
        let mut best: Option<Vec<usize>> = None;
        for e in &self.edges {
            let (a, b) = (self.k + e.dest, e.source);
            // Shortest a -> b path avoiding the edge itself.
            let mut prev = vec![usize::MAX; adj.len()];
            prev[a] = a;
            let mut queue = VecDeque::from([a]);
            while let Some(v) = queue.pop_front() {
                if v == b {
                    break;
                }
                for &w in &adj[v] {
                    if (v == a && w == b) || prev[w] != usize::MAX {
                        continue;
                    }
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
            if prev[b] == usize::MAX {
                continue;
            }
            let mut path = vec![b];
            while *path.last().unwrap() != a {
                path.push(prev[*path.last().unwrap()]);
            }
            path.reverse();
            if best.as_ref().is_none_or(|p| path.len() < p.len()) {
                best = Some(path);
            }
        }
        best.map(|p| p.into_iter().map(|v| self.node_at(v)).collect())
    }

    /// Graphviz text with sources and interference nodes in two ranks.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph interference {\n  rankdir=LR;\n");
        let sources: Vec<String> = (0..self.k).map(|j| format!("S{}", j + 1)).collect();
        let dests: Vec<String> = (0..self.m).map(|i| format!("W{}", i + 1)).collect();
        out.push_str(&format!("  {{ rank=same; {}; }}\n", sources.join("; ")));
        out.push_str(&format!("  {{ rank=same; {}; }}\n", dests.join("; ")));
        for e in &self.edges {
            out.push_str(&format!("  S{} -- W{};\n", e.source + 1, e.dest + 1));
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Builds `H` from a zero-test realization: `S_j ∈ B_i` iff `j ∉ A_i` and
/// `m_ij` is non-zero in some slot.
pub fn interference_graph(net: &Network, probe: &NetworkRealization) -> InterferenceGraph {
    let edges = (0..net.destination_count()).flat_map(|i| {
        (0..net.source_count())
            .filter(move |&j| !net.is_demanded(i, j) && !probe.is_zero(i, j))
            .map(move |j| Edge { dest: i, source: j })
    });
    InterferenceGraph::new(net.source_count(), net.destination_count(), edges)
}

/// Like [`interference_graph`] but fails when some `B_i` is empty. The
/// graph travels inside the error so callers can continue with the flag.
pub fn build_igraph(
    net: &Network,
    probe: &NetworkRealization,
) -> Result<InterferenceGraph, IgraphError> {
    let g = interference_graph(net, probe);
    let empty: Vec<usize> = (0..g.dest_count())
        .filter(|&i| g.degree_of_dest(i) == 0)
        .collect();
    if empty.is_empty() {
        Ok(g)
    } else {
        Err(IgraphError::EmptyInterference {
            destinations: empty,
            graph: Box::new(g),
        })
    }
}

/// One tree of a forest, rooted at its lowest-index source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub sources: Vec<usize>,
    pub dests: Vec<usize>,
    pub edges: Vec<Edge>,
    /// `None` only for an isolated `W_i`.
    pub root: Option<usize>,
    /// BFS levels from the root; even levels hold sources, odd levels `W` nodes.
    pub levels: Vec<Vec<Node>>,
    parent: BTreeMap<Node, Node>,
}

impl Tree {
    pub fn parent(&self, n: Node) -> Option<Node> {
        self.parent.get(&n).copied()
    }

    /// Nodes from `n` up to the root, inclusive.
    pub fn path_to_root(&self, n: Node) -> Vec<Node> {
        let mut path = vec![n];
        while let Some(p) = self.parent(*path.last().unwrap()) {
            path.push(p);
        }
        path
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestDecomposition {
    pub trees: Vec<Tree>,
}

impl ForestDecomposition {
    pub fn tree_of_source(&self, j: usize) -> Option<(usize, &Tree)> {
        self.trees
            .iter()
            .enumerate()
            .find(|(_, t)| t.sources.binary_search(&j).is_ok())
    }
}

pub fn decompose(g: &InterferenceGraph) -> Result<ForestDecomposition, IgraphError> {
    decompose_with_roots(g, |c| c.sources.first().copied())
}

/// Like [`decompose`] with a caller-chosen root per component.
pub fn decompose_with_roots(
    g: &InterferenceGraph,
    mut pick_root: impl FnMut(&Component) -> Option<usize>,
) -> Result<ForestDecomposition, IgraphError> {
    if g.has_cycle() {
        return Err(IgraphError::CyclicGraph);
    }
    let adj = g.adjacency();
    let trees = g
        .components()
        .into_iter()
        .map(|c| {
            let root = pick_root(&c);
            if let Some(r) = root {
                assert!(c.sources.contains(&r), "root must lie in its component");
            }
            let start = match root {
                Some(r) => Node::Source(r),
                None => Node::Dest(c.dests[0]),
            };
            let mut levels = vec![vec![start]];
            let mut parent = BTreeMap::new();
            let mut seen = BTreeSet::from([start]);
            loop {
                let mut next = Vec::new();
                for &v in levels.last().unwrap() {
                    for &w in &adj[g.node_id(v)] {
                        let w = g.node_at(w);
                        if seen.insert(w) {
                            parent.insert(w, v);
                            next.push(w);
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                next.sort_unstable();
                levels.push(next);
            }
            Tree {
                sources: c.sources,
                dests: c.dests,
                edges: c.edges,
                root,
                levels,
                parent,
            }
        })
        .collect();
    Ok(ForestDecomposition { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::gf::Field;
    use crate::netgraph::{zero_test_realization, Network, NetworkSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(source: usize, dest: usize) -> Edge {
        Edge { dest, source }
    }

    fn eight_cycle() -> InterferenceGraph {
        InterferenceGraph::new(
            4,
            4,
            [
                e(0, 0),
                e(1, 0),
                e(1, 1),
                e(2, 1),
                e(2, 2),
                e(3, 2),
                e(3, 3),
                e(0, 3),
            ],
        )
    }

    #[test]
    fn four_by_four_interference_is_the_eight_cycle() {
        let net = Network::from_spec(&generate::four_by_four()).unwrap();
        let probe = zero_test_realization(&net, &Field::default(), 3, 1);
        let g = build_igraph(&net, &probe).unwrap();
        assert_eq!(g, eight_cycle());
        assert!(g.has_cycle());
        assert_eq!(g.shortest_cycle().unwrap().len(), 8);
    }

    #[test]
    fn single_interferer() {
        let spec = NetworkSpec {
            nodes: vec!["S1".into(), "S2".into(), "R".into(), "D1".into()],
            edges: vec![
                ["S1".into(), "R".into()],
                ["S2".into(), "R".into()],
                ["R".into(), "D1".into()],
            ],
            sources: vec!["S1".into(), "S2".into()],
            destinations: vec!["D1".into()],
            demands: vec![vec![1]],
        };
        let net = Network::from_spec(&spec).unwrap();
        let probe = zero_test_realization(&net, &Field::default(), 3, 1);
        let g = build_igraph(&net, &probe).unwrap();
        assert_eq!(g.edges(), &[e(1, 0)]);
    }

    #[test]
    fn empty_interference_is_flagged() {
        let net = Network::from_spec(&generate::relay_network(
            2,
            &[vec![0], vec![1]],
            &[vec![0], vec![1]],
        ))
        .unwrap();
        let probe = zero_test_realization(&net, &Field::default(), 3, 1);
        match build_igraph(&net, &probe) {
            Err(IgraphError::EmptyInterference {
                destinations,
                graph,
            }) => {
                assert_eq!(destinations, vec![0, 1]);
                assert!(graph.edges().is_empty());
            }
            other => panic!("expected EmptyInterference, got {other:?}"),
        }
    }

    #[test]
    fn cycle_examples() {
        assert!(eight_cycle().has_cycle());
        let tree = InterferenceGraph::new(3, 2, [e(0, 0), e(1, 0), e(1, 1), e(2, 1)]);
        assert!(!tree.has_cycle());
        assert!(tree.shortest_cycle().is_none());
        let two = InterferenceGraph::new(2, 2, [e(0, 0), e(1, 1)]);
        assert!(!two.has_cycle());
    }

    #[test]
    fn decompose_examples() {
        let single = InterferenceGraph::new(2, 1, [e(1, 0)]);
        let f = decompose(&single).unwrap();
        // S1 is isolated and forms its own component ahead of S2's tree.
        assert_eq!(f.trees.len(), 2);
        assert_eq!(f.trees[0].sources, vec![0]);
        assert_eq!(f.trees[0].levels, vec![vec![Node::Source(0)]]);
        let t = &f.trees[1];
        assert_eq!(t.root, Some(1));
        assert_eq!(t.levels, vec![vec![Node::Source(1)], vec![Node::Dest(0)]]);

        let path = InterferenceGraph::new(2, 1, [e(0, 0), e(1, 0)]);
        let t = &decompose(&path).unwrap().trees[0];
        assert_eq!(t.root, Some(0));
        assert_eq!(
            t.levels,
            vec![
                vec![Node::Source(0)],
                vec![Node::Dest(0)],
                vec![Node::Source(1)]
            ]
        );

        let star = InterferenceGraph::new(3, 1, [e(0, 0), e(1, 0), e(2, 0)]);
        let t = &decompose(&star).unwrap().trees[0];
        assert_eq!(
            t.levels,
            vec![
                vec![Node::Source(0)],
                vec![Node::Dest(0)],
                vec![Node::Source(1), Node::Source(2)]
            ]
        );
        assert_eq!(
            t.path_to_root(Node::Source(2)),
            vec![Node::Source(2), Node::Dest(0), Node::Source(0)]
        );

        assert!(matches!(
            decompose(&eight_cycle()),
            Err(IgraphError::CyclicGraph)
        ));
    }

    #[test]
    fn components_are_ordered() {
        let g = InterferenceGraph::new(4, 3, [e(3, 0), e(2, 1), e(0, 1)]);
        let comps = g.components();
        let firsts: Vec<_> = comps
            .iter()
            .map(|c| (c.sources.clone(), c.dests.clone()))
            .collect();
        assert_eq!(
            firsts,
            vec![
                (vec![0, 2], vec![1]),
                (vec![1], vec![]),
                (vec![3], vec![0]),
                (vec![], vec![2]),
            ]
        );
    }

    #[test]
    fn adding_demands_removes_edges() {
        let q = Field::default();
        let net = Network::from_spec(&generate::four_by_four()).unwrap();
        let probe = zero_test_realization(&net, &q, 3, 4);
        let before = interference_graph(&net, &probe);
        let mut spec = net.to_spec();
        // Demand sizes must stay equal, so widen every set by one source.
        for (i, d) in spec.demands.iter_mut().enumerate() {
            let extra = (1..=4)
                .find(|j| !d.contains(j) && (*j + i) % 2 == 0)
                .unwrap();
            d.push(extra);
        }
        let wider = Network::from_spec(&spec).unwrap();
        let after = interference_graph(&wider, &probe);
        assert!(after.edges().iter().all(|x| before.contains(*x)));
        assert!(after.edges().len() < before.edges().len());
    }

    /// A graph is a forest iff no non-empty edge subset has every degree even.
    fn brute_force_has_cycle(g: &InterferenceGraph) -> bool {
        let f = g.edges().len();
        (1u32..1 << f).any(|mask| {
            let mut deg = vec![0u32; g.source_count() + g.dest_count()];
            for (b, x) in g.edges().iter().enumerate() {
                if mask >> b & 1 == 1 {
                    deg[x.source] += 1;
                    deg[g.source_count() + x.dest] += 1;
                }
            }
            deg.iter().all(|d| d % 2 == 0)
        })
    }

    proptest! {
        #[test]
        fn cycle_detection_matches_brute_force(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate::random_bipartite(&mut rng, 5, 10);
            prop_assert_eq!(g.has_cycle(), brute_force_has_cycle(&g));
            prop_assert_eq!(g.shortest_cycle().is_some(), g.has_cycle());
        }

        #[test]
        fn decomposition_partitions_and_levels(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate::random_bipartite(&mut rng, 6, 8);
            prop_assume!(!g.has_cycle());
            let f = decompose(&g).unwrap();
            let mut seen = BTreeSet::new();
            let mut edges = 0;
            for t in &f.trees {
                let mut level_of = BTreeMap::new();
                for (depth, level) in t.levels.iter().enumerate() {
                    for &n in level {
                        prop_assert!(seen.insert(n));
                        level_of.insert(n, depth);
                        // With a source root, parity separates X and Y.
                        if t.root.is_some() {
                            prop_assert_eq!(matches!(n, Node::Source(_)), depth % 2 == 0);
                        }
                    }
                }
                for x in &t.edges {
                    let a = level_of[&Node::Source(x.source)];
                    let b = level_of[&Node::Dest(x.dest)];
                    prop_assert_eq!(a.abs_diff(b), 1);
                }
                edges += t.edges.len();
            }
            prop_assert_eq!(seen.len(), g.source_count() + g.dest_count());
            prop_assert_eq!(edges, g.edges().len());
        }
    }
}
