//! Network model: a directed acyclic graph with labeled sources,
//! destinations and demand sets, plus transfer-function evaluation under
//! random linear network coding.
//!
//! Transfer functions are never expanded symbolically. A coding assignment
//! is a flat vector of local coefficients, one per (in-edge, out-edge) pair
//! at every node, one per (source input, out-edge) pair at every source,
//! and one per (in-edge, output) pair at every destination. Evaluating the
//! network at an assignment gives the `M x K` matrix of values `m_ij`.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Fe, Field, Matrix};
use crate::{seeded_rng, streams};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("network has a directed cycle through node {0:?}")]
    Cycle(String),
    #[error("demand sets differ in size: destination {destination} wants {found} sources, expected {expected}")]
    DemandSize {
        destination: usize,
        expected: usize,
        found: usize,
    },
    #[error("mincut assumption violated for {} pair(s): {}", .0.len(), fmt_pairs(.0))]
    AssumptionViolation(Vec<PairCut>),
}

fn fmt_pairs(pairs: &[PairCut]) -> String {
    pairs
        .iter()
        .map(|p| {
            format!(
                "(D{}, S{}) mincut {}{}",
                p.destination + 1,
                p.source + 1,
                p.mincut,
                if p.demanded { " [demanded]" } else { "" }
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// On-disk form of a network. Demands use 1-based source indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub sources: Vec<String>,
    pub destinations: Vec<String>,
    pub demands: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }
}

/// Where each local coding coefficient sits in a flat assignment vector.
#[derive(Debug, Clone)]
struct CoefficientLayout {
    /// Per edge: coefficient applied to the tail's own message, if the tail is a source.
    source_input: Vec<Option<usize>>,
    /// Per edge: coefficients for each in-edge of the tail, aligned with `in_edges[tail]`.
    from_in_edges: Vec<Vec<usize>>,
    /// Per destination: output coefficients aligned with `in_edges[node]`.
    sink: Vec<Vec<usize>>,
    len: usize,
}

/// Validated network. All indices are 0-based; sources and destinations are
/// referred to by their position in the ordered source/destination lists.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<String>,
    edges: Vec<(usize, usize)>,
    sources: Vec<usize>,
    destinations: Vec<usize>,
    demands: Vec<Vec<usize>>,
    demand_size: usize,
    topo: Vec<usize>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    source_at: Vec<Option<usize>>,
    layout: CoefficientLayout,
}

/// Parses and validates a network file.
pub fn load_network(text: &str) -> Result<Network, NetError> {
    let spec: NetworkSpec =
        serde_json::from_str(text).map_err(|e| NetError::Parse(e.to_string()))?;
    Network::from_spec(&spec)
}

impl Network {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Network, NetError> {
        let parse = |msg: String| NetError::Parse(msg);
        let mut index = HashMap::new();
        for (i, name) in spec.nodes.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(parse(format!("duplicate node {name:?}")));
            }
        }
        let lookup = |name: &str, what: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| NetError::Parse(format!("{what} refers to unknown node {name:?}")))
        };
        let mut edges = Vec::with_capacity(spec.edges.len());
        for [tail, head] in &spec.edges {
            edges.push((lookup(tail, "edge")?, lookup(head, "edge")?));
        }
        let sources = spec
            .sources
            .iter()
            .map(|s| lookup(s, "source"))
            .collect::<Result<Vec<_>, _>>()?;
        let destinations = spec
            .destinations
            .iter()
            .map(|d| lookup(d, "destination"))
            .collect::<Result<Vec<_>, _>>()?;
        if sources.is_empty() || destinations.is_empty() {
            return Err(parse("need at least one source and one destination".into()));
        }
        let mut terminals: Vec<usize> = sources.iter().chain(&destinations).copied().collect();
        terminals.sort_unstable();
        if terminals.windows(2).any(|w| w[0] == w[1]) {
            return Err(parse(
                "source and destination nodes must be pairwise distinct".into(),
            ));
        }
        let k = sources.len();
        if spec.demands.len() != destinations.len() {
            return Err(parse(format!(
                "{} demand sets for {} destinations",
                spec.demands.len(),
                destinations.len()
            )));
        }
        let mut demands = Vec::with_capacity(spec.demands.len());
        for (i, set) in spec.demands.iter().enumerate() {
            let mut set: Vec<usize> = set
                .iter()
                .map(|&j| {
                    if (1..=k).contains(&j) {
                        Ok(j - 1)
                    } else {
                        Err(parse(format!(
                            "destination {} demands source index {j} outside 1..={k}",
                            i + 1
                        )))
                    }
                })
                .collect::<Result<_, _>>()?;
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(parse(format!("destination {} lists a source twice", i + 1)));
            }
            if set.is_empty() {
                return Err(parse(format!("destination {} demands nothing", i + 1)));
            }
            demands.push(set);
        }
        let demand_size = demands[0].len();
        if let Some((i, d)) = demands
            .iter()
            .enumerate()
            .find(|(_, d)| d.len() != demand_size)
        {
            return Err(NetError::DemandSize {
                destination: i + 1,
                expected: demand_size,
                found: d.len(),
            });
        }

        let n = spec.nodes.len();
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (e, &(t, h)) in edges.iter().enumerate() {
            out_edges[t].push(e);
            in_edges[h].push(e);
        }
        let topo = topological_order(n, &edges, &out_edges)
            .map_err(|v| NetError::Cycle(spec.nodes[v].clone()))?;

        let mut source_at = vec![None; n];
        for (j, &v) in sources.iter().enumerate() {
            source_at[v] = Some(j);
        }
        let mut len = 0;
        let mut next = || {
            len += 1;
            len - 1
        };
        let mut source_input = vec![None; edges.len()];
        let mut from_in_edges = vec![Vec::new(); edges.len()];
        for (e, &(t, _)) in edges.iter().enumerate() {
            if source_at[t].is_some() {
                source_input[e] = Some(next());
            }
            from_in_edges[e] = in_edges[t].iter().map(|_| next()).collect();
        }
        let sink = destinations
            .iter()
            .map(|&d| in_edges[d].iter().map(|_| next()).collect())
            .collect();
        let layout = CoefficientLayout {
            source_input,
            from_in_edges,
            sink,
            len,
        };

        Ok(Network {
            nodes: spec.nodes.clone(),
            edges,
            sources,
            destinations,
            demands,
            demand_size,
            topo,
            in_edges,
            out_edges,
            source_at,
            layout,
        })
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(t, h)| [self.nodes[t].clone(), self.nodes[h].clone()])
                .collect(),
            sources: self
                .sources
                .iter()
                .map(|&v| self.nodes[v].clone())
                .collect(),
            destinations: self
                .destinations
                .iter()
                .map(|&v| self.nodes[v].clone())
                .collect(),
            demands: self
                .demands
                .iter()
                .map(|d| d.iter().map(|j| j + 1).collect())
                .collect(),
        }
    }

    /// Number of sources, `K`.
    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    /// Number of destinations, `M`.
    pub fn destination_count(&self) -> usize {
        self.destinations.len()
    }

    /// Common demand-set size, `L`.
    pub fn demand_size(&self) -> usize {
        self.demand_size
    }

    /// Sorted source indices wanted by destination `i`.
    pub fn demands(&self, i: usize) -> &[usize] {
        &self.demands[i]
    }

    pub fn is_demanded(&self, i: usize, j: usize) -> bool {
        self.demands[i].binary_search(&j).is_ok()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn source_node(&self, j: usize) -> usize {
        self.sources[j]
    }

    pub fn destination_node(&self, i: usize) -> usize {
        self.destinations[i]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Number of local coding coefficients per slot, `s`.
    pub fn variable_count(&self) -> usize {
        self.layout.len
    }

    pub fn random_assignment<R: Rng + ?Sized>(&self, field: &Field, rng: &mut R) -> Vec<Fe> {
        (0..self.layout.len).map(|_| field.random(rng)).collect()
    }

    /// Coefficient multiplying the tail source's message on edge `e`.
    pub fn source_coefficient(&self, xi: &[Fe], e: usize) -> Option<Fe> {
        self.layout.source_input[e].map(|v| xi[v])
    }

    /// Coefficient from in-edge `from` into out-edge `to`, if they are adjacent.
    pub fn edge_coefficient(&self, xi: &[Fe], from: usize, to: usize) -> Option<Fe> {
        let tail = self.edges[to].0;
        self.in_edges[tail]
            .iter()
            .position(|&e| e == from)
            .map(|p| xi[self.layout.from_in_edges[to][p]])
    }

    /// Output coefficient applied by destination `i` to its in-edge `e`.
    pub fn sink_coefficient(&self, xi: &[Fe], i: usize, e: usize) -> Option<Fe> {
        self.in_edges[self.destinations[i]]
            .iter()
            .position(|&x| x == e)
            .map(|p| xi[self.layout.sink[i][p]])
    }

    /// Evaluates every transfer function at one assignment by forward
    /// propagation of global coding vectors. Entry `(i, j)` is `m_ij`.
    pub fn transfer_matrix(&self, field: &Field, xi: &[Fe]) -> Matrix {
        assert_eq!(xi.len(), self.layout.len, "assignment length");
        let k = self.sources.len();
        let mut global = vec![vec![Fe::ZERO; k]; self.edges.len()];
        for &v in &self.topo {
            for &e in &self.out_edges[v] {
                let mut g = vec![Fe::ZERO; k];
                if let (Some(j), Some(var)) = (self.source_at[v], self.layout.source_input[e]) {
                    g[j] = xi[var];
                }
                for (p, &inc) in self.in_edges[v].iter().enumerate() {
                    let c = xi[self.layout.from_in_edges[e][p]];
                    if c.is_zero() {
                        continue;
                    }
                    for (gj, &hj) in g.iter_mut().zip(&global[inc]) {
                        *gj = field.add(*gj, field.mul(c, hj));
                    }
                }
                global[e] = g;
            }
        }
        let mut m = Matrix::zeros(self.destinations.len(), k);
        for (i, &d) in self.destinations.iter().enumerate() {
            for (p, &inc) in self.in_edges[d].iter().enumerate() {
                let c = xi[self.layout.sink[i][p]];
                for j in 0..k {
                    m[(i, j)] = field.add(m[(i, j)], field.mul(c, global[inc][j]));
                }
            }
        }
        m
    }

    /// Pushes one symbol per source through the network and returns what
    /// each destination outputs. This is the raw scalar route and never
    /// forms transfer functions.
    pub fn propagate(&self, field: &Field, xi: &[Fe], symbols: &[Fe]) -> Vec<Fe> {
        assert_eq!(symbols.len(), self.sources.len(), "one symbol per source");
        let mut carried = vec![Fe::ZERO; self.edges.len()];
        for &v in &self.topo {
            for &e in &self.out_edges[v] {
                let mut s = Fe::ZERO;
                if let (Some(j), Some(var)) = (self.source_at[v], self.layout.source_input[e]) {
                    s = field.mul(xi[var], symbols[j]);
                }
                for (p, &inc) in self.in_edges[v].iter().enumerate() {
                    let c = xi[self.layout.from_in_edges[e][p]];
                    s = field.add(s, field.mul(c, carried[inc]));
                }
                carried[e] = s;
            }
        }
        self.destinations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                field.sum(
                    self.in_edges[d]
                        .iter()
                        .enumerate()
                        .map(|(p, &inc)| field.mul(xi[self.layout.sink[i][p]], carried[inc])),
                )
            })
            .collect()
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.out_edges[v] {
                let h = self.edges[e].1;
                if !seen[h] {
                    seen[h] = true;
                    queue.push_back(h);
                }
            }
        }
        seen
    }

    /// Whether any directed path joins source `j` to destination `i`.
    pub fn has_path(&self, j: usize, i: usize) -> bool {
        self.reachable_from(self.sources[j])[self.destinations[i]]
    }
}

fn topological_order(
    n: usize,
    edges: &[(usize, usize)],
    out_edges: &[Vec<usize>],
) -> Result<Vec<usize>, usize> {
    let mut indeg = vec![0usize; n];
    for &(_, h) in edges {
        indeg[h] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &e in &out_edges[v] {
            let h = edges[e].1;
            indeg[h] -= 1;
            if indeg[h] == 0 {
                queue.push_back(h);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n)
            .find(|&v| indeg[v] > 0)
            .expect("some node left on a cycle"))
    }
}

/// Maximum number of edge-disjoint paths from source `j` to destination `i`
/// (unit edge capacities), by breadth-first augmenting paths.
pub fn mincut(net: &Network, j: usize, i: usize) -> usize {
    let (s, t) = (net.sources[j], net.destinations[i]);
    // Residual arcs: 2e is the forward copy of edge e, 2e + 1 its reverse.
    let mut cap: Vec<u8> = net.edges.iter().flat_map(|_| [1u8, 0]).collect();
    let head = |a: usize| {
        let (t, h) = net.edges[a / 2];
        if a.is_multiple_of(2) {
            h
        } else {
            t
        }
    };
    let mut arcs_at = vec![Vec::new(); net.nodes.len()];
    for (e, &(tail, h)) in net.edges.iter().enumerate() {
        arcs_at[tail].push(2 * e);
        arcs_at[h].push(2 * e + 1);
    }
    let mut flow = 0;
    loop {
        let mut via = vec![usize::MAX; net.nodes.len()];
        let mut seen = vec![false; net.nodes.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &a in &arcs_at[v] {
                let w = head(a);
                if cap[a] > 0 && !seen[w] {
                    seen[w] = true;
                    via[w] = a;
                    queue.push_back(w);
                }
            }
        }
        if !seen[t] {
            return flow;
        }
        let mut v = t;
        while v != s {
            let a = via[v];
            cap[a] -= 1;
            cap[a ^ 1] += 1;
            v = head(a ^ 1);
        }
        flow += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCut {
    pub destination: usize,
    pub source: usize,
    pub mincut: usize,
    pub demanded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs: Vec<PairCut>,
    /// Destinations whose interfering set tested empty.
    pub empty_interference: Vec<usize>,
}

/// Mincut of every (destination, source) pair, destination-major.
pub fn mincut_table(net: &Network) -> Vec<PairCut> {
    (0..net.destination_count())
        .flat_map(|i| {
            (0..net.source_count()).map(move |j| PairCut {
                destination: i,
                source: j,
                mincut: mincut(net, j, i),
                demanded: net.is_demanded(i, j),
            })
        })
        .collect()
}

/// Checks that demanded pairs have mincut exactly one and all other pairs at
/// most one, and flags destinations without interference.
pub fn validate_assumptions(
    net: &Network,
    field: &Field,
    zero_trials: usize,
    seed: u64,
) -> Result<ValidationReport, NetError> {
    let pairs = mincut_table(net);
    let bad: Vec<PairCut> = pairs
        .iter()
        .filter(|p| {
            if p.demanded {
                p.mincut != 1
            } else {
                p.mincut > 1
            }
        })
        .cloned()
        .collect();
    if !bad.is_empty() {
        return Err(NetError::AssumptionViolation(bad));
    }
    let probe = zero_test_realization(net, field, zero_trials.max(1), seed);
    let empty_interference = (0..net.destination_count())
        .filter(|&i| (0..net.source_count()).all(|j| net.is_demanded(i, j) || probe.is_zero(i, j)))
        .collect();
    Ok(ValidationReport {
        pairs,
        empty_interference,
    })
}

/// Realization whose slots serve as independent zero-test trials: `m_ij`
/// tests identically zero iff it vanishes in every slot.
pub fn zero_test_realization(
    net: &Network,
    field: &Field,
    trials: usize,
    seed: u64,
) -> NetworkRealization {
    let mut rng = seeded_rng(seed, streams::ZERO_TEST);
    realize_with(net, field, trials, &mut rng)
}

/// A concrete coding assignment for each of `n` slots and the transfer
/// values it induces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub slot_count: usize,
    pub coding: Vec<Vec<Fe>>,
    /// One `M x K` transfer matrix per slot.
    pub transfer: Vec<Matrix>,
}

impl NetworkRealization {
    pub fn from_assignments(net: &Network, field: &Field, coding: Vec<Vec<Fe>>) -> Self {
        let transfer = coding
            .iter()
            .map(|xi| net.transfer_matrix(field, xi))
            .collect();
        NetworkRealization {
            slot_count: coding.len(),
            coding,
            transfer,
        }
    }

    /// `m_ij` at slot `k`.
    #[inline]
    pub fn m(&self, i: usize, j: usize, k: usize) -> Fe {
        self.transfer[k][(i, j)]
    }

    /// Whether `m_ij` vanished in every slot.
    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        (0..self.slot_count).all(|k| self.m(i, j, k).is_zero())
    }
}

/// Draws every local coefficient uniformly and independently per slot.
pub fn realize(net: &Network, field: &Field, n: usize, seed: u64) -> NetworkRealization {
    let mut rng = seeded_rng(seed, streams::REALIZE);
    realize_with(net, field, n, &mut rng)
}

pub fn realize_with<R: Rng + ?Sized>(
    net: &Network,
    field: &Field,
    n: usize,
    rng: &mut R,
) -> NetworkRealization {
    let coding = (0..n).map(|_| net.random_assignment(field, rng)).collect();
    NetworkRealization::from_assignments(net, field, coding)
}

/// One-sided Monte Carlo identity test for `m_ij ≡ 0`. A `false` answer is
/// always right; `true` can be wrong with probability at most
/// `(deg / q)^trials`.
pub fn is_zero_function(
    net: &Network,
    field: &Field,
    j: usize,
    i: usize,
    trials: usize,
    seed: u64,
) -> bool {
    let mut rng = seeded_rng(seed, streams::ZERO_TEST);
    (0..trials).all(|_| {
        let xi = net.random_assignment(field, &mut rng);
        net.transfer_matrix(field, &xi)[(i, j)].is_zero()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(
        nodes: &[&str],
        edges: &[(&str, &str)],
        sources: &[&str],
        destinations: &[&str],
        demands: &[&[usize]],
    ) -> NetworkSpec {
        NetworkSpec {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            edges: edges
                .iter()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect(),
            sources: sources.iter().map(|s| s.to_string()).collect(),
            destinations: destinations.iter().map(|s| s.to_string()).collect(),
            demands: demands.iter().map(|d| d.to_vec()).collect(),
        }
    }

    fn single_edge() -> Network {
        Network::from_spec(&spec(&["s", "d"], &[("s", "d")], &["s"], &["d"], &[&[1]])).unwrap()
    }

    #[test]
    fn loads_trivial_network() {
        let text = r#"{"nodes":["s","d"],"edges":[["s","d"]],"sources":["s"],"destinations":["d"],"demands":[[1]]}"#;
        let net = load_network(text).unwrap();
        assert_eq!(
            (
                net.source_count(),
                net.destination_count(),
                net.demand_size()
            ),
            (1, 1, 1)
        );
    }

    #[test]
    fn loads_four_by_four_example() {
        let net = load_network(&generate::four_by_four().to_json()).unwrap();
        assert_eq!(net.source_count(), 4);
        assert_eq!(net.destination_count(), 4);
        assert_eq!(net.demand_size(), 2);
        assert_eq!(net.demands(0), &[2, 3]);
        assert_eq!(net.demands(1), &[0, 3]);
        assert_eq!(net.demands(2), &[0, 1]);
        assert_eq!(net.demands(3), &[1, 2]);
    }

    #[test]
    fn rejects_malformed_files() {
        let unknown = r#"{"nodes":["s","d"],"edges":[["s","x"]],"sources":["s"],"destinations":["d"],"demands":[[1]]}"#;
        assert!(matches!(load_network(unknown), Err(NetError::Parse(_))));

        let extra_key = r#"{"nodes":["s","d"],"edges":[],"sources":["s"],"destinations":["d"],"demands":[[1]],"rate":3}"#;
        assert!(matches!(load_network(extra_key), Err(NetError::Parse(_))));

        let bad_index = r#"{"nodes":["s","d"],"edges":[],"sources":["s"],"destinations":["d"],"demands":[[2]]}"#;
        assert!(matches!(load_network(bad_index), Err(NetError::Parse(_))));

        let shared = r#"{"nodes":["s","d"],"edges":[],"sources":["s"],"destinations":["s"],"demands":[[1]]}"#;
        assert!(matches!(load_network(shared), Err(NetError::Parse(_))));

        assert!(matches!(load_network("not json"), Err(NetError::Parse(_))));
    }

    #[test]
    fn rejects_cycles_and_uneven_demands() {
        let cyclic = spec(
            &["s", "a", "b", "d"],
            &[("s", "a"), ("a", "b"), ("b", "a"), ("b", "d")],
            &["s"],
            &["d"],
            &[&[1]],
        );
        assert!(matches!(
            Network::from_spec(&cyclic),
            Err(NetError::Cycle(_))
        ));

        let uneven = spec(
            &["s1", "s2", "d1", "d2"],
            &[("s1", "d1"), ("s2", "d2")],
            &["s1", "s2"],
            &["d1", "d2"],
            &[&[1], &[1, 2]],
        );
        assert!(matches!(
            Network::from_spec(&uneven),
            Err(NetError::DemandSize {
                destination: 2,
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn mincut_examples() {
        let net = single_edge();
        assert_eq!(mincut(&net, 0, 0), 1);

        let none = Network::from_spec(&spec(&["s", "d"], &[], &["s"], &["d"], &[&[1]])).unwrap();
        assert_eq!(mincut(&none, 0, 0), 0);

        let two = Network::from_spec(&spec(
            &["s", "a", "b", "d"],
            &[("s", "a"), ("s", "b"), ("a", "d"), ("b", "d")],
            &["s"],
            &["d"],
            &[&[1]],
        ))
        .unwrap();
        assert_eq!(mincut(&two, 0, 0), 2);
    }

    #[test]
    fn validation_flags_violations() {
        let none = Network::from_spec(&spec(&["s", "d"], &[], &["s"], &["d"], &[&[1]])).unwrap();
        let q = Field::default();
        match validate_assumptions(&none, &q, 3, 0) {
            Err(NetError::AssumptionViolation(p)) => {
                assert_eq!(p.len(), 1);
                assert_eq!(p[0].mincut, 0);
            }
            other => panic!("expected violation, got {other:?}"),
        }

        let parallel = Network::from_spec(&spec(
            &["s", "d"],
            &[("s", "d"), ("s", "d")],
            &["s"],
            &["d"],
            &[&[1]],
        ))
        .unwrap();
        match validate_assumptions(&parallel, &q, 3, 0) {
            Err(NetError::AssumptionViolation(p)) => assert_eq!(p[0].mincut, 2),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn four_by_four_validates_and_has_interference_everywhere() {
        let net = Network::from_spec(&generate::four_by_four()).unwrap();
        let report = validate_assumptions(&net, &Field::default(), 3, 7).unwrap();
        assert_eq!(report.pairs.len(), 16);
        assert!(report.pairs.iter().all(|p| p.mincut == 1));
        assert!(report.empty_interference.is_empty());
    }

    #[test]
    fn single_edge_transfer_is_path_product() {
        let net = single_edge();
        let q = Field::default();
        for seed in 0..5 {
            let r = realize(&net, &q, 3, seed);
            for k in 0..3 {
                let xi = &r.coding[k];
                let expected = q.mul(
                    net.source_coefficient(xi, 0).unwrap(),
                    net.sink_coefficient(xi, 0, 0).unwrap(),
                );
                assert_eq!(r.m(0, 0, k), expected);
            }
        }
    }

    #[test]
    fn disconnected_pairs_stay_zero() {
        let net = Network::from_spec(&spec(
            &["s1", "s2", "d1", "d2"],
            &[("s1", "d1"), ("s2", "d2")],
            &["s1", "s2"],
            &["d1", "d2"],
            &[&[1], &[2]],
        ))
        .unwrap();
        let q = Field::default();
        let r = realize(&net, &q, 4, 3);
        assert!(r.is_zero(0, 1));
        assert!(r.is_zero(1, 0));
        assert!(is_zero_function(&net, &q, 1, 0, 3, 1));
        assert!(!is_zero_function(&net, &q, 0, 0, 3, 1));
    }

    /// Sum over directed paths of coefficient products; independent of the
    /// forward-propagation route.
    fn path_sum(net: &Network, q: &Field, xi: &[Fe], j: usize, i: usize) -> Fe {
        fn walk(
            net: &Network,
            q: &Field,
            xi: &[Fe],
            last: usize,
            acc: Fe,
            i: usize,
            total: &mut Fe,
        ) {
            let node = net.edges[last].1;
            if node == net.destinations[i] {
                let c = net.sink_coefficient(xi, i, last).unwrap();
                *total = q.add(*total, q.mul(acc, c));
                return;
            }
            for (e, &(t, _)) in net.edges.iter().enumerate() {
                if t == node {
                    let c = net.edge_coefficient(xi, last, e).unwrap();
                    walk(net, q, xi, e, q.mul(acc, c), i, total);
                }
            }
        }
        let mut total = Fe::ZERO;
        let s = net.sources[j];
        for (e, &(t, _)) in net.edges.iter().enumerate() {
            if t == s {
                let c = net.source_coefficient(xi, e).unwrap();
                walk(net, q, xi, e, c, i, &mut total);
            }
        }
        total
    }

    #[test]
    fn transfer_matches_path_enumeration() {
        let q = Field::default();
        for seed in 0..40 {
            let spec = generate::random_dag(seed, 3, 2, 10);
            let net = Network::from_spec(&spec).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = net.random_assignment(&q, &mut rng);
            let t = net.transfer_matrix(&q, &xi);
            for i in 0..net.destination_count() {
                for j in 0..net.source_count() {
                    assert_eq!(t[(i, j)], path_sum(&net, &q, &xi, j, i), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn two_path_transfer_is_sum_of_products() {
        let net = Network::from_spec(&spec(
            &["s", "a", "b", "d"],
            &[("s", "a"), ("s", "b"), ("a", "d"), ("b", "d")],
            &["s"],
            &["d"],
            &[&[1]],
        ))
        .unwrap();
        let q = Field::new(101).unwrap();
        let r = realize(&net, &q, 5, 9);
        for k in 0..5 {
            let xi = &r.coding[k];
            let c = |e: usize| net.source_coefficient(xi, e).unwrap();
            let f = |a: usize, b: usize| net.edge_coefficient(xi, a, b).unwrap();
            let out = |e: usize| net.sink_coefficient(xi, 0, e).unwrap();
            let via_a = q.product([c(0), f(0, 2), out(2)]);
            let via_b = q.product([c(1), f(1, 3), out(3)]);
            assert_eq!(r.m(0, 0, k), q.add(via_a, via_b));
        }
    }

    #[test]
    fn relabeling_nodes_preserves_transfer() {
        let q = Field::default();
        let a = spec(
            &["s", "v", "d"],
            &[("s", "v"), ("v", "d"), ("s", "d")],
            &["s"],
            &["d"],
            &[&[1]],
        );
        let b = spec(
            &["z", "x", "y"],
            &[("x", "y"), ("y", "z"), ("x", "z")],
            &["x"],
            &["z"],
            &[&[1]],
        );
        let (na, nb) = (
            Network::from_spec(&a).unwrap(),
            Network::from_spec(&b).unwrap(),
        );
        assert_eq!(na.variable_count(), nb.variable_count());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let xi = na.random_assignment(&q, &mut rng);
            assert_eq!(na.transfer_matrix(&q, &xi), nb.transfer_matrix(&q, &xi));
        }
    }

    #[test]
    fn zero_mincut_implies_zero_function() {
        let q = Field::default();
        for seed in 0..30 {
            let net = Network::from_spec(&generate::random_dag(seed, 3, 3, 8)).unwrap();
            for i in 0..net.destination_count() {
                for j in 0..net.source_count() {
                    if mincut(&net, j, i) == 0 {
                        assert!(is_zero_function(&net, &q, j, i, 3, seed));
                    } else {
                        assert!(!is_zero_function(&net, &q, j, i, 3, seed));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn propagation_matches_transfer_product(seed in any::<u64>()) {
            let q = Field::default();
            let net = Network::from_spec(&generate::random_dag(seed, 3, 3, 12)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = net.random_assignment(&q, &mut rng);
            let t = net.transfer_matrix(&q, &xi);
            let x: Vec<Fe> = (0..net.source_count()).map(|_| q.random(&mut rng)).collect();
            prop_assert_eq!(net.propagate(&q, &xi, &x), q.mat_vec(&t, &x).unwrap());
        }
    }
}
