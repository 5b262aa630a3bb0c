//! Synthetic networks: the 4x4 cyclic example, forest-interference
//! instances, adversarial constructions and unconstrained random DAGs.
//!
//! Most constructions use one relay per destination: every source that
//! should reach `D_i` feeds relay `R_i`, and `R_i -> D_i` is the only edge
//! into `D_i`, so every connected pair has mincut exactly one.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::igraph::{Edge, InterferenceGraph};
use crate::netgraph::NetworkSpec;
use crate::seeded_rng;

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Relay network in which destination `i` hears exactly the sources in
/// `reach[i]` (0-based) and wants `demands[i]` (0-based).
pub fn relay_network(k: usize, reach: &[Vec<usize>], demands: &[Vec<usize>]) -> NetworkSpec {
    let m = reach.len();
    let sources = names("S", k);
    let relays = names("R", m);
    let destinations = names("D", m);
    let mut edges = Vec::new();
    for (i, heard) in reach.iter().enumerate() {
        for &j in heard {
            edges.push([sources[j].clone(), relays[i].clone()]);
        }
        edges.push([relays[i].clone(), destinations[i].clone()]);
    }
    NetworkSpec {
        nodes: sources
            .iter()
            .chain(&relays)
            .chain(&destinations)
            .cloned()
            .collect(),
        edges,
        sources,
        destinations,
        demands: demands
            .iter()
            .map(|d| d.iter().map(|j| j + 1).collect())
            .collect(),
    }
}

/// Relay network realizing a target interference graph under the given
/// demands: `D_i` hears `A_i ∪ B_i`.
pub fn realize_interference(g: &InterferenceGraph, demands: &[Vec<usize>]) -> NetworkSpec {
    let reach: Vec<Vec<usize>> = demands
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut r: Vec<usize> = a.iter().copied().chain(g.interferers(i)).collect();
            r.sort_unstable();
            r
        })
        .collect();
    relay_network(g.source_count(), &reach, demands)
}

/// Demand pattern of the 4x4 cyclic example (0-based).
pub fn four_by_four_demands() -> Vec<Vec<usize>> {
    vec![vec![2, 3], vec![0, 3], vec![0, 1], vec![1, 2]]
}

/// The 4x4 cyclic example with every transfer function non-trivial and
/// generic: each destination has a private relay hearing all four sources.
pub fn four_by_four() -> NetworkSpec {
    let all = vec![0, 1, 2, 3];
    relay_network(4, &vec![all; 4], &four_by_four_demands())
}

/// The 4x4 demand pattern over a single shared bottleneck: all sources
/// merge at `V`, cross `V -> W`, and `W` fans out to every destination.
/// Every transfer function factors as `u_i * w_j`, so the alternating
/// cycle ratio is identically one.
pub fn four_by_four_shared() -> NetworkSpec {
    let sources = names("S", 4);
    let destinations = names("D", 4);
    let mut edges: Vec<[String; 2]> = sources
        .iter()
        .map(|s| [s.clone(), "V".to_string()])
        .collect();
    edges.push(["V".into(), "W".into()]);
    edges.extend(destinations.iter().map(|d| ["W".to_string(), d.clone()]));
    NetworkSpec {
        nodes: sources
            .iter()
            .cloned()
            .chain(["V".to_string(), "W".to_string()])
            .chain(destinations.iter().cloned())
            .collect(),
        edges,
        sources,
        destinations,
        demands: four_by_four_demands()
            .iter()
            .map(|d| d.iter().map(|j| j + 1).collect())
            .collect(),
    }
}

/// Single cycle of length `2n` (n sources, n destinations) with `L = 1`:
/// `D_i` wants `S_{i+2}` and is interfered by `S_i` and `S_{i+1}` (mod n).
pub fn ring(n: usize) -> NetworkSpec {
    assert!(n >= 3, "ring needs at least three sources");
    let demands: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 2) % n]).collect();
    let reach: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut r = vec![i, (i + 1) % n, (i + 2) % n];
            r.sort_unstable();
            r
        })
        .collect();
    relay_network(n, &reach, &demands)
}

/// A network whose interference graph is a tree but where, at `D_1` and
/// `D_2`, the aligned interference column coincides with the desired one
/// for every assignment.
///
/// `S_1` and `S_2` merge at `V`; the merged edge `V -> W` fans out to `D_1`,
/// `D_2` and `D_3`. Alignment at `D_3` forces `V_2 ∝ V_1` with exactly the
/// ratio that makes `m_12 V_2 = m_11 V_1` at `D_1`.
pub fn adversarial() -> NetworkSpec {
    let spec = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let edge = |a: &str, b: &str| [a.to_string(), b.to_string()];
    NetworkSpec {
        nodes: spec(&["S1", "S2", "S3", "V", "W", "D1", "D2", "D3", "R3"]),
        edges: vec![
            edge("S1", "V"),
            edge("S2", "V"),
            edge("V", "W"),
            edge("W", "D1"),
            edge("W", "D2"),
            edge("W", "R3"),
            edge("S3", "R3"),
            edge("R3", "D3"),
        ],
        sources: spec(&["S1", "S2", "S3"]),
        destinations: spec(&["D1", "D2", "D3"]),
        demands: vec![vec![1], vec![2], vec![3]],
    }
}

/// A generated instance together with the interference graph it was
/// built to have.
#[derive(Debug, Clone)]
pub struct ForestInstance {
    pub spec: NetworkSpec,
    pub demand_size: usize,
    pub interference: InterferenceGraph,
}

/// Random instance whose interference graph is a forest with every
/// destination interfered by at least one source.
pub fn forest_instance(
    seed: u64,
    demand_size: usize,
    max_sources: usize,
    max_dests: usize,
) -> ForestInstance {
    assert!(demand_size >= 1 && demand_size < max_sources);
    let mut rng = seeded_rng(seed, 0x666f_7265);
    let k = rng.gen_range(demand_size + 1..=max_sources);
    let m = rng.gen_range(1..=max_dests);
    let all: Vec<usize> = (0..k).collect();
    let demands: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mut a: Vec<usize> = all
                .choose_multiple(&mut rng, demand_size)
                .copied()
                .collect();
            a.sort_unstable();
            a
        })
        .collect();

    // Union-find over sources 0..k and destinations k..k+m.
    let mut parent: Vec<usize> = (0..k + m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut edges = Vec::new();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    for &i in &order {
        let candidates: Vec<usize> = all
            .iter()
            .copied()
            .filter(|j| !demands[i].contains(j))
            .collect();
        let j = *candidates
            .choose(&mut rng)
            .expect("L < K leaves an interferer");
        let (a, b) = (find(&mut parent, j), find(&mut parent, k + i));
        parent[a] = b;
        edges.push(Edge { dest: i, source: j });
    }
    let extra = rng.gen_range(0..=k + m);
    for _ in 0..extra {
        let i = rng.gen_range(0..m);
        let j = rng.gen_range(0..k);
        if demands[i].contains(&j) || edges.contains(&Edge { dest: i, source: j }) {
            continue;
        }
        let (a, b) = (find(&mut parent, j), find(&mut parent, k + i));
        if a != b {
            parent[a] = b;
            edges.push(Edge { dest: i, source: j });
        }
    }
    let interference = InterferenceGraph::new(k, m, edges);
    ForestInstance {
        spec: realize_interference(&interference, &demands),
        demand_size,
        interference,
    }
}

/// Unconstrained random DAG with `k` sources and `m` destinations (each
/// demanding one random source) and at most `max_edges` edges. Mincut
/// assumptions are not enforced.
pub fn random_dag(seed: u64, k: usize, m: usize, max_edges: usize) -> NetworkSpec {
    let mut rng = seeded_rng(seed, 0x0064_6167);
    let relays = rng.gen_range(0..=3);
    let mut nodes: Vec<String> = names("S", k);
    nodes.extend(names("X", relays));
    nodes.extend(names("D", m));
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.shuffle(&mut rng);
    let mut pos = vec![0; nodes.len()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let n_edges = rng.gen_range(1..=max_edges);
    let mut edges = Vec::new();
    while edges.len() < n_edges {
        let a = rng.gen_range(0..nodes.len());
        let b = rng.gen_range(0..nodes.len());
        if pos[a] < pos[b] {
            edges.push([nodes[a].clone(), nodes[b].clone()]);
        }
    }
    NetworkSpec {
        sources: nodes[..k].to_vec(),
        destinations: nodes[k + relays..].to_vec(),
        demands: (0..m).map(|_| vec![rng.gen_range(1..=k)]).collect(),
        nodes,
        edges,
    }
}

/// Random bipartite graph with up to `max_edges` edges over at most
/// `max_side` sources and destinations; may be disconnected.
pub fn random_bipartite<R: Rng + ?Sized>(
    rng: &mut R,
    max_side: usize,
    max_edges: usize,
) -> InterferenceGraph {
    let k = rng.gen_range(1..=max_side);
    let m = rng.gen_range(1..=max_side);
    let mut all: Vec<Edge> = (0..m)
        .flat_map(|dest| (0..k).map(move |source| Edge { dest, source }))
        .collect();
    all.shuffle(rng);
    let f = rng.gen_range(0..=max_edges.min(all.len()));
    all.truncate(f);
    InterferenceGraph::new(k, m, all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{mincut_table, Network};

    #[test]
    fn relay_constructions_satisfy_mincut_assumptions() {
        let specs = [
            four_by_four(),
            four_by_four_shared(),
            ring(5),
            adversarial(),
        ];
        for spec in specs {
            let net = Network::from_spec(&spec).unwrap();
            for p in mincut_table(&net) {
                assert!(p.mincut <= 1);
                if p.demanded {
                    assert_eq!(p.mincut, 1);
                }
            }
        }
    }

    #[test]
    fn forest_instances_are_forests() {
        for seed in 0..50 {
            let inst = forest_instance(seed, 1 + (seed as usize % 3), 6, 6);
            assert!(!inst.interference.has_cycle());
            let g = &inst.interference;
            assert!((0..g.dest_count()).all(|i| g.degree_of_dest(i) >= 1));
            Network::from_spec(&inst.spec).unwrap();
        }
    }
}
