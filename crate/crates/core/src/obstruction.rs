//! Alternating transfer ratio around a cycle of the interference graph.
//!
//! Walking a cycle `W_{i1} S_{j1} W_{i2} S_{j2} ...`, every edge `(S_j, W_i)`
//! is crossed once. Edges crossed from a `W` node to a source contribute
//! `m_ij` to the numerator; edges crossed from a source to a `W` node
//! contribute to the denominator. Whenever a plan aligns all interference
//! on the cycle at one slot per source, this ratio must equal one at every
//! slot, so a non-constant ratio rules out the unextended rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Fe, Field};
use crate::igraph::{Edge, InterferenceGraph, Node};
use crate::netgraph::Network;
use crate::sparsifier::{find_dstar, EdgeLabeling};
use crate::{seeded_rng, streams};

pub const DEFAULT_RATIO_TRIALS: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ObstructionError {
    #[error("not a cycle of the interference graph: {0}")]
    NotACycle(String),
    #[error("at least two trials are needed, got {0}")]
    TooFewTrials(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioVerdict {
    Constant,
    NonConstant,
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRatio {
    pub cycle: Vec<Node>,
    /// `t` per trial; `None` where a denominator factor vanished.
    pub evaluations: Vec<Option<Fe>>,
    pub verdict: RatioVerdict,
}

/// Edges of a closed walk with the direction each is crossed in.
/// `true` means the edge is crossed from the `W` side to the source side.
fn oriented_edges(cycle: &[Node]) -> Vec<(Edge, bool)> {
    (0..cycle.len())
        .map(|p| match (cycle[p], cycle[(p + 1) % cycle.len()]) {
            (Node::Dest(i), Node::Source(j)) => (Edge { dest: i, source: j }, true),
            (Node::Source(j), Node::Dest(i)) => (Edge { dest: i, source: j }, false),
            _ => unreachable!("validated cycles alternate"),
        })
        .collect()
}

pub fn validate_cycle(g: &InterferenceGraph, cycle: &[Node]) -> Result<(), ObstructionError> {
    let bad = |msg: String| Err(ObstructionError::NotACycle(msg));
    if cycle.len() < 4 || !cycle.len().is_multiple_of(2) {
        return bad(format!(
            "length {} is not an even number of at least 4",
            cycle.len()
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &n in cycle {
        let in_range = match n {
            Node::Source(j) => j < g.source_count(),
            Node::Dest(i) => i < g.dest_count(),
        };
        if !in_range {
            return bad(format!("{n} is not a node of the graph"));
        }
        if !seen.insert(n) {
            return bad(format!("{n} repeats"));
        }
    }
    for p in 0..cycle.len() {
        let (a, b) = (cycle[p], cycle[(p + 1) % cycle.len()]);
        let edge = match (a, b) {
            (Node::Dest(i), Node::Source(j)) | (Node::Source(j), Node::Dest(i)) => {
                Edge { dest: i, source: j }
            }
            _ => return bad(format!("{a} and {b} are on the same side")),
        };
        if !g.contains(edge) {
            return bad(format!("{edge} is not an interference edge"));
        }
    }
    Ok(())
}

/// `t` at one assignment, or `None` if a denominator factor is zero.
pub fn evaluate_ratio(net: &Network, field: &Field, cycle: &[Node], xi: &[Fe]) -> Option<Fe> {
    let t = net.transfer_matrix(field, xi);
    let mut num = Fe::ONE;
    let mut den = Fe::ONE;
    for (e, w_to_s) in oriented_edges(cycle) {
        let m = t[(e.dest, e.source)];
        if w_to_s {
            num = field.mul(num, m);
        } else {
            den = field.mul(den, m);
        }
    }
    field.inv(den).map(|d| field.mul(num, d))
}

/// Evaluates `t` at `trials` independent assignments and classifies it.
/// A `Constant` verdict is one-sided: a non-constant ratio agrees at all
/// points with probability at most `(deg/q)^(trials-1)`.
pub fn cycle_ratio(
    net: &Network,
    field: &Field,
    g: &InterferenceGraph,
    cycle: &[Node],
    trials: usize,
    seed: u64,
) -> Result<CycleRatio, ObstructionError> {
    if trials < 2 {
        return Err(ObstructionError::TooFewTrials(trials));
    }
    validate_cycle(g, cycle)?;
    let mut rng = seeded_rng(seed, streams::RATIO);
    let evaluations: Vec<Option<Fe>> = (0..trials)
        .map(|_| {
            let xi = net.random_assignment(field, &mut rng);
            evaluate_ratio(net, field, cycle, &xi)
        })
        .collect();
    let valid: Vec<Fe> = evaluations.iter().flatten().copied().collect();
    let verdict = if valid.len() < 2 {
        RatioVerdict::Undefined
    } else if valid.iter().all(|&v| v == valid[0]) {
        RatioVerdict::Constant
    } else {
        RatioVerdict::NonConstant
    };
    Ok(CycleRatio {
        cycle: cycle.to_vec(),
        evaluations,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finding {
    /// The 4x4 single-cycle configuration with a non-constant ratio.
    Infeasible,
    /// Another cyclic graph with a non-constant ratio.
    Advisory,
    /// The ratio is constant or undefined; nothing follows.
    NoClaim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub finding: Finding,
    pub four_by_four: bool,
    pub verdict: RatioVerdict,
    pub unextended_slots: usize,
    pub d_star: usize,
    pub fallback_slots: usize,
    pub statement: String,
}

/// Whether `g` has the shape of the 4x4 example: four sources, four
/// destinations each wanting two, and an interference graph that is one
/// cycle through all eight nodes.
pub fn is_four_by_four_cycle(net: &Network, g: &InterferenceGraph) -> bool {
    net.source_count() == 4
        && net.destination_count() == 4
        && net.demand_size() == 2
        && g.edges().len() == 8
        && g.is_connected()
        && (0..4).all(|i| g.degree_of_dest(i) == 2)
        && (0..4).all(|j| g.edges().iter().filter(|e| e.source == j).count() == 2)
}

pub fn infeasibility_report(
    net: &Network,
    g: &InterferenceGraph,
    ratio: &CycleRatio,
) -> InfeasibilityReport {
    let four_by_four = is_four_by_four_cycle(net, g);
    let l = net.demand_size();
    let d_star = find_dstar(g, &EdgeLabeling::default_for(g)).d_star;
    let unextended_slots = l + 1;
    let fallback_slots = l + d_star + 1;
    let cycle = ratio
        .cycle
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let (finding, statement) = match (ratio.verdict, four_by_four) {
        (RatioVerdict::NonConstant, true) => (
            Finding::Infeasible,
            format!(
                "rate 1/{unextended_slots} infeasible with finite symbol extension \
                 (cycle {cycle} has a non-constant ratio); fallback rate 1/{fallback_slots} via d*={d_star}"
            ),
        ),
        (RatioVerdict::NonConstant, false) => (
            Finding::Advisory,
            format!(
                "alternating-ratio obstruction detected on cycle {cycle}; infeasibility of rate \
                 1/{unextended_slots} is established only for the 4x4 configuration; \
                 sparsify to reach rate 1/{fallback_slots} via d*={d_star}"
            ),
        ),
        (RatioVerdict::Constant, _) => (
            Finding::NoClaim,
            format!("ratio on cycle {cycle} is constant; no infeasibility claim"),
        ),
        (RatioVerdict::Undefined, _) => (
            Finding::NoClaim,
            format!("ratio on cycle {cycle} is undefined at the sampled points; no claim"),
        ),
    };
    InfeasibilityReport {
        finding,
        four_by_four,
        verdict: ratio.verdict,
        unextended_slots,
        d_star,
        fallback_slots,
        statement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::igraph::interference_graph;
    use crate::netgraph::zero_test_realization;

    fn setup(spec: &crate::netgraph::NetworkSpec) -> (Network, Field, InterferenceGraph) {
        let net = Network::from_spec(spec).unwrap();
        let field = Field::default();
        let probe = zero_test_realization(&net, &field, 3, 11);
        let g = interference_graph(&net, &probe);
        (net, field, g)
    }

    fn numbered_cycle() -> Vec<Node> {
        use Node::*;
        vec![
            Dest(0),
            Source(1),
            Dest(1),
            Source(2),
            Dest(2),
            Source(3),
            Dest(3),
            Source(0),
        ]
    }

    #[test]
    fn four_by_four_ratio_matches_direct_formula() {
        let (net, field, g) = setup(&generate::four_by_four());
        let cycle = numbered_cycle();
        validate_cycle(&g, &cycle).unwrap();
        let mut rng = seeded_rng(3, 0);
        for _ in 0..5 {
            let xi = net.random_assignment(&field, &mut rng);
            let t = net.transfer_matrix(&field, &xi);
            let m = |i: usize, j: usize| t[(i - 1, j - 1)];
            let num = field.product([m(1, 2), m(2, 3), m(3, 4), m(4, 1)]);
            let den = field.product([m(1, 1), m(2, 2), m(3, 3), m(4, 4)]);
            let expected = field.mul(num, field.inv(den).unwrap());
            assert_eq!(evaluate_ratio(&net, &field, &cycle, &xi), Some(expected));
        }
    }

    #[test]
    fn four_by_four_is_non_constant_and_infeasible() {
        let (net, field, g) = setup(&generate::four_by_four());
        let cycle = g.shortest_cycle().unwrap();
        let r = cycle_ratio(&net, &field, &g, &cycle, DEFAULT_RATIO_TRIALS, 1).unwrap();
        assert_eq!(r.verdict, RatioVerdict::NonConstant);
        let report = infeasibility_report(&net, &g, &r);
        assert_eq!(report.finding, Finding::Infeasible);
        assert!(report.statement.contains("rate 1/3 infeasible"));
        assert!(report.statement.contains("fallback rate 1/4 via d*=1"));
    }

    #[test]
    fn shared_bottleneck_is_constant() {
        let (net, field, g) = setup(&generate::four_by_four_shared());
        assert!(is_four_by_four_cycle(&net, &g));
        let r = cycle_ratio(&net, &field, &g, &numbered_cycle(), 5, 2).unwrap();
        assert_eq!(r.verdict, RatioVerdict::Constant);
        assert!(r.evaluations.iter().all(|v| *v == Some(Fe::ONE)));
        assert_eq!(infeasibility_report(&net, &g, &r).finding, Finding::NoClaim);
    }

    #[test]
    fn rotation_and_reflection() {
        let (net, field, g) = setup(&generate::four_by_four());
        let cycle = numbered_cycle();
        validate_cycle(&g, &cycle).unwrap();
        let mut rng = seeded_rng(4, 0);
        for _ in 0..5 {
            let xi = net.random_assignment(&field, &mut rng);
            let t = evaluate_ratio(&net, &field, &cycle, &xi).unwrap();
            for shift in 0..cycle.len() {
                let mut rotated = cycle.clone();
                rotated.rotate_left(shift);
                assert_eq!(evaluate_ratio(&net, &field, &rotated, &xi), Some(t));
            }
            let mut reflected = cycle.clone();
            reflected.reverse();
            let back = evaluate_ratio(&net, &field, &reflected, &xi).unwrap();
            assert_eq!(field.mul(t, back), Fe::ONE);
        }
    }

    #[test]
    fn longer_cycle_is_advisory_only() {
        let (net, field, g) = setup(&generate::ring(3));
        let cycle = g.shortest_cycle().unwrap();
        assert_eq!(cycle.len(), 6);
        let r = cycle_ratio(&net, &field, &g, &cycle, 5, 3).unwrap();
        assert_eq!(r.verdict, RatioVerdict::NonConstant);
        let report = infeasibility_report(&net, &g, &r);
        assert_eq!(report.finding, Finding::Advisory);
        assert!(!report.four_by_four);
    }

    #[test]
    fn rejects_bad_input() {
        let (net, field, g) = setup(&generate::four_by_four());
        let cycle = numbered_cycle();
        assert_eq!(
            cycle_ratio(&net, &field, &g, &cycle, 1, 0),
            Err(ObstructionError::TooFewTrials(1))
        );
        use Node::*;
        let not_edges = vec![Dest(0), Source(2), Dest(1), Source(3)];
        assert!(matches!(
            cycle_ratio(&net, &field, &g, &not_edges, 5, 0),
            Err(ObstructionError::NotACycle(_))
        ));
        assert!(validate_cycle(&g, &cycle[..7]).is_err());
        assert!(validate_cycle(&g, &[Dest(0), Source(1), Source(0), Dest(3)]).is_err());
    }
}
