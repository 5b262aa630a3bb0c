//! Precoding over an acyclic interference graph and exact verification of
//! the alignment conditions.
//!
//! Each tree of the forest gets a root source whose precoding vector is a
//! fresh random vector `θ`. Every other source `S_i` in the tree gets
//! `V_i = T_i θ`, where `T_i` multiplies, slot by slot, the transfer values
//! along the unique tree path from `S_i` to the root: `m_uv` when `S_v` sits
//! above `W_u` in the BFS tree, `m_uv^{-1}` when it sits below. The product
//! telescopes so that every source interfering at `W_u` arrives along the
//! same direction `M_up V_p`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Fe, Field, Matrix};
use crate::igraph::{decompose, Edge, ForestDecomposition, IgraphError, Node};
use crate::netgraph::{realize, Network, NetworkRealization};
use crate::sparsifier::SparsificationResult;
use crate::{seeded_rng, streams};

pub const DEFAULT_MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Error)]
pub enum PrecodeError {
    #[error("transfer m[D{}][S{}] is zero at slot {}", .dest + 1, .src + 1, .slot + 1)]
    ZeroAtAssignment {
        dest: usize,
        src: usize,
        slot: usize,
    },
    #[error("realization has {found} slots, the plan needs {expected}")]
    SlotMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Graph(#[from] IgraphError),
    #[error(
        "alignment failed in all {attempts} attempts; persistent failures: {}",
        fmt_failures(.persistent)
    )]
    ConstraintViolation {
        attempts: usize,
        persistent: Vec<FailedCheck>,
        history: Vec<AttemptFailure>,
    },
}

fn fmt_failures(f: &[FailedCheck]) -> String {
    if f.is_empty() {
        return "none".into();
    }
    f.iter()
        .map(|c| match c.representative {
            Some(k) => format!("(D{}, S{})", c.destination + 1, k + 1),
            None => format!("(D{}, -)", c.destination + 1),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// A destination whose check failed, with the interference representative
/// used to form `R_ik`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailedCheck {
    pub destination: usize,
    pub representative: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptFailure {
    pub attempt: usize,
    /// Set when a transfer value needed for inversion vanished.
    pub zero_transfer: Option<(usize, usize)>,
    pub failed: Vec<FailedCheck>,
}

/// Whether a tree edge is traversed with its source above (`Down`) or below
/// (`Up`) its interference node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Down,
    Up,
}

/// `h_ij` at one slot: `m_ij` on downward edges, its inverse on upward ones.
pub fn signed_transfer(
    field: &Field,
    edge: Edge,
    orientation: Orientation,
    realization: &NetworkRealization,
    slot: usize,
) -> Result<Fe, PrecodeError> {
    let m = realization.m(edge.dest, edge.source, slot);
    match orientation {
        Orientation::Down => Ok(m),
        Orientation::Up => field.inv(m).ok_or(PrecodeError::ZeroAtAssignment {
            dest: edge.dest,
            src: edge.source,
            slot,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentVerdict {
    pub destination: usize,
    /// `|Ā_i|`.
    pub desired: usize,
    pub interferers: usize,
    pub representative: Option<usize>,
    pub dim_u: usize,
    pub dim_w: usize,
    pub dim_intersection: usize,
    /// `[U | representative column]` has full column rank.
    pub r_det_nonzero: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecodingPlan {
    /// Slots, `L + d* + 1`.
    pub n: usize,
    /// Message symbols per source.
    pub a: usize,
    /// Interference dimension at each destination.
    pub b: usize,
    pub demand_size: usize,
    pub d_star: usize,
    /// `V_j` per source, one entry per slot.
    pub precoders: Vec<Vec<Fe>>,
    /// Root source and its `θ` per tree; `None` roots belong to isolated `W` nodes.
    pub roots: Vec<Option<usize>>,
    pub theta: Vec<Vec<Fe>>,
    pub realization: NetworkRealization,
    pub new_demands: Vec<Vec<usize>>,
    pub new_interference: Vec<Vec<usize>>,
    pub verdicts: Vec<AlignmentVerdict>,
    /// 1-based attempt on which the plan verified.
    pub attempt: usize,
}

impl PrecodingPlan {
    /// Column `M_ij V_j` seen at destination `i`.
    pub fn received_direction(&self, field: &Field, i: usize, j: usize) -> Vec<Fe> {
        (0..self.n)
            .map(|k| field.mul(self.realization.m(i, j, k), self.precoders[j][k]))
            .collect()
    }

    pub fn all_ok(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.ok)
    }

    /// Per-source rate `a / n`.
    pub fn rate(&self) -> (usize, usize) {
        (self.a, self.n)
    }
}

/// Product of signed transfers along the tree path from `S_source` to the root.
fn path_product(
    field: &Field,
    path: &[Node],
    realization: &NetworkRealization,
    slot: usize,
) -> Result<Fe, PrecodeError> {
    let mut acc = Fe::ONE;
    for pair in path.windows(2) {
        // The path alternates and climbs towards the root, so a source
        // followed by a W node is below it, and a W node followed by a
        // source is below that source.
        let (edge, orientation) = match (pair[0], pair[1]) {
            (Node::Source(j), Node::Dest(i)) => (Edge { dest: i, source: j }, Orientation::Up),
            (Node::Dest(i), Node::Source(j)) => (Edge { dest: i, source: j }, Orientation::Down),
            _ => unreachable!("tree paths alternate between sides"),
        };
        let h = signed_transfer(field, edge, orientation, realization, slot)?;
        acc = field.mul(acc, h);
    }
    Ok(acc)
}

/// Builds precoding vectors for every source from a forest of the
/// (sparsified) interference graph.
#[allow(clippy::too_many_arguments)]
pub fn build_precoding(
    net: &Network,
    field: &Field,
    forest: &ForestDecomposition,
    realization: NetworkRealization,
    d_star: usize,
    new_demands: Vec<Vec<usize>>,
    new_interference: Vec<Vec<usize>>,
    seed: u64,
) -> Result<PrecodingPlan, PrecodeError> {
    let n = net.demand_size() + d_star + 1;
    if realization.slot_count != n {
        return Err(PrecodeError::SlotMismatch {
            expected: n,
            found: realization.slot_count,
        });
    }
    let mut rng = seeded_rng(seed, streams::THETA);
    let mut precoders = vec![Vec::new(); net.source_count()];
    let mut roots = Vec::with_capacity(forest.trees.len());
    let mut theta = Vec::with_capacity(forest.trees.len());
    for tree in &forest.trees {
        roots.push(tree.root);
        let Some(root) = tree.root else {
            theta.push(Vec::new());
            continue;
        };
        let th: Vec<Fe> = (0..n).map(|_| field.random_nonzero(&mut rng)).collect();
        for &j in &tree.sources {
            let path = tree.path_to_root(Node::Source(j));
            debug_assert_eq!(path.last(), Some(&Node::Source(root)));
            precoders[j] = (0..n)
                .map(|k| Ok(field.mul(path_product(field, &path, &realization, k)?, th[k])))
                .collect::<Result<_, PrecodeError>>()?;
        }
        theta.push(th);
    }
    debug_assert!(precoders.iter().all(|v| v.len() == n));
    Ok(PrecodingPlan {
        n,
        a: 1,
        b: 1,
        demand_size: net.demand_size(),
        d_star,
        precoders,
        roots,
        theta,
        realization,
        new_demands,
        new_interference,
        verdicts: Vec::new(),
        attempt: 0,
    })
}

/// Checks the alignment conditions at destination `i` using interferer
/// `representative` for the `R_ik` test.
pub fn verify_destination(
    field: &Field,
    plan: &PrecodingPlan,
    i: usize,
    desired: &[usize],
    interferers: &[usize],
    representative: Option<usize>,
) -> AlignmentVerdict {
    let u_cols: Vec<Vec<Fe>> = desired
        .iter()
        .map(|&j| plan.received_direction(field, i, j))
        .collect();
    let w_cols: Vec<Vec<Fe>> = interferers
        .iter()
        .map(|&j| plan.received_direction(field, i, j))
        .collect();
    let u = Matrix::from_columns(plan.n, &u_cols).expect("columns have n entries");
    let w = Matrix::from_columns(plan.n, &w_cols).expect("columns have n entries");
    let dim_u = field.rank(&u);
    let dim_w = field.rank(&w);
    let joint = field.rank(&u.hstack(&w).expect("same height"));
    let dim_intersection = dim_u + dim_w - joint;
    let r_det_nonzero = {
        let mut cols = u_cols.clone();
        if let Some(k) = representative {
            cols.push(plan.received_direction(field, i, k));
        }
        let width = cols.len();
        field.rank(&Matrix::from_columns(plan.n, &cols).expect("columns have n entries")) == width
    };
    AlignmentVerdict {
        destination: i,
        desired: desired.len(),
        interferers: interferers.len(),
        representative,
        dim_u,
        dim_w,
        dim_intersection,
        r_det_nonzero,
        ok: dim_u == desired.len() && dim_w <= plan.b && dim_intersection == 0,
    }
}

/// Verdict per destination, using the lowest-index interferer as representative.
pub fn verify_alignment(
    field: &Field,
    plan: &PrecodingPlan,
    new_demands: &[Vec<usize>],
    new_interference: &[Vec<usize>],
) -> Vec<AlignmentVerdict> {
    new_demands
        .iter()
        .zip(new_interference)
        .enumerate()
        .map(|(i, (a, b))| verify_destination(field, plan, i, a, b, b.first().copied()))
        .collect()
}

/// Repeats realize, build and verify with fresh randomness until every
/// destination passes or the attempt budget runs out.
pub fn plan_with_resampling(
    net: &Network,
    field: &Field,
    sparsification: &SparsificationResult,
    max_attempts: usize,
    seed: u64,
) -> Result<PrecodingPlan, PrecodeError> {
    let forest = decompose(&sparsification.h_bar)?;
    let demands: Vec<Vec<usize>> = (0..net.destination_count())
        .map(|i| net.demands(i).to_vec())
        .collect();
    let new_demands = sparsification.new_demands(&demands);
    let new_interference = sparsification.new_interference.clone();
    plan_forest_with_resampling(
        net,
        field,
        &forest,
        sparsification.d_star,
        &new_demands,
        &new_interference,
        max_attempts,
        seed,
    )
}

/// Resampling loop over an explicit forest and decoding sets.
#[allow(clippy::too_many_arguments)]
pub fn plan_forest_with_resampling(
    net: &Network,
    field: &Field,
    forest: &ForestDecomposition,
    d_star: usize,
    new_demands: &[Vec<usize>],
    new_interference: &[Vec<usize>],
    max_attempts: usize,
    seed: u64,
) -> Result<PrecodingPlan, PrecodeError> {
    let n = net.demand_size() + d_star + 1;
    let mut seeds = seeded_rng(seed, streams::ATTEMPT);
    let mut history = Vec::new();
    for attempt in 1..=max_attempts {
        let attempt_seed: u64 = seeds.gen();
        let realization = realize(net, field, n, attempt_seed);
        let built = build_precoding(
            net,
            field,
            forest,
            realization,
            d_star,
            new_demands.to_vec(),
            new_interference.to_vec(),
            attempt_seed,
        );
        let mut plan = match built {
            Ok(plan) => plan,
            Err(PrecodeError::ZeroAtAssignment { dest, src, .. }) => {
                history.push(AttemptFailure {
                    attempt,
                    zero_transfer: Some((dest, src)),
                    failed: Vec::new(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        plan.verdicts = verify_alignment(field, &plan, new_demands, new_interference);
        plan.attempt = attempt;
        if plan.all_ok() {
            return Ok(plan);
        }
        history.push(AttemptFailure {
            attempt,
            zero_transfer: None,
            failed: plan
                .verdicts
                .iter()
                .filter(|v| !v.ok)
                .map(|v| FailedCheck {
                    destination: v.destination,
                    representative: v.representative,
                })
                .collect(),
        });
    }
    let mut verified = history.iter().filter(|h| h.zero_transfer.is_none());
    let persistent = match verified.next() {
        None => Vec::new(),
        Some(first) => verified.fold(first.failed.clone(), |acc, h| {
            acc.into_iter().filter(|c| h.failed.contains(c)).collect()
        }),
    };
    Err(PrecodeError::ConstraintViolation {
        attempts: max_attempts,
        persistent,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::igraph::{decompose_with_roots, interference_graph, InterferenceGraph};
    use crate::netgraph::zero_test_realization;
    use crate::sparsifier::{find_dstar, EdgeLabeling};

    fn pipeline(
        spec: &crate::netgraph::NetworkSpec,
        seed: u64,
    ) -> (Network, Field, SparsificationResult, InterferenceGraph) {
        let net = Network::from_spec(spec).unwrap();
        let field = Field::default();
        let probe = zero_test_realization(&net, &field, 3, seed);
        let g = interference_graph(&net, &probe);
        let s = find_dstar(&g, &EdgeLabeling::default_for(&g));
        (net, field, s, g)
    }

    #[test]
    fn signed_transfer_examples() {
        let q = Field::new(7).unwrap();
        let net = Network::from_spec(&generate::relay_network(1, &[vec![0]], &[vec![0]])).unwrap();
        // Find an assignment with m = 5 by brute force over the two coefficients.
        let mut found = None;
        'search: for a in 1..7 {
            for b in 1..7 {
                for c in 1..7 {
                    let xi: Vec<Fe> = [a, b, c].iter().map(|&v| q.elem(v)).collect();
                    if net.transfer_matrix(&q, &xi)[(0, 0)] == q.elem(5) {
                        found = Some(xi);
                        break 'search;
                    }
                }
            }
        }
        let real = NetworkRealization::from_assignments(&net, &q, vec![found.unwrap()]);
        let edge = Edge { dest: 0, source: 0 };
        assert_eq!(
            signed_transfer(&q, edge, Orientation::Down, &real, 0).unwrap(),
            q.elem(5)
        );
        assert_eq!(
            signed_transfer(&q, edge, Orientation::Up, &real, 0).unwrap(),
            q.elem(3)
        );

        let zero = NetworkRealization::from_assignments(&net, &q, vec![vec![Fe::ZERO; 3]]);
        assert!(matches!(
            signed_transfer(&q, edge, Orientation::Up, &zero, 0),
            Err(PrecodeError::ZeroAtAssignment { .. })
        ));
    }

    #[test]
    fn path_rule_on_two_edge_path() {
        // S1 and S2 both interfere at W1 (D1 wants S3); root S1.
        let spec = generate::relay_network(
            3,
            &[vec![0, 1, 2], vec![2], vec![2]],
            &[vec![2], vec![2], vec![2]],
        );
        let (net, field, s, _) = pipeline(&spec, 1);
        let forest = decompose(&s.h_bar).unwrap();
        let real = realize(&net, &field, net.demand_size() + 1, 4);
        let demands = s.new_demands(&[vec![2], vec![2], vec![2]]);
        let plan = build_precoding(
            &net,
            &field,
            &forest,
            real,
            0,
            demands,
            s.new_interference.clone(),
            9,
        )
        .unwrap();
        let (_, tree) = forest.tree_of_source(0).unwrap();
        let l = forest.trees.iter().position(|t| t == tree).unwrap();
        for k in 0..plan.n {
            let m11 = plan.realization.m(0, 0, k);
            let m12 = plan.realization.m(0, 1, k);
            let expected = field.product([m11, field.inv(m12).unwrap(), plan.theta[l][k]]);
            assert_eq!(plan.precoders[1][k], expected);
            assert_eq!(plan.precoders[0][k], plan.theta[l][k]);
        }
        // Star identity: M_11 V_1 = M_12 V_2 entrywise.
        assert_eq!(
            plan.received_direction(&field, 0, 0),
            plan.received_direction(&field, 0, 1)
        );
    }

    #[test]
    fn isolated_source_gets_fresh_vector() {
        let spec = generate::relay_network(3, &[vec![0, 1], vec![1, 2]], &[vec![0], vec![2]]);
        let (net, field, s, g) = pipeline(&spec, 2);
        assert_eq!(g.edges().len(), 2);
        let plan = plan_with_resampling(&net, &field, &s, 20, 5).unwrap();
        assert!(plan
            .precoders
            .iter()
            .all(|v| v.iter().any(|x| !x.is_zero())));
        // S1 and S3 are isolated in H; each is the root of its own tree.
        let forest = decompose(&s.h_bar).unwrap();
        assert_eq!(forest.tree_of_source(0).unwrap().1.root, Some(0));
        assert_eq!(forest.tree_of_source(1).unwrap().1.dests, vec![0, 1]);
        assert_eq!(forest.tree_of_source(2).unwrap().1.root, Some(2));
    }

    #[test]
    fn forest_instances_verify() {
        for seed in 0..30 {
            let inst = generate::forest_instance(seed, 1 + seed as usize % 3, 6, 6);
            let (net, field, s, g) = pipeline(&inst.spec, seed);
            assert_eq!(g, inst.interference);
            assert_eq!(s.d_star, 0);
            let plan = plan_with_resampling(&net, &field, &s, 20, seed).unwrap();
            assert_eq!(plan.n, inst.demand_size + 1);
            assert_alignment_identity(&field, &plan);
            for v in &plan.verdicts {
                assert!(v.r_det_nonzero);
                assert_eq!(
                    v.dim_u + v.dim_w,
                    v.desired + usize::from(v.interferers > 0)
                );
                if v.interferers >= 2 {
                    assert_eq!(v.dim_w, 1);
                }
            }
        }
    }

    fn assert_alignment_identity(field: &Field, plan: &PrecodingPlan) {
        for (i, b) in plan.new_interference.iter().enumerate() {
            if b.len() < 2 {
                continue;
            }
            let first = plan.received_direction(field, i, b[0]);
            for &j in &b[1..] {
                let col = plan.received_direction(field, i, j);
                let scale = field.mul(col[0], field.inv(first[0]).unwrap());
                assert!(!scale.is_zero());
                let scaled: Vec<Fe> = first.iter().map(|&x| field.mul(scale, x)).collect();
                assert_eq!(col, scaled);
            }
        }
    }

    #[test]
    fn four_by_four_sparsified_plan_succeeds() {
        let (net, field, s, _) = pipeline(&generate::four_by_four(), 3);
        assert_eq!(s.d_star, 1);
        let plan = plan_with_resampling(&net, &field, &s, 20, 3).unwrap();
        assert_eq!(plan.n, 4);
        assert_eq!(plan.rate(), (1, 4));
        assert_alignment_identity(&field, &plan);
    }

    #[test]
    fn corrupted_precoder_breaks_alignment() {
        let spec = generate::relay_network(3, &[vec![0, 1, 2], vec![0, 1, 2]], &[vec![2], vec![0]]);
        let (net, field, s, _) = pipeline(&spec, 4);
        let mut plan = plan_with_resampling(&net, &field, &s, 20, 4).unwrap();
        assert!(plan.all_ok());
        // W1 sees S1 and S2 aligned; perturb one slot of V_2.
        plan.precoders[1][0] = field.add(plan.precoders[1][0], Fe::ONE);
        let verdicts = verify_alignment(&field, &plan, &plan.new_demands, &plan.new_interference);
        assert!(verdicts
            .iter()
            .any(|v| !v.ok && (v.dim_w == 2 || v.dim_intersection > 0)));
    }

    #[test]
    fn verdicts_do_not_depend_on_representative_or_root() {
        for seed in 0..15 {
            let inst = generate::forest_instance(100 + seed, 2, 6, 6);
            let (net, field, s, _) = pipeline(&inst.spec, seed);
            let plan = plan_with_resampling(&net, &field, &s, 20, seed).unwrap();
            for (i, b) in plan.new_interference.iter().enumerate() {
                for &k in b {
                    let v = verify_destination(&field, &plan, i, &plan.new_demands[i], b, Some(k));
                    assert_eq!(v.ok, plan.verdicts[i].ok);
                    assert_eq!(v.r_det_nonzero, plan.verdicts[i].r_det_nonzero);
                }
            }
            // Same realization and theta stream, different roots.
            let forest = decompose_with_roots(&s.h_bar, |c| c.sources.last().copied()).unwrap();
            let other = build_precoding(
                &net,
                &field,
                &forest,
                plan.realization.clone(),
                0,
                plan.new_demands.clone(),
                plan.new_interference.clone(),
                seed,
            )
            .unwrap();
            let verdicts =
                verify_alignment(&field, &other, &plan.new_demands, &plan.new_interference);
            for (a, b) in verdicts.iter().zip(&plan.verdicts) {
                assert_eq!(
                    (a.ok, a.dim_u, a.dim_w, a.dim_intersection),
                    (b.ok, b.dim_u, b.dim_w, b.dim_intersection)
                );
            }
        }
    }

    #[test]
    fn adversarial_network_is_rejected() {
        let (net, field, s, g) = pipeline(&generate::adversarial(), 5);
        assert!(!g.has_cycle());
        match plan_with_resampling(&net, &field, &s, 20, 5) {
            Err(PrecodeError::ConstraintViolation {
                attempts,
                persistent,
                history,
            }) => {
                assert_eq!(attempts, 20);
                assert_eq!(history.len(), 20);
                let dests: Vec<usize> = persistent.iter().map(|c| c.destination).collect();
                assert_eq!(dests, vec![0, 1]);
            }
            other => panic!("expected ConstraintViolation, got {other:?}"),
        }
    }

    #[test]
    fn slot_count_must_match() {
        let (net, field, s, _) = pipeline(&generate::four_by_four(), 6);
        let forest = decompose(&s.h_bar).unwrap();
        let real = realize(&net, &field, 3, 1);
        assert!(matches!(
            build_precoding(&net, &field, &forest, real, 1, vec![], vec![], 0),
            Err(PrecodeError::SlotMismatch {
                expected: 4,
                found: 3
            })
        ));
    }
}
