//! Slot-by-slot transmission and decoding under a precoding plan.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Fe, Field, GfError, Matrix};
use crate::netgraph::Network;
use crate::precode::PrecodingPlan;
use crate::{seeded_rng, streams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("decoding failed at D{}: {cause}", .destination + 1)]
    DecodeFailure { destination: usize, cause: GfError },
    #[error("raw propagation disagrees with the transfer product at D{} slot {}", .destination + 1, .slot + 1)]
    TransferMismatch { destination: usize, slot: usize },
    #[error("expected {expected} messages, got {found}")]
    MessageCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTrace {
    /// `z_j` per source (one symbol each, `a = 1`).
    pub messages: Vec<Fe>,
    /// `x_j^(k)` per source per slot.
    pub transmitted: Vec<Vec<Fe>>,
    /// `y_i` per destination, one entry per slot.
    pub received: Vec<Vec<Fe>>,
    /// Recovered `(source, symbol)` pairs per destination.
    pub decoded: Vec<Vec<(usize, Fe)>>,
    pub success: Vec<bool>,
}

impl SessionTrace {
    pub fn all_decoded(&self) -> bool {
        self.success.iter().all(|&s| s)
    }
}

pub fn random_messages(field: &Field, k: usize, seed: u64) -> Vec<Fe> {
    let mut rng = seeded_rng(seed, streams::MESSAGES);
    (0..k).map(|_| field.random(&mut rng)).collect()
}

/// Encodes, propagates each slot through the network with the plan's
/// coding coefficients, and decodes at every destination.
pub fn run_session(
    net: &Network,
    field: &Field,
    plan: &PrecodingPlan,
    messages: &[Fe],
) -> Result<SessionTrace, SimError> {
    let k = net.source_count();
    if messages.len() != k {
        return Err(SimError::MessageCount {
            expected: k,
            found: messages.len(),
        });
    }
    let n = plan.n;
    let transmitted: Vec<Vec<Fe>> = (0..k)
        .map(|j| {
            plan.precoders[j]
                .iter()
                .map(|&v| field.mul(v, messages[j]))
                .collect()
        })
        .collect();

    let m_count = net.destination_count();
    let mut received = vec![vec![Fe::ZERO; n]; m_count];
    for slot in 0..n {
        let x: Vec<Fe> = transmitted.iter().map(|xj| xj[slot]).collect();
        let y = net.propagate(field, &plan.realization.coding[slot], &x);
        for (i, &yi) in y.iter().enumerate() {
            let algebraic =
                field.sum((0..k).map(|j| field.mul(plan.realization.m(i, j, slot), x[j])));
            if algebraic != yi {
                return Err(SimError::TransferMismatch {
                    destination: i,
                    slot,
                });
            }
            received[i][slot] = yi;
        }
    }

    let mut decoded = Vec::with_capacity(m_count);
    let mut success = Vec::with_capacity(m_count);
    for (i, y) in received.iter().enumerate() {
        let desired = &plan.new_demands[i];
        let mut cols: Vec<Vec<Fe>> = desired
            .iter()
            .map(|&j| plan.received_direction(field, i, j))
            .collect();
        if let Some(&rep) = plan.new_interference[i].first() {
            cols.push(plan.received_direction(field, i, rep));
        }
        let a = Matrix::from_columns(n, &cols).expect("columns have n entries");
        let w = field
            .solve(&a, y)
            .map_err(|cause| SimError::DecodeFailure {
                destination: i,
                cause,
            })?;
        let out: Vec<(usize, Fe)> = desired.iter().copied().zip(w).collect();
        success.push(out.iter().all(|&(j, z)| messages[j] == z));
        decoded.push(out);
    }
    Ok(SessionTrace {
        messages: messages.to_vec(),
        transmitted,
        received,
        decoded,
        success,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateReport {
    pub sessions: usize,
    pub successful_sessions: usize,
    pub sources: usize,
    /// `(a, n)`; absent when no sessions ran.
    pub per_source_rate: Option<(usize, usize)>,
    pub sum_rate: Option<(usize, usize)>,
    /// `1 / (L + d* + 1)`.
    pub target_rate: (usize, usize),
    /// `K / (L + 1)`.
    pub sum_rate_ceiling: (usize, usize),
    pub meets_target: bool,
}

impl RateReport {
    pub fn success_fraction(&self) -> Option<f64> {
        (self.sessions > 0).then(|| self.successful_sessions as f64 / self.sessions as f64)
    }
}

pub fn rate_report(traces: &[SessionTrace], plan: &PrecodingPlan, sources: usize) -> RateReport {
    let successful_sessions = traces.iter().filter(|t| t.all_decoded()).count();
    let ran = !traces.is_empty();
    let target_rate = (1, plan.demand_size + plan.d_star + 1);
    let per_source_rate = ran.then_some((plan.a, plan.n));
    RateReport {
        sessions: traces.len(),
        successful_sessions,
        sources,
        per_source_rate,
        sum_rate: ran.then_some((sources * plan.a, plan.n)),
        target_rate,
        sum_rate_ceiling: (sources, plan.demand_size + 1),
        meets_target: ran
            && successful_sessions == traces.len()
            && plan.a * target_rate.1 == plan.n * target_rate.0,
    }
}
