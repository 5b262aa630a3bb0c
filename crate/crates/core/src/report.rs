//! Stage runners and the consolidated report behind the command-line tool.
//!
//! Every stage draws its randomness from the run seed through a dedicated
//! stream, so a subcommand and the full pipeline produce identical sections
//! for the same network and configuration.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::gf::{Field, DEFAULT_MODULUS};
use crate::igraph::{interference_graph, Edge, InterferenceGraph, Node};
use crate::netgraph::{
    load_network, validate_assumptions, zero_test_realization, NetError, Network,
};
use crate::obstruction::{
    cycle_ratio, infeasibility_report, Finding, RatioVerdict, DEFAULT_RATIO_TRIALS,
};
use crate::precode::{plan_with_resampling, PrecodeError, PrecodingPlan, DEFAULT_MAX_ATTEMPTS};
use crate::simulator::{rate_report, run_session, SessionTrace};
use crate::sparsifier::{find_dstar, EdgeLabeling, SparsificationResult};
use crate::{seeded_rng, streams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub q: u64,
    pub seed: u64,
    pub max_attempts: usize,
    pub zero_test_trials: usize,
    pub ratio_trials: usize,
    pub sessions: usize,
    pub include_traces: bool,
    /// Explicit cycle for the obstruction stage; shortest cycle otherwise.
    pub cycle: Option<Vec<Node>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            q: DEFAULT_MODULUS,
            seed: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            zero_test_trials: 3,
            ratio_trials: DEFAULT_RATIO_TRIALS,
            sessions: 100,
            include_traces: false,
            cycle: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("netgraph: {0}")]
    Parse(String),
    #[error("netgraph: {0}")]
    Assumption(String),
    #[error("precode: {0}")]
    Constraint(String),
    #[error("simulator: {0}")]
    Decode(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Parse(_) => 2,
            RunError::Assumption(_) => 3,
            RunError::Constraint(_) => 4,
            RunError::Decode(_) => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Igraph,
    Dstar,
    Precode,
    Obstruct,
    Simulate,
    Pipeline,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Igraph => "igraph",
            Stage::Dstar => "dstar",
            Stage::Precode => "precode",
            Stage::Obstruct => "obstruct",
            Stage::Simulate => "simulate",
            Stage::Pipeline => "pipeline",
        }
    }
}

fn s_label(j: usize) -> String {
    format!("S{}", j + 1)
}

fn d_label(i: usize) -> String {
    format!("D{}", i + 1)
}

fn ratio_str((a, b): (usize, usize)) -> String {
    format!("{a}/{b}")
}

/// Parses a cycle such as `W1,S2,W2,S3` (1-based labels).
pub fn parse_cycle(text: &str) -> Result<Vec<Node>, String> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (kind, num) =
                tok.split_at(tok.find(|c: char| c.is_ascii_digit()).unwrap_or(tok.len()));
            let idx: usize = num.parse().map_err(|_| format!("bad cycle node '{tok}'"))?;
            if idx == 0 {
                return Err(format!("cycle labels are 1-based, got '{tok}'"));
            }
            match kind {
                "S" | "s" => Ok(Node::Source(idx - 1)),
                "W" | "w" => Ok(Node::Dest(idx - 1)),
                _ => Err(format!("bad cycle node '{tok}' (expected S<n> or W<n>)")),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct NetworkSummary {
    pub nodes: usize,
    pub edges: usize,
    pub sources: usize,
    pub destinations: usize,
    pub demand_size: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct MincutRow {
    pub destination: String,
    pub source: String,
    pub mincut: usize,
    pub demanded: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ValidateSection {
    pub assumptions_hold: bool,
    pub mincuts: Vec<MincutRow>,
    pub empty_interference: Vec<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ComponentRow {
    pub sources: Vec<String>,
    pub interference_nodes: Vec<String>,
    pub edges: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct IgraphSection {
    pub edges: Vec<String>,
    pub components: Vec<ComponentRow>,
    pub cyclic: bool,
    pub shortest_cycle: Option<Vec<String>>,
    pub dot: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct DstarComponentRow {
    pub k: usize,
    pub m: usize,
    pub f: usize,
    pub d: usize,
    pub greedy_size: usize,
    pub augmented: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ExtraDecodeRow {
    pub destination: String,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct DstarSection {
    pub d_star: usize,
    pub components: Vec<DstarComponentRow>,
    pub extra_decode: Vec<ExtraDecodeRow>,
    pub removed: Vec<String>,
    pub independence_checks: usize,
    pub exchange_checks: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct PrecoderRow {
    pub source: String,
    pub v: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct VerdictRow {
    pub destination: String,
    pub desired: Vec<String>,
    pub interferers: Vec<String>,
    pub dim_u: usize,
    pub dim_w: usize,
    pub dim_intersection: usize,
    pub r_full_rank: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct PrecodeSection {
    pub n: usize,
    pub a: usize,
    pub b: usize,
    pub rate: String,
    pub attempt: usize,
    pub precoders: Vec<PrecoderRow>,
    pub verdicts: Vec<VerdictRow>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ObstructSection {
    pub cyclic: bool,
    pub cycle: Option<Vec<String>>,
    pub verdict: Option<RatioVerdict>,
    pub evaluations: Vec<Option<u64>>,
    pub finding: Option<Finding>,
    pub statement: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct SimulateSection {
    pub sessions: usize,
    pub successful_sessions: usize,
    pub per_source_rate: Option<String>,
    pub sum_rate: Option<String>,
    pub target_rate: String,
    pub sum_rate_ceiling: String,
    pub meets_target: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<SessionTrace>>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub q: u64,
    pub seed: u64,
    pub network: NetworkSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub igraph: Option<IgraphSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dstar: Option<DstarSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precode: Option<PrecodeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruct: Option<ObstructSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn net_error(e: NetError) -> RunError {
    match e {
        NetError::AssumptionViolation(_) => RunError::Assumption(e.to_string()),
        other => RunError::Parse(other.to_string()),
    }
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    field: Field,
    net: Network,
}

impl Pipeline<'_> {
    fn validate(&self) -> Result<ValidateSection, RunError> {
        let v = validate_assumptions(
            &self.net,
            &self.field,
            self.cfg.zero_test_trials,
            self.cfg.seed,
        )
        .map_err(net_error)?;
        Ok(ValidateSection {
            assumptions_hold: true,
            mincuts: v
                .pairs
                .iter()
                .map(|p| MincutRow {
                    destination: d_label(p.destination),
                    source: s_label(p.source),
                    mincut: p.mincut,
                    demanded: p.demanded,
                })
                .collect(),
            empty_interference: v.empty_interference.iter().map(|&i| d_label(i)).collect(),
        })
    }

    fn graph(&self) -> InterferenceGraph {
        let probe = zero_test_realization(
            &self.net,
            &self.field,
            self.cfg.zero_test_trials,
            self.cfg.seed,
        );
        interference_graph(&self.net, &probe)
    }

    fn sparsify(&self, g: &InterferenceGraph) -> SparsificationResult {
        find_dstar(g, &EdgeLabeling::default_for(g))
    }

    fn plan(&self, s: &SparsificationResult) -> Result<PrecodingPlan, RunError> {
        plan_with_resampling(
            &self.net,
            &self.field,
            s,
            self.cfg.max_attempts,
            self.cfg.seed,
        )
        .map_err(|e: PrecodeError| RunError::Constraint(e.to_string()))
    }

    fn obstruct(&self, g: &InterferenceGraph) -> Result<ObstructSection, RunError> {
        let cycle = match &self.cfg.cycle {
            Some(c) => Some(c.clone()),
            None => g.shortest_cycle(),
        };
        let Some(cycle) = cycle else {
            return Ok(ObstructSection {
                cyclic: false,
                cycle: None,
                verdict: None,
                evaluations: Vec::new(),
                finding: None,
                statement: "interference graph is acyclic; no obstruction".into(),
            });
        };
        let r = cycle_ratio(
            &self.net,
            &self.field,
            g,
            &cycle,
            self.cfg.ratio_trials,
            self.cfg.seed,
        )
        .map_err(|e| RunError::Config(format!("obstruction: {e}")))?;
        let rep = infeasibility_report(&self.net, g, &r);
        Ok(ObstructSection {
            cyclic: g.has_cycle(),
            cycle: Some(cycle.iter().map(|n| n.to_string()).collect()),
            verdict: Some(r.verdict),
            evaluations: r.evaluations.iter().map(|e| e.map(|v| v.value())).collect(),
            finding: Some(rep.finding),
            statement: rep.statement,
        })
    }

    fn simulate(&self, plan: &PrecodingPlan) -> Result<SimulateSection, RunError> {
        let k = self.net.source_count();
        let mut rng = seeded_rng(self.cfg.seed, streams::MESSAGES);
        let mut traces = Vec::with_capacity(self.cfg.sessions);
        for _ in 0..self.cfg.sessions {
            let z: Vec<_> = (0..k).map(|_| self.field.random(&mut rng)).collect();
            let t = run_session(&self.net, &self.field, plan, &z)
                .map_err(|e| RunError::Decode(e.to_string()))?;
            if !t.all_decoded() {
                return Err(RunError::Decode(
                    "decoded messages differ from those sent".into(),
                ));
            }
            traces.push(t);
        }
        let r = rate_report(&traces, plan, k);
        Ok(SimulateSection {
            sessions: r.sessions,
            successful_sessions: r.successful_sessions,
            per_source_rate: r.per_source_rate.map(ratio_str),
            sum_rate: r.sum_rate.map(ratio_str),
            target_rate: ratio_str(r.target_rate),
            sum_rate_ceiling: ratio_str(r.sum_rate_ceiling),
            meets_target: r.meets_target,
            traces: self.cfg.include_traces.then_some(traces),
        })
    }
}

fn edge_label(e: &Edge) -> String {
    e.to_string()
}

fn igraph_section(g: &InterferenceGraph) -> IgraphSection {
    IgraphSection {
        edges: g.edges().iter().map(edge_label).collect(),
        components: g
            .components()
            .iter()
            .map(|c| ComponentRow {
                sources: c.sources.iter().map(|&j| s_label(j)).collect(),
                interference_nodes: c.dests.iter().map(|&i| format!("W{}", i + 1)).collect(),
                edges: c.edges.len(),
            })
            .collect(),
        cyclic: g.has_cycle(),
        shortest_cycle: g
            .shortest_cycle()
            .map(|c| c.iter().map(|n| n.to_string()).collect()),
        dot: g.to_dot(),
    }
}

fn dstar_section(s: &SparsificationResult) -> DstarSection {
    DstarSection {
        d_star: s.d_star,
        components: s
            .components
            .iter()
            .map(|c| DstarComponentRow {
                k: c.sources.len(),
                m: c.dests.len(),
                f: c.edge_count,
                d: c.d,
                greedy_size: c.greedy_size,
                augmented: c.augmented,
            })
            .collect(),
        extra_decode: s
            .extra_decode
            .iter()
            .enumerate()
            .map(|(i, e)| ExtraDecodeRow {
                destination: d_label(i),
                sources: e.iter().map(|&j| s_label(j)).collect(),
            })
            .collect(),
        removed: s.removed.iter().map(edge_label).collect(),
        independence_checks: s.independence_checks,
        exchange_checks: s.exchange_checks,
    }
}

fn precode_section(plan: &PrecodingPlan) -> PrecodeSection {
    PrecodeSection {
        n: plan.n,
        a: plan.a,
        b: plan.b,
        rate: ratio_str(plan.rate()),
        attempt: plan.attempt,
        precoders: plan
            .precoders
            .iter()
            .enumerate()
            .map(|(j, v)| PrecoderRow {
                source: s_label(j),
                v: v.iter().map(|x| x.value()).collect(),
            })
            .collect(),
        verdicts: plan
            .verdicts
            .iter()
            .map(|v| VerdictRow {
                destination: d_label(v.destination),
                desired: plan.new_demands[v.destination]
                    .iter()
                    .map(|&j| s_label(j))
                    .collect(),
                interferers: plan.new_interference[v.destination]
                    .iter()
                    .map(|&j| s_label(j))
                    .collect(),
                dim_u: v.dim_u,
                dim_w: v.dim_w,
                dim_intersection: v.dim_intersection,
                r_full_rank: v.r_det_nonzero,
                ok: v.ok,
            })
            .collect(),
    }
}

/// Runs `stage` (and whatever it depends on) on the network text.
pub fn run(stage: Stage, network_text: &str, cfg: &RunConfig) -> Result<Report, RunError> {
    let field = Field::new(cfg.q).map_err(|e| RunError::Config(e.to_string()))?;
    if cfg.max_attempts == 0 || cfg.zero_test_trials == 0 {
        return Err(RunError::Config(
            "attempt and trial counts must be at least 1".into(),
        ));
    }
    let net = load_network(network_text).map_err(net_error)?;
    let p = Pipeline { cfg, field, net };
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        command: stage.name().into(),
        q: cfg.q,
        seed: cfg.seed,
        network: NetworkSummary {
            nodes: p.net.nodes().len(),
            edges: p.net.edges().len(),
            sources: p.net.source_count(),
            destinations: p.net.destination_count(),
            demand_size: p.net.demand_size(),
        },
        validate: None,
        igraph: None,
        dstar: None,
        precode: None,
        obstruct: None,
        simulate: None,
    };
    let all = stage == Stage::Pipeline;

    let validated = p.validate()?;
    if stage == Stage::Validate || all {
        report.validate = Some(validated);
    }
    if stage == Stage::Validate {
        return Ok(report);
    }
    let g = p.graph();
    if stage == Stage::Igraph || all {
        report.igraph = Some(igraph_section(&g));
    }
    if stage == Stage::Obstruct || (all && g.has_cycle()) {
        report.obstruct = Some(p.obstruct(&g)?);
    }
    if matches!(stage, Stage::Igraph | Stage::Obstruct) {
        return Ok(report);
    }
    let s = p.sparsify(&g);
    if stage == Stage::Dstar || all {
        report.dstar = Some(dstar_section(&s));
    }
    if stage == Stage::Dstar {
        return Ok(report);
    }
    let plan = p.plan(&s)?;
    if stage == Stage::Precode || all {
        report.precode = Some(precode_section(&plan));
    }
    if stage == Stage::Precode {
        return Ok(report);
    }
    report.simulate = Some(p.simulate(&plan)?);
    Ok(report)
}

fn join(v: &[String]) -> String {
    if v.is_empty() {
        "-".into()
    } else {
        v.join(" ")
    }
}

/// Human-readable rendering of a report.
pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let n = &r.network;
    let _ = writeln!(
        out,
        "{}: K={} M={} L={} ({} nodes, {} edges), q={}, seed={}",
        r.command, n.sources, n.destinations, n.demand_size, n.nodes, n.edges, r.q, r.seed
    );
    if let Some(v) = &r.validate {
        let _ = writeln!(out, "\n[validate] mincut assumptions hold");
        for row in &v.mincuts {
            let _ = writeln!(
                out,
                "  {} <- {}  mincut {}{}",
                row.destination,
                row.source,
                row.mincut,
                if row.demanded { "  (demanded)" } else { "" }
            );
        }
        if !v.empty_interference.is_empty() {
            let _ = writeln!(
                out,
                "  no interference at: {}",
                v.empty_interference.join(" ")
            );
        }
    }
    if let Some(g) = &r.igraph {
        let _ = writeln!(
            out,
            "\n[igraph] {} edges, {} components, cyclic: {}",
            g.edges.len(),
            g.components.len(),
            g.cyclic
        );
        let _ = writeln!(out, "  edges: {}", join(&g.edges));
        for c in &g.components {
            let _ = writeln!(
                out,
                "  component: {} | {} ({} edges)",
                join(&c.sources),
                join(&c.interference_nodes),
                c.edges
            );
        }
        if let Some(c) = &g.shortest_cycle {
            let _ = writeln!(out, "  shortest cycle: {}", c.join(" "));
        }
        let _ = write!(out, "{}", g.dot);
    }
    if let Some(o) = &r.obstruct {
        let _ = writeln!(out, "\n[obstruct] {}", o.statement);
        if let Some(v) = o.verdict {
            let evals: Vec<String> = o
                .evaluations
                .iter()
                .map(|e| e.map_or("undefined".to_string(), |v| v.to_string()))
                .collect();
            let _ = writeln!(
                out,
                "  verdict: {}  t = {}",
                serde_json::to_string(&v).unwrap().trim_matches('"'),
                evals.join(", ")
            );
        }
    }
    if let Some(d) = &r.dstar {
        let _ = writeln!(out, "\n[dstar] d* = {}", d.d_star);
        let _ = writeln!(
            out,
            "  {:>3} {:>3} {:>3} {:>3} {:>7} augmented",
            "k", "m", "f", "d", "greedy"
        );
        for c in &d.components {
            let _ = writeln!(
                out,
                "  {:>3} {:>3} {:>3} {:>3} {:>7} {}",
                c.k, c.m, c.f, c.d, c.greedy_size, c.augmented
            );
        }
        for e in &d.extra_decode {
            let _ = writeln!(out, "  E({}) = {}", e.destination, join(&e.sources));
        }
        let _ = writeln!(
            out,
            "  independence checks: {}, exchange checks: {}",
            d.independence_checks, d.exchange_checks
        );
    }
    if let Some(p) = &r.precode {
        let _ = writeln!(
            out,
            "\n[precode] n={} a={} b={} rate {} (attempt {})",
            p.n, p.a, p.b, p.rate, p.attempt
        );
        for v in &p.precoders {
            let vals: Vec<String> = v.v.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "  V({}) = [{}]", v.source, vals.join(", "));
        }
        for v in &p.verdicts {
            let _ = writeln!(
                out,
                "  {}: dim U={} dim W={} dim U∩W={} R full rank={} {}",
                v.destination,
                v.dim_u,
                v.dim_w,
                v.dim_intersection,
                v.r_full_rank,
                if v.ok { "ok" } else { "FAIL" }
            );
        }
    }
    if let Some(s) = &r.simulate {
        let _ = writeln!(
            out,
            "\n[simulate] {}/{} sessions decoded",
            s.successful_sessions, s.sessions
        );
        if let (Some(rate), Some(sum)) = (&s.per_source_rate, &s.sum_rate) {
            let _ = writeln!(
                out,
                "  per-source rate {rate} (target {}), sum rate {sum} (ceiling {})",
                s.target_rate, s.sum_rate_ceiling
            );
        }
    }
    out
}
