//! The stochastic cascading model and its Monte Carlo estimators.
//!
//! Cascades advance in synchronous rounds. Every undecided node that has at
//! least one in-neighbor among the previous round's posters receives the
//! message, follows one of those posters chosen uniformly, and decides once
//! and for all whether to post:
//!
//! | receiver | true message | false message |
//! |----------|--------------|---------------|
//! | smart    | `eta`        | 0             |
//! | normal   | `eta * w_jk` | `eta * w_jk`  |
//!
//! The source itself always posts.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{NodeId, NodeKind, Topology, TrustGraph};
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    True,
    False,
}

impl MessageKind {
    pub fn label(self) -> &'static str {
        match self {
            MessageKind::True => "true",
            MessageKind::False => "false",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Natural forwarding rate.
    pub eta: f64,
}

impl ModelConfig {
    pub fn new(eta: f64) -> Result<Self> {
        let cfg = ModelConfig { eta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.eta) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "natural forwarding rate must lie in [0, 1], got {}",
                self.eta
            )))
        }
    }
}

/// Probability that `receiver` posts after following a poster over a link
/// of weight `weight`.
pub(crate) fn forward_probability(
    receiver: NodeKind,
    kind: MessageKind,
    eta: f64,
    weight: f64,
) -> f64 {
    match (receiver, kind) {
        (NodeKind::Smart, MessageKind::True) => eta,
        (NodeKind::Smart, MessageKind::False) => 0.0,
        (NodeKind::Normal, _) => eta * weight,
    }
}

pub(crate) fn check_source(graph: &TrustGraph, source: NodeId, kind: MessageKind) -> Result<()> {
    if !graph.contains(source) {
        return Err(Error::Contract(format!(
            "source {source} is not a node of a {}-node graph",
            graph.node_count()
        )));
    }
    if kind == MessageKind::False && graph.kind(source) == NodeKind::Smart {
        return Err(Error::Contract(format!(
            "smart node {source} never emits a false message"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub from: NodeId,
    pub to: NodeId,
    pub forwarded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    pub source: NodeId,
    pub kind: MessageKind,
    pub posters: BTreeSet<NodeId>,
    /// Every receipt in the order decisions were taken, declined ones
    /// included.
    pub deliveries: Vec<Delivery>,
    /// Rounds in which somebody posted, round 0 (the source) included.
    pub rounds: usize,
}

impl CascadeOutcome {
    /// One delivery per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# source={} kind={} rounds={}", self.source, self.kind, self.rounds);
        for d in &self.deliveries {
            let verdict = if d.forwarded { "forwarded" } else { "declined" };
            let _ = writeln!(out, "{} -> {} {verdict}", d.from, d.to);
        }
        out
    }
}

pub(crate) trait Observer {
    fn delivered(&mut self, edge: usize, forwarded: bool);
}

impl Observer for () {
    #[inline]
    fn delivered(&mut self, _: usize, _: bool) {}
}

impl Observer for Vec<(usize, bool)> {
    fn delivered(&mut self, edge: usize, forwarded: bool) {
        self.push((edge, forwarded));
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Undecided,
    Posted,
    Declined,
}

/// Reusable scratch space for running many cascades on one graph.
pub(crate) struct Cascader {
    status: Vec<Status>,
    candidates: Vec<u32>,
    chosen: Vec<usize>,
    frontier: Vec<usize>,
    next: Vec<usize>,
    receivers: Vec<usize>,
    decided: Vec<usize>,
}

pub(crate) struct RunSummary {
    pub posters: usize,
    pub rounds: usize,
}

impl Cascader {
    pub fn new(nodes: usize) -> Self {
        Cascader {
            status: vec![Status::Undecided; nodes],
            candidates: vec![0; nodes],
            chosen: vec![0; nodes],
            frontier: Vec::new(),
            next: Vec::new(),
            receivers: Vec::new(),
            decided: Vec::new(),
        }
    }

    /// Runs one cascade. The caller has validated the source.
    pub fn run<R: Rng, O: Observer>(
        &mut self,
        graph: &TrustGraph,
        source: usize,
        kind: MessageKind,
        eta: f64,
        rng: &mut R,
        observer: &mut O,
    ) -> RunSummary {
        self.status[source] = Status::Posted;
        self.decided.push(source);
        self.frontier.push(source);
        let mut posters = 1;
        let mut rounds = 1;

        while !self.frontier.is_empty() {
            for &poster in &self.frontier {
                for &edge in graph.out_edges(poster) {
                    let k = graph.edges()[edge].dst.slot();
                    if self.status[k] != Status::Undecided {
                        continue;
                    }
                    let seen = self.candidates[k] + 1;
                    self.candidates[k] = seen;
                    if seen == 1 {
                        self.receivers.push(k);
                        self.chosen[k] = edge;
                    } else if rng.random_range(0..seen) == 0 {
                        // reservoir pick: uniform over simultaneous posters
                        self.chosen[k] = edge;
                    }
                }
            }

            for &k in &self.receivers {
                self.candidates[k] = 0;
                let edge = self.chosen[k];
                let p = forward_probability(graph.kind_at(k), kind, eta, graph.weight_at(edge));
                let forwarded = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
                observer.delivered(edge, forwarded);
                self.decided.push(k);
                if forwarded {
                    self.status[k] = Status::Posted;
                    self.next.push(k);
                } else {
                    self.status[k] = Status::Declined;
                }
            }
            self.receivers.clear();

            if !self.next.is_empty() {
                posters += self.next.len();
                rounds += 1;
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
            self.next.clear();
        }

        RunSummary { posters, rounds }
    }

    /// Slots that posted in the last run, then resets for the next one.
    fn take_posters(&mut self) -> Vec<usize> {
        let posted = self
            .decided
            .iter()
            .copied()
            .filter(|&s| self.status[s] == Status::Posted)
            .collect();
        self.reset();
        posted
    }

    pub fn reset(&mut self) {
        for &s in &self.decided {
            self.status[s] = Status::Undecided;
        }
        self.decided.clear();
    }
}

/// Runs a single cascade from `source` and records everything that happened.
pub fn run_cascade<R: Rng>(
    graph: &TrustGraph,
    source: NodeId,
    kind: MessageKind,
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<CascadeOutcome> {
    cfg.validate()?;
    check_source(graph, source, kind)?;
    let mut cascader = Cascader::new(graph.node_count());
    let mut events: Vec<(usize, bool)> = Vec::new();
    let summary = cascader.run(graph, source.slot(), kind, cfg.eta, rng, &mut events);
    let posters = cascader
        .take_posters()
        .into_iter()
        .map(NodeId::from_slot)
        .collect();
    let deliveries = events
        .into_iter()
        .map(|(edge, forwarded)| {
            let e = graph.edges()[edge];
            Delivery { from: e.src, to: e.dst, forwarded }
        })
        .collect();
    Ok(CascadeOutcome {
        source,
        kind,
        posters,
        deliveries,
        rounds: summary.rounds,
    })
}

/// Mean and sample variance of the number of posters for one source and
/// message kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpread {
    pub source: NodeId,
    pub kind: MessageKind,
    pub mean: f64,
    pub variance: f64,
    pub replications: usize,
}

impl SourceSpread {
    pub fn stderr(&self) -> f64 {
        (self.variance / self.replications as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    /// True message transmission ability.
    pub f_true: f64,
    /// False message transmission ability.
    pub f_false: f64,
    /// Information filtering ability, `(f_true - f_false) / f_false`.
    pub ifa: f64,
    pub stderr_true: f64,
    pub stderr_false: f64,
    pub stderr_ifa: f64,
    pub replications: usize,
    pub true_spread: Vec<SourceSpread>,
    pub false_spread: Vec<SourceSpread>,
}

const BLOCK: usize = 1000;

#[derive(Default, Clone, Copy)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

fn kind_tag(kind: MessageKind) -> u64 {
    match kind {
        MessageKind::True => tag::MC_TRUE,
        MessageKind::False => tag::MC_FALSE,
    }
}

/// Replicates cascades for every `(source, kind)` job. Each job is split into
/// blocks of [`BLOCK`] replications with their own stream, and block moments
/// are summed in job/block order.
fn replicate(
    graph: &TrustGraph,
    jobs: &[(NodeId, MessageKind)],
    eta: f64,
    replications: usize,
    seed: u64,
    exec: Execution,
) -> Vec<SourceSpread> {
    let blocks = replications.div_ceil(BLOCK);
    let moments = exec.map(jobs.len() * blocks, |unit| {
        let (source, kind) = jobs[unit / blocks];
        let block = unit % blocks;
        let count = BLOCK.min(replications - block * BLOCK);
        let mut rng = seed::stream(seed, &[kind_tag(kind), source.index() as u64, block as u64]);
        let mut cascader = Cascader::new(graph.node_count());
        let mut m = Moments::default();
        for _ in 0..count {
            let posters = cascader.run(graph, source.slot(), kind, eta, &mut rng, &mut ()).posters;
            cascader.reset();
            let x = posters as f64;
            m.sum += x;
            m.sum_sq += x * x;
        }
        m
    });

    jobs.iter()
        .enumerate()
        .map(|(j, &(source, kind))| {
            let total = moments[j * blocks..(j + 1) * blocks]
                .iter()
                .fold(Moments::default(), |acc, m| Moments {
                    sum: acc.sum + m.sum,
                    sum_sq: acc.sum_sq + m.sum_sq,
                });
            let r = replications as f64;
            let mean = total.sum / r;
            let variance = if replications > 1 {
                ((total.sum_sq - r * mean * mean) / (r - 1.0)).max(0.0)
            } else {
                0.0
            };
            SourceSpread { source, kind, mean, variance, replications }
        })
        .collect()
}

fn check_replications(replications: usize) -> Result<()> {
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    Ok(())
}

/// Estimates TTA, FTA and IFA: `replications` true-message cascades from
/// every node and `replications` false-message cascades from every normal
/// node.
pub fn estimate_stats(
    graph: &TrustGraph,
    cfg: &ModelConfig,
    replications: usize,
    seed: u64,
    exec: Execution,
) -> Result<SpreadStats> {
    cfg.validate()?;
    check_replications(replications)?;
    let normals = graph.normal_count();
    if normals == 0 {
        return Err(Error::NoNormalNodes);
    }
    let n = graph.node_count() as f64;

    let mut jobs: Vec<(NodeId, MessageKind)> =
        graph.nodes().map(|(id, _)| (id, MessageKind::True)).collect();
    jobs.extend(
        graph
            .nodes()
            .filter(|&(_, kind)| kind == NodeKind::Normal)
            .map(|(id, _)| (id, MessageKind::False)),
    );
    let spreads = replicate(graph, &jobs, cfg.eta, replications, seed, exec);
    let (true_spread, false_spread) = spreads.split_at(graph.node_count());

    // F_T = sum_i mean_i / N^2; F_F = sum_{i normal} mean_i / (N |O|)
    let scale_true = 1.0 / (n * n);
    let scale_false = 1.0 / (n * normals as f64);
    let f_true = scale_true * true_spread.iter().map(|s| s.mean).sum::<f64>();
    let f_false = scale_false * false_spread.iter().map(|s| s.mean).sum::<f64>();
    let var_true = scale_true.powi(2)
        * true_spread.iter().map(|s| s.variance / s.replications as f64).sum::<f64>();
    let var_false = scale_false.powi(2)
        * false_spread.iter().map(|s| s.variance / s.replications as f64).sum::<f64>();

    let ifa = (f_true - f_false) / f_false;
    // delta method on f_true / f_false; the two estimates use disjoint cascades
    let var_ifa = var_true / f_false.powi(2) + f_true.powi(2) * var_false / f_false.powi(4);

    Ok(SpreadStats {
        f_true,
        f_false,
        ifa,
        stderr_true: var_true.sqrt(),
        stderr_false: var_false.sqrt(),
        stderr_ifa: var_ifa.sqrt(),
        replications,
        true_spread: true_spread.to_vec(),
        false_spread: false_spread.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Chain position `i` of `v_i`.
    pub index: usize,
    pub value: f64,
    pub stderr: f64,
}

/// Monte Carlo diffusion power along the smart node's chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalProfile {
    pub kind: MessageKind,
    /// Mean spread per source `v_i`.
    pub spread: Vec<Estimate>,
    /// `D(i) = n(i) - n(i+1)`.
    pub differences: Vec<Estimate>,
}

impl EmpiricalProfile {
    pub fn difference(&self, index: usize) -> Option<&Estimate> {
        self.differences.iter().find(|d| d.index == index)
    }
}

/// Per-source spread and successive differences along chain `v_1..v_n` of a
/// chain or bridged topology. True messages start at `v_1`, false ones at
/// `v_2`.
pub fn stratification_mc(
    graph: &TrustGraph,
    topology: &Topology,
    cfg: &ModelConfig,
    kind: MessageKind,
    replications: usize,
    seed: u64,
    exec: Execution,
) -> Result<EmpiricalProfile> {
    cfg.validate()?;
    check_replications(replications)?;
    let n = match *topology {
        Topology::Star { .. } => {
            return Err(Error::UnsupportedTopology(
                "stratification is undefined on a star: all leaves are exchangeable".into(),
            ))
        }
        Topology::Chain { n } | Topology::Bridged { n, .. } => n,
    };
    if graph.node_count() != topology.node_count() {
        return Err(Error::Contract(format!(
            "graph has {} nodes but {topology} has {}",
            graph.node_count(),
            topology.node_count()
        )));
    }
    let first = match kind {
        MessageKind::True => 1,
        MessageKind::False => 2,
    };
    let jobs: Vec<_> = (first..=n).map(|i| (NodeId(i), kind)).collect();
    let spreads = replicate(graph, &jobs, cfg.eta, replications, seed, exec);

    let spread: Vec<Estimate> = spreads
        .iter()
        .map(|s| Estimate { index: s.source.index(), value: s.mean, stderr: s.stderr() })
        .collect();
    let differences = spread
        .windows(2)
        .map(|w| Estimate {
            index: w[0].index,
            value: w[0].value - w[1].value,
            stderr: w[0].stderr.hypot(w[1].stderr),
        })
        .collect();
    Ok(EmpiricalProfile { kind, spread, differences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_chain, build_star, TrustGraph};
    use crate::seed::stream;

    fn mean_posters(g: &TrustGraph, source: usize, kind: MessageKind, eta: f64, reps: usize) -> f64 {
        let cfg = ModelConfig::new(eta).unwrap();
        let mut rng = stream(99, &[source as u64]);
        let total: usize = (0..reps)
            .map(|_| run_cascade(g, NodeId(source), kind, &cfg, &mut rng).unwrap().posters.len())
            .sum();
        total as f64 / reps as f64
    }

    #[test]
    fn false_message_from_star_leaf_stays_put() {
        let g = build_star(3).unwrap();
        let cfg = ModelConfig::new(1.0).unwrap();
        let mut rng = stream(1, &[]);
        for _ in 0..100 {
            let out = run_cascade(&g, NodeId(2), MessageKind::False, &cfg, &mut rng).unwrap();
            assert_eq!(out.posters, BTreeSet::from([NodeId(2)]));
            // the center still receives (and declines)
            assert_eq!(
                out.deliveries,
                vec![Delivery { from: NodeId(2), to: NodeId(1), forwarded: false }]
            );
        }
    }

    #[test]
    fn zero_rate_posts_only_the_source() {
        let g = build_chain(5).unwrap();
        let cfg = ModelConfig::new(0.0).unwrap();
        let mut rng = stream(2, &[]);
        for source in 1..=5 {
            let out = run_cascade(&g, NodeId(source), MessageKind::True, &cfg, &mut rng).unwrap();
            assert_eq!(out.posters.len(), 1);
            assert_eq!(out.rounds, 1);
            assert!(out.deliveries.iter().all(|d| !d.forwarded));
        }
    }

    #[test]
    fn chain_middle_source_expected_spread() {
        // 1 (source) + 1/2 (v3 copies with w=0.5) + 1 (smart v1 forwards at eta=1)
        let g = build_chain(3).unwrap();
        let mean = mean_posters(&g, 2, MessageKind::True, 1.0, 40_000);
        // variance is 0.25 so the standard error is 0.0025
        assert!((mean - 2.5).abs() < 4.0 * 0.0025, "mean {mean}");
    }

    #[test]
    fn smart_source_cannot_emit_false() {
        let g = build_chain(3).unwrap();
        let cfg = ModelConfig::new(0.5).unwrap();
        let err = run_cascade(&g, NodeId(1), MessageKind::False, &cfg, &mut stream(0, &[]));
        assert!(matches!(err, Err(Error::Contract(_))));
        assert!(ModelConfig::new(1.5).is_err());
    }

    #[test]
    fn pick_rule_is_uniform_over_simultaneous_posters() {
        // diamond 1 -> {2, 4} -> 3: node 3 hears 2 and 4 in the same round
        // and forwards iff it follows 2 (weight 1 vs 0)
        let kinds = vec![NodeKind::Normal; 4];
        let mut g = TrustGraph::new(kinds);
        g.add_edge(NodeId(1), NodeId(2), 1.0).unwrap();
        g.add_edge(NodeId(1), NodeId(4), 1.0).unwrap();
        g.add_edge(NodeId(2), NodeId(3), 1.0).unwrap();
        g.add_edge(NodeId(4), NodeId(3), 0.0).unwrap();
        let mean = mean_posters(&g, 1, MessageKind::True, 1.0, 40_000);
        // 3 posters always, plus node 3 with probability 1/2
        assert!((mean - 3.5).abs() < 4.0 * 0.0025, "mean {mean}");
    }

    #[test]
    fn outcome_dump_lists_deliveries() {
        let g = build_chain(2).unwrap();
        let cfg = ModelConfig::new(0.0).unwrap();
        let out = run_cascade(&g, NodeId(2), MessageKind::True, &cfg, &mut stream(0, &[])).unwrap();
        assert_eq!(out.dump(), "# source=2 kind=true rounds=1\n2 -> 1 declined\n");
    }

    #[test]
    fn zero_rate_stats_are_one_over_n() {
        let g = build_chain(6).unwrap();
        let cfg = ModelConfig::new(0.0).unwrap();
        let stats = estimate_stats(&g, &cfg, 50, 3, Execution::Sequential).unwrap();
        assert_eq!(stats.f_true, 1.0 / 6.0);
        assert_eq!(stats.f_false, 1.0 / 6.0);
        assert_eq!(stats.ifa, 0.0);
        assert_eq!(stats.stderr_ifa, 0.0);
    }

    #[test]
    fn stats_need_normal_nodes_and_replications() {
        let mut g = TrustGraph::new(vec![NodeKind::Smart, NodeKind::Smart]);
        g.add_link(NodeId(1), NodeId(2), 0.5).unwrap();
        let cfg = ModelConfig::new(0.5).unwrap();
        assert_eq!(
            estimate_stats(&g, &cfg, 10, 0, Execution::Sequential).unwrap_err(),
            Error::NoNormalNodes
        );
        let chain = build_chain(3).unwrap();
        assert!(estimate_stats(&chain, &cfg, 0, 0, Execution::Sequential).is_err());
    }

    #[test]
    fn stratification_rejects_star() {
        let g = build_star(5).unwrap();
        let cfg = ModelConfig::new(0.5).unwrap();
        let err = stratification_mc(
            &g,
            &Topology::Star { n: 5 },
            &cfg,
            MessageKind::True,
            10,
            0,
            Execution::Sequential,
        );
        assert!(matches!(err, Err(Error::UnsupportedTopology(_))));
    }

    #[test]
    fn stratification_zero_rate_is_flat() {
        let topo = Topology::Chain { n: 6 };
        let g = topo.build().unwrap();
        let cfg = ModelConfig::new(0.0).unwrap();
        for kind in [MessageKind::True, MessageKind::False] {
            let p = stratification_mc(&g, &topo, &cfg, kind, 20, 0, Execution::Sequential).unwrap();
            assert!(p.differences.iter().all(|d| d.value == 0.0));
            let first = if kind == MessageKind::True { 1 } else { 2 };
            assert_eq!(p.differences.first().unwrap().index, first);
            assert_eq!(p.differences.last().unwrap().index, 5);
        }
    }

    #[test]
    fn chain4_true_difference_at_two() {
        // D_T(2) = (eta/2)^2 + (1 - eta)(eta/2) = 0.0625 + 0.125 at eta = 0.5
        let topo = Topology::Chain { n: 4 };
        let g = topo.build().unwrap();
        let cfg = ModelConfig::new(0.5).unwrap();
        let p = stratification_mc(&g, &topo, &cfg, MessageKind::True, 200_000, 11, Execution::Parallel)
            .unwrap();
        let d = p.difference(2).unwrap();
        assert!((d.value - 0.1875).abs() < 4.0 * d.stderr, "{d:?}");
    }
}
