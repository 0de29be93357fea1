//! Exact expected spread, computed without any closed forms: path products
//! on trees, and full event-tree expansion of the round-synchronous cascade
//! on small general graphs.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cascade::{check_source, forward_probability, MessageKind, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeId, TrustGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSpread {
    pub source: NodeId,
    pub kind: MessageKind,
    pub expected_posters: f64,
    pub per_node_post_probability: BTreeMap<NodeId, f64>,
}

impl ExpectedSpread {
    fn from_slots(source: NodeId, kind: MessageKind, probs: &[f64]) -> Self {
        let per_node_post_probability: BTreeMap<_, _> = probs
            .iter()
            .enumerate()
            .map(|(slot, &p)| (NodeId::from_slot(slot), p))
            .collect();
        ExpectedSpread {
            source,
            kind,
            expected_posters: probs.iter().sum(),
            per_node_post_probability,
        }
    }

    pub fn probability(&self, node: NodeId) -> f64 {
        self.per_node_post_probability.get(&node).copied().unwrap_or(0.0)
    }
}

/// On a tree every node is reached over a unique path, so its posting
/// probability is the product of the per-hop forwarding probabilities.
pub fn tree_expected_spread(
    graph: &TrustGraph,
    source: NodeId,
    kind: MessageKind,
    cfg: &ModelConfig,
) -> Result<ExpectedSpread> {
    TreeOracle::new(graph)?.spread(source, kind, cfg)
}

/// Tree oracle bound to one graph, so the forest check runs once however
/// many sources are queried.
#[derive(Debug, Clone, Copy)]
pub struct TreeOracle<'a> {
    graph: &'a TrustGraph,
}

impl<'a> TreeOracle<'a> {
    pub fn new(graph: &'a TrustGraph) -> Result<Self> {
        if !graph.is_forest() {
            return Err(Error::NotATree);
        }
        Ok(TreeOracle { graph })
    }

    pub fn spread(&self, source: NodeId, kind: MessageKind, cfg: &ModelConfig) -> Result<ExpectedSpread> {
        let probs = self.probabilities(source, kind, cfg)?;
        Ok(ExpectedSpread::from_slots(source, kind, &probs))
    }

    pub fn expected_posters(&self, source: NodeId, kind: MessageKind, cfg: &ModelConfig) -> Result<f64> {
        Ok(self.probabilities(source, kind, cfg)?.iter().sum())
    }

    fn probabilities(&self, source: NodeId, kind: MessageKind, cfg: &ModelConfig) -> Result<Vec<f64>> {
        let graph = self.graph;
        cfg.validate()?;
        check_source(graph, source, kind)?;
        let mut probs = vec![0.0; graph.node_count()];
        let mut seen = vec![false; graph.node_count()];
        let start = source.slot();
        probs[start] = 1.0;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(j) = queue.pop_front() {
            for &e in graph.out_edges(j) {
                let k = graph.edges()[e].dst.slot();
                if seen[k] {
                    continue;
                }
                seen[k] = true;
                let hop = forward_probability(graph.kind_at(k), kind, cfg.eta, graph.weight_at(e));
                probs[k] = probs[j] * hop;
                queue.push_back(k);
            }
        }
        Ok(probs)
    }
}

struct Enumerator<'a> {
    graph: &'a TrustGraph,
    kind: MessageKind,
    eta: f64,
    budget: usize,
    visited: usize,
    probs: Vec<f64>,
}

/// A receiver this round with the edges from every poster that reached it.
struct Receiver {
    node: usize,
    offers: Vec<usize>,
}

impl Enumerator<'_> {
    fn tick(&mut self) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            Err(Error::BudgetExceeded { budget: self.budget })
        } else {
            Ok(())
        }
    }

    fn round(&mut self, decided: &mut [bool], frontier: &[usize], weight: f64) -> Result<()> {
        let mut receivers: Vec<Receiver> = Vec::new();
        for &j in frontier {
            for &e in self.graph.out_edges(j) {
                let k = self.graph.edges()[e].dst.slot();
                if decided[k] {
                    continue;
                }
                match receivers.iter_mut().find(|r| r.node == k) {
                    Some(r) => r.offers.push(e),
                    None => receivers.push(Receiver { node: k, offers: vec![e] }),
                }
            }
        }
        if receivers.is_empty() {
            return Ok(());
        }
        for r in &receivers {
            decided[r.node] = true;
        }
        let mut posted = Vec::new();
        self.decide(decided, &receivers, 0, &mut posted, weight)?;
        for r in &receivers {
            decided[r.node] = false;
        }
        Ok(())
    }

    /// Branches over the pick and the outcome of receiver `at`, then hands
    /// the completed round to the next one.
    fn decide(
        &mut self,
        decided: &mut [bool],
        receivers: &[Receiver],
        at: usize,
        posted: &mut Vec<usize>,
        weight: f64,
    ) -> Result<()> {
        self.tick()?;
        let Some(r) = receivers.get(at) else {
            for &k in posted.iter() {
                self.probs[k] += weight;
            }
            let frontier = posted.clone();
            return self.round(decided, &frontier, weight);
        };
        let pick = 1.0 / r.offers.len() as f64;
        for &e in &r.offers {
            let p = forward_probability(self.graph.kind_at(r.node), self.kind, self.eta, self.graph.weight_at(e));
            if p > 0.0 {
                posted.push(r.node);
                self.decide(decided, receivers, at + 1, posted, weight * pick * p)?;
                posted.pop();
            }
            if p < 1.0 {
                self.decide(decided, receivers, at + 1, posted, weight * pick * (1.0 - p))?;
            }
        }
        Ok(())
    }
}

/// Exact expectation on any graph by expanding every pick and every
/// forward/decline outcome. Fails once more than `budget` branch points
/// have been expanded.
pub fn enumerate_expected_spread(
    graph: &TrustGraph,
    source: NodeId,
    kind: MessageKind,
    cfg: &ModelConfig,
    budget: usize,
) -> Result<ExpectedSpread> {
    cfg.validate()?;
    check_source(graph, source, kind)?;
    let mut run = Enumerator {
        graph,
        kind,
        eta: cfg.eta,
        budget,
        visited: 0,
        probs: vec![0.0; graph.node_count()],
    };
    let start = source.slot();
    run.probs[start] = 1.0;
    let mut decided = vec![false; graph.node_count()];
    decided[start] = true;
    run.round(&mut decided, &[start], 1.0)?;
    Ok(ExpectedSpread::from_slots(source, kind, &run.probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_bridged_chains, build_chain, build_star, NodeKind};
    use approx::assert_abs_diff_eq;

    fn cfg(eta: f64) -> ModelConfig {
        ModelConfig::new(eta).unwrap()
    }

    #[test]
    fn tree_examples() {
        let chain = build_chain(3).unwrap();
        let s = tree_expected_spread(&chain, NodeId(2), MessageKind::True, &cfg(1.0)).unwrap();
        assert_abs_diff_eq!(s.expected_posters, 2.5, epsilon = 1e-15);
        assert_eq!(s.probability(NodeId(2)), 1.0);

        let star = build_star(12).unwrap();
        for eta in [0.0, 0.4, 1.0] {
            let s = tree_expected_spread(&star, NodeId(5), MessageKind::False, &cfg(eta)).unwrap();
            assert_eq!(s.expected_posters, 1.0);
        }
        let s = tree_expected_spread(&chain, NodeId(3), MessageKind::True, &cfg(0.0)).unwrap();
        assert_eq!(s.expected_posters, 1.0);
    }

    #[test]
    fn tree_oracle_rejects_cycles() {
        let mut g = TrustGraph::new(vec![NodeKind::Normal; 3]);
        g.add_link(NodeId(1), NodeId(2), 0.5).unwrap();
        g.add_link(NodeId(2), NodeId(3), 0.5).unwrap();
        g.add_link(NodeId(3), NodeId(1), 0.5).unwrap();
        assert_eq!(
            tree_expected_spread(&g, NodeId(1), MessageKind::True, &cfg(0.5)),
            Err(Error::NotATree)
        );
        assert!(enumerate_expected_spread(&g, NodeId(1), MessageKind::True, &cfg(0.5), 10_000).is_ok());
    }

    #[test]
    fn enumerator_agrees_with_tree_oracle() {
        let graphs = [build_chain(6).unwrap(), build_star(7).unwrap(), build_bridged_chains(3, 2, 2).unwrap()];
        for g in &graphs {
            for (id, kind) in g.nodes() {
                for msg in [MessageKind::True, MessageKind::False] {
                    if msg == MessageKind::False && kind == NodeKind::Smart {
                        continue;
                    }
                    let c = cfg(0.7);
                    let a = tree_expected_spread(g, id, msg, &c).unwrap();
                    let b = enumerate_expected_spread(g, id, msg, &c, 1_000_000).unwrap();
                    assert_abs_diff_eq!(a.expected_posters, b.expected_posters, epsilon = 1e-12);
                    for (node, p) in &a.per_node_post_probability {
                        assert_abs_diff_eq!(*p, b.probability(*node), epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn full_weights_spread_everywhere() {
        let mut g = TrustGraph::new(vec![NodeKind::Normal; 5]);
        for (a, b) in [(1, 2), (2, 3), (3, 4), (4, 1), (2, 5), (1, 3)] {
            g.add_link(NodeId(a), NodeId(b), 1.0).unwrap();
        }
        let s = enumerate_expected_spread(&g, NodeId(1), MessageKind::True, &cfg(1.0), 100_000).unwrap();
        assert_abs_diff_eq!(s.expected_posters, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn pick_rule_on_a_diamond() {
        // 1 -> {2, 4} -> 3. Node 3 follows 2 (weight 1) or 4 (weight 0) with
        // equal chance, so it posts half the time.
        let mut g = TrustGraph::new(vec![NodeKind::Normal; 4]);
        g.add_edge(NodeId(1), NodeId(2), 1.0).unwrap();
        g.add_edge(NodeId(1), NodeId(4), 1.0).unwrap();
        g.add_edge(NodeId(2), NodeId(3), 1.0).unwrap();
        g.add_edge(NodeId(4), NodeId(3), 0.0).unwrap();
        let s = enumerate_expected_spread(&g, NodeId(1), MessageKind::True, &cfg(1.0), 1000).unwrap();
        assert_abs_diff_eq!(s.probability(NodeId(3)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.expected_posters, 3.5, epsilon = 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let g = build_chain(10).unwrap();
        let r = enumerate_expected_spread(&g, NodeId(5), MessageKind::True, &cfg(0.5), 5);
        assert_eq!(r, Err(Error::BudgetExceeded { budget: 5 }));
    }

    #[test]
    fn probabilities_fall_away_from_source() {
        let g = build_bridged_chains(6, 3, 5).unwrap();
        let s = tree_expected_spread(&g, NodeId(4), MessageKind::True, &cfg(0.8)).unwrap();
        for (k, _) in g.nodes() {
            if k == NodeId(4) {
                continue;
            }
            // some neighbour, the one on the path back to the source, is at
            // least as likely to post
            let upstream = g
                .edges()
                .iter()
                .filter(|e| e.dst == k)
                .map(|e| s.probability(e.src))
                .fold(0.0, f64::max);
            assert!(upstream >= s.probability(k), "node {k}");
        }
    }
}
