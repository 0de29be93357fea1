//! Trust network data model and the builders for the chain, star and
//! bridged-chain topologies.
//!
//! Nodes are addressed 1-based. A directed edge `(j, k)` carries the trust
//! weight `w_jk`, i.e. how readily `k` copies what `j` posts. Freshly built
//! graphs have every weight at [`INITIAL_WEIGHT`].

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INITIAL_WEIGHT: f64 = 0.5;

/// 1-based node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    pub(crate) fn slot(self) -> usize {
        self.0 - 1
    }

    pub(crate) fn from_slot(slot: usize) -> Self {
        NodeId(slot + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Smart,
    Normal,
}

impl NodeKind {
    fn code(self) -> char {
        match self {
            NodeKind::Smart => 'S',
            NodeKind::Normal => 'N',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
}

/// The three topologies the closed forms cover.
///
/// Serialized with a `shape` tag: `shape = "chain"`, `n = 10`, or
/// `shape = "bridged"`, `n = 10`, `l = 4`, `h = 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Topology {
    Chain { n: usize },
    Star { n: usize },
    Bridged { n: usize, l: usize, h: usize },
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        let n = self.component_size();
        if n < 2 {
            return Err(Error::InvalidTopology(format!(
                "{self} needs at least 2 nodes per component"
            )));
        }
        if let Topology::Bridged { n, l, h } = *self {
            if !(2..=n).contains(&l) || !(2..=n).contains(&h) {
                return Err(Error::InvalidTopology(format!(
                    "bridge endpoints must be normal nodes with 2 <= l, h <= {n}, got l={l}, h={h}"
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<TrustGraph> {
        match *self {
            Topology::Chain { n } => build_chain(n),
            Topology::Star { n } => build_star(n),
            Topology::Bridged { n, l, h } => build_bridged_chains(n, l, h),
        }
    }

    /// Nodes per chain (or the star size).
    pub fn component_size(&self) -> usize {
        match *self {
            Topology::Chain { n } | Topology::Star { n } | Topology::Bridged { n, .. } => n,
        }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            Topology::Bridged { n, .. } => 2 * n,
            _ => self.component_size(),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Chain { n } => write!(f, "chain(n={n})"),
            Topology::Star { n } => write!(f, "star(n={n})"),
            Topology::Bridged { n, l, h } => write!(f, "bridged(n={n}, l={l}, h={h})"),
        }
    }
}

/// Which of the two chains of a bridged topology a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSide {
    /// The `v` chain, flat ids `1..=n`.
    A,
    /// The `u` chain, flat ids `n+1..=2n`.
    B,
}

/// Flat id of `v_index` (side A) or `u_index` (side B) in a bridged graph
/// whose chains have `n` nodes each.
pub fn bridged_node(n: usize, side: ChainSide, index: usize) -> NodeId {
    debug_assert!((1..=n).contains(&index));
    match side {
        ChainSide::A => NodeId(index),
        ChainSide::B => NodeId(n + index),
    }
}

/// Directed weighted graph with a smart/normal label on every node.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustGraph {
    kinds: Vec<NodeKind>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl TrustGraph {
    pub fn new(kinds: Vec<NodeKind>) -> Self {
        let n = kinds.len();
        TrustGraph {
            kinds,
            edges: Vec::new(),
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
            lookup: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (1..=self.kinds.len()).contains(&id.0)
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.slot()]
    }

    pub(crate) fn kind_at(&self, slot: usize) -> NodeKind {
        self.kinds[slot]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, NodeKind)> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .map(|(slot, &kind)| (NodeId::from_slot(slot), kind))
    }

    pub fn smart_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes()
            .filter(|&(_, kind)| kind == NodeKind::Smart)
            .map(|(id, _)| id)
    }

    pub fn normal_count(&self) -> usize {
        self.kinds.iter().filter(|&&k| k == NodeKind::Normal).count()
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, weight: f64) -> Result<usize> {
        if !self.contains(src) || !self.contains(dst) {
            return Err(Error::Contract(format!(
                "edge ({src},{dst}) references a node outside 1..={}",
                self.node_count()
            )));
        }
        if src == dst {
            return Err(Error::Contract(format!("self-loop on node {src}")));
        }
        check_weight(weight)?;
        let key = (src.slot(), dst.slot());
        if self.lookup.contains_key(&key) {
            return Err(Error::Contract(format!("duplicate edge ({src},{dst})")));
        }
        let idx = self.edges.len();
        self.edges.push(Edge { src, dst, weight });
        self.out_adj[key.0].push(idx);
        self.in_adj[key.1].push(idx);
        self.lookup.insert(key, idx);
        Ok(idx)
    }

    /// Adds `(a, b)` and `(b, a)`, both at `weight`.
    pub fn add_link(&mut self, a: NodeId, b: NodeId, weight: f64) -> Result<()> {
        self.add_edge(a, b, weight)?;
        self.add_edge(b, a, weight)?;
        Ok(())
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_index(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        if !self.contains(src) || !self.contains(dst) {
            return None;
        }
        self.lookup.get(&(src.slot(), dst.slot())).copied()
    }

    pub fn weight(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.edge_index(src, dst).map(|idx| self.edges[idx].weight)
    }

    pub fn set_weight(&mut self, src: NodeId, dst: NodeId, weight: f64) -> Result<()> {
        let idx = self
            .edge_index(src, dst)
            .ok_or_else(|| Error::Contract(format!("no edge ({src},{dst})")))?;
        check_weight(weight)?;
        self.edges[idx].weight = weight;
        Ok(())
    }

    pub(crate) fn weight_at(&self, idx: usize) -> f64 {
        self.edges[idx].weight
    }

    pub(crate) fn set_weight_at(&mut self, idx: usize, weight: f64) {
        self.edges[idx].weight = weight;
    }

    pub(crate) fn out_edges(&self, slot: usize) -> &[usize] {
        &self.out_adj[slot]
    }

    #[cfg(test)]
    pub(crate) fn in_edges(&self, slot: usize) -> &[usize] {
        &self.in_adj[slot]
    }

    /// Weights in edge insertion order.
    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    /// True when the underlying undirected graph (edge pairs collapsed) has
    /// no cycle. Disconnected forests count as trees here; nodes outside the
    /// source's component simply never receive anything.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.node_count()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (e.src.slot(), e.dst.slot());
            // the reverse direction of a link is the same undirected edge
            if a > b && self.lookup.contains_key(&(b, a)) {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &e in self.out_adj[x].iter().chain(&self.in_adj[x]) {
                let edge = &self.edges[e];
                for y in [edge.src.slot(), edge.dst.slot()] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Text dump: a `#kinds=` header with one `S`/`N` code per node, then
    /// the `src,dst,weight` column header and one line per directed edge.
    pub fn dump(&self) -> String {
        let mut out = String::from("#kinds=");
        out.extend(self.kinds.iter().map(|k| k.code()));
        out.push('\n');
        out.push_str("src,dst,weight\n");
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{}", e.src, e.dst, e.weight);
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Contract(format!("graph dump: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let codes = header
            .strip_prefix("#kinds=")
            .ok_or_else(|| bad(format!("expected '#kinds=' header, got {header:?}")))?;
        let kinds = codes
            .chars()
            .map(|c| match c {
                'S' => Ok(NodeKind::Smart),
                'N' => Ok(NodeKind::Normal),
                other => Err(bad(format!("unknown node kind code {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        match lines.next() {
            Some("src,dst,weight") => {}
            other => return Err(bad(format!("expected column header, got {other:?}"))),
        }
        let mut graph = TrustGraph::new(kinds);
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(format!("line {}: expected 3 fields", lineno + 3)));
            }
            let parse_id = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map(NodeId)
                    .map_err(|e| bad(format!("line {}: {e}", lineno + 3)))
            };
            let weight = fields[2]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 3)))?;
            graph.add_edge(parse_id(fields[0])?, parse_id(fields[1])?, weight)?;
        }
        Ok(graph)
    }
}

fn check_weight(weight: f64) -> Result<()> {
    if (0.0..=1.0).contains(&weight) {
        Ok(())
    } else {
        Err(Error::Contract(format!("weight {weight} outside [0, 1]")))
    }
}

fn chain_kinds(n: usize) -> Vec<NodeKind> {
    let mut kinds = vec![NodeKind::Normal; n];
    kinds[0] = NodeKind::Smart;
    kinds
}

fn link_chain(graph: &mut TrustGraph, first: usize, n: usize) -> Result<()> {
    for i in 1..n {
        graph.add_link(NodeId(first + i - 1), NodeId(first + i), INITIAL_WEIGHT)?;
    }
    Ok(())
}

/// `v_1 - v_2 - ... - v_n` with `v_1` the only smart node.
pub fn build_chain(n: usize) -> Result<TrustGraph> {
    Topology::Chain { n }.validate()?;
    let mut graph = TrustGraph::new(chain_kinds(n));
    link_chain(&mut graph, 1, n)?;
    Ok(graph)
}

/// Smart center `v_1` linked to leaves `v_2..v_n`; no leaf-leaf links.
pub fn build_star(n: usize) -> Result<TrustGraph> {
    Topology::Star { n }.validate()?;
    let mut graph = TrustGraph::new(chain_kinds(n));
    for leaf in 2..=n {
        graph.add_link(NodeId(1), NodeId(leaf), INITIAL_WEIGHT)?;
    }
    Ok(graph)
}

/// Two chains of `n` nodes (`v` with smart `v_1`, `u` with smart `u_1`)
/// joined by a link between `v_l` and `u_h`.
pub fn build_bridged_chains(n: usize, l: usize, h: usize) -> Result<TrustGraph> {
    Topology::Bridged { n, l, h }.validate()?;
    let mut kinds = chain_kinds(n);
    kinds.extend(chain_kinds(n));
    let mut graph = TrustGraph::new(kinds);
    link_chain(&mut graph, 1, n)?;
    link_chain(&mut graph, n + 1, n)?;
    graph.add_link(
        bridged_node(n, ChainSide::A, l),
        bridged_node(n, ChainSide::B, h),
        INITIAL_WEIGHT,
    )?;
    Ok(graph)
}

/// Returns a copy of `graph` with the weight pattern that long training
/// drives the topology towards: every link leading away from a smart node
/// saturates at 1; on bridged chains the bridge saturates in both
/// directions, as do the backward links between each smart node and its
/// bridge endpoint. Everything else stays at 0.5.
pub fn set_limit_weights(graph: &TrustGraph, topology: &Topology) -> Result<TrustGraph> {
    let reference = topology.build()?;
    let same_shape = reference.kinds == graph.kinds
        && reference.edge_count() == graph.edge_count()
        && reference
            .edges
            .iter()
            .all(|e| graph.edge_index(e.src, e.dst).is_some());
    if !same_shape {
        return Err(Error::Contract(format!(
            "graph does not have the shape of {topology}"
        )));
    }

    let mut out = graph.clone();
    for e in out.edges.iter_mut() {
        e.weight = INITIAL_WEIGHT;
    }
    let mut saturate = |a: NodeId, b: NodeId| -> Result<()> { out.set_weight(a, b, 1.0) };
    match *topology {
        Topology::Chain { n } => {
            for i in 2..=n {
                saturate(NodeId(i - 1), NodeId(i))?;
            }
        }
        Topology::Star { n } => {
            for leaf in 2..=n {
                saturate(NodeId(1), NodeId(leaf))?;
            }
        }
        Topology::Bridged { n, l, h } => {
            for side in [ChainSide::A, ChainSide::B] {
                let node = |i| bridged_node(n, side, i);
                let bridge = if side == ChainSide::A { l } else { h };
                for i in 2..=n {
                    saturate(node(i - 1), node(i))?;
                }
                for i in 3..=bridge {
                    saturate(node(i), node(i - 1))?;
                }
            }
            let (vl, uh) = (
                bridged_node(n, ChainSide::A, l),
                bridged_node(n, ChainSide::B, h),
            );
            saturate(vl, uh)?;
            saturate(uh, vl)?;
        }
    }
    Ok(out)
}
