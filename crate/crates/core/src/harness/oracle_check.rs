use std::fmt::Write as _;

use serde::Serialize;

use super::HarnessError;
use crate::analytic::{chain_metrics, crossover_metrics, star_metrics, AnalyticMode};
use crate::cascade::{estimate_stats, MessageKind, ModelConfig, SpreadStats};
use crate::error::Result;
use crate::exec::Execution;
use crate::graph::{bridged_node, set_limit_weights, ChainSide, NodeId, Topology, TrustGraph};
use crate::oracle::TreeOracle;
use crate::seed::{self, tag};

pub const EXACTNESS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckConfig {
    pub topologies: Vec<Topology>,
    pub eta_grid: Vec<f64>,
    pub mode: AnalyticMode,
    /// Which regimes to cover: `false` untrained, `true` limit weights.
    pub regimes: Vec<bool>,
    /// Monte Carlo replications per source; 0 skips the MC column.
    pub replications: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl OracleCheckConfig {
    pub fn new(topologies: Vec<Topology>, eta_grid: Vec<f64>) -> Self {
        OracleCheckConfig {
            topologies,
            eta_grid,
            mode: AnalyticMode::ExactSum,
            regimes: vec![false, true],
            replications: 0,
            seed: super::config::DEFAULT_SEED,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub topology: String,
    pub eta: f64,
    pub regime: &'static str,
    /// `n_T(3)`, `n_F^B(2)`, `F_T`, `F`, ...
    pub quantity: String,
    pub analytic: f64,
    pub oracle: f64,
    pub mc: Option<f64>,
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// Large-N approximations are reported but never count as violations.
    pub exempt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
}

impl OracleReport {
    pub fn violations(&self) -> impl Iterator<Item = &OracleRow> {
        self.rows.iter().filter(|r| !r.exempt && (r.abs_gap.is_nan() || r.abs_gap >= EXACTNESS_TOLERANCE))
    }

    pub fn passed(&self) -> bool {
        self.violations().next().is_none()
    }

    /// Largest gap among rows that are held to exactness.
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().filter(|r| !r.exempt).map(|r| r.abs_gap).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("topology,eta,regime,quantity,analytic,oracle,mc,abs_gap,rel_gap,exempt\n");
        for r in &self.rows {
            let mc = r.mc.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "\"{}\",{},{},{},{},{},{},{},{},{}",
                r.topology, r.eta, r.regime, r.quantity, r.analytic, r.oracle, mc, r.abs_gap, r.rel_gap, r.exempt
            );
        }
        out
    }
}

/// Expected posters per source from the tree oracle, in the order
/// true messages from every node then false messages from normal nodes,
/// which is also the order of the MC estimates.
struct SourceTable {
    label: Vec<String>,
    sources: Vec<(NodeId, MessageKind)>,
    values: Vec<f64>,
}

fn oracle_table(graph: &TrustGraph, topology: &Topology, model: &ModelConfig) -> Result<SourceTable> {
    let n = topology.component_size();
    let name = |id: NodeId, kind: MessageKind| -> String {
        let letter = if kind == MessageKind::True { 'T' } else { 'F' };
        match topology {
            Topology::Bridged { .. } if id.index() > n => format!("n_{letter}^B({})", id.index() - n),
            Topology::Bridged { .. } => format!("n_{letter}^A({})", id.index()),
            _ => format!("n_{letter}({})", id.index()),
        }
    };
    let mut sources: Vec<_> = graph.nodes().map(|(id, _)| (id, MessageKind::True)).collect();
    sources.extend(
        graph
            .nodes()
            .filter(|(_, k)| *k == crate::graph::NodeKind::Normal)
            .map(|(id, _)| (id, MessageKind::False)),
    );
    let oracle = TreeOracle::new(graph)?;
    let mut table = SourceTable { label: Vec::new(), sources: Vec::new(), values: Vec::new() };
    for (id, kind) in sources {
        table.values.push(oracle.expected_posters(id, kind, model)?);
        table.label.push(name(id, kind));
        table.sources.push((id, kind));
    }
    Ok(table)
}

/// Closed-form value of each labelled quantity.
fn analytic_values(topology: &Topology, eta: f64, trained: bool, mode: AnalyticMode, table: &SourceTable) -> Result<Vec<(String, f64, bool)>> {
    let mut out = Vec::new();
    let mut per_source = |get: &dyn Fn(NodeId, MessageKind) -> f64| {
        for (label, &(id, kind)) in table.label.iter().zip(&table.sources) {
            out.push((label.clone(), get(id, kind), false));
        }
    };
    let aggregates = match *topology {
        Topology::Chain { n } => {
            let m = chain_metrics(n, eta, trained, mode)?;
            per_source(&|id, kind| match kind {
                MessageKind::True => m.n_true_at(id.index()),
                MessageKind::False => m.n_false_at(id.index()),
            });
            Some((m.f_true, m.f_false, m.ifa, mode == AnalyticMode::Asymptotic))
        }
        Topology::Star { n } => {
            let m = star_metrics(n, eta, trained)?;
            per_source(&|id, kind| match kind {
                MessageKind::True => m.n_true[id.index() - 1],
                MessageKind::False => m.n_false[id.index() - 2],
            });
            Some((m.f_true, m.f_false, m.ifa, false))
        }
        Topology::Bridged { n, l, h } => {
            let m = crossover_metrics(n, l, h, eta, trained)?;
            per_source(&|id, kind| {
                let (side, i) = if id.index() > n { (ChainSide::B, id.index() - n) } else { (ChainSide::A, id.index()) };
                debug_assert_eq!(bridged_node(n, side, i), id);
                match (side, kind) {
                    (ChainSide::A, MessageKind::True) => m.n_true_a[i - 1],
                    (ChainSide::A, MessageKind::False) => m.n_false_a[i - 2],
                    (ChainSide::B, MessageKind::True) => m.n_true_b[i - 1],
                    (ChainSide::B, MessageKind::False) => m.n_false_b[i - 2],
                }
            });
            None
        }
    };
    if let Some((ft, ff, f, exempt)) = aggregates {
        out.push(("F_T".into(), ft, exempt));
        out.push(("F_F".into(), ff, exempt));
        out.push(("F".into(), f, exempt));
    }
    Ok(out)
}

fn oracle_aggregates(graph: &TrustGraph, table: &SourceTable) -> (f64, f64, f64) {
    let n = graph.node_count() as f64;
    let normals = graph.normal_count() as f64;
    let (mut t, mut f) = (0.0, 0.0);
    for (&(_, kind), v) in table.sources.iter().zip(&table.values) {
        match kind {
            MessageKind::True => t += v,
            MessageKind::False => f += v,
        }
    }
    let (ft, ff) = (t / (n * n), f / (n * normals));
    (ft, ff, (ft - ff) / ff)
}

fn check_point(cfg: &OracleCheckConfig, topology: &Topology, eta: f64, trained: bool, key: &[u64]) -> Result<Vec<OracleRow>> {
    let model = ModelConfig::new(eta)?;
    let fresh = topology.build()?;
    let graph = if trained { set_limit_weights(&fresh, topology)? } else { fresh };
    let table = oracle_table(&graph, topology, &model)?;
    let analytic = analytic_values(topology, eta, trained, cfg.mode, &table)?;
    let mc: Option<SpreadStats> = if cfg.replications > 0 {
        Some(estimate_stats(&graph, &model, cfg.replications, seed::derive(cfg.seed, key), cfg.exec)?)
    } else {
        None
    };
    let (ft, ff, f) = oracle_aggregates(&graph, &table);
    let regime = if trained { "trained" } else { "untrained" };
    let name = topology.to_string();

    let mut rows = Vec::new();
    for (k, (quantity, value, exempt)) in analytic.into_iter().enumerate() {
        let (oracle, mc_value) = match quantity.as_str() {
            "F_T" => (ft, mc.as_ref().map(|s| s.f_true)),
            "F_F" => (ff, mc.as_ref().map(|s| s.f_false)),
            "F" => (f, mc.as_ref().map(|s| s.ifa)),
            _ => {
                let mc_value = mc.as_ref().map(|s| {
                    let all: Vec<_> = s.true_spread.iter().chain(&s.false_spread).collect();
                    all[k].mean
                });
                (table.values[k], mc_value)
            }
        };
        let abs_gap = (value - oracle).abs();
        rows.push(OracleRow {
            topology: name.clone(),
            eta,
            regime,
            quantity,
            analytic: value,
            oracle,
            mc: mc_value,
            abs_gap,
            rel_gap: if oracle != 0.0 { abs_gap / oracle.abs() } else { abs_gap },
            exempt,
        });
    }
    Ok(rows)
}

/// Compares every closed form against the exact tree oracle, and
/// optionally against Monte Carlo.
pub fn run_oracle_check(cfg: &OracleCheckConfig) -> Result<OracleReport, HarnessError> {
    if cfg.topologies.is_empty() || cfg.eta_grid.is_empty() || cfg.regimes.is_empty() {
        return Err(HarnessError::Config("oracle check needs topologies, etas and regimes".into()));
    }
    let mut rows = Vec::new();
    for (t, topology) in cfg.topologies.iter().enumerate() {
        for (e, &eta) in cfg.eta_grid.iter().enumerate() {
            for &trained in &cfg.regimes {
                let key = [tag::FIGURE, 0, t as u64, e as u64, trained as u64];
                let point = check_point(cfg, topology, eta, trained, &key).map_err(|err| match err {
                    err if err.is_resource() => HarnessError::Model(err),
                    err => HarnessError::Config(err.to_string()),
                })?;
                rows.extend(point);
            }
        }
    }
    Ok(OracleReport { rows })
}
