use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Family, FigureId};
use super::HarnessError;
use crate::analytic::{
    chain_metrics, crossover_metrics, relative_improvement, star_metrics, stratification_profile,
    AnalyticMode,
};
use crate::cascade::{estimate_stats, stratification_mc, MessageKind, ModelConfig};
use crate::error::Result;
use crate::graph::{set_limit_weights, Topology, TrustGraph};
use crate::learning::{train, LearningConfig};
use crate::seed::{self, tag};

pub const IFA_HEADER: [&str; 5] = ["N", "eta", "F_analytic", "F_mc", "F_mc_stderr"];
pub const STRATIFICATION_HEADER: [&str; 7] =
    ["i", "eta", "D_analytic", "D_mc", "D_mc_stderr", "message_kind", "regime"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfaRow {
    pub n: usize,
    pub eta: f64,
    pub f_analytic: f64,
    pub f_mc: f64,
    pub f_mc_stderr: f64,
    /// Relative improvement of the analytic IFA; difference panel only.
    pub delta_f: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratificationRow {
    pub i: usize,
    pub eta: f64,
    pub d_analytic: f64,
    pub d_mc: f64,
    pub d_mc_stderr: f64,
    pub kind: MessageKind,
    pub trained: bool,
    /// Trained minus untrained analytic difference; difference panel only.
    pub d_after_minus_before: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PanelRows {
    Ifa(Vec<IfaRow>),
    Stratification(Vec<StratificationRow>),
}

/// One CSV worth of rows. Panel `a` is before training, `b` after, `c`
/// after with the change appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub label: char,
    pub rows: PanelRows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub figure: FigureId,
    pub panels: Vec<Panel>,
}

impl FigureData {
    pub fn panel(&self, label: char) -> Option<&Panel> {
        self.panels.iter().find(|p| p.label == label)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

impl Panel {
    pub fn header(&self) -> Vec<&'static str> {
        let (mut header, extra) = match self.rows {
            PanelRows::Ifa(_) => (IFA_HEADER.to_vec(), "delta_F"),
            PanelRows::Stratification(_) => (STRATIFICATION_HEADER.to_vec(), "D_after_minus_before"),
        };
        if self.label == 'c' {
            header.push(extra);
        }
        header
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        match &self.rows {
            PanelRows::Ifa(rows) => rows
                .iter()
                .map(|r| {
                    let mut rec = vec![r.n.to_string(), num(r.eta), num(r.f_analytic), num(r.f_mc), num(r.f_mc_stderr)];
                    rec.extend(r.delta_f.map(num));
                    rec
                })
                .collect(),
            PanelRows::Stratification(rows) => rows
                .iter()
                .map(|r| {
                    let regime = if r.trained { "trained" } else { "untrained" };
                    let mut rec = vec![
                        r.i.to_string(),
                        num(r.eta),
                        num(r.d_analytic),
                        num(r.d_mc),
                        num(r.d_mc_stderr),
                        r.kind.label().to_string(),
                        regime.to_string(),
                    ];
                    rec.extend(r.d_after_minus_before.map(num));
                    rec
                })
                .collect(),
        }
    }
}

/// Weights "after training": either the learning loop or the limit pattern.
fn trained_graph(
    cfg: &ExperimentConfig,
    topology: &Topology,
    model: &ModelConfig,
    learning: &LearningConfig,
    key: &[u64],
) -> Result<TrustGraph> {
    let fresh = topology.build()?;
    if cfg.limit_weights {
        return set_limit_weights(&fresh, topology);
    }
    let mut graph = fresh;
    train(&mut graph, model, learning, seed::derive(cfg.seed, key))?;
    Ok(graph)
}

struct IfaPoint {
    before: IfaRow,
    after: IfaRow,
}

fn ifa_analytic(cfg: &ExperimentConfig, topology: &Topology, eta: f64, trained: bool) -> Result<f64> {
    match *topology {
        Topology::Chain { n } => Ok(chain_metrics(n, eta, trained, cfg.chain_mode)?.ifa),
        Topology::Star { n } => Ok(star_metrics(n, eta, trained)?.ifa),
        Topology::Bridged { .. } => unreachable!("IFA figures use chains or stars"),
    }
}

fn ifa_point(cfg: &ExperimentConfig, topology: &Topology, eta_idx: usize) -> Result<IfaPoint> {
    let eta = cfg.eta_grid[eta_idx];
    let n = topology.component_size();
    let model = ModelConfig::new(eta)?;
    let key = |stage: u64| [tag::FIGURE, cfg.figure.number(), stage, eta_idx as u64, n as u64];

    let row = |graph: &TrustGraph, trained: bool, stage: u64| -> Result<IfaRow> {
        let stats = estimate_stats(graph, &model, cfg.replications, seed::derive(cfg.seed, &key(stage)), cfg.exec)?;
        Ok(IfaRow {
            n,
            eta,
            f_analytic: ifa_analytic(cfg, topology, eta, trained)?,
            f_mc: stats.ifa,
            f_mc_stderr: stats.stderr_ifa,
            delta_f: None,
        })
    };

    let before = row(&topology.build()?, false, 0)?;
    let trained = trained_graph(cfg, topology, &model, &cfg.learning, &key(tag::TRAIN))?;
    let after = row(&trained, true, 1)?;
    Ok(IfaPoint { before, after })
}

fn ifa_figure(cfg: &ExperimentConfig) -> Result<FigureData> {
    let topologies = cfg.topologies();
    let points: Vec<(usize, usize)> = (0..cfg.eta_grid.len())
        .flat_map(|e| (0..topologies.len()).map(move |t| (e, t)))
        .collect();
    let results = cfg.exec.map(points.len(), |p| {
        let (eta_idx, topo_idx) = points[p];
        ifa_point(cfg, &topologies[topo_idx], eta_idx)
    });

    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for point in results {
        let IfaPoint { before, after } = point?;
        let delta = relative_improvement(after.f_analytic, before.f_analytic).unwrap_or(f64::NAN);
        a.push(before);
        b.push(after);
        c.push(IfaRow { delta_f: Some(delta), ..after });
    }
    Ok(FigureData {
        figure: cfg.figure,
        panels: vec![
            Panel { label: 'a', rows: PanelRows::Ifa(a) },
            Panel { label: 'b', rows: PanelRows::Ifa(b) },
            Panel { label: 'c', rows: PanelRows::Ifa(c) },
        ],
    })
}

/// Analytic `D(i)` for `i = first..n-1` along chain `v`.
fn stratification_analytic(topology: &Topology, eta: f64, kind: MessageKind, trained: bool) -> Result<Vec<f64>> {
    let (n_true, d_true, d_false) = match *topology {
        Topology::Chain { n } => {
            let p = stratification_profile(n, eta, trained)?;
            let c = chain_metrics(n, eta, trained, AnalyticMode::ExactSum)?;
            (c.n_true, p.d_true, p.d_false)
        }
        Topology::Bridged { n, l, h } => {
            let m = crossover_metrics(n, l, h, eta, trained)?;
            (m.n_true_a, m.d_true_a, m.d_false_a)
        }
        Topology::Star { .. } => unreachable!("stratification figures use chains"),
    };
    Ok(match kind {
        MessageKind::True => std::iter::once(n_true[0] - n_true[1]).chain(d_true).collect(),
        MessageKind::False => d_false,
    })
}

fn stratification_figure(cfg: &ExperimentConfig, kind: MessageKind) -> Result<FigureData> {
    let topology = cfg.topologies()[0];
    let first = match kind {
        MessageKind::True => 1,
        MessageKind::False => 2,
    };
    let results = cfg.exec.map(cfg.eta_grid.len(), |eta_idx| -> Result<_> {
        let eta = cfg.eta_grid[eta_idx];
        let model = ModelConfig::new(eta)?;
        let key = |stage: u64| [tag::FIGURE, cfg.figure.number(), stage, eta_idx as u64];
        let rows = |graph: &TrustGraph, trained: bool, stage: u64| -> Result<Vec<StratificationRow>> {
            let analytic = stratification_analytic(&topology, eta, kind, trained)?;
            let seed = seed::derive(cfg.seed, &key(stage));
            let mc = stratification_mc(graph, &topology, &model, kind, cfg.replications, seed, cfg.exec)?;
            Ok(analytic
                .iter()
                .zip(&mc.differences)
                .enumerate()
                .map(|(k, (&d, est))| StratificationRow {
                    i: first + k,
                    eta,
                    d_analytic: d,
                    d_mc: est.value,
                    d_mc_stderr: est.stderr,
                    kind,
                    trained,
                    d_after_minus_before: None,
                })
                .collect())
        };
        let before = rows(&topology.build()?, false, 0)?;
        let trained = trained_graph(cfg, &topology, &model, &cfg.learning, &key(tag::TRAIN))?;
        let after = rows(&trained, true, 1)?;
        Ok((before, after))
    });

    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for result in results {
        let (before, after) = result?;
        for (x, y) in before.iter().zip(&after) {
            c.push(StratificationRow { d_after_minus_before: Some(y.d_analytic - x.d_analytic), ..*y });
        }
        a.extend(before);
        b.extend(after);
    }
    Ok(FigureData {
        figure: cfg.figure,
        panels: vec![
            Panel { label: 'a', rows: PanelRows::Stratification(a) },
            Panel { label: 'b', rows: PanelRows::Stratification(b) },
            Panel { label: 'c', rows: PanelRows::Stratification(c) },
        ],
    })
}

/// Computes all three panels of a figure in memory.
pub fn compute_figure(cfg: &ExperimentConfig) -> Result<FigureData, HarnessError> {
    cfg.validate()?;
    let data = match cfg.figure.family() {
        Family::ChainIfa | Family::StarIfa => ifa_figure(cfg),
        Family::ChainStratification(kind) | Family::BridgedStratification(kind) => {
            stratification_figure(cfg, kind)
        }
    };
    data.map_err(|e| match e {
        e if e.is_resource() => HarnessError::Model(e),
        e => HarnessError::Config(e.to_string()),
    })
}

/// Writes `figN_a.csv`, `figN_b.csv`, `figN_c.csv` into `dir`.
pub fn write_figure(data: &FigureData, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();
    for panel in &data.panels {
        let path = dir.join(format!("{}_{}.csv", data.figure, panel.label));
        let mut out = csv::Writer::from_path(&path).map_err(|e| HarnessError::csv(&path, e))?;
        out.write_record(panel.header()).map_err(|e| HarnessError::csv(&path, e))?;
        for rec in panel.records() {
            out.write_record(&rec).map_err(|e| HarnessError::csv(&path, e))?;
        }
        out.flush().map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn run_figure(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let data = compute_figure(cfg)?;
    write_figure(&data, &cfg.output_dir)
}
