//! Trust self-learning: reward links that deliver true messages, punish
//! links that deliver false ones.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{check_source, Cascader, MessageKind, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeKind, TrustGraph};
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Reward/punishment step.
    pub delta: f64,
    /// Minimum weight.
    pub floor: f64,
    pub max_iterations: u64,
    /// Largest per-weight movement across the window that still counts as
    /// stable.
    pub stability_eps: f64,
    /// Number of snapshots the stability check looks at.
    pub stability_window: usize,
    /// Iterations between snapshots.
    pub check_every: u64,
    /// Record a weight snapshot every this many iterations (0 = off).
    pub trajectory_stride: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            delta: 0.001,
            floor: 0.001,
            max_iterations: 4_000_000,
            stability_eps: 1e-6,
            stability_window: 5,
            check_every: 1000,
            trajectory_stride: 0,
        }
    }
}

impl LearningConfig {
    pub fn with_iterations(max_iterations: u64) -> Self {
        LearningConfig { max_iterations, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.delta > 0.0 && self.floor > 0.0) {
            return bad(format!(
                "delta and floor must be positive, got delta={} floor={}",
                self.delta, self.floor
            ));
        }
        if self.floor + self.delta > 1.0 {
            return bad(format!("floor + delta must not exceed 1, got {}", self.floor + self.delta));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if self.stability_window == 0 || self.check_every == 0 {
            return bad("stability_window and check_every must be at least 1".into());
        }
        if self.stability_eps.is_nan() || self.stability_eps < 0.0 {
            return bad(format!("stability_eps must be non-negative, got {}", self.stability_eps));
        }
        Ok(())
    }
}

/// One reward (true) or punishment (false) step, clamped to `[floor, 1]`.
pub fn reweight_on_receipt(weight: f64, kind: MessageKind, cfg: &LearningConfig) -> f64 {
    match kind {
        MessageKind::True if weight <= 1.0 - cfg.delta => weight + cfg.delta,
        MessageKind::True => 1.0,
        MessageKind::False if weight >= cfg.delta + cfg.floor => weight - cfg.delta,
        MessageKind::False => cfg.floor,
    }
}

/// True iff, over the last `stability_window` snapshots, no weight moved by
/// `stability_eps` or more. Fewer snapshots than the window is never stable.
pub fn has_converged(snapshots: &[Vec<f64>], cfg: &LearningConfig) -> bool {
    let window = cfg.stability_window;
    if window == 0 || snapshots.len() < window {
        return false;
    }
    let recent = &snapshots[snapshots.len() - window..];
    (0..recent[0].len()).all(|w| {
        let (lo, hi) = recent.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s[w]), hi.max(s[w]))
        });
        hi - lo < cfg.stability_eps
    })
}

/// How each training iteration picks its message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerPolicy {
    /// Uniform source; smart sources send true messages, normal sources send
    /// true or false with equal probability.
    Uniform,
    /// Always the same source and kind.
    Fixed { source: NodeId, kind: MessageKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: u64,
    /// Weights in edge order.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub iterations_run: u64,
    pub converged: bool,
    pub final_weights: Vec<WeightRecord>,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl TrainingReport {
    /// `iteration,src,dst,weight`, one row per edge per sampled iteration.
    pub fn trajectory_csv(&self) -> Option<String> {
        let points = self.trajectory.as_ref()?;
        let mut out = String::from("iteration,src,dst,weight\n");
        for p in points {
            for (rec, w) in self.final_weights.iter().zip(&p.weights) {
                let _ = writeln!(out, "{},{},{},{}", p.iteration, rec.src, rec.dst, w);
            }
        }
        Some(out)
    }
}

/// Runs the self-learning loop on `graph` in place with uniformly triggered
/// messages.
pub fn train(
    graph: &mut TrustGraph,
    model: &ModelConfig,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<TrainingReport> {
    train_with_policy(graph, model, cfg, TriggerPolicy::Uniform, seed)
}

pub fn train_with_policy(
    graph: &mut TrustGraph,
    model: &ModelConfig,
    cfg: &LearningConfig,
    policy: TriggerPolicy,
    seed: u64,
) -> Result<TrainingReport> {
    model.validate()?;
    cfg.validate()?;
    if let TriggerPolicy::Fixed { source, kind } = policy {
        check_source(graph, source, kind)?;
    }
    if let Some(e) = graph.edges().iter().find(|e| !(cfg.floor..=1.0).contains(&e.weight)) {
        return Err(Error::Contract(format!(
            "weight {} on ({},{}) is outside [{}, 1]",
            e.weight, e.src, e.dst, cfg.floor
        )));
    }

    let nodes = graph.node_count();
    let mut rng = seed::stream(seed, &[tag::TRAIN]);
    let mut cascader = Cascader::new(nodes);
    let mut deliveries: Vec<(usize, bool)> = Vec::new();
    let mut snapshots: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.stability_window + 1);
    let mut trajectory = (cfg.trajectory_stride > 0).then(Vec::new);
    let mut converged = false;
    let mut iterations_run = 0;

    for iteration in 1..=cfg.max_iterations {
        let (source, kind) = match policy {
            TriggerPolicy::Fixed { source, kind } => (source.slot(), kind),
            TriggerPolicy::Uniform => {
                let source = rng.random_range(0..nodes);
                let kind = match graph.kind_at(source) {
                    NodeKind::Smart => MessageKind::True,
                    NodeKind::Normal if rng.random_bool(0.5) => MessageKind::True,
                    NodeKind::Normal => MessageKind::False,
                };
                (source, kind)
            }
        };

        cascader.run(graph, source, kind, model.eta, &mut rng, &mut deliveries);
        cascader.reset();
        // declined receipts are updated too
        for &(edge, _) in &deliveries {
            let w = reweight_on_receipt(graph.weight_at(edge), kind, cfg);
            graph.set_weight_at(edge, w);
        }
        deliveries.clear();
        iterations_run = iteration;

        if let Some(points) = trajectory.as_mut() {
            if iteration % cfg.trajectory_stride == 0 {
                points.push(TrajectoryPoint { iteration, weights: graph.weights() });
            }
        }
        if iteration % cfg.check_every == 0 {
            if snapshots.len() == cfg.stability_window {
                snapshots.pop_front();
            }
            snapshots.push_back(graph.weights());
            if has_converged(snapshots.make_contiguous(), cfg) {
                converged = true;
                break;
            }
        }
    }

    Ok(TrainingReport {
        iterations_run,
        converged,
        final_weights: graph
            .edges()
            .iter()
            .map(|e| WeightRecord { src: e.src, dst: e.dst, weight: e.weight })
            .collect(),
        trajectory,
    })
}
