use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analytic::AnalyticMode;
use crate::cascade::MessageKind;
use crate::exec::Execution;
use crate::graph::Topology;
use crate::learning::LearningConfig;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPLICATIONS: usize = 10_000;
pub const DEFAULT_ETA_GRID: [f64; 4] = [0.3, 0.5, 0.7, 0.9];

pub const CHAIN_TRAINING: u64 = 4_000_000;
pub const STAR_TRAINING: u64 = 2_000;
pub const BRIDGED_TRAINING: u64 = 8_000_000;

/// Which quantity a figure plots and on which topology family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    ChainIfa,
    StarIfa,
    ChainStratification(MessageKind),
    BridgedStratification(MessageKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl FigureId {
    pub const ALL: [FigureId; 6] =
        [FigureId::Fig4, FigureId::Fig5, FigureId::Fig6, FigureId::Fig7, FigureId::Fig8, FigureId::Fig9];

    pub fn number(self) -> u64 {
        match self {
            FigureId::Fig4 => 4,
            FigureId::Fig5 => 5,
            FigureId::Fig6 => 6,
            FigureId::Fig7 => 7,
            FigureId::Fig8 => 8,
            FigureId::Fig9 => 9,
        }
    }

    pub fn family(self) -> Family {
        match self {
            FigureId::Fig4 => Family::ChainIfa,
            FigureId::Fig5 => Family::StarIfa,
            FigureId::Fig6 => Family::ChainStratification(MessageKind::True),
            FigureId::Fig7 => Family::ChainStratification(MessageKind::False),
            FigureId::Fig8 => Family::BridgedStratification(MessageKind::True),
            FigureId::Fig9 => Family::BridgedStratification(MessageKind::False),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fig{}", self.number())
    }
}

impl FromStr for FigureId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let digits = lower.strip_prefix("fig").unwrap_or(&lower);
        FigureId::ALL
            .into_iter()
            .find(|f| digits == f.number().to_string())
            .ok_or_else(|| HarnessError::Config(format!("unknown figure `{s}`; expected fig4 to fig9")))
    }
}

/// Everything one figure run needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub figure: FigureId,
    pub eta_grid: Vec<f64>,
    /// Chain or star sizes. Stratification figures take exactly one.
    pub size_grid: Vec<usize>,
    /// Bridge endpoints `(l, h)` for the bridged figures.
    pub bridge: (usize, usize),
    pub replications: usize,
    pub learning: LearningConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Use the limit weight pattern instead of running the learning loop.
    pub limit_weights: bool,
    pub chain_mode: AnalyticMode,
    pub exec: Execution,
}

impl ExperimentConfig {
    pub fn new(figure: FigureId) -> Self {
        let (size_grid, iterations) = match figure.family() {
            Family::ChainIfa => ((2..=10).collect(), CHAIN_TRAINING),
            Family::StarIfa => ((1..=10).map(|k| 10 * k).collect(), STAR_TRAINING),
            Family::ChainStratification(_) => (vec![10], CHAIN_TRAINING),
            Family::BridgedStratification(_) => (vec![10], BRIDGED_TRAINING),
        };
        ExperimentConfig {
            figure,
            eta_grid: DEFAULT_ETA_GRID.to_vec(),
            size_grid,
            bridge: (4, 8),
            replications: DEFAULT_REPLICATIONS,
            learning: LearningConfig::with_iterations(iterations),
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("results"),
            limit_weights: false,
            chain_mode: AnalyticMode::ExactSum,
            exec: Execution::Parallel,
        }
    }

    /// Applies the settings present in a config file.
    pub fn apply(&mut self, file: &FileConfig) -> Result<(), HarnessError> {
        if let Some(seed) = file.seed {
            self.seed = seed;
        }
        if let Some(dir) = &file.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(topology) = file.topology {
            self.apply_topology(topology)?;
        }
        if let Some(model) = &file.model {
            if let Some(eta) = model.eta {
                self.eta_grid = vec![eta];
            }
            if let Some(grid) = &model.eta_grid {
                self.eta_grid = grid.clone();
            }
        }
        if let Some(r) = file.mc.as_ref().and_then(|mc| mc.replications) {
            self.replications = r;
        }
        if let Some(learning) = &file.learning {
            learning.apply(&mut self.learning);
        }
        if let Some(fig) = &file.figure {
            if let Some(sizes) = &fig.size_grid {
                self.size_grid = sizes.clone();
            }
            if let Some(flag) = fig.limit_weights {
                self.limit_weights = flag;
            }
            if let Some(mode) = fig.chain_mode {
                self.chain_mode = mode;
            }
            if let Some(exec) = fig.exec {
                self.exec = exec;
            }
        }
        Ok(())
    }

    fn apply_topology(&mut self, topology: Topology) -> Result<(), HarnessError> {
        let matches = matches!(
            (self.figure.family(), topology),
            (Family::ChainIfa | Family::ChainStratification(_), Topology::Chain { .. })
                | (Family::StarIfa, Topology::Star { .. })
                | (Family::BridgedStratification(_), Topology::Bridged { .. })
        );
        if !matches {
            return Err(HarnessError::Config(format!("{} cannot be drawn on {topology}", self.figure)));
        }
        self.size_grid = vec![topology.component_size()];
        if let Topology::Bridged { l, h, .. } = topology {
            self.bridge = (l, h);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.eta_grid.is_empty() || self.size_grid.is_empty() {
            return bad("eta and size grids must be non-empty".into());
        }
        if let Some(eta) = self.eta_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return bad(format!("eta {eta} outside [0, 1]"));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        self.learning.validate()?;
        let min_size = match self.figure.family() {
            Family::ChainIfa | Family::StarIfa => 2,
            Family::ChainStratification(_) | Family::BridgedStratification(_) => {
                if self.size_grid.len() != 1 {
                    return bad(format!("{} takes exactly one chain length", self.figure));
                }
                3
            }
        };
        if let Some(n) = self.size_grid.iter().find(|&&n| n < min_size) {
            return bad(format!("{} needs sizes of at least {min_size}, got {n}", self.figure));
        }
        if let Family::BridgedStratification(_) = self.figure.family() {
            self.topologies()[0].validate()?;
        }
        Ok(())
    }

    /// The topology drawn at each entry of the size grid.
    pub fn topologies(&self) -> Vec<Topology> {
        let (l, h) = self.bridge;
        self.size_grid
            .iter()
            .map(|&n| match self.figure.family() {
                Family::ChainIfa | Family::ChainStratification(_) => Topology::Chain { n },
                Family::StarIfa => Topology::Star { n },
                Family::BridgedStratification(_) => Topology::Bridged { n, l, h },
            })
            .collect()
    }
}

/// Config file layout (TOML). Every key is optional.
///
/// ```toml
/// seed = 7
/// output_dir = "out"
///
/// [topology]
/// shape = "bridged"
/// n = 10
/// l = 4
/// h = 8
///
/// [model]
/// eta = 0.5
///
/// [mc]
/// replications = 10000
///
/// [learning]
/// delta = 0.001
/// max_iterations = 8000000
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub topology: Option<Topology>,
    pub model: Option<ModelSection>,
    pub mc: Option<McSection>,
    pub learning: Option<LearningOverrides>,
    pub figure: Option<FigureSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eta: Option<f64>,
    pub eta_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSection {
    pub size_grid: Option<Vec<usize>>,
    pub limit_weights: Option<bool>,
    pub chain_mode: Option<AnalyticMode>,
    pub exec: Option<Execution>,
}

/// Learning keys given in a file; absent ones keep the caller's defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningOverrides {
    pub delta: Option<f64>,
    pub floor: Option<f64>,
    pub max_iterations: Option<u64>,
    pub stability_eps: Option<f64>,
    pub stability_window: Option<usize>,
    pub check_every: Option<u64>,
    pub trajectory_stride: Option<u64>,
}

impl LearningOverrides {
    pub fn apply(&self, cfg: &mut LearningConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(delta, floor, max_iterations, stability_eps, stability_window, check_every, trajectory_stride);
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
