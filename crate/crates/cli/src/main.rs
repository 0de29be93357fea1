use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use trustnet::analytic::{
    chain_metrics, crossover_metrics, star_metrics, stratification_profile, AnalyticMode,
};
use trustnet::harness::{
    run_figure, run_oracle_check, ExperimentConfig, FigureId, FileConfig, HarnessError,
    OracleCheckConfig, DEFAULT_REPLICATIONS, DEFAULT_SEED,
};
use trustnet::{
    estimate_stats, set_limit_weights, train, Execution, LearningConfig, ModelConfig, Topology,
    TrustGraph,
};

#[derive(Parser)]
#[command(name = "trustnet", version, about = "Smart/normal-node diffusion with trust self-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form spread counts and abilities.
    Analytic(AnalyticArgs),
    /// Monte Carlo estimates of TTA, FTA and IFA.
    Mc(McArgs),
    /// Run the self-learning loop and report the resulting weights.
    Train(TrainArgs),
    /// Reproduce the data behind one figure as CSV panels.
    Figure(FigureArgs),
    /// Compare closed forms against the exact oracle.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Chain,
    Star,
    Bridged,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ExactSum,
    Asymptotic,
}

impl From<Mode> for AnalyticMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ExactSum => AnalyticMode::ExactSum,
            Mode::Asymptotic => AnalyticMode::Asymptotic,
        }
    }
}

/// Topology and model options shared by the single-run commands. Flags
/// override the config file.
#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    shape: Option<Shape>,
    #[arg(long)]
    n: Option<usize>,
    /// Bridge endpoint on the first chain.
    #[arg(long, default_value_t = 4)]
    l: usize,
    /// Bridge endpoint on the second chain.
    #[arg(long, default_value_t = 8)]
    h: usize,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

struct Resolved {
    file: FileConfig,
    topology: Topology,
    eta: f64,
    seed: u64,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, HarnessError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let topology = match (self.shape, self.n) {
            (Some(shape), Some(n)) => match shape {
                Shape::Chain => Topology::Chain { n },
                Shape::Star => Topology::Star { n },
                Shape::Bridged => Topology::Bridged { n, l: self.l, h: self.h },
            },
            (None, None) => file
                .topology
                .ok_or_else(|| HarnessError::Config("no topology: pass --shape and --n or a config file".into()))?,
            _ => return Err(HarnessError::Config("--shape and --n go together".into())),
        };
        topology.validate()?;
        let eta = self
            .eta
            .or(file.model.as_ref().and_then(|m| m.eta))
            .ok_or_else(|| HarnessError::Config("no eta: pass --eta or set model.eta".into()))?;
        let seed = self.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        Ok(Resolved { file, topology, eta, seed })
    }
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    common: Common,
    /// Evaluate at the limit weights instead of the initial ones.
    #[arg(long)]
    trained: bool,
    #[arg(long, value_enum, default_value = "exact-sum")]
    mode: Mode,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    replications: Option<usize>,
    /// Use the limit weight pattern.
    #[arg(long, conflicts_with = "weights")]
    limit_weights: bool,
    /// Load weights from a dump written by `train`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Include per-source estimates.
    #[arg(long)]
    per_source: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    iterations: Option<u64>,
    /// Record weights every this many iterations.
    #[arg(long)]
    trajectory_stride: Option<u64>,
    /// Directory for `weights.txt` and `trajectory.csv`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    /// fig4 ... fig9
    id: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated natural forwarding rates.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Skip the learning loop and use the limit weights.
    #[arg(long)]
    limit_weights: bool,
    #[arg(long, value_enum)]
    chain_mode: Option<Mode>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    shape: Shape,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    l: usize,
    #[arg(long, default_value_t = 8)]
    h: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    eta: Vec<f64>,
    #[arg(long, value_enum, default_value = "exact-sum")]
    mode: Mode,
    /// Monte Carlo replications per source (0 = none).
    #[arg(long, default_value_t = 0)]
    replications: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write `oracle_check.csv` here.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn print_json(value: &serde_json::Value) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Config(format!("cannot serialise output: {e}")))?;
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn analytic(args: &AnalyticArgs) -> Result<(), HarnessError> {
    let r = args.common.resolve()?;
    let mode = AnalyticMode::from(args.mode);
    match r.topology {
        Topology::Chain { n } => {
            let metrics = chain_metrics(n, r.eta, args.trained, mode)?;
            let profile = if n >= 3 { Some(stratification_profile(n, r.eta, args.trained)?) } else { None };
            print_json(&json!({ "chain": metrics, "stratification": profile }))
        }
        Topology::Star { n } => print_json(&json!({ "star": star_metrics(n, r.eta, args.trained)? })),
        Topology::Bridged { n, l, h } => {
            print_json(&json!({ "crossover": crossover_metrics(n, l, h, r.eta, args.trained)? }))
        }
    }
}

fn load_weights(path: &Path, topology: &Topology) -> Result<TrustGraph, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let graph = TrustGraph::parse_dump(&text)?;
    // rejects dumps of a different shape
    set_limit_weights(&graph, topology)?;
    Ok(graph)
}

fn mc(args: &McArgs) -> Result<(), HarnessError> {
    let r = args.common.resolve()?;
    let replications = args
        .replications
        .or(r.file.mc.as_ref().and_then(|m| m.replications))
        .unwrap_or(DEFAULT_REPLICATIONS);
    let fresh = r.topology.build()?;
    let graph = match &args.weights {
        Some(path) => load_weights(path, &r.topology)?,
        None if args.limit_weights => set_limit_weights(&fresh, &r.topology)?,
        None => fresh,
    };
    let model = ModelConfig::new(r.eta)?;
    let mut stats = estimate_stats(&graph, &model, replications, r.seed, exec(args.sequential))?;
    if !args.per_source {
        stats.true_spread.clear();
        stats.false_spread.clear();
    }
    print_json(&json!({ "topology": r.topology.to_string(), "eta": r.eta, "seed": r.seed, "stats": stats }))
}

fn train_cmd(args: &TrainArgs) -> Result<(), HarnessError> {
    let r = args.common.resolve()?;
    let mut learning = LearningConfig::default();
    if let Some(overrides) = &r.file.learning {
        overrides.apply(&mut learning);
    }
    if let Some(m) = args.iterations {
        learning.max_iterations = m;
    }
    if let Some(s) = args.trajectory_stride {
        learning.trajectory_stride = s;
    }
    let model = ModelConfig::new(r.eta)?;
    let mut graph = r.topology.build()?;
    let report = train(&mut graph, &model, &learning, r.seed)?;

    let output_dir = args.output_dir.clone().or(r.file.output_dir.clone());
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        write_file(&dir.join("weights.txt"), &graph.dump())?;
        if let Some(csv) = report.trajectory_csv() {
            write_file(&dir.join("trajectory.csv"), &csv)?;
        }
    }
    print_json(&json!({
        "topology": r.topology.to_string(),
        "eta": r.eta,
        "seed": r.seed,
        "iterations_run": report.iterations_run,
        "converged": report.converged,
        "final_weights": report.final_weights,
    }))
}

fn figure(args: &FigureArgs) -> Result<(), HarnessError> {
    let id: FigureId = args.id.parse()?;
    let mut cfg = ExperimentConfig::new(id);
    if let Some(path) = &args.config {
        cfg.apply(&FileConfig::load(path)?)?;
    }
    if let Some(eta) = &args.eta {
        cfg.eta_grid = eta.clone();
    }
    if let Some(sizes) = &args.sizes {
        cfg.size_grid = sizes.clone();
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(m) = args.iterations {
        cfg.learning.max_iterations = m;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(mode) = args.chain_mode {
        cfg.chain_mode = mode.into();
    }
    cfg.limit_weights |= args.limit_weights;
    if args.sequential {
        cfg.exec = Execution::Sequential;
    }
    for path in run_figure(&cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn oracle_check(args: &OracleArgs) -> Result<(), HarnessError> {
    let topologies = args
        .sizes
        .iter()
        .map(|&n| match args.shape {
            Shape::Chain => Topology::Chain { n },
            Shape::Star => Topology::Star { n },
            Shape::Bridged => Topology::Bridged { n, l: args.l, h: args.h },
        })
        .collect::<Vec<_>>();
    for t in &topologies {
        t.validate()?;
    }
    let mut cfg = OracleCheckConfig::new(topologies, args.eta.clone());
    cfg.mode = args.mode.into();
    cfg.replications = args.replications;
    cfg.seed = args.seed;
    let report = run_oracle_check(&cfg)?;
    if let Some(dir) = &args.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_file(&dir.join("oracle_check.csv"), &report.to_csv())?;
    }
    let exempt = report.rows.iter().filter(|r| r.exempt).map(|r| r.abs_gap).fold(0.0, f64::max);
    println!(
        "{} comparisons, max gap {:.3e}, largest exempt (large-N) gap {:.3e}",
        report.rows.len(),
        report.max_gap(),
        exempt
    );
    let violations: Vec<_> = report.violations().collect();
    for v in &violations {
        println!("VIOLATION {} eta={} {} {}: analytic {} oracle {}", v.topology, v.eta, v.regime, v.quantity, v.analytic, v.oracle);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Acceptance(format!("{} exactness violations", violations.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analytic(a) => analytic(a),
        Command::Mc(a) => mc(a),
        Command::Train(a) => train_cmd(a),
        Command::Figure(a) => figure(a),
        Command::OracleCheck(a) => oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
