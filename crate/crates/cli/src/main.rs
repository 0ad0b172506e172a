//! `fdtm`: DTM fields, FDTM distances and geodesics, experiments.
//!
//! Exit codes: 0 on success, 1 when `validate` finds a failing check, 2 on
//! invalid input (bad flags, unreadable or malformed files, out-of-range
//! parameters).

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use fdtm::experiments::{ExperimentConfig, ExperimentKind};
use fdtm::io::{fmt_f64, graph_to_csv, read_cloud, read_measure, write_text};
use fdtm::measures::make_empirical;
use fdtm::validate::{self, Fault};
use fdtm::{DtmParams, GraphTopology, WeightMode, WeightedMeasure};

use config::{layered, ExperimentName, GraphKind, Point, Sizes, WeightKind};

#[derive(Debug, Parser)]
#[command(
    name = "fdtm",
    version,
    about = "Distance-to-measure and Fermat distance-to-measure on point clouds"
)]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// DTM values at query points (default: at the input points).
    Dtm(DtmCmd),
    /// FDTM between two points; prints the distance.
    Distance(DistanceCmd),
    /// FDTM geodesic between two points as CSV.
    Geodesic(GeodesicCmd),
    /// Weighted edge list of a graph over the input cloud.
    Graph(GraphCmd),
    /// Circle convergence, ring shortcut or geodesic dump study.
    Experiment(ExperimentCmd),
    /// Runs the property checks and prints a pass/fail table.
    Validate(ValidateCmd),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct InputArgs {
    /// Point cloud CSV, one point per row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// The last column of --input is the mass of each point.
    #[arg(long)]
    weighted: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct ParamArgs {
    /// Mass parameter in (0, 1] [default: 0.1]
    #[arg(long, value_parser = config::finite)]
    m: Option<f64>,
    /// DTM exponent, at least 1 [default: 2]
    #[arg(long, value_parser = config::finite)]
    p: Option<f64>,
    /// FDTM exponent, at least 1 [default: 2]
    #[arg(long, value_parser = config::finite)]
    beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct GraphArgs {
    /// Edge set [default: complete]
    #[arg(long, value_enum)]
    graph: Option<GraphKind>,
    /// Neighbours per vertex for --graph knn [default: max(6, ⌈log₂ n⌉)]
    #[arg(long)]
    k: Option<usize>,
    /// Cones per vertex for --graph yao [default: max(6, ⌈log₂ n⌉)]
    #[arg(long)]
    cones: Option<usize>,
    /// Edge weights [default: subdiv]
    #[arg(long, value_enum)]
    weights: Option<WeightKind>,
    /// Midpoints per edge for --weights subdiv [default: ⌈log₂ n⌉]
    #[arg(long)]
    subdiv: Option<usize>,
    /// Exponent of --weights fermat [default: 1.1]
    #[arg(long, value_parser = config::finite)]
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct QueryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArgs,
    /// First query point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<Point>,
    /// Second query point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<Point>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct DtmCmd {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// Query point, comma-separated; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    at: Vec<Point>,
    /// CSV of query points.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// JSON file of flag values; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct DistanceCmd {
    #[command(flatten)]
    #[serde(flatten)]
    query: QueryArgs,
    /// Also write the geodesic CSV here.
    #[arg(long)]
    geodesic: Option<PathBuf>,
    /// JSON file of flag values; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct GeodesicCmd {
    #[command(flatten)]
    #[serde(flatten)]
    query: QueryArgs,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON file of flag values; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct GraphCmd {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArgs,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON file of flag values; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct ExperimentCmd {
    /// Which study to run.
    #[arg(long, value_enum)]
    name: Option<ExperimentName>,
    /// Sample sizes: `512`, `128,256`, or `128..4096` (doubling).
    #[arg(long)]
    n: Option<Sizes>,
    /// Repetitions per sample size [default: 50]
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArgs,
    /// Output CSV; geodesic sweeps derive one file pair per setting from it.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Side of the DTM grid written with geodesics [default: 64]
    #[arg(long)]
    grid_resolution: Option<usize>,
    /// JSON file of flag values; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ValidateCmd {
    /// Seed of the random instances [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    /// Corrupt one pairwise distance before the metric checks.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

/// Message and exit code of a failed invocation.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: Option<String>,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: Some(message.into()),
        }
    }
}

impl From<fdtm::Error> for Failure {
    fn from(e: fdtm::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(msg) = f.message {
                eprintln!("fdtm: {msg}");
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Dtm(cmd) => {
            let cmd = layered(&cmd, cmd.config.as_deref())?;
            dtm_cmd(&cmd)
        }
        Command::Distance(cmd) => {
            let cmd = layered(&cmd, cmd.config.as_deref())?;
            distance_cmd(&cmd)
        }
        Command::Geodesic(cmd) => {
            let cmd = layered(&cmd, cmd.config.as_deref())?;
            geodesic_cmd(&cmd)
        }
        Command::Graph(cmd) => {
            let cmd = layered(&cmd, cmd.config.as_deref())?;
            graph_cmd(&cmd)
        }
        Command::Experiment(cmd) => {
            let cmd = layered(&cmd, cmd.config.as_deref())?;
            experiment_cmd(&cmd)
        }
        Command::Validate(cmd) => validate_cmd(&cmd),
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => Ok(write_text(path, text)?),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::usage(format!("standard output: {e}")))
        }
    }
}

impl ParamArgs {
    fn resolve(&self) -> Result<DtmParams, Failure> {
        let d = DtmParams::default();
        Ok(DtmParams::new(
            self.m.unwrap_or(d.m),
            self.p.unwrap_or(d.p),
            self.beta.unwrap_or(d.beta),
        )?)
    }

    fn any_set(&self) -> bool {
        self.m.is_some() || self.p.is_some() || self.beta.is_some()
    }
}

impl InputArgs {
    fn read(&self) -> Result<WeightedMeasure, Failure> {
        let path = self
            .input
            .as_deref()
            .ok_or_else(|| Failure::usage("--input is required"))?;
        if self.weighted {
            Ok(read_measure(path)?)
        } else {
            Ok(make_empirical(&read_cloud(path)?)?)
        }
    }
}

impl GraphArgs {
    /// Topology and weights for a cloud of `n` points in dimension `dim`.
    fn resolve(&self, n: usize, dim: usize) -> Result<(GraphTopology, WeightMode), Failure> {
        let kind = self.graph.unwrap_or(GraphKind::Complete);
        if self.k.is_some() && kind != GraphKind::Knn {
            return Err(Failure::usage("--k only applies to --graph knn"));
        }
        if self.cones.is_some() && kind != GraphKind::Yao {
            return Err(Failure::usage("--cones only applies to --graph yao"));
        }
        let size = GraphTopology::default_size(n);
        let topology = match kind {
            GraphKind::Complete => GraphTopology::Complete,
            GraphKind::Knn => GraphTopology::KNearest {
                k: self.k.unwrap_or(size),
            },
            GraphKind::Yao => GraphTopology::Yao {
                cones: self.cones.unwrap_or(size),
            },
        };
        topology.validate(dim)?;
        let kind = self.weights.unwrap_or(WeightKind::Subdiv);
        if self.subdiv.is_some() && kind != WeightKind::Subdiv {
            return Err(Failure::usage("--subdiv only applies to --weights subdiv"));
        }
        if self.alpha.is_some() && kind != WeightKind::Fermat {
            return Err(Failure::usage("--alpha only applies to --weights fermat"));
        }
        let weights = match kind {
            WeightKind::Subdiv => match self.subdiv {
                Some(subdivisions) => WeightMode::SubdividedDtm { subdivisions },
                None => WeightMode::subdivided_default(n),
            },
            WeightKind::Avg => WeightMode::EndpointAverageDtm,
            WeightKind::Fermat => WeightMode::SampleFermat {
                alpha: self.alpha.unwrap_or(1.1),
            },
        };
        weights.validate()?;
        Ok((topology, weights))
    }
}

impl QueryArgs {
    fn solve(&self) -> Result<fdtm::GeodesicResult, Failure> {
        let params = self.params.resolve()?;
        let (x, y) = match (&self.x, &self.y) {
            (Some(x), Some(y)) => (&x.0, &y.0),
            _ => return Err(Failure::usage("--x and --y are required")),
        };
        let mu = self.input.read()?;
        let (topology, weights) = self.graph.resolve(mu.len(), mu.dim())?;
        Ok(fdtm::paths::fdtm_distance_for_measure(
            &mu, &topology, &weights, &params, x, y,
        )?)
    }
}

fn dtm_cmd(cmd: &DtmCmd) -> Result<(), Failure> {
    let params = cmd.params.resolve()?;
    if !cmd.at.is_empty() && cmd.queries.is_some() {
        return Err(Failure::usage("give either --at or --queries, not both"));
    }
    let mu = cmd.input.read()?;
    let queries: Vec<Vec<f64>> = match &cmd.queries {
        Some(path) => read_cloud(path)?.to_points(),
        None if !cmd.at.is_empty() => cmd.at.iter().map(|p| p.0.clone()).collect(),
        None => mu.cloud().to_points(),
    };
    let index = fdtm::SpatialIndex::new(&mu);
    let values = fdtm::dtm_batch(&index, &queries, &params)?;
    let mut out = String::new();
    for v in values {
        out.push_str(&fmt_f64(v));
        out.push('\n');
    }
    emit(&out, None)
}

fn distance_cmd(cmd: &DistanceCmd) -> Result<(), Failure> {
    let geo = cmd.query.solve()?;
    if let Some(path) = &cmd.geodesic {
        fdtm::io::write_geodesic(path, &geo)?;
    }
    emit(&format!("{}\n", fmt_f64(geo.distance)), None)
}

fn geodesic_cmd(cmd: &GeodesicCmd) -> Result<(), Failure> {
    let geo = cmd.query.solve()?;
    emit(&fdtm::io::geodesic_to_csv(&geo), cmd.output.as_deref())
}

fn graph_cmd(cmd: &GraphCmd) -> Result<(), Failure> {
    let params = cmd.params.resolve()?;
    let mu = cmd.input.read()?;
    let (topology, weights) = cmd.graph.resolve(mu.len(), mu.dim())?;
    let graph = fdtm::build_graph_for_measure(&mu, &topology, &weights, &params)?;
    emit(&graph_to_csv(&graph), cmd.output.as_deref())
}

fn experiment_config(cmd: &ExperimentCmd) -> Result<ExperimentConfig, Failure> {
    let kind = match cmd.name {
        Some(ExperimentName::Circle) => ExperimentKind::CircleConvergence,
        Some(ExperimentName::Ring) => ExperimentKind::RingOffset,
        Some(ExperimentName::Geodesic) => ExperimentKind::GeodesicDump,
        None => return Err(Failure::usage("--name is required")),
    };
    let mut config = ExperimentConfig::new(kind);
    if let Some(n) = &cmd.n {
        config.sample_sizes = n.0.clone();
    }
    if let Some(reps) = cmd.reps {
        config.repetitions = reps;
    }
    if let Some(seed) = cmd.seed {
        config.seed = seed;
    }
    if cmd.params.any_set() {
        config.params = cmd.params.resolve()?;
        config.sweep.clear();
    }
    let g = &cmd.graph;
    if g.alpha.is_some() && g.weights.is_some() {
        return Err(Failure::usage(
            "--alpha sets the Fermat baseline of experiments; drop --weights",
        ));
    }
    if let Some(alpha) = g.alpha {
        config.fermat_alpha = alpha;
    }
    let largest = config.sample_sizes.iter().copied().max().unwrap_or(2);
    if g.k.is_some() && g.graph != Some(GraphKind::Knn) {
        return Err(Failure::usage("--k only applies to --graph knn"));
    }
    if g.cones.is_some() && g.graph != Some(GraphKind::Yao) {
        return Err(Failure::usage("--cones only applies to --graph yao"));
    }
    config.topology = g.graph.map(|kind| {
        let size = GraphTopology::default_size(largest);
        match kind {
            GraphKind::Complete => GraphTopology::Complete,
            GraphKind::Knn => GraphTopology::KNearest {
                k: g.k.unwrap_or(size),
            },
            GraphKind::Yao => GraphTopology::Yao {
                cones: g.cones.unwrap_or(size),
            },
        }
    });
    if g.subdiv.is_some() && matches!(g.weights, Some(WeightKind::Avg | WeightKind::Fermat)) {
        return Err(Failure::usage("--subdiv only applies to --weights subdiv"));
    }
    config.weights = match g.weights {
        Some(WeightKind::Fermat) => {
            return Err(Failure::usage(
                "experiments compare DTM weights against the Fermat baseline; use --alpha",
            ))
        }
        Some(WeightKind::Avg) => Some(WeightMode::EndpointAverageDtm),
        _ => g
            .subdiv
            .map(|subdivisions| WeightMode::SubdividedDtm { subdivisions }),
    };
    if let Some(path) = &cmd.output {
        config.output_path = path.clone();
    }
    if let Some(res) = cmd.grid_resolution {
        config.grid_resolution = res;
    }
    config.validate()?;
    Ok(config)
}

fn experiment_cmd(cmd: &ExperimentCmd) -> Result<(), Failure> {
    let config = experiment_config(cmd)?;
    let written = fdtm::experiments::run(&config)?;
    let mut out = String::new();
    for path in written {
        out.push_str(&format!("{}\n", path.display()));
    }
    emit(&out, None)
}

fn validate_cmd(cmd: &ValidateCmd) -> Result<(), Failure> {
    let options = validate::Options {
        seed: cmd.seed.unwrap_or(validate::Options::default().seed),
        fault: cmd.inject_fault.then_some(Fault::PerturbWeight {
            i: 0,
            j: 1,
            factor: 3.0,
        }),
    };
    let report = validate::run(&options)?;
    emit(&report.to_table(), None)?;
    if report.all_passed() {
        return Ok(());
    }
    for c in report.failures() {
        eprintln!("fdtm: check failed: {}", c.name);
    }
    Err(Failure {
        code: 1,
        message: None,
    })
}
