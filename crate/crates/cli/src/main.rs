//! `mgrf`: command-line front end for metric-gmrf.
//!
//! Exit codes: 0 success or check passed, 1 a check ran and failed,
//! 2 input or usage error, 3 numerical error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use metric_gmrf::csvio::{read_matrix, read_vectors, write_matrix, write_vectors};
use metric_gmrf::graph::{generate_graph, is_admissible, refine, GraphFamily, MetricGraph, PointSet};
use metric_gmrf::linalg::{invert_spd, sample_gaussian, LabeledMatrix, MatrixKind};
use metric_gmrf::markov::{
    check_mtp2, independence_graph, isotropy_markov_conflict, markov_consistency, model_covariance,
    subgraph_reduction_check, verify_faithfulness, verify_tadpole, ModelSpec, DEFAULT_ZERO_TOL,
};
use metric_gmrf::metrics::{distance_matrix, Metric};
use metric_gmrf::models::{intrinsic_car_limit_check, wm_alpha1_precision, ExpKernelParams, WmParams};
use metric_gmrf::{CheckReport, Error};

#[derive(Parser, Debug)]
#[command(name = "mgrf", version, about = "Gaussian random fields on metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load or generate graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Distance matrix between points.
    Dist {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, value_enum, default_value_t = MetricArg::Geodesic)]
        metric: MetricArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build model matrices.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Run structural checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Compare end-to-end results against closed forms.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Subgraph reduction of kriging.
    #[command(subcommand)]
    Reduce(ReduceCmd),
    /// Draw Gaussian samples from a covariance or precision matrix.
    Sample {
        #[command(flatten)]
        matrix: MatrixInput,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum GraphCmd {
    /// Parse a graph (and optionally a point set) and report admissibility.
    Validate {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a graph from a named family as JSON.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Vertex count (cycle, tree) or edge count (path).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 0.5)]
        min_length: f64,
        #[arg(long, default_value_t = 2.0)]
        max_length: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ModelCmd {
    /// Exponential-kernel covariance on the vertices and the given points.
    Cov {
        #[command(flatten)]
        input: GraphInput,
        #[command(flatten)]
        params: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Whittle–Matérn (α = 1) precision on the vertices.
    WmPrecision {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        params: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CheckCmd {
    /// Positive diagonal and nonpositive off-diagonal precision.
    Mtp2 {
        #[command(flatten)]
        matrix: MatrixInput,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nonzero pattern of the precision.
    IndependenceGraph {
        #[command(flatten)]
        matrix: MatrixInput,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independence graph of a covariance against the refined graph.
    Markov {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        covariance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional independence against graph separation.
    Faithfulness {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        covariance: PathBuf,
        /// Threshold on |partial correlation|.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Subsets per pair when the node count is too large for enumeration.
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponential kernel: conflict between isotropy and the Markov property.
    Conflict {
        #[command(flatten)]
        input: GraphInput,
        #[command(flatten)]
        params: ModelArgs,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Whittle–Matérn precision at small κ against the intrinsic CAR pattern.
    CarLimit {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        ell: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Exponential model on the two-cycle tadpole against its closed form.
    Tadpole {
        #[arg(long, value_enum, default_value_t = MetricArg::Geodesic)]
        metric: MetricArg,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ReduceCmd {
    /// Full against reduced-graph kriging of interior nodes.
    Check {
        #[command(flatten)]
        input: GraphInput,
        #[command(flatten)]
        params: ModelArgs,
        /// Node indices (comma separated) of the refined graph.
        #[arg(long, value_delimiter = ',', required = true)]
        interior: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        boundary: Vec<usize>,
        /// Vector CSV of values at every non-interior node; sampled from
        /// the model with `--seed` when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GraphInput {
    #[arg(long)]
    graph: PathBuf,
    /// Points JSON; vertices are always included.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct MatrixInput {
    #[arg(long)]
    precision: Option<PathBuf>,
    #[arg(long)]
    covariance: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum, conflicts_with = "params")]
    model: Option<ModelArg>,
    #[arg(long, value_enum, conflicts_with = "params")]
    metric: Option<MetricArg>,
    #[arg(long, conflicts_with = "params")]
    kappa: Option<f64>,
    #[arg(long, conflicts_with_all = ["params", "tau"])]
    sigma: Option<f64>,
    #[arg(long, conflicts_with = "params")]
    tau: Option<f64>,
    #[arg(long, conflicts_with = "params")]
    ell: Option<f64>,
    /// JSON block {"model": "exp"|"wm1", "kappa": .., "sigma"|"tau": ..}.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum MetricArg {
    Geodesic,
    Resistance,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Geodesic => Metric::Geodesic,
            MetricArg::Resistance => Metric::Resistance,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Exp,
    Wm1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Path,
    Cycle,
    Tree,
    Tadpole,
    Lattice,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamBlock {
    model: ModelArg,
    kappa: f64,
    sigma: Option<f64>,
    tau: Option<f64>,
    ell: Option<f64>,
    metric: Option<MetricArg>,
}

/// Failures carry the exit code they map to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CmdResult = Result<u8, Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_report(out: Option<&Path>, report: &CheckReport) -> CmdResult {
    emit(out, &format!("{}\n", report.to_json()))?;
    Ok(if report.pass { 0 } else { 1 })
}

fn load_graph(path: &Path) -> Result<MetricGraph, Failure> {
    Ok(MetricGraph::from_json(&read_text(path)?)?)
}

/// Graph plus the point set: the vertices together with any points given.
fn load_points(input: &GraphInput) -> Result<(MetricGraph, PointSet), Failure> {
    let graph = load_graph(&input.graph)?;
    let mut points = graph.vertex_points();
    if let Some(p) = &input.points {
        points = points.union(&graph.points_from_json(&read_text(p)?)?);
    }
    Ok((graph, points))
}

fn load_matrix(input: &MatrixInput) -> Result<LabeledMatrix, Failure> {
    match (&input.precision, &input.covariance) {
        (Some(p), None) => Ok(read_matrix(&read_text(p)?, MatrixKind::Precision)?),
        (None, Some(c)) => Ok(read_matrix(&read_text(c)?, MatrixKind::Covariance)?),
        _ => Err(usage("exactly one of --precision and --covariance is required")),
    }
}

fn as_precision(m: LabeledMatrix) -> Result<LabeledMatrix, Failure> {
    Ok(match m.kind() {
        MatrixKind::Precision => m,
        _ => invert_spd(&m)?,
    })
}

/// First column of a vector CSV whose labels are exactly the refined nodes
/// outside `interior`.
fn load_data(path: &Path, graph: &MetricGraph, points: &PointSet, interior: &[usize]) -> Result<Vec<f64>, Failure> {
    let (labels, columns) = read_vectors(&read_text(path)?)?;
    let nodes = refine(graph, points)?.nodes().clone();
    let expected: PointSet = (0..nodes.len())
        .filter(|k| !interior.contains(k))
        .map(|k| nodes.points()[k])
        .collect();
    if labels != expected {
        return Err(usage("data labels must be exactly the boundary and exterior nodes"));
    }
    let first = columns.first().ok_or_else(|| usage("data file has no value column"))?;
    Ok(first.iter().copied().collect())
}

/// Common edge length of the graph, used when `--ell` is not given.
fn common_length(graph: &MetricGraph) -> f64 {
    graph.edges()[0].length
}

impl ModelArgs {
    fn resolve(&self, graph: Option<&MetricGraph>, default_model: ModelArg) -> Result<ModelSpec, Failure> {
        let block = match &self.params {
            Some(p) => {
                let b: ParamBlock = serde_json::from_str(&read_text(p)?)
                    .map_err(|e| usage(format!("bad parameter block: {e}")))?;
                if b.sigma.is_some() && b.tau.is_some() {
                    return Err(usage("parameter block may give sigma or tau, not both"));
                }
                Some(b)
            }
            None => None,
        };
        let model = block.as_ref().map(|b| b.model).or(self.model).unwrap_or(default_model);
        let kappa = block
            .as_ref()
            .map(|b| b.kappa)
            .or(self.kappa)
            .ok_or_else(|| usage("--kappa is required"))?;
        let metric: Metric = block
            .as_ref()
            .and_then(|b| b.metric)
            .or(self.metric)
            .unwrap_or(MetricArg::Geodesic)
            .into();
        let sigma = block.as_ref().and_then(|b| b.sigma).or(self.sigma);
        let tau = block.as_ref().and_then(|b| b.tau).or(self.tau);
        let ell = block.as_ref().and_then(|b| b.ell).or(self.ell);
        match model {
            ModelArg::Exp => {
                if tau.is_some() || ell.is_some() {
                    return Err(usage("tau and ell apply to the wm1 model only"));
                }
                Ok(ModelSpec::Exp {
                    metric,
                    params: ExpKernelParams::new(kappa, sigma.unwrap_or(1.0))?,
                })
            }
            ModelArg::Wm1 => {
                if sigma.is_some() {
                    return Err(usage("sigma applies to the exp model only"));
                }
                let ell = match (ell, graph) {
                    (Some(l), _) => l,
                    (None, Some(g)) => common_length(g),
                    (None, None) => return Err(usage("--ell is required")),
                };
                Ok(ModelSpec::Wm1(WmParams::new(kappa, tau.unwrap_or(1.0), ell)?))
            }
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Graph(GraphCmd::Validate { input, out }) => {
            let (graph, points) = load_points(&input)?;
            let refined = refine(&graph, &points)?;
            let report = is_admissible(&refined)
                .with_param("vertices", graph.vertex_count())
                .with_param("edges", graph.edge_count())
                .with_param("total_length", graph.total_length())
                .with_param("nodes", refined.node_count())
                .with_param("tree", graph.is_tree());
            emit_report(out.as_deref(), &report)
        }
        Command::Graph(GraphCmd::Generate { family, n, rows, cols, length, min_length, max_length, seed, out }) => {
            let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| usage(format!("--{flag} is required for this family")));
            let family = match family {
                FamilyArg::Path => GraphFamily::Path { edges: need(n, "n")?, length },
                FamilyArg::Cycle => GraphFamily::Cycle { vertices: need(n, "n")?, length },
                FamilyArg::Tree => GraphFamily::Tree { vertices: need(n, "n")?, seed, min_length, max_length },
                FamilyArg::Tadpole => GraphFamily::Tadpole,
                FamilyArg::Lattice => GraphFamily::Lattice { rows: need(rows, "rows")?, cols: need(cols, "cols")?, length },
            };
            let graph = generate_graph(&family)?;
            let text = serde_json::to_string_pretty(&graph.to_spec()).map_err(|e| usage(e.to_string()))?;
            emit(out.as_deref(), &format!("{text}\n"))?;
            Ok(0)
        }
        Command::Dist { input, metric, out } => {
            let (graph, points) = load_points(&input)?;
            let d = distance_matrix(&graph, &points, metric.into())?;
            emit(out.as_deref(), &write_matrix(&d)?)?;
            Ok(0)
        }
        Command::Model(ModelCmd::Cov { input, params, out }) => {
            let (graph, points) = load_points(&input)?;
            let model = params.resolve(Some(&graph), ModelArg::Exp)?;
            let (_, sigma) = model_covariance(&graph, &model, &points)?;
            emit(out.as_deref(), &write_matrix(&sigma)?)?;
            Ok(0)
        }
        Command::Model(ModelCmd::WmPrecision { graph, params, out }) => {
            let graph = load_graph(&graph)?;
            let ModelSpec::Wm1(p) = params.resolve(Some(&graph), ModelArg::Wm1)? else {
                return Err(usage("wm-precision needs the wm1 model"));
            };
            emit(out.as_deref(), &write_matrix(&wm_alpha1_precision(&graph, &p)?)?)?;
            Ok(0)
        }
        Command::Check(CheckCmd::Mtp2 { matrix, tol, out }) => {
            let q = as_precision(load_matrix(&matrix)?)?;
            emit_report(out.as_deref(), &check_mtp2(&q, tol).to_report())
        }
        Command::Check(CheckCmd::IndependenceGraph { matrix, tol, out }) => {
            let q = as_precision(load_matrix(&matrix)?)?;
            emit_report(out.as_deref(), &independence_graph(&q, tol).to_report())
        }
        Command::Check(CheckCmd::Markov { graph, covariance, tol, out }) => {
            let graph = load_graph(&graph)?;
            let sigma = read_matrix(&read_text(&covariance)?, MatrixKind::Covariance)?;
            let refined = refine(&graph, sigma.labels())?;
            emit_report(out.as_deref(), &markov_consistency(&sigma, &refined, tol)?)
        }
        Command::Check(CheckCmd::Faithfulness { graph, covariance, tol, budget, seed, out }) => {
            let graph = load_graph(&graph)?;
            let sigma = read_matrix(&read_text(&covariance)?, MatrixKind::Covariance)?;
            let refined = refine(&graph, sigma.labels())?;
            let report = verify_faithfulness(&sigma, &refined, tol, budget, seed)?.to_report();
            emit_report(out.as_deref(), &report.with_param("seed", seed).with_param("budget", budget))
        }
        Command::Check(CheckCmd::Conflict { input, params, tol, out }) => {
            let (graph, points) = load_points(&input)?;
            let ModelSpec::Exp { metric, params } = params.resolve(Some(&graph), ModelArg::Exp)? else {
                return Err(usage("the conflict check applies to the exp model"));
            };
            emit_report(out.as_deref(), &isotropy_markov_conflict(&graph, metric, &params, &points, tol)?)
        }
        Command::Check(CheckCmd::CarLimit { graph, kappa, tau, ell, out }) => {
            let graph = load_graph(&graph)?;
            let ell = ell.unwrap_or_else(|| common_length(&graph));
            emit_report(out.as_deref(), &intrinsic_car_limit_check(&graph, tau, ell, kappa)?)
        }
        Command::Verify(VerifyCmd::Tadpole { metric, kappa, sigma, tol, out }) => {
            emit_report(out.as_deref(), &verify_tadpole(metric.into(), kappa, sigma, tol)?)
        }
        Command::Reduce(ReduceCmd::Check { input, params, interior, boundary, data, seed, out }) => {
            let (graph, points) = load_points(&input)?;
            let model = params.resolve(Some(&graph), ModelArg::Exp)?;
            let values = match data {
                Some(path) => Some(load_data(&path, &graph, &points, &interior)?),
                None => None,
            };
            let report =
                subgraph_reduction_check(&graph, &model, &points, &interior, &boundary, values.as_deref(), seed)?;
            emit_report(out.as_deref(), &report)
        }
        Command::Sample { matrix, n, seed, out } => {
            let m = load_matrix(&matrix)?;
            let draws = sample_gaussian(&m, seed, n)?;
            emit(out.as_deref(), &write_vectors(m.labels(), &draws)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("usage error");
            eprintln!("error: {}", line.trim_start_matches("error: ").trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
