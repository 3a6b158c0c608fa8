//! Markov-structure verification.
//!
//! For a Gaussian vector, the pairwise independence graph is the nonzero
//! pattern of the precision matrix. A distribution is faithful to that graph
//! when conditional independence given `S` holds exactly when `S` separates
//! the pair. Precisions with a positive diagonal and nonpositive
//! off-diagonal (MTP₂) are always faithful, which is what the checks here
//! exercise on models built over metric graphs.
//!
//! Floating point needs a declared zero: a precision entry counts as zero
//! when `|Q_ij| <= zero_tol * max |Q|`; a partial correlation counts as zero
//! when its magnitude is at most `zero_tol`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{generate_graph, is_admissible, refine, separates, GraphFamily, MetricGraph, PointSet, RefinedGraph};
use crate::linalg::{
    conditional_gaussian, invert_spd, partial_correlation_raw, sample_gaussian, sorted_unique, LabeledMatrix,
    MatrixKind,
};
use crate::metrics::{distance_matrix, Metric};
use crate::models::{exp_covariance, wm_alpha1_precision, ExpKernelParams, WmParams};
use crate::report::{CheckReport, Violation};

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
/// Largest node count for which faithfulness is checked over all subsets.
pub const EXHAUSTIVE_NODE_LIMIT: usize = 14;
/// Max-norm agreement required between full and reduced kriging.
pub const REDUCTION_TOL: f64 = 1e-10;

fn expect_kind(m: &LabeledMatrix, kind: MatrixKind) -> Result<()> {
    if m.kind() == kind {
        Ok(())
    } else {
        Err(Error::BadParams(format!(
            "expected a {} matrix, got {}",
            kind.as_str(),
            m.kind().as_str()
        )))
    }
}

fn expect_labels(m: &LabeledMatrix, refined: &RefinedGraph) -> Result<()> {
    if m.labels() == refined.nodes() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(
            "matrix labels differ from the refined graph's nodes".into(),
        ))
    }
}

fn expect_admissible(refined: &RefinedGraph) -> Result<()> {
    let report = is_admissible(refined);
    if report.pass {
        Ok(())
    } else {
        Err(Error::NotAdmissible(format!(
            "{} multiple-edge or loop violation(s)",
            report.violations.len()
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mtp2Report {
    pub pass: bool,
    pub positive_off_diagonal: Vec<(usize, usize, f64)>,
    pub nonpositive_diagonal: Vec<(usize, f64)>,
    pub zero_tol: f64,
}

impl Mtp2Report {
    pub fn to_report(&self) -> CheckReport {
        let mut r = CheckReport::new("mtp2").with_tolerance("zero_tol", self.zero_tol);
        for &(i, value) in &self.nonpositive_diagonal {
            r.push(Violation::NonPositiveDiagonal { i, value });
        }
        for &(i, j, value) in &self.positive_off_diagonal {
            r.push(Violation::PositiveOffDiagonal { i, j, value });
        }
        r.finish()
    }
}

/// Gaussian MTP₂: positive diagonal and off-diagonal entries at most
/// `zero_tol * max |Q|`.
pub fn check_mtp2(q: &LabeledMatrix, zero_tol: f64) -> Mtp2Report {
    let n = q.dim();
    let cut = zero_tol * q.max_abs();
    let mut positive_off_diagonal = Vec::new();
    let mut nonpositive_diagonal = Vec::new();
    for i in 0..n {
        if !(q.get(i, i) > 0.0) {
            nonpositive_diagonal.push((i, q.get(i, i)));
        }
        for j in i + 1..n {
            if q.get(i, j) > cut {
                positive_off_diagonal.push((i, j, q.get(i, j)));
            }
        }
    }
    Mtp2Report {
        pass: positive_off_diagonal.is_empty() && nonpositive_diagonal.is_empty(),
        positive_off_diagonal,
        nonpositive_diagonal,
        zero_tol,
    }
}

/// Nonzero pattern of a precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceGraph {
    pub nodes: PointSet,
    pub adjacency: Vec<Vec<bool>>,
    /// Absolute cut applied to `|Q_ij|`.
    pub threshold: f64,
}

impl IndependenceGraph {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.adjacency.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[i][j])
            .collect()
    }

    pub fn to_report(&self) -> CheckReport {
        CheckReport::new("independence_graph")
            .with_param("nodes", json!(self.nodes.labels()))
            .with_param("edges", json!(self.edges()))
            .with_tolerance("threshold", self.threshold)
            .finish()
    }
}

pub fn independence_graph(q: &LabeledMatrix, zero_tol: f64) -> IndependenceGraph {
    let n = q.dim();
    let threshold = zero_tol * q.max_abs();
    let adjacency = (0..n)
        .map(|i| (0..n).map(|j| i != j && q.get(i, j).abs() > threshold).collect())
        .collect();
    IndependenceGraph {
        nodes: q.labels().clone(),
        adjacency,
        threshold,
    }
}

/// The independence graph of `sigma⁻¹` must equal the refined graph.
pub fn markov_consistency(sigma: &LabeledMatrix, refined: &RefinedGraph, zero_tol: f64) -> Result<CheckReport> {
    expect_kind(sigma, MatrixKind::Covariance)?;
    expect_labels(sigma, refined)?;
    expect_admissible(refined)?;
    let q = invert_spd(sigma)?;
    let ig = independence_graph(&q, zero_tol);
    let want = refined.adjacency_matrix();
    let n = q.dim();
    let mut report = CheckReport::new("markov_consistency")
        .with_param("nodes", n)
        .with_tolerance("zero_tol", zero_tol);
    for i in 0..n {
        for j in i + 1..n {
            match (want[i][j], ig.adjacency[i][j]) {
                (true, false) => report.push(Violation::MissingEdge { i, j }),
                (false, true) => report.push(Violation::ExtraEdge { i, j, value: q.get(i, j) }),
                _ => {}
            }
        }
    }
    Ok(report.finish())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub i: usize,
    pub j: usize,
    pub subset: Vec<usize>,
    pub partial_correlation: f64,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaithfulnessReport {
    pub pass: bool,
    pub tested: usize,
    pub exhaustive: bool,
    pub zero_tol: f64,
    /// In (pair, subset) generation order, independent of scheduling.
    pub counterexamples: Vec<Counterexample>,
}

impl FaithfulnessReport {
    pub fn to_report(&self) -> CheckReport {
        let mut r = CheckReport::new("faithfulness")
            .with_param("tested", self.tested)
            .with_param("exhaustive", self.exhaustive)
            .with_tolerance("zero_tol", self.zero_tol);
        for c in &self.counterexamples {
            r.push(Violation::Faithfulness {
                i: c.i,
                j: c.j,
                subset: c.subset.clone(),
                partial_correlation: c.partial_correlation,
                separated: c.separated,
            });
        }
        r.finish()
    }
}

/// For every pair of nodes and every conditioning subset of the others
/// (sampled when there are more than [`EXHAUSTIVE_NODE_LIMIT`] nodes),
/// conditional independence must coincide with graph separation.
pub fn verify_faithfulness(
    sigma: &LabeledMatrix,
    refined: &RefinedGraph,
    zero_tol: f64,
    subset_budget: usize,
    seed: u64,
) -> Result<FaithfulnessReport> {
    expect_kind(sigma, MatrixKind::Covariance)?;
    expect_labels(sigma, refined)?;
    expect_admissible(refined)?;
    let n = sigma.dim();
    let exhaustive = n <= EXHAUSTIVE_NODE_LIMIT;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let entries = sigma.entries();

    let per_pair: Vec<Result<(usize, Vec<Counterexample>)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(pair_index, &(i, j))| {
            let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
            let subsets: Vec<Vec<usize>> = if exhaustive {
                (0u64..1 << others.len())
                    .map(|mask| {
                        others
                            .iter()
                            .enumerate()
                            .filter(|(b, _)| mask >> b & 1 == 1)
                            .map(|(_, &k)| k)
                            .collect()
                    })
                    .collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pair_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                (0..subset_budget)
                    .map(|_| others.iter().copied().filter(|_| rng.random_bool(0.5)).collect())
                    .collect()
            };
            let mut found = Vec::new();
            for subset in &subsets {
                let pc = partial_correlation_raw(entries, i, j, subset)?;
                let separated = separates(refined, subset, i, j)?;
                if (pc.abs() <= zero_tol) != separated {
                    found.push(Counterexample {
                        i,
                        j,
                        subset: subset.clone(),
                        partial_correlation: pc,
                        separated,
                    });
                }
            }
            Ok((subsets.len(), found))
        })
        .collect();

    let mut tested = 0;
    let mut counterexamples = Vec::new();
    for r in per_pair {
        let (count, found) = r?;
        tested += count;
        counterexamples.extend(found);
    }
    Ok(FaithfulnessReport {
        pass: counterexamples.is_empty(),
        tested,
        exhaustive,
        zero_tol,
        counterexamples,
    })
}

/// Covariance of the field conditioned to vanish at `conditioned`, embedded
/// at full size with exact zeros in the conditioned rows and columns.
pub fn conditional_field(sigma: &LabeledMatrix, conditioned: &[usize]) -> Result<LabeledMatrix> {
    expect_kind(sigma, MatrixKind::Covariance)?;
    let n = sigma.dim();
    let fixed = sorted_unique(conditioned, n)?;
    let free: Vec<usize> = (0..n).filter(|k| fixed.binary_search(k).is_err()).collect();
    let mut out = DMatrix::<f64>::zeros(n, n);
    if !free.is_empty() {
        let cond = conditional_gaussian(sigma, &free, &fixed, &vec![0.0; fixed.len()])?;
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                out[(i, j)] = cond.covariance.get(a, b);
            }
        }
    }
    Ok(LabeledMatrix::symmetrized(sigma.labels().clone(), out, MatrixKind::Covariance))
}

/// Build the exponential covariance over `metric` on the refined nodes and
/// test it for the Markov property. Verdicts: `markov`, `conflict` (extra
/// dependencies beyond the graph), `inconsistent` (missing edges only), or
/// `kernel_invalid` when the kernel is not positive definite there.
pub fn isotropy_markov_conflict(
    graph: &MetricGraph,
    metric: Metric,
    params: &ExpKernelParams,
    points: &PointSet,
    zero_tol: f64,
) -> Result<CheckReport> {
    let refined = refine(graph, points)?;
    expect_admissible(&refined)?;
    let nodes = refined.nodes().clone();
    let d = distance_matrix(graph, &nodes, metric)?;
    let tag = |r: CheckReport| {
        r.with_param("metric", metric.as_str())
            .with_param("kappa", params.kappa())
            .with_param("sigma", params.sigma())
    };
    let sigma = match exp_covariance(&d, params) {
        Ok(s) => s,
        Err(e @ Error::NotPositiveDefinite { .. }) => {
            let mut r = tag(CheckReport::new("isotropy_markov_conflict"));
            r.push(Violation::KernelInvalid { message: e.to_string() });
            r.verdict = Some("kernel_invalid".into());
            return Ok(r.finish());
        }
        Err(e) => return Err(e),
    };
    let mut report = markov_consistency(&sigma, &refined, zero_tol)?;
    report.check = "isotropy_markov_conflict".into();
    let extra = report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::ExtraEdge { .. }));
    report.verdict = Some(
        if extra {
            "conflict"
        } else if report.pass {
            "markov"
        } else {
            "inconsistent"
        }
        .into(),
    );
    Ok(tag(report))
}

/// Closed-form entries `(q1, q2, q3, q4)` of the precision of the
/// exponential model on the two-cycle tadpole at its vertices (σ = 1).
pub fn tadpole_reference_entries(metric: Metric, kappa: f64) -> Result<[f64; 4]> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::BadParams(format!("kappa must be positive, got {kappa}")));
    }
    let e = |x: f64| (x * kappa).exp();
    Ok(match metric {
        Metric::Geodesic => {
            let den = (e(2.0) - 1.0).powi(2);
            [
                e(4.0) / den,
                -e(3.0) / den,
                e(2.0) / den,
                (2.0 * e(2.0) + e(4.0) - 1.0) / den,
            ]
        }
        Metric::Resistance => {
            let den = -3.0 * e(0.5) - 2.0 * e(1.0) + 2.0 * e(1.5) + e(2.0) + e(2.5) + 1.0;
            [
                e(1.5) * (e(0.5) + e(1.0) + 2.0) / den,
                -e(1.25) / (-4.0 * e(0.5) + 2.0 * e(1.0) + e(2.0) + 1.0),
                -e(1.0) / (2.0 * e(0.5) + 4.0 * e(1.0) + 2.0 * e(1.5) + e(2.0) - 1.0),
                (3.0 * e(0.5) + 2.0 * e(1.0) + 2.0 * e(1.5) + e(2.0) + e(2.5) - 1.0) / den,
            ]
        }
    })
}

/// Acceptance oracle: the closed-form 7×7 tadpole precision
/// `(1/σ²)·[q-pattern]`, labeled by the tadpole's vertices.
pub fn tadpole_reference_precision(metric: Metric, kappa: f64, sigma: f64) -> Result<LabeledMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::BadParams(format!("sigma must be positive, got {sigma}")));
    }
    let [q1, q2, q3, q4] = tadpole_reference_entries(metric, kappa)?;
    #[rustfmt::skip]
    let rows = [
        [q1, q2, q3, q2, 0.0, 0.0, 0.0],
        [q2, q1, q2, q3, 0.0, 0.0, 0.0],
        [q3, q2, q1, q2, 0.0, 0.0, 0.0],
        [q2, q3, q2, q4, q2, q3, q2],
        [0.0, 0.0, 0.0, q2, q1, q2, q3],
        [0.0, 0.0, 0.0, q3, q2, q1, q2],
        [0.0, 0.0, 0.0, q2, q3, q2, q1],
    ];
    let scale = 1.0 / (sigma * sigma);
    let entries = DMatrix::from_fn(7, 7, |i, j| rows[i][j] * scale);
    let labels = generate_graph(&GraphFamily::Tadpole)?.vertex_points();
    LabeledMatrix::new(labels, entries, MatrixKind::Precision)
}

/// Positions of the tadpole precision holding `q3` (within-cycle pairs at
/// distance two).
pub const TADPOLE_Q3_PAIRS: [(usize, usize); 4] = [(0, 2), (1, 3), (3, 5), (4, 6)];

/// Entrywise deviation of `m` from `reference`: relative for nonzero
/// reference entries, relative to `max |reference|` for zero ones.
pub fn relative_deviation(m: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = crate::linalg::max_abs(reference);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let r = reference[(i, j)];
        let denom = if r != 0.0 { r.abs() } else { scale };
        (m[(i, j)] - r).abs() / denom
    })
}

/// Run distance → exponential covariance → inverse on the tadpole vertices
/// and compare with the closed-form precision.
pub fn verify_tadpole(metric: Metric, kappa: f64, sigma: f64, tol: f64) -> Result<CheckReport> {
    let g = generate_graph(&GraphFamily::Tadpole)?;
    let d = distance_matrix(&g, &g.vertex_points(), metric)?;
    let cov = exp_covariance(&d, &ExpKernelParams::new(kappa, sigma)?)?;
    let q = invert_spd(&cov)?;
    let reference = tadpole_reference_precision(metric, kappa, sigma)?;
    let dev = relative_deviation(q.entries(), reference.entries());

    let mut report = CheckReport::new("verify_tadpole")
        .with_param("metric", metric.as_str())
        .with_param("kappa", kappa)
        .with_param("sigma", sigma)
        .with_tolerance("max_relative_deviation", tol);
    let mut worst = 0.0f64;
    let mut cross = 0.0f64;
    for i in 0..7 {
        for j in 0..7 {
            worst = worst.max(dev[(i, j)]);
            if (i < 3 && j > 3) || (i > 3 && j < 3) {
                cross = cross.max(dev[(i, j)]);
            }
            if dev[(i, j)] > tol {
                report.push(Violation::Deviation {
                    i,
                    j,
                    value: q.get(i, j),
                    reference: reference.get(i, j),
                    relative: dev[(i, j)],
                });
            }
        }
    }
    let min_q3 = TADPOLE_Q3_PAIRS
        .iter()
        .map(|&(i, j)| q.get(i, j).abs())
        .fold(f64::INFINITY, f64::min);
    report.measure("max_relative_deviation", worst);
    report.measure("cross_block_max_relative", cross);
    report.measure("min_abs_q3", min_q3);
    Ok(report.finish())
}

/// Model used to build a covariance on a refined point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Exp { metric: Metric, params: ExpKernelParams },
    /// Vertex-only model; the point set must be the graph's vertices.
    Wm1(WmParams),
}

/// Refine `graph` at `points` and build the model covariance on its nodes.
pub fn model_covariance(graph: &MetricGraph, model: &ModelSpec, points: &PointSet) -> Result<(RefinedGraph, LabeledMatrix)> {
    let refined = refine(graph, points)?;
    let sigma = match model {
        ModelSpec::Exp { metric, params } => {
            let d = distance_matrix(graph, refined.nodes(), *metric)?;
            exp_covariance(&d, params)?
        }
        ModelSpec::Wm1(params) => {
            if refined.nodes() != &graph.vertex_points() {
                return Err(Error::BadParams(
                    "the Whittle–Matérn vertex model is defined on vertices only".into(),
                ));
            }
            invert_spd(&wm_alpha1_precision(graph, params)?)?
        }
    };
    Ok((refined, sigma))
}

/// Kriging of `interior` nodes from the full model given boundary and
/// exterior data must agree with kriging from the model restricted to
/// interior ∪ boundary given boundary data only.
///
/// `data` holds values at the non-interior nodes in ascending node order;
/// when absent, one draw of the field seeded by `seed` is used.
pub fn subgraph_reduction_check(
    graph: &MetricGraph,
    model: &ModelSpec,
    points: &PointSet,
    interior: &[usize],
    boundary: &[usize],
    data: Option<&[f64]>,
    seed: u64,
) -> Result<CheckReport> {
    let (refined, sigma) = model_covariance(graph, model, points)?;
    let n = refined.node_count();
    let interior = sorted_unique(interior, n)?;
    let boundary = sorted_unique(boundary, n)?;
    let mut report = CheckReport::new("subgraph_reduction")
        .with_param("interior", json!(interior))
        .with_param("boundary", json!(boundary))
        .with_param("seed", seed)
        .with_param("data", if data.is_some() { "given" } else { "sampled" })
        .with_tolerance("max_norm", REDUCTION_TOL);
    if interior.is_empty() {
        report.push(Violation::Precondition { message: "interior node set is empty".into() });
        return Ok(report.finish());
    }
    if let Some(k) = interior.iter().find(|k| boundary.binary_search(k).is_ok()) {
        report.push(Violation::Precondition {
            message: format!("node {k} is both interior and boundary"),
        });
        return Ok(report.finish());
    }
    let exterior: Vec<usize> = (0..n)
        .filter(|k| interior.binary_search(k).is_err() && boundary.binary_search(k).is_err())
        .collect();
    for &i in &interior {
        for &x in &exterior {
            if !separates(&refined, &boundary, i, x)? {
                report.push(Violation::Precondition {
                    message: format!("boundary does not separate interior node {i} from exterior node {x}"),
                });
                return Ok(report.finish());
            }
        }
    }

    let observed: Vec<usize> = (0..n).filter(|k| interior.binary_search(k).is_err()).collect();
    let values: Vec<f64> = match data {
        Some(v) if v.len() != observed.len() => {
            return Err(Error::DimensionMismatch(format!(
                "{} data values for {} boundary and exterior nodes",
                v.len(),
                observed.len()
            )))
        }
        Some(v) => v.to_vec(),
        None => {
            let draw = sample_gaussian(&sigma, seed, 1)?.remove(0);
            observed.iter().map(|&k| draw[k]).collect()
        }
    };
    let value_at = |k: usize| values[observed.binary_search(&k).unwrap()];
    let full = conditional_gaussian(&sigma, &interior, &observed, &values)?;

    let kept: Vec<usize> = {
        let mut v: Vec<usize> = interior.iter().chain(&boundary).copied().collect();
        v.sort_unstable();
        v
    };
    let local = |k: usize| kept.binary_search(&k).unwrap();
    let sub = sigma.submatrix(&kept)?;
    let sub_interior: Vec<usize> = interior.iter().map(|&k| local(k)).collect();
    let sub_boundary: Vec<usize> = boundary.iter().map(|&k| local(k)).collect();
    let boundary_values: Vec<f64> = boundary.iter().map(|&k| value_at(k)).collect();
    let reduced = conditional_gaussian(&sub, &sub_interior, &sub_boundary, &boundary_values)?;

    let mean_gap = max_abs_vec(&(&full.mean - &reduced.mean));
    let cov_gap = crate::linalg::max_abs(&(full.covariance.entries() - reduced.covariance.entries()));
    report.measure("mean_max_abs_difference", mean_gap);
    report.measure("covariance_max_abs_difference", cov_gap);
    for (quantity, value) in [("kriging_mean", mean_gap), ("conditional_covariance", cov_gap)] {
        if !(value <= REDUCTION_TOL) {
            report.push(Violation::Tolerance {
                quantity: quantity.into(),
                value,
                limit: REDUCTION_TOL,
            });
        }
    }
    Ok(report.finish())
}

fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
