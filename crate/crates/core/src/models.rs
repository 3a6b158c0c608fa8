//! Model families on metric graphs: isotropic exponential covariances over a
//! chosen metric, and the Whittle–Matérn (α = 1) vertex precision with its
//! conditional-autoregressive reading.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{cholesky, DistanceMatrix, LabeledMatrix, MatrixKind};
use crate::report::{CheckReport, Violation};

/// Relative tolerance for "all edges have the same length".
pub const UNIFORM_LENGTH_TOL: f64 = 1e-12;

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::BadParams(format!("{name} must be positive and finite, got {x}")))
    }
}

/// `σ² exp(−κ h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpKernelParams {
    kappa: f64,
    sigma: f64,
}

impl ExpKernelParams {
    pub fn new(kappa: f64, sigma: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        positive("sigma", sigma)?;
        Ok(ExpKernelParams { kappa, sigma })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, h: f64) -> f64 {
        self.sigma * self.sigma * (-self.kappa * h).exp()
    }
}

/// Whittle–Matérn parameters with α fixed to 1 and a common edge length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmParams {
    kappa: f64,
    tau: f64,
    ell: f64,
}

impl WmParams {
    pub fn new(kappa: f64, tau: f64, ell: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        positive("tau", tau)?;
        positive("ell", ell)?;
        Ok(WmParams { kappa, tau, ell })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `κτ² / sinh(κℓ)`, the magnitude of every off-diagonal entry.
    fn scale(&self) -> f64 {
        self.kappa * self.tau * self.tau / (self.kappa * self.ell).sinh()
    }
}

/// Isotropic covariance `σ² exp(−κ D_ij)`, certified positive definite.
pub fn exp_covariance(d: &DistanceMatrix, params: &ExpKernelParams) -> Result<LabeledMatrix> {
    if d.kind() != MatrixKind::Distance {
        return Err(Error::BadParams("exp_covariance expects a distance matrix".into()));
    }
    let n = d.dim();
    let var = params.sigma * params.sigma;
    let entries = DMatrix::from_fn(n, n, |i, j| if i == j { var } else { params.eval(d.get(i, j)) });
    cholesky(&entries)?;
    Ok(LabeledMatrix::symmetrized(d.labels().clone(), entries, MatrixKind::Covariance))
}

/// Reject graphs whose edges do not all have length `ell`.
pub fn check_uniform_lengths(graph: &MetricGraph, ell: f64) -> Result<()> {
    for e in graph.edges() {
        if (e.length - ell).abs() > UNIFORM_LENGTH_TOL * ell {
            return Err(Error::NonUniformLengths {
                edge: e.id,
                length: e.length,
                expected: ell,
            });
        }
    }
    Ok(())
}

/// Vertex precision of the α = 1 Whittle–Matérn field on a graph with common
/// edge length ℓ:
///
/// ```text
/// Q_ii = κτ²/sinh(κℓ) · d_i cosh(κℓ)
/// Q_ij = −κτ²/sinh(κℓ)   for i ~ j
/// ```
///
/// Parallel edges each contribute, and `d_i` counts edge multiplicity.
/// Loops are rejected since their degree convention is undetermined.
pub fn wm_alpha1_precision(graph: &MetricGraph, params: &WmParams) -> Result<LabeledMatrix> {
    check_uniform_lengths(graph, params.ell)?;
    if let Some(e) = graph.edges().iter().find(|e| e.is_loop()) {
        return Err(Error::BadParams(format!(
            "edge {} is a loop; the vertex precision is defined for loop-free graphs",
            e.id
        )));
    }
    let n = graph.vertex_count();
    let c = params.scale();
    let cosh = (params.kappa * params.ell).cosh();
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (i, d) in graph.degrees().into_iter().enumerate() {
        q[(i, i)] = c * d as f64 * cosh;
    }
    for e in graph.edges() {
        q[(e.u, e.v)] -= c;
        q[(e.v, e.u)] -= c;
    }
    Ok(LabeledMatrix::symmetrized(graph.vertex_points(), q, MatrixKind::Precision))
}

/// Conditional-autoregressive form of the α = 1 vertex precision: each
/// vertex has conditional mean `Σ_j β_i x_j` over its neighbors and
/// conditional precision `κ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarParams {
    /// `β_i = 1 / (d_i cosh(κℓ))`, shared by all neighbors of vertex i.
    pub beta: Vec<f64>,
    /// `κ_i = κτ² d_i / tanh(κℓ)`.
    pub kappa: Vec<f64>,
}

pub fn car_parameters(params: &WmParams, degrees: &[usize]) -> Result<CarParams> {
    if let Some(i) = degrees.iter().position(|&d| d == 0) {
        return Err(Error::BadParams(format!("vertex {i} has degree 0")));
    }
    let x = params.kappa * params.ell;
    let beta = degrees.iter().map(|&d| 1.0 / (d as f64 * x.cosh())).collect();
    let kappa = degrees
        .iter()
        .map(|&d| params.kappa * params.tau * params.tau * d as f64 / x.tanh())
        .collect();
    Ok(CarParams { beta, kappa })
}

impl CarParams {
    /// Precision with `Q_ii = κ_i` and `Q_ij = −β_i κ_i` for every edge.
    pub fn assemble_precision(&self, graph: &MetricGraph) -> Result<LabeledMatrix> {
        let n = graph.vertex_count();
        if self.beta.len() != n || self.kappa.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "CAR parameters for {} vertices, graph has {n}",
                self.beta.len()
            )));
        }
        let mut q = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(self.kappa.clone()));
        for e in graph.edges() {
            q[(e.u, e.v)] -= self.beta[e.u] * self.kappa[e.u];
            q[(e.v, e.u)] -= self.beta[e.v] * self.kappa[e.v];
        }
        LabeledMatrix::new(graph.vertex_points(), q, MatrixKind::Precision)
    }
}

/// First-order CAR precision `τ̃² (a + d_i)` on the diagonal, `−τ̃²` per
/// edge. With `a = 0` this is the (singular) intrinsic model.
pub fn standard_car_precision(graph: &MetricGraph, a: f64, tau_tilde: f64) -> Result<LabeledMatrix> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::BadParams(format!("a must be non-negative, got {a}")));
    }
    positive("tau_tilde", tau_tilde)?;
    let n = graph.vertex_count();
    let t2 = tau_tilde * tau_tilde;
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (i, d) in graph.degrees().into_iter().enumerate() {
        q[(i, i)] = t2 * (a + d as f64);
    }
    for e in graph.edges() {
        if e.is_loop() {
            q[(e.u, e.u)] -= 2.0 * t2;
        } else {
            q[(e.u, e.v)] -= t2;
            q[(e.v, e.u)] -= t2;
        }
    }
    Ok(LabeledMatrix::symmetrized(graph.vertex_points(), q, MatrixKind::Precision))
}

/// Compare the α = 1 precision at a small κ, rescaled by `sinh(κℓ)/(κτ²)`,
/// against the intrinsic pattern (d_i on the diagonal, −1 per edge). Passes
/// when the max-norm deviation is at most `10 κℓ`.
pub fn intrinsic_car_limit_check(
    graph: &MetricGraph,
    tau: f64,
    ell: f64,
    kappa_small: f64,
) -> Result<CheckReport> {
    let params = WmParams::new(kappa_small, tau, ell)?;
    let q = wm_alpha1_precision(graph, &params)?;
    let rescale = (kappa_small * ell).sinh() / (kappa_small * tau * tau);
    let target = standard_car_precision(graph, 0.0, 1.0)?;
    let n = graph.vertex_count();
    let limit = 10.0 * kappa_small * ell;

    let mut report = CheckReport::new("intrinsic_car_limit")
        .with_param("kappa", kappa_small)
        .with_param("tau", tau)
        .with_param("ell", ell)
        .with_tolerance("max_deviation", limit);
    let mut worst = (0.0f64, 0, 0);
    for i in 0..n {
        for j in 0..n {
            let dev = (rescale * q.get(i, j) - target.get(i, j)).abs();
            if dev > worst.0 {
                worst = (dev, i, j);
            }
        }
    }
    report.measure("max_deviation", worst.0);
    if worst.0 > limit {
        let (_, i, j) = worst;
        report.push(Violation::Deviation {
            i,
            j,
            value: rescale * q.get(i, j),
            reference: target.get(i, j),
            relative: worst.0,
        });
    }
    Ok(report.finish())
}
