//! Dense symmetric positive-definite kernel.
//!
//! Everything here is plain dense algebra on matrices of at most a few
//! hundred rows. Positive-definiteness is certified by a Cholesky
//! factorization whose pivots must exceed `1e-12` times the largest diagonal
//! entry. Sampling uses ChaCha8 seeded from a `u64`, so draws are
//! reproducible within this implementation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::PointSet;

/// Relative pivot floor for the Cholesky factorization.
pub const PIVOT_TOL: f64 = 1e-12;
/// Relative asymmetry accepted on ingestion before averaging.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Covariance,
    Precision,
    Distance,
}

impl MatrixKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatrixKind::Covariance => "covariance",
            MatrixKind::Precision => "precision",
            MatrixKind::Distance => "distance",
        }
    }
}

/// Symmetric matrix whose rows and columns are indexed by a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    labels: PointSet,
    entries: DMatrix<f64>,
    kind: MatrixKind,
}

pub type DistanceMatrix = LabeledMatrix;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

impl LabeledMatrix {
    /// Validates shape and symmetry, then replaces `entries` by the average of
    /// itself and its transpose.
    pub fn new(labels: PointSet, entries: DMatrix<f64>, kind: MatrixKind) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {}x{} matrix",
                labels.len(),
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadParams("matrix has non-finite entries".into()));
        }
        let asym = max_abs(&(&entries - entries.transpose()));
        if asym > SYMMETRY_TOL * max_abs(&entries) {
            return Err(Error::BadParams(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self::symmetrized(labels, entries, kind))
    }

    pub(crate) fn symmetrized(labels: PointSet, entries: DMatrix<f64>, kind: MatrixKind) -> Self {
        let entries = (&entries + entries.transpose()) * 0.5;
        LabeledMatrix {
            labels,
            entries,
            kind,
        }
    }

    pub fn labels(&self) -> &PointSet {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// Principal submatrix on `indices` (sorted ascending first).
    pub fn submatrix(&self, indices: &[usize]) -> Result<LabeledMatrix> {
        let idx = sorted_unique(indices, self.dim())?;
        let entries = self.entries.select_rows(&idx).select_columns(&idx);
        Ok(LabeledMatrix {
            labels: self.labels.subset(&idx),
            entries,
            kind: self.kind,
        })
    }

    fn expect_kind(&self, allowed: &[MatrixKind]) -> Result<()> {
        if allowed.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::BadParams(format!(
                "operation not defined for a {} matrix",
                self.kind.as_str()
            )))
        }
    }
}

pub(crate) fn sorted_unique(indices: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut idx = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::BadIndex(format!("index {bad} out of range (n = {n})")));
    }
    Ok(idx)
}

/// Lower-triangular Cholesky factor with pivot certification.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(m[(i, i)]));
    let floor = PIVOT_TOL * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > floor) || max_diag <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solve `L x = b` in place for lower-triangular `L`.
fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solve `Lᵀ x = b` in place for lower-triangular `L`.
fn backward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    for i in (0..b.len()).rev() {
        let mut s = b[i];
        for k in i + 1..b.len() {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Inverse of a lower-triangular matrix.
fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        forward_solve(l, &mut e);
        inv.set_column(j, &DVector::from_vec(e));
    }
    inv
}

/// Cholesky factor of a labeled SPD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    lower: DMatrix<f64>,
    labels: PointSet,
}

impl SpdFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn labels(&self) -> &PointSet {
        &self.labels
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    /// Solve `M x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.as_slice().to_vec();
        forward_solve(&self.lower, &mut x);
        backward_solve(&self.lower, &mut x);
        DVector::from_vec(x)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let w = lower_inverse(&self.lower);
        let inv = w.transpose() * w;
        (&inv + inv.transpose()) * 0.5
    }
}

pub fn factorize_spd(m: &LabeledMatrix) -> Result<SpdFactor> {
    Ok(SpdFactor {
        lower: cholesky(&m.entries)?,
        labels: m.labels.clone(),
    })
}

/// Inverse of a covariance or precision matrix; the kind is toggled.
pub fn invert_spd(m: &LabeledMatrix) -> Result<LabeledMatrix> {
    m.expect_kind(&[MatrixKind::Covariance, MatrixKind::Precision])?;
    let factor = factorize_spd(m)?;
    let kind = match m.kind {
        MatrixKind::Covariance => MatrixKind::Precision,
        _ => MatrixKind::Covariance,
    };
    Ok(LabeledMatrix {
        labels: m.labels.clone(),
        entries: factor.inverse(),
        kind,
    })
}

/// Law of the `targets` block given the `given` block equals `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    /// Target indices in ascending order; `mean` and `covariance` follow it.
    pub targets: Vec<usize>,
    pub mean: DVector<f64>,
    pub covariance: LabeledMatrix,
}

/// Schur-complement conditioning of a Gaussian with covariance `sigma`.
/// `values` is aligned with `given` as passed.
pub fn conditional_gaussian(
    sigma: &LabeledMatrix,
    targets: &[usize],
    given: &[usize],
    values: &[f64],
) -> Result<Conditional> {
    sigma.expect_kind(&[MatrixKind::Covariance])?;
    let n = sigma.dim();
    let a = sorted_unique(targets, n)?;
    if given.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} conditioning indices but {} values",
            given.len(),
            values.len()
        )));
    }
    let mut seen = vec![false; n];
    for &b in given {
        if b >= n {
            return Err(Error::BadIndex(format!("index {b} out of range (n = {n})")));
        }
        if seen[b] {
            return Err(Error::BadIndex(format!("index {b} conditioned twice")));
        }
        seen[b] = true;
    }
    if let Some(&both) = a.iter().find(|&&i| seen[i]) {
        return Err(Error::BadIndex(format!("index {both} is both target and given")));
    }

    let s = &sigma.entries;
    let s_aa = s.select_rows(&a).select_columns(&a);
    if given.is_empty() {
        return Ok(Conditional {
            mean: DVector::zeros(a.len()),
            covariance: LabeledMatrix::symmetrized(sigma.labels.subset(&a), s_aa, MatrixKind::Covariance),
            targets: a,
        });
    }
    let s_bb = s.select_rows(given).select_columns(given);
    let l = cholesky(&s_bb)?;
    // W = L⁻¹ Σ_BA, z = L⁻¹ values
    let mut w = s.select_rows(given).select_columns(&a);
    for mut col in w.column_iter_mut() {
        let mut v: Vec<f64> = col.iter().copied().collect();
        forward_solve(&l, &mut v);
        col.copy_from_slice(&v);
    }
    let mut z = values.to_vec();
    forward_solve(&l, &mut z);
    let mean = w.transpose() * DVector::from_vec(z);
    let cov = s_aa - w.transpose() * &w;
    Ok(Conditional {
        mean,
        covariance: LabeledMatrix::symmetrized(sigma.labels.subset(&a), cov, MatrixKind::Covariance),
        targets: a,
    })
}

/// Partial correlation of coordinates `i` and `j` given the coordinates in
/// `cond`, computed from the covariance matrix.
pub fn partial_correlation(sigma: &LabeledMatrix, i: usize, j: usize, cond: &[usize]) -> Result<f64> {
    sigma.expect_kind(&[MatrixKind::Covariance])?;
    partial_correlation_raw(&sigma.entries, i, j, cond)
}

pub(crate) fn partial_correlation_raw(s: &DMatrix<f64>, i: usize, j: usize, cond: &[usize]) -> Result<f64> {
    let n = s.nrows();
    if i >= n || j >= n || cond.iter().any(|&k| k >= n) {
        return Err(Error::BadIndex(format!("index out of range (n = {n})")));
    }
    if i == j || cond.contains(&i) || cond.contains(&j) {
        return Err(Error::BadIndex(
            "partial correlation needs distinct i, j outside the conditioning set".into(),
        ));
    }
    let (mut cii, mut cjj, mut cij) = (s[(i, i)], s[(j, j)], s[(i, j)]);
    if !cond.is_empty() {
        let l = cholesky(&s.select_rows(cond).select_columns(cond))?;
        let mut wi: Vec<f64> = cond.iter().map(|&k| s[(k, i)]).collect();
        let mut wj: Vec<f64> = cond.iter().map(|&k| s[(k, j)]).collect();
        forward_solve(&l, &mut wi);
        forward_solve(&l, &mut wj);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        cii -= dot(&wi, &wi);
        cjj -= dot(&wj, &wj);
        cij -= dot(&wi, &wj);
    }
    if !(cii > 0.0) {
        return Err(Error::NotPositiveDefinite { index: i, pivot: cii });
    }
    if !(cjj > 0.0) {
        return Err(Error::NotPositiveDefinite { index: j, pivot: cjj });
    }
    Ok((cij / (cii * cjj).sqrt()).clamp(-1.0, 1.0))
}

/// Draw `n` zero-mean Gaussian vectors whose covariance is `m` (covariance
/// kind) or `m⁻¹` (precision kind).
pub fn sample_gaussian(m: &LabeledMatrix, seed: u64, n: usize) -> Result<Vec<DVector<f64>>> {
    m.expect_kind(&[MatrixKind::Covariance, MatrixKind::Precision])?;
    let l = cholesky(&m.entries)?;
    let dim = m.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            match m.kind {
                MatrixKind::Covariance => &l * DVector::from_vec(z),
                _ => {
                    let mut x = z;
                    backward_solve(&l, &mut x);
                    DVector::from_vec(x)
                }
            }
        })
        .collect();
    Ok(draws)
}

/// Sample covariance about zero (the true mean).
pub fn sample_covariance(draws: &[DVector<f64>]) -> DMatrix<f64> {
    let dim = draws.first().map_or(0, |d| d.len());
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    for d in draws {
        acc += d * d.transpose();
    }
    acc / draws.len() as f64
}
