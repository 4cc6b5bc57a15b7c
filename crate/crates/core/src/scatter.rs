//! Scatter-location family: measures of the form `law(A x + b)` for a fixed
//! generator with zero mean and identity covariance, SPD `A`.
//!
//! The generator is never materialized; every operation is parametric in the
//! mean vector and the covariance matrix. Optimal maps between members are
//! affine with an SPD linear part built from symmetric matrix square roots,
//! and the barycenter covariance solves a fixed-point equation driven by the
//! same square roots.
//!
//! All square roots go through symmetric eigendecomposition. Eigenvalues are
//! clamped at `1e-10 * lambda_max` so nearly singular covariances stay
//! usable, and every product chain is re-symmetrized to keep symmetry exact.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::error::FamilyError;
use crate::family::{check_step, BarycenterFamily};
use crate::population::{FiniteSupport, RngState};

/// Relative eigenvalue clamp used inside matrix square roots.
const EIGEN_CLAMP_REL: f64 = 1e-10;
/// Eigenvalues below `-NEGATIVE_EIGEN_REL * lambda_max` are treated as a
/// genuine loss of positive definiteness rather than rounding noise.
const NEGATIVE_EIGEN_REL: f64 = 1e-8;
/// Default absolute floor on the smallest eigenvalue of a covariance.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-10;
/// Relative symmetry tolerance admitted by the SPD constructor.
const SYMMETRY_REL_TOL: f64 = 1e-12;

/// A symmetric positive-definite matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness with the default
    /// eigenvalue floor.
    pub fn new(mat: DMatrix<f64>) -> Result<Self, FamilyError> {
        Self::with_floor(mat, DEFAULT_EIGEN_FLOOR)
    }

    /// Validates with a caller-chosen absolute eigenvalue floor.
    pub fn with_floor(mat: DMatrix<f64>, floor: f64) -> Result<Self, FamilyError> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(FamilyError::NotSpd(format!(
                "expected a nonempty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !mat.iter().all(|v| v.is_finite()) {
            return Err(FamilyError::NotSpd("non-finite entries".into()));
        }
        let norm = mat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let asym = (&mat - mat.transpose())
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if asym > SYMMETRY_REL_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(FamilyError::NotSpd(format!(
                "asymmetry {asym} exceeds {SYMMETRY_REL_TOL} * {norm}"
            )));
        }
        let sym = symmetrize(&mat);
        let eigen = sym.clone().symmetric_eigen();
        let min = eigen.eigenvalues.min();
        if min < floor {
            return Err(FamilyError::NotSpd(format!(
                "smallest eigenvalue {min} below floor {floor}"
            )));
        }
        Ok(Self { mat: sym })
    }

    /// Wraps a matrix already known to be symmetric positive definite.
    pub(crate) fn from_symmetric_unchecked(mat: DMatrix<f64>) -> Self {
        Self {
            mat: symmetrize(&mat),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    /// Identity matrix of the given dimension.
    pub fn identity(q: usize) -> Self {
        Self {
            mat: DMatrix::identity(q, q),
        }
    }

    /// Diagonal SPD matrix.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self, FamilyError> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }
}

fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

/// Symmetric square root with relative eigenvalue clamping.
///
/// Rejects inputs whose spectrum is genuinely negative; eigenvalues inside
/// the rounding band are clamped up to `1e-10 * lambda_max`.
fn sym_sqrt(mat: &DMatrix<f64>) -> Result<DMatrix<f64>, FamilyError> {
    let eigen = symmetrize(mat).symmetric_eigen();
    let max = eigen.eigenvalues.max();
    if !(max.is_finite() && max > 0.0) {
        return Err(FamilyError::NotSpd(format!(
            "largest eigenvalue {max} is not positive"
        )));
    }
    let clamp = EIGEN_CLAMP_REL * max;
    let mut roots = eigen.eigenvalues.clone();
    for lambda in roots.iter_mut() {
        if *lambda < -NEGATIVE_EIGEN_REL * max {
            return Err(FamilyError::NotSpd(format!(
                "eigenvalue {lambda} below the rounding band"
            )));
        }
        *lambda = lambda.max(clamp).sqrt();
    }
    let v = &eigen.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&roots) * v.transpose())))
}

/// Square root and inverse square root from one decomposition.
fn sym_sqrt_and_inv(mat: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), FamilyError> {
    let eigen = symmetrize(mat).symmetric_eigen();
    let max = eigen.eigenvalues.max();
    if !(max.is_finite() && max > 0.0) {
        return Err(FamilyError::NotSpd(format!(
            "largest eigenvalue {max} is not positive"
        )));
    }
    let clamp = EIGEN_CLAMP_REL * max;
    let mut roots = eigen.eigenvalues.clone();
    let mut inv_roots = eigen.eigenvalues.clone();
    for (lambda, inv) in roots.iter_mut().zip(inv_roots.iter_mut()) {
        if *lambda < -NEGATIVE_EIGEN_REL * max {
            return Err(FamilyError::NotSpd(format!(
                "eigenvalue {lambda} below the rounding band"
            )));
        }
        let clamped = lambda.max(clamp);
        *lambda = clamped.sqrt();
        *inv = 1.0 / clamped.sqrt();
    }
    let v = &eigen.eigenvectors;
    let sqrt = symmetrize(&(v * DMatrix::from_diagonal(&roots) * v.transpose()));
    let inv = symmetrize(&(v * DMatrix::from_diagonal(&inv_roots) * v.transpose()));
    Ok((sqrt, inv))
}

/// The unique SPD square root of an SPD matrix.
pub fn spd_sqrt(sigma: &SpdMatrix) -> Result<SpdMatrix, FamilyError> {
    Ok(SpdMatrix::from_symmetric_unchecked(sym_sqrt(
        sigma.matrix(),
    )?))
}

/// A member of the scatter-location family: mean `b` and covariance `Sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterLocationMeasure {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl ScatterLocationMeasure {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self, FamilyError> {
        if mean.len() != cov.dim() {
            return Err(FamilyError::DimensionMismatch {
                left: mean.len(),
                right: cov.dim(),
            });
        }
        Ok(Self { mean, cov })
    }

    /// Univariate Gaussian-like member from mean and standard deviation.
    pub fn univariate(mean: f64, std: f64) -> Result<Self, FamilyError> {
        if !(std.is_finite() && std > 0.0) {
            return Err(FamilyError::NonpositiveStd(std));
        }
        Self::new(
            DVector::from_element(1, mean),
            SpdMatrix::from_diagonal(&[std * std])?,
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_dims(a: &ScatterLocationMeasure, b: &ScatterLocationMeasure) -> Result<(), FamilyError> {
    if a.dim() != b.dim() {
        return Err(FamilyError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// The affine optimal map `T(x) = A (x - b1) + b2` between two members.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalMap {
    /// SPD linear part `A`.
    pub linear: DMatrix<f64>,
    /// Offset, so that `T(x) = A x + offset`.
    pub offset: DVector<f64>,
}

impl OptimalMap {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.offset
    }
}

/// Linear part of the optimal map from `m1` to `m2`:
/// `A = Sigma1^{-1/2} (Sigma1^{1/2} Sigma2 Sigma1^{1/2})^{1/2} Sigma1^{-1/2}`.
fn transport_linear(
    sigma1: &DMatrix<f64>,
    sigma2: &DMatrix<f64>,
) -> Result<DMatrix<f64>, FamilyError> {
    let (s1, s1_inv) = sym_sqrt_and_inv(sigma1)?;
    let inner = sym_sqrt(&(&s1 * sigma2 * &s1))?;
    Ok(symmetrize(&(&s1_inv * inner * &s1_inv)))
}

/// Optimal transport map between two members of the family.
pub fn optimal_map(
    m1: &ScatterLocationMeasure,
    m2: &ScatterLocationMeasure,
) -> Result<OptimalMap, FamilyError> {
    check_dims(m1, m2)?;
    let linear = transport_linear(m1.cov.matrix(), m2.cov.matrix())?;
    let offset = &m2.mean - &linear * &m1.mean;
    Ok(OptimalMap { linear, offset })
}

/// 2-Wasserstein distance, computed as the transport cost of the optimal
/// map: `W2^2 = |b1 - b2|^2 + trace((A - I) Sigma1 (A - I))`.
pub fn w2(
    m1: &ScatterLocationMeasure,
    m2: &ScatterLocationMeasure,
) -> Result<f64, FamilyError> {
    check_dims(m1, m2)?;
    let a = transport_linear(m1.cov.matrix(), m2.cov.matrix())?;
    let centered = &a - DMatrix::identity(a.nrows(), a.ncols());
    let cost = (&centered * m1.cov.matrix() * &centered).trace()
        + (&m1.mean - &m2.mean).norm_squared();
    Ok(cost.max(0.0).sqrt())
}

/// Batch SGD step on means and covariances:
/// `b <- (1-gamma) b0 + (gamma/S) sum b_i` and
/// `Sigma <- A0^{-1} [(1-gamma) A0^2 + (gamma/S) sum (A0 Sigma_i A0)^{1/2}]^2 A0^{-1}`
/// with `A0 = Sigma0^{1/2}`.
pub fn sgd_step(
    mu: &ScatterLocationMeasure,
    batch: &[ScatterLocationMeasure],
    gamma: f64,
) -> Result<ScatterLocationMeasure, FamilyError> {
    check_step(gamma)?;
    if batch.is_empty() {
        return Err(FamilyError::EmptyBatch);
    }
    for m in batch {
        check_dims(mu, m)?;
    }
    let s = batch.len() as f64;
    let (a0, a0_inv) = sym_sqrt_and_inv(mu.cov.matrix())?;

    let mut mean = &mu.mean * (1.0 - gamma);
    for m in batch {
        mean += &m.mean * (gamma / s);
    }

    let mut kernel = mu.cov.matrix() * (1.0 - gamma);
    for m in batch {
        kernel += sym_sqrt(&(&a0 * m.cov.matrix() * &a0))? * (gamma / s);
    }
    let cov = symmetrize(&(&a0_inv * &kernel * &kernel * &a0_inv));
    Ok(ScatterLocationMeasure {
        mean,
        cov: SpdMatrix::from_symmetric_unchecked(cov),
    })
}

/// Karcher residual: with `M = sum_i lambda_i A_mu^{m_i}`, returns
/// `trace((M - I) Sigma_mu (M - I)) + |b_mu - sum_i lambda_i b_i|^2`,
/// the squared `L^2(mu)` norm of the derivative of the barycenter functional.
pub fn karcher_residual(
    mu: &ScatterLocationMeasure,
    pi: &FiniteSupport<ScatterLocationMeasure>,
) -> Result<f64, FamilyError> {
    let q = mu.dim();
    let (s, s_inv) = sym_sqrt_and_inv(mu.cov.matrix())?;
    let mut transport_sum = DMatrix::zeros(q, q);
    let mut mean_gap = mu.mean.clone();
    for (w, m) in pi.iter() {
        check_dims(mu, m)?;
        let inner = sym_sqrt(&(&s * m.cov.matrix() * &s))?;
        transport_sum += symmetrize(&(&s_inv * inner * &s_inv)) * w;
        mean_gap -= &m.mean * w;
    }
    let centered = &transport_sum - DMatrix::identity(q, q);
    let trace_term = (&centered * mu.cov.matrix() * &centered).trace();
    Ok((trace_term + mean_gap.norm_squared()).max(0.0))
}

/// Successful fixed-point solve.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub measure: ScatterLocationMeasure,
    pub iterations: usize,
    pub residual: f64,
}

/// Fixed-point solve failure, carrying the best iterate found.
#[derive(Debug, Clone, Error)]
pub enum FixedPointError {
    #[error("fixed-point iteration hit {iterations} iterations with residual {residual}")]
    MaxIterExceeded {
        best: ScatterLocationMeasure,
        residual: f64,
        iterations: usize,
    },
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Default iteration cap for the fixed-point barycenter solve.
pub const DEFAULT_FIXED_POINT_MAX_ITER: usize = 500;
/// Default relative tolerance: residual below `1e-10 * trace(Sigma)`.
pub const DEFAULT_FIXED_POINT_REL_TOL: f64 = 1e-10;

/// Barycenter of a finite population by fixed-point iteration on the
/// covariance: `Sigma <- Sigma^{-1/2} (sum_i lambda_i (Sigma^{1/2} Sigma_i
/// Sigma^{1/2})^{1/2})^2 Sigma^{-1/2}`, the full-support step with
/// `gamma = 1`. The mean is the weighted average, set directly.
///
/// `tol` is an absolute residual threshold; `None` uses
/// `1e-10 * trace(Sigma)` of the current iterate.
pub fn fixed_point_barycenter(
    pi: &FiniteSupport<ScatterLocationMeasure>,
    tol: Option<f64>,
    max_iter: usize,
) -> Result<FixedPoint, FixedPointError> {
    let first = pi.measure(0);
    let q = first.dim();
    let mut mean = DVector::zeros(q);
    let mut cov0 = DMatrix::zeros(q, q);
    for (w, m) in pi.iter() {
        check_dims(first, m)?;
        mean += &m.mean * w;
        cov0 += m.cov.matrix() * w;
    }
    let mut current = ScatterLocationMeasure {
        mean,
        cov: SpdMatrix::from_symmetric_unchecked(cov0),
    };
    let mut best: Option<(ScatterLocationMeasure, f64)> = None;
    for iteration in 0..max_iter {
        let residual = karcher_residual(&current, pi)?;
        let threshold =
            tol.unwrap_or(DEFAULT_FIXED_POINT_REL_TOL * current.cov.trace());
        if residual < threshold {
            return Ok(FixedPoint {
                measure: current,
                iterations: iteration,
                residual,
            });
        }
        if best.as_ref().is_none_or(|(_, r)| residual < *r) {
            best = Some((current.clone(), residual));
        }
        let (s, s_inv) = sym_sqrt_and_inv(current.cov.matrix())?;
        let mut kernel = DMatrix::zeros(q, q);
        for (w, m) in pi.iter() {
            kernel += sym_sqrt(&(&s * m.cov.matrix() * &s))? * w;
        }
        let cov = symmetrize(&(&s_inv * &kernel * &kernel * &s_inv));
        current = ScatterLocationMeasure {
            mean: current.mean,
            cov: SpdMatrix::from_symmetric_unchecked(cov),
        };
    }
    let residual = karcher_residual(&current, pi)?;
    let threshold = tol.unwrap_or(DEFAULT_FIXED_POINT_REL_TOL * current.cov.trace());
    if residual < threshold {
        return Ok(FixedPoint {
            measure: current,
            iterations: max_iter,
            residual,
        });
    }
    let (best, best_residual) = match best {
        Some((b, r)) if r < residual => (b, r),
        _ => (current, residual),
    };
    Err(FixedPointError::MaxIterExceeded {
        best,
        residual: best_residual,
        iterations: max_iter,
    })
}

/// Draws a random SPD matrix with condition number at most `max_condition`
/// and eigenvalues centered around `scale`.
pub fn random_spd(
    q: usize,
    max_condition: f64,
    scale: f64,
    rng: &mut RngState,
) -> SpdMatrix {
    use rand::Rng;
    assert!(q >= 1 && max_condition >= 1.0 && scale > 0.0);
    let half_span = 0.5 * max_condition.ln();
    let eigenvalues: Vec<f64> = (0..q)
        .map(|_| scale * (rng.gen_range(-half_span..=half_span)).exp())
        .collect();
    let rotation = random_orthogonal(q, rng);
    let mat = &rotation * DMatrix::from_diagonal(&DVector::from_vec(eigenvalues))
        * rotation.transpose();
    SpdMatrix::from_symmetric_unchecked(mat)
}

/// Haar-ish random orthogonal matrix via QR of a Gaussian matrix.
pub fn random_orthogonal(q: usize, rng: &mut RngState) -> DMatrix<f64> {
    use rand::Rng;
    let gauss = |rng: &mut RngState| {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let m = DMatrix::from_fn(q, q, |_, _| gauss(rng));
    m.qr().q()
}

/// The scatter-location family as a [`BarycenterFamily`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ScatterLocationFamily;

impl BarycenterFamily for ScatterLocationFamily {
    type Measure = ScatterLocationMeasure;

    fn name(&self) -> &'static str {
        "scatter-location"
    }

    fn sgd_step(
        &self,
        mu: &ScatterLocationMeasure,
        batch: &[ScatterLocationMeasure],
        gamma: f64,
    ) -> Result<ScatterLocationMeasure, FamilyError> {
        sgd_step(mu, batch, gamma)
    }

    fn w2(
        &self,
        a: &ScatterLocationMeasure,
        b: &ScatterLocationMeasure,
    ) -> Result<f64, FamilyError> {
        w2(a, b)
    }

    fn grad_norm_sq(
        &self,
        mu: &ScatterLocationMeasure,
        pi: &FiniteSupport<ScatterLocationMeasure>,
    ) -> Result<f64, FamilyError> {
        karcher_residual(mu, pi)
    }

    fn exact_barycenter(
        &self,
        pi: &FiniteSupport<ScatterLocationMeasure>,
    ) -> Result<ScatterLocationMeasure, FamilyError> {
        match fixed_point_barycenter(pi, None, DEFAULT_FIXED_POINT_MAX_ITER) {
            Ok(fp) => Ok(fp.measure),
            Err(FixedPointError::MaxIterExceeded { residual, .. }) => {
                Err(FamilyError::FixedPointDidNotConverge { residual })
            }
            Err(FixedPointError::Family(e)) => Err(e),
        }
    }
}

// JSON format: {"b": [...], "sigma": [[row], ...]}, symmetry validated on load.
#[derive(Serialize, Deserialize)]
struct ScatterRepr {
    b: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl Serialize for ScatterLocationMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let q = self.dim();
        let sigma = (0..q)
            .map(|i| (0..q).map(|j| self.cov.matrix()[(i, j)]).collect())
            .collect();
        ScatterRepr {
            b: self.mean.iter().copied().collect(),
            sigma,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ScatterLocationMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ScatterRepr::deserialize(deserializer)?;
        let q = repr.b.len();
        if repr.sigma.len() != q || repr.sigma.iter().any(|row| row.len() != q) {
            return Err(D::Error::custom(format!(
                "covariance must be {q}x{q} to match the mean"
            )));
        }
        let mat = DMatrix::from_fn(q, q, |i, j| repr.sigma[i][j]);
        let cov = SpdMatrix::new(mat).map_err(D::Error::custom)?;
        ScatterLocationMeasure::new(DVector::from_vec(repr.b), cov).map_err(D::Error::custom)
    }
}
