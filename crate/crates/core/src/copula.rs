//! Multivariate measures sharing a common copula.
//!
//! When every member of a population has the same copula, distances,
//! barycenters and SGD steps all factor through the marginals: the optimal
//! map is coordinate-wise monotone rearrangement and the barycenter has the
//! shared copula with marginal-wise barycenters. The copula itself is only
//! needed to emit joint samples, so measures carry it as a descriptor that
//! doubles as an equality tag; asserting copula equality statistically is
//! out of scope.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::FamilyError;
use crate::family::{check_step, BarycenterFamily};
use crate::population::{FiniteSupport, RngState};
use crate::quantile::{self, QuantileGrid};

/// Copula descriptor: identifies the dependence structure and, for the
/// supported kinds, doubles as a sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Copula {
    Independence,
    /// Gaussian copula with the given correlation matrix (unit diagonal,
    /// symmetric positive definite).
    Gaussian { rho: Vec<Vec<f64>> },
}

impl Copula {
    fn dim_constraint(&self) -> Option<usize> {
        match self {
            Copula::Independence => None,
            Copula::Gaussian { rho } => Some(rho.len()),
        }
    }

    fn validate(&self, q: usize) -> Result<(), FamilyError> {
        match self {
            Copula::Independence => Ok(()),
            Copula::Gaussian { rho } => {
                if rho.len() != q || rho.iter().any(|row| row.len() != q) {
                    return Err(FamilyError::InvalidMeasure(format!(
                        "gaussian copula correlation must be {q}x{q}"
                    )));
                }
                for (i, row) in rho.iter().enumerate() {
                    if (row[i] - 1.0).abs() > 1e-12 {
                        return Err(FamilyError::InvalidMeasure(
                            "correlation diagonal must be 1".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}

/// A multivariate measure: a shared copula plus one quantile grid per
/// coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaMeasure {
    pub copula: Copula,
    pub marginals: Vec<QuantileGrid>,
}

impl CopulaMeasure {
    pub fn new(copula: Copula, marginals: Vec<QuantileGrid>) -> Result<Self, FamilyError> {
        if marginals.is_empty() {
            return Err(FamilyError::InvalidMeasure(
                "copula measure needs at least one marginal".into(),
            ));
        }
        let m = marginals[0].len();
        for g in &marginals {
            if g.len() != m {
                return Err(FamilyError::GridMismatch {
                    left: m,
                    right: g.len(),
                });
            }
        }
        if let Some(q) = copula.dim_constraint() {
            if q != marginals.len() {
                return Err(FamilyError::DimensionMismatch {
                    left: q,
                    right: marginals.len(),
                });
            }
        }
        copula.validate(marginals.len())?;
        Ok(Self { copula, marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn grid_size(&self) -> usize {
        self.marginals[0].len()
    }
}

fn check_pair(a: &CopulaMeasure, b: &CopulaMeasure) -> Result<(), FamilyError> {
    if a.copula != b.copula {
        return Err(FamilyError::CopulaMismatch);
    }
    if a.dim() != b.dim() {
        return Err(FamilyError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Coordinate-wise SGD step; the copula is preserved.
pub fn sgd_step(
    mu: &CopulaMeasure,
    batch: &[CopulaMeasure],
    gamma: f64,
) -> Result<CopulaMeasure, FamilyError> {
    check_step(gamma)?;
    if batch.is_empty() {
        return Err(FamilyError::EmptyBatch);
    }
    for m in batch {
        check_pair(mu, m)?;
    }
    let marginals = (0..mu.dim())
        .map(|i| {
            let batch_i: Vec<QuantileGrid> =
                batch.iter().map(|m| m.marginals[i].clone()).collect();
            quantile::sgd_step(&mu.marginals[i], &batch_i, gamma)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CopulaMeasure {
        copula: mu.copula.clone(),
        marginals,
    })
}

/// Distance via the marginal decomposition:
/// `W2^2 = sum_i W2^2(marginal_i, marginal_i)`.
pub fn w2(a: &CopulaMeasure, b: &CopulaMeasure) -> Result<f64, FamilyError> {
    check_pair(a, b)?;
    let mut acc = 0.0;
    for (ga, gb) in a.marginals.iter().zip(&b.marginals) {
        let d = quantile::w2(ga, gb)?;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

fn marginal_population(
    pi: &FiniteSupport<CopulaMeasure>,
    i: usize,
) -> Result<FiniteSupport<QuantileGrid>, FamilyError> {
    FiniteSupport::new(pi.iter().map(|(w, m)| (w, m.marginals[i].clone())).collect())
}

/// Exact barycenter: marginal-wise quantile averaging under the shared
/// copula.
pub fn exact_barycenter(
    pi: &FiniteSupport<CopulaMeasure>,
) -> Result<CopulaMeasure, FamilyError> {
    let first = pi.measure(0);
    for (_, m) in pi.iter() {
        check_pair(first, m)?;
    }
    let marginals = (0..first.dim())
        .map(|i| quantile::exact_barycenter(&marginal_population(pi, i)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CopulaMeasure {
        copula: first.copula.clone(),
        marginals,
    })
}

/// Squared gradient norm, summed over marginals.
pub fn grad_norm_sq(
    mu: &CopulaMeasure,
    pi: &FiniteSupport<CopulaMeasure>,
) -> Result<f64, FamilyError> {
    let first = pi.measure(0);
    check_pair(mu, first)?;
    let mut acc = 0.0;
    for i in 0..mu.dim() {
        acc += quantile::grad_norm_sq(&mu.marginals[i], &marginal_population(pi, i)?)?;
    }
    Ok(acc)
}

/// Draws `n` points in `R^q` from the measure: copula uniforms mapped
/// through the marginal quantile functions.
pub fn sample_points(
    m: &CopulaMeasure,
    n: usize,
    rng: &mut RngState,
) -> Result<Vec<Vec<f64>>, FamilyError> {
    use rand::Rng;
    let q = m.dim();
    let chol = match &m.copula {
        Copula::Independence => None,
        Copula::Gaussian { rho } => {
            let mat = DMatrix::from_fn(q, q, |i, j| rho[i][j]);
            let chol = nalgebra::Cholesky::new(mat).ok_or_else(|| {
                FamilyError::NotSpd("gaussian copula correlation not positive definite".into())
            })?;
            Some(chol.l())
        }
    };
    let mut out = Vec::with_capacity(n);
    let gauss_pair = |rng: &mut RngState| {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        (
            r * (std::f64::consts::TAU * u2).cos(),
            r * (std::f64::consts::TAU * u2).sin(),
        )
    };
    for _ in 0..n {
        let uniforms: Vec<f64> = match &chol {
            None => (0..q).map(|_| rng.gen::<f64>()).collect(),
            Some(l) => {
                let mut z = Vec::with_capacity(q + 1);
                while z.len() < q {
                    let (a, b) = gauss_pair(rng);
                    z.push(a);
                    if z.len() < q {
                        z.push(b);
                    }
                }
                let z = nalgebra::DVector::from_vec(z);
                let correlated = l * z;
                correlated
                    .iter()
                    .map(|v| quantile::std_normal_cdf(*v))
                    .collect()
            }
        };
        out.push(
            uniforms
                .iter()
                .zip(&m.marginals)
                .map(|(u, g)| g.quantile(*u))
                .collect(),
        );
    }
    Ok(out)
}

/// The common-copula family as a [`BarycenterFamily`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CopulaFamily;

impl BarycenterFamily for CopulaFamily {
    type Measure = CopulaMeasure;

    fn name(&self) -> &'static str {
        "copula"
    }

    fn sgd_step(
        &self,
        mu: &CopulaMeasure,
        batch: &[CopulaMeasure],
        gamma: f64,
    ) -> Result<CopulaMeasure, FamilyError> {
        sgd_step(mu, batch, gamma)
    }

    fn w2(&self, a: &CopulaMeasure, b: &CopulaMeasure) -> Result<f64, FamilyError> {
        w2(a, b)
    }

    fn grad_norm_sq(
        &self,
        mu: &CopulaMeasure,
        pi: &FiniteSupport<CopulaMeasure>,
    ) -> Result<f64, FamilyError> {
        grad_norm_sq(mu, pi)
    }

    fn exact_barycenter(
        &self,
        pi: &FiniteSupport<CopulaMeasure>,
    ) -> Result<CopulaMeasure, FamilyError> {
        exact_barycenter(pi)
    }
}
