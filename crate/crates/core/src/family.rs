//! The contract every closed-form transport family implements.

use crate::error::FamilyError;
use crate::population::FiniteSupport;

/// Operations required of a geometry so the generic solver can drive it.
///
/// A family fixes a parametric class of measures together with the explicit
/// optimal transport maps between its members. `sgd_step` moves along the
/// geodesic from the current iterate towards the mean of a sampled batch,
/// `w2` is the 2-Wasserstein distance restricted to the family, and the
/// remaining operations expose the barycenter functional
/// `F(mu) = 1/2 * integral of W2^2(mu, m) dPi(m)` over finitely supported
/// populations, the squared `L^2(mu)` norm of its derivative, an exact
/// barycenter oracle, and the Karcher-mean residual.
pub trait BarycenterFamily {
    type Measure: Clone;

    /// Short family identifier used in run metadata and file formats.
    fn name(&self) -> &'static str;

    /// One batch SGD step from `mu` towards the sampled batch with step
    /// `gamma` in `(0, 1]`.
    fn sgd_step(
        &self,
        mu: &Self::Measure,
        batch: &[Self::Measure],
        gamma: f64,
    ) -> Result<Self::Measure, FamilyError>;

    /// 2-Wasserstein distance between two members.
    fn w2(&self, a: &Self::Measure, b: &Self::Measure) -> Result<f64, FamilyError>;

    /// Barycenter functional `F(mu)` for a finite population.
    fn functional_f(
        &self,
        mu: &Self::Measure,
        pi: &FiniteSupport<Self::Measure>,
    ) -> Result<f64, FamilyError> {
        let mut acc = 0.0;
        for (w, m) in pi.iter() {
            let d = self.w2(mu, m)?;
            acc += w * d * d;
        }
        Ok(0.5 * acc)
    }

    /// Squared `L^2(mu)` norm of the derivative of `F` at `mu`.
    fn grad_norm_sq(
        &self,
        mu: &Self::Measure,
        pi: &FiniteSupport<Self::Measure>,
    ) -> Result<f64, FamilyError>;

    /// Exact barycenter of a finite population.
    fn exact_barycenter(
        &self,
        pi: &FiniteSupport<Self::Measure>,
    ) -> Result<Self::Measure, FamilyError>;

    /// Residual of the Karcher-mean equation at `mu`; zero exactly at
    /// fixed points of the averaged transport map.
    fn karcher_residual(
        &self,
        mu: &Self::Measure,
        pi: &FiniteSupport<Self::Measure>,
    ) -> Result<f64, FamilyError> {
        self.grad_norm_sq(mu, pi)
    }
}

/// Validates a step size against the geodesic range `(0, 1]`.
pub(crate) fn check_step(gamma: f64) -> Result<(), FamilyError> {
    if gamma.is_finite() && gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(FamilyError::StepOutOfRange(gamma))
    }
}
