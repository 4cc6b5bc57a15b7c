//! Univariate Wasserstein geometry on discretized quantile functions.
//!
//! A continuous distribution on the line is represented by its quantile
//! function sampled at the midpoint levels `p_j = (j - 1/2) / M`. In these
//! coordinates the optimal transport map between two distributions is the
//! monotone rearrangement, the squared distance is the level-wise mean square
//! gap, and an SGD step is a plain convex combination of grids. Barycenters
//! average quantiles.
//!
//! Midpoint levels avoid evaluating quantiles at 0 and 1, where unbounded
//! distributions diverge. Empirical ingestion interpolates order statistics
//! placed at midpoint levels (Hazen plotting positions), which is the
//! discrete stand-in for the absolute continuity the theory assumes.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::ContinuousCDF;

use crate::error::FamilyError;
use crate::family::{check_step, BarycenterFamily};
use crate::population::FiniteSupport;

/// Default grid size for solver runs.
pub const DEFAULT_GRID_SIZE: usize = 1000;
/// Default grid size for oracle comparisons.
pub const ORACLE_GRID_SIZE: usize = 10_000;

/// A monotone nondecreasing grid of quantile values at midpoint levels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    values: Vec<f64>,
}

impl QuantileGrid {
    /// Wraps raw values, validating monotonicity and finiteness.
    pub fn new(values: Vec<f64>) -> Result<Self, FamilyError> {
        if values.is_empty() {
            return Err(FamilyError::InvalidMeasure("empty quantile grid".into()));
        }
        for w in values.windows(2) {
            // NaN fails this comparison too, which is exactly what we want.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(w[0] <= w[1]) {
                return Err(FamilyError::InvalidMeasure(format!(
                    "quantile grid not monotone: {} > {}",
                    w[0], w[1]
                )));
            }
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FamilyError::InvalidMeasure(
                "quantile grid contains non-finite values".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Grid size `M`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Midpoint level of entry `j` (0-indexed): `(j + 1/2) / M`.
    pub fn level(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.values.len() as f64
    }

    /// Builds a grid by evaluating a quantile function at the midpoint levels.
    ///
    /// The function must be nondecreasing on (0, 1); this is validated.
    pub fn from_quantile_fn(m: usize, q: impl Fn(f64) -> f64) -> Result<Self, FamilyError> {
        if m == 0 {
            return Err(FamilyError::InvalidMeasure("grid size must be >= 1".into()));
        }
        let values = (0..m).map(|j| q((j as f64 + 0.5) / m as f64)).collect();
        Self::new(values)
    }

    /// Empirical quantile grid from raw samples.
    ///
    /// Sorts the samples, places order statistic `i` at level `(i + 1/2)/n`,
    /// and linearly interpolates at the midpoint grid levels (constant
    /// beyond the extreme order statistics). With `xs.len() == m` the grid
    /// reproduces the sorted samples exactly.
    pub fn from_samples(xs: &[f64], m: usize) -> Result<Self, FamilyError> {
        if xs.is_empty() {
            return Err(FamilyError::EmptySample);
        }
        if m == 0 {
            return Err(FamilyError::InvalidMeasure("grid size must be >= 1".into()));
        }
        if !xs.iter().all(|v| v.is_finite()) {
            return Err(FamilyError::InvalidMeasure(
                "samples contain non-finite values".into(),
            ));
        }
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values are ordered"));
        let n = sorted.len() as f64;
        let values = (0..m)
            .map(|j| {
                let p = (j as f64 + 0.5) / m as f64;
                interpolate_at_position(&sorted, n * p - 0.5)
            })
            .collect();
        Self::new(values)
    }

    /// Gaussian quantile grid: `q_j = mean + std * Phi^{-1}(p_j)`.
    pub fn from_gaussian(mean: f64, std: f64, m: usize) -> Result<Self, FamilyError> {
        if !(std.is_finite() && std > 0.0) {
            return Err(FamilyError::NonpositiveStd(std));
        }
        Self::from_quantile_fn(m, |p| mean + std * std_normal_quantile(p))
    }

    /// Exponential quantile grid with the given rate, shifted by `loc`.
    pub fn from_exponential(loc: f64, rate: f64, m: usize) -> Result<Self, FamilyError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(FamilyError::InvalidMeasure(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Self::from_quantile_fn(m, |p| loc - (1.0 - p).ln() / rate)
    }

    /// Logistic quantile grid.
    pub fn from_logistic(loc: f64, scale: f64, m: usize) -> Result<Self, FamilyError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(FamilyError::InvalidMeasure(format!(
                "logistic scale must be positive, got {scale}"
            )));
        }
        Self::from_quantile_fn(m, |p| loc + scale * (p / (1.0 - p)).ln())
    }

    /// Gumbel (extreme value) quantile grid.
    pub fn from_gumbel(loc: f64, scale: f64, m: usize) -> Result<Self, FamilyError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(FamilyError::InvalidMeasure(format!(
                "gumbel scale must be positive, got {scale}"
            )));
        }
        Self::from_quantile_fn(m, |p| loc - scale * (-p.ln()).ln())
    }

    /// Laplace quantile grid.
    pub fn from_laplace(loc: f64, scale: f64, m: usize) -> Result<Self, FamilyError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(FamilyError::InvalidMeasure(format!(
                "laplace scale must be positive, got {scale}"
            )));
        }
        Self::from_quantile_fn(m, |p| {
            if p < 0.5 {
                loc + scale * (2.0 * p).ln()
            } else {
                loc - scale * (2.0 * (1.0 - p)).ln()
            }
        })
    }

    /// Point mass at `x`.
    pub fn point_mass(x: f64, m: usize) -> Result<Self, FamilyError> {
        Self::from_quantile_fn(m, |_| x)
    }

    /// Quantile at an arbitrary level, linearly interpolated between grid
    /// nodes and constant beyond the extreme levels.
    pub fn quantile(&self, u: f64) -> f64 {
        interpolate_at_position(&self.values, self.values.len() as f64 * u - 0.5)
    }

    /// CDF of the piecewise-linear distribution implied by the grid:
    /// the upper generalized inverse of [`QuantileGrid::quantile`].
    pub fn cdf(&self, x: f64) -> f64 {
        let m = self.values.len();
        let last = self.values[m - 1];
        if x >= last {
            return 1.0;
        }
        if x < self.values[0] {
            return 0.0;
        }
        // First index with value strictly above x; its predecessor is the
        // last index at or below x, so flats resolve to the upper inverse.
        let hi = self.values.partition_point(|v| *v <= x);
        debug_assert!(hi >= 1 && hi < m);
        let (lo_q, hi_q) = (self.values[hi - 1], self.values[hi]);
        let (lo_p, hi_p) = (self.level(hi - 1), self.level(hi));
        lo_p + (hi_p - lo_p) * (x - lo_q) / (hi_q - lo_q)
    }

    /// Grid mean `(1/M) sum q_j`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Standard deviation implied by the grid.
    pub fn implied_std(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .values
            .iter()
            .map(|q| (q - mean) * (q - mean))
            .sum::<f64>()
            / self.values.len() as f64;
        var.sqrt()
    }
}

fn interpolate_at_position(sorted: &[f64], pos: f64) -> f64 {
    let n = sorted.len();
    if pos <= 0.0 {
        return sorted[0];
    }
    if pos >= (n - 1) as f64 {
        return sorted[n - 1];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::Normal;
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    use statrs::distribution::Normal;
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

fn check_grids(a: &QuantileGrid, b: &QuantileGrid) -> Result<(), FamilyError> {
    if a.len() != b.len() {
        return Err(FamilyError::GridMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// 2-Wasserstein distance between two grids of equal size:
/// `sqrt((1/M) sum_j (q_j^a - q_j^b)^2)`.
pub fn w2(a: &QuantileGrid, b: &QuantileGrid) -> Result<f64, FamilyError> {
    check_grids(a, b)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Batch SGD step: `q_j <- (1 - gamma) q_j + (gamma / S) sum_i q_j^{m_i}`.
pub fn sgd_step(
    mu: &QuantileGrid,
    batch: &[QuantileGrid],
    gamma: f64,
) -> Result<QuantileGrid, FamilyError> {
    check_step(gamma)?;
    if batch.is_empty() {
        return Err(FamilyError::EmptyBatch);
    }
    for m in batch {
        check_grids(mu, m)?;
    }
    let scale = gamma / batch.len() as f64;
    let values = mu
        .values
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let target: f64 = batch.iter().map(|m| m.values[j]).sum();
            (1.0 - gamma) * q + scale * target
        })
        .collect();
    // Convex combinations of monotone grids stay monotone, even under
    // rounding, so this cannot fail on valid inputs.
    QuantileGrid::new(values)
}

/// Exact barycenter: the weighted quantile average `sum_i lambda_i q^{m_i}`.
pub fn exact_barycenter(pi: &FiniteSupport<QuantileGrid>) -> Result<QuantileGrid, FamilyError> {
    let mut iter = pi.iter();
    let (w0, m0) = iter.next().expect("finite support is nonempty");
    let mut values: Vec<f64> = m0.values.iter().map(|q| w0 * q).collect();
    for (w, m) in iter {
        if m.len() != values.len() {
            return Err(FamilyError::GridMismatch {
                left: values.len(),
                right: m.len(),
            });
        }
        for (acc, q) in values.iter_mut().zip(&m.values) {
            *acc += w * q;
        }
    }
    QuantileGrid::new(values)
}

/// Squared `L^2(mu)` norm of the derivative of the barycenter functional.
///
/// In quantile coordinates the derivative at level `p` is
/// `Q_mu(p) - mean quantile of the population`, so the norm is the mean
/// square gap to the exact barycenter grid.
pub fn grad_norm_sq(
    mu: &QuantileGrid,
    pi: &FiniteSupport<QuantileGrid>,
) -> Result<f64, FamilyError> {
    let bary = exact_barycenter(pi)?;
    check_grids(mu, &bary)?;
    let sum: f64 = mu
        .values
        .iter()
        .zip(&bary.values)
        .map(|(q, b)| (q - b) * (q - b))
        .sum();
    Ok(sum / mu.len() as f64)
}

/// Barycenter functional `F(mu) = 1/2 sum_i lambda_i W2^2(mu, m_i)`.
pub fn functional_f(
    mu: &QuantileGrid,
    pi: &FiniteSupport<QuantileGrid>,
) -> Result<f64, FamilyError> {
    let mut acc = 0.0;
    for (w, m) in pi.iter() {
        let d = w2(mu, m)?;
        acc += w * d * d;
    }
    Ok(0.5 * acc)
}

/// Result of the grid shape checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeChecks {
    pub symmetric: bool,
    pub unimodal: bool,
}

/// Default tolerance of the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Default tolerance of the unimodality check, applied to the grid
/// normalized to unit range.
pub const UNIMODAL_TOL: f64 = 1e-9;

/// Checks symmetry and unimodality of the distribution behind a grid.
pub fn shape_checks(g: &QuantileGrid) -> ShapeChecks {
    shape_checks_with_tol(g, SYMMETRY_TOL, UNIMODAL_TOL)
}

/// Symmetry: `q_j + q_{M+1-j}` must be constant across `j` within
/// `sym_tol * max(1, max |q|)`. Unimodality: the slope sequence
/// `q_{j+1} - q_j` of the grid normalized to unit range must descend to a
/// minimum and then ascend, with sign changes below `uni_tol` ignored.
pub fn shape_checks_with_tol(g: &QuantileGrid, sym_tol: f64, uni_tol: f64) -> ShapeChecks {
    let v = &g.values;
    let m = v.len();
    let max_abs = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let scale = max_abs.max(1.0);

    let symmetric = {
        let center = v[0] + v[m - 1];
        let mut dev = 0.0f64;
        for j in 0..m {
            dev = dev.max((v[j] + v[m - 1 - j] - center).abs());
        }
        dev <= sym_tol * scale
    };

    let unimodal = {
        let range = v[m - 1] - v[0];
        if range <= 0.0 || m < 3 {
            true // point mass or too coarse to carry mode structure
        } else {
            let eps = uni_tol;
            let mut ascending = false;
            let mut ok = true;
            let mut prev_delta = (v[1] - v[0]) / range;
            for j in 1..m - 1 {
                let delta = (v[j + 1] - v[j]) / range;
                let second = delta - prev_delta;
                if ascending {
                    if second < -eps {
                        ok = false;
                        break;
                    }
                } else if second > eps {
                    ascending = true;
                }
                prev_delta = delta;
            }
            ok
        }
    };

    ShapeChecks {
        symmetric,
        unimodal,
    }
}

/// The univariate family as a [`BarycenterFamily`].
#[derive(Debug, Clone, Copy, Default)]
pub struct QuantileFamily;

impl BarycenterFamily for QuantileFamily {
    type Measure = QuantileGrid;

    fn name(&self) -> &'static str {
        "univariate"
    }

    fn sgd_step(
        &self,
        mu: &QuantileGrid,
        batch: &[QuantileGrid],
        gamma: f64,
    ) -> Result<QuantileGrid, FamilyError> {
        sgd_step(mu, batch, gamma)
    }

    fn w2(&self, a: &QuantileGrid, b: &QuantileGrid) -> Result<f64, FamilyError> {
        w2(a, b)
    }

    fn grad_norm_sq(
        &self,
        mu: &QuantileGrid,
        pi: &FiniteSupport<QuantileGrid>,
    ) -> Result<f64, FamilyError> {
        grad_norm_sq(mu, pi)
    }

    fn exact_barycenter(
        &self,
        pi: &FiniteSupport<QuantileGrid>,
    ) -> Result<QuantileGrid, FamilyError> {
        exact_barycenter(pi)
    }
}

// JSON format: {"m": M, "values": [...]}, with the length validated on load.
#[derive(Serialize, Deserialize)]
struct QuantileGridRepr {
    m: usize,
    values: Vec<f64>,
}

impl Serialize for QuantileGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        QuantileGridRepr {
            m: self.values.len(),
            values: self.values.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuantileGrid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = QuantileGridRepr::deserialize(deserializer)?;
        if repr.m != repr.values.len() {
            return Err(D::Error::custom(format!(
                "declared grid size {} does not match {} values",
                repr.m,
                repr.values.len()
            )));
        }
        QuantileGrid::new(repr.values).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::FiniteSupport;

    fn gaussian(mean: f64, std: f64, m: usize) -> QuantileGrid {
        QuantileGrid::from_gaussian(mean, std, m).unwrap()
    }

    #[test]
    fn from_samples_point_mass() {
        let g = QuantileGrid::from_samples(&[5.0], 7).unwrap();
        assert!(g.values().iter().all(|q| *q == 5.0));
    }

    #[test]
    fn from_samples_matching_sizes_reproduces_sorted_input() {
        let g = QuantileGrid::from_samples(&[3.0, 1.0, 4.0, 2.0], 4).unwrap();
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn from_samples_rejects_empty() {
        assert_eq!(
            QuantileGrid::from_samples(&[], 4),
            Err(FamilyError::EmptySample)
        );
    }

    /// Empirical quantiles of 1e6 standard normal draws (Box-Muller, so the
    /// draws do not depend on the quantile routine under test) stay within
    /// the 0.02 band around the true quantiles predicted by
    /// Dvoretzky-Kiefer-Wolfowitz at this sample size.
    #[test]
    fn from_samples_tracks_normal_quantiles() {
        use rand::Rng;
        let mut rng = crate::population::rng_from_seed(99);
        let n = 1_000_000usize;
        let mut xs = Vec::with_capacity(n);
        while xs.len() < n {
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            xs.push(r * (std::f64::consts::TAU * u2).cos());
            if xs.len() < n {
                xs.push(r * (std::f64::consts::TAU * u2).sin());
            }
        }
        let g = QuantileGrid::from_samples(&xs, 1000).unwrap();
        let mut max_err = 0.0f64;
        for j in 0..1000 {
            let p = g.level(j);
            max_err = max_err.max((g.values()[j] - std_normal_quantile(p)).abs());
        }
        assert!(max_err < 0.02, "max quantile error {max_err}");
    }

    #[test]
    fn gaussian_grid_small() {
        // Phi^{-1}(0.75) = 0.674489750196082 (frozen from the quadrature
        // oracle in tests/normal_quantile.rs).
        let g = gaussian(0.0, 1.0, 2);
        assert!((g.values()[0] + 0.674489750196082).abs() < 1e-9);
        assert!((g.values()[1] - 0.674489750196082).abs() < 1e-9);
    }

    #[test]
    fn gaussian_location_scale_equivariance() {
        let base = gaussian(0.0, 1.0, 64);
        let shifted = gaussian(3.0, 1.0, 64);
        let scaled = gaussian(0.0, 2.0, 64);
        for j in 0..64 {
            assert_eq!(shifted.values()[j], base.values()[j] + 3.0);
            assert_eq!(scaled.values()[j], 2.0 * base.values()[j]);
        }
    }

    #[test]
    fn gaussian_rejects_nonpositive_std() {
        assert_eq!(
            QuantileGrid::from_gaussian(0.0, 0.0, 4),
            Err(FamilyError::NonpositiveStd(0.0))
        );
    }

    #[test]
    fn w2_identity_and_point_masses() {
        let g = gaussian(1.0, 2.0, 32);
        assert_eq!(w2(&g, &g).unwrap(), 0.0);
        let a = QuantileGrid::point_mass(0.0, 8).unwrap();
        let b = QuantileGrid::point_mass(7.0, 8).unwrap();
        assert_eq!(w2(&a, &b).unwrap(), 7.0);
        let c = QuantileGrid::point_mass(0.0, 9).unwrap();
        assert!(matches!(
            w2(&a, &c),
            Err(FamilyError::GridMismatch { left: 8, right: 9 })
        ));
    }

    /// W2(N(0,1), N(2,4)) = sqrt(5): the integrand reduces to
    /// (2 + Phi^{-1}(p))^2 whose integral is 4 + 0 + 1.
    #[test]
    fn w2_between_gaussians() {
        let a = gaussian(0.0, 1.0, ORACLE_GRID_SIZE);
        let b = gaussian(2.0, 2.0, ORACLE_GRID_SIZE);
        assert!((w2(&a, &b).unwrap() - 5.0f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn sgd_step_full_step_lands_on_sample() {
        let mu = gaussian(0.0, 1.0, 128);
        let m = gaussian(3.0, 0.5, 128);
        let nu = sgd_step(&mu, std::slice::from_ref(&m), 1.0).unwrap();
        assert_eq!(nu.values(), m.values());
    }

    #[test]
    fn sgd_step_midpoint() {
        let mu = QuantileGrid::point_mass(0.0, 16).unwrap();
        let m = QuantileGrid::point_mass(4.0, 16).unwrap();
        let nu = sgd_step(&mu, &[m], 0.5).unwrap();
        assert!(nu.values().iter().all(|q| *q == 2.0));
    }

    #[test]
    fn sgd_step_validates_inputs() {
        let mu = gaussian(0.0, 1.0, 16);
        assert_eq!(
            sgd_step(&mu, &[], 0.5),
            Err(FamilyError::EmptyBatch)
        );
        assert_eq!(
            sgd_step(&mu, std::slice::from_ref(&mu), 0.0),
            Err(FamilyError::StepOutOfRange(0.0))
        );
        assert_eq!(
            sgd_step(&mu, std::slice::from_ref(&mu), 1.5),
            Err(FamilyError::StepOutOfRange(1.5))
        );
    }

    /// With steps 1/(k+2) the iterate stays the running average of the
    /// initial grid and the samples seen so far.
    #[test]
    fn running_average_identity() {
        let grids: Vec<QuantileGrid> = (0..5)
            .map(|i| gaussian(i as f64, 1.0 + 0.1 * i as f64, 64))
            .collect();
        let mut mu = gaussian(-2.0, 0.5, 64);
        let mut seen: Vec<&QuantileGrid> = Vec::new();
        let mu0 = mu.clone();
        for k in 0..100 {
            let sample = &grids[(k * 7 + 3) % grids.len()];
            seen.push(sample);
            let gamma = 1.0 / (k as f64 + 2.0);
            mu = sgd_step(&mu, std::slice::from_ref(sample), gamma).unwrap();
            for j in 0..64 {
                let avg = (mu0.values()[j]
                    + seen.iter().map(|g| g.values()[j]).sum::<f64>())
                    / (seen.len() as f64 + 1.0);
                assert!((mu.values()[j] - avg).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn barycenter_of_gaussian_pair() {
        let pi = FiniteSupport::new(vec![
            (0.3, gaussian(1.0, 1.0, ORACLE_GRID_SIZE)),
            (0.7, gaussian(3.0, 1.0, ORACLE_GRID_SIZE)),
        ])
        .unwrap();
        let bary = exact_barycenter(&pi).unwrap();
        assert!((bary.mean() - 2.4).abs() < 1e-3);
        assert!((bary.implied_std() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn barycenter_of_single_atom_is_atom() {
        let m = gaussian(1.0, 2.0, 32);
        let pi = FiniteSupport::dirac(m.clone());
        assert_eq!(exact_barycenter(&pi).unwrap(), m);
    }

    #[test]
    fn barycenter_of_equal_variance_pair_is_exact() {
        let a = gaussian(-1.0, 1.0, 256);
        let b = gaussian(1.0, 1.0, 256);
        let pi = FiniteSupport::new(vec![(0.5, a), (0.5, b)]).unwrap();
        let bary = exact_barycenter(&pi).unwrap();
        let expect = gaussian(0.0, 1.0, 256);
        for j in 0..256 {
            assert!((bary.values()[j] - expect.values()[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn functional_and_gradient_values() {
        let m = ORACLE_GRID_SIZE;
        let pi = FiniteSupport::new(vec![
            (0.3, gaussian(1.0, 1.0, m)),
            (0.7, gaussian(3.0, 1.0, m)),
        ])
        .unwrap();
        let mu = gaussian(1.0, 1.0, m);
        assert!((functional_f(&mu, &pi).unwrap() - 1.4).abs() < 1e-3);
        assert!((grad_norm_sq(&mu, &pi).unwrap() - 1.96).abs() < 1e-3);

        let bary = exact_barycenter(&pi).unwrap();
        assert!(grad_norm_sq(&bary, &pi).unwrap() < 1e-12);

        let single = FiniteSupport::dirac(gaussian(3.0, 1.0, m));
        let d = w2(&mu, single.measure(0)).unwrap();
        assert!((functional_f(&mu, &single).unwrap() - 0.5 * d * d).abs() < 1e-12);
        assert!((grad_norm_sq(&mu, &single).unwrap() - d * d).abs() < 1e-12);
    }

    #[test]
    fn shape_checks_examples() {
        let normal = gaussian(0.0, 1.0, 1000);
        let checks = shape_checks(&normal);
        assert!(checks.symmetric && checks.unimodal);

        let expo = QuantileGrid::from_exponential(0.0, 1.0, 1000).unwrap();
        let checks = shape_checks(&expo);
        assert!(!checks.symmetric && checks.unimodal);
    }

    /// Log-concave closure instance: the barycenter of Gumbel, Gamma(2,1)
    /// and standard normal grids is unimodal.
    #[test]
    fn shape_checks_log_concave_barycenter() {
        use statrs::distribution::Gamma;
        let m = 1000;
        let gamma_dist = Gamma::new(2.0, 1.0).unwrap();
        let gamma_grid =
            QuantileGrid::from_quantile_fn(m, |p| gamma_dist.inverse_cdf(p)).unwrap();
        let pi = FiniteSupport::new(vec![
            (1.0 / 3.0, QuantileGrid::from_gumbel(0.0, 1.0, m).unwrap()),
            (1.0 / 3.0, gamma_grid),
            (1.0 / 3.0, gaussian(0.0, 1.0, m)),
        ])
        .unwrap();
        let bary = exact_barycenter(&pi).unwrap();
        assert!(shape_checks(&bary).unimodal);
    }

    #[test]
    fn cdf_inverts_quantile() {
        let g = gaussian(0.5, 2.0, 500);
        for &u in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = g.quantile(u);
            let back = g.cdf(x);
            assert!((back - u).abs() < 1e-9, "u = {u}, back = {back}");
        }
        assert_eq!(g.cdf(f64::NEG_INFINITY.max(-1e9)), 0.0);
        assert_eq!(g.cdf(1e9), 1.0);
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let g = gaussian(1.0, 2.0, 16);
        let json = serde_json::to_string(&g).unwrap();
        let back: QuantileGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);

        let bad = r#"{"m": 3, "values": [1.0, 2.0]}"#;
        assert!(serde_json::from_str::<QuantileGrid>(bad).is_err());
        let bad = r#"{"m": 2, "values": [2.0, 1.0]}"#;
        assert!(serde_json::from_str::<QuantileGrid>(bad).is_err());
    }
}
