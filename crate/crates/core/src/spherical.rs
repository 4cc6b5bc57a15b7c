//! Spherically equivalent families: nondecreasing radial rescalings of a
//! fixed generator.
//!
//! A member is determined by its radial map `alpha`, stored in the
//! norm-quantile coordinates of the generator: entry `j` holds the value of
//! `alpha` at the generator's norm quantile of level `(j + 1/2)/M`. Optimal
//! maps act along rays and compose as `alpha_2 . alpha_1^{-1}`, so in these
//! coordinates the whole calculus coincides with the univariate quantile
//! calculus: distances are level-wise mean square gaps, SGD steps are convex
//! combinations, barycenters average profiles.
//!
//! The generator itself is an opaque tag; measures from different generators
//! never mix.

use serde::{Deserialize, Serialize};

use crate::error::FamilyError;
use crate::family::{check_step, BarycenterFamily};
use crate::population::FiniteSupport;

/// Nonnegative nondecreasing radial map sampled at the generator's norm
/// quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadialProfileRepr", into = "RadialProfileRepr")]
pub struct RadialProfile {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct RadialProfileRepr {
    m: usize,
    values: Vec<f64>,
}

impl TryFrom<RadialProfileRepr> for RadialProfile {
    type Error = String;

    fn try_from(repr: RadialProfileRepr) -> Result<Self, String> {
        if repr.m != repr.values.len() {
            return Err(format!(
                "declared profile size {} does not match {} values",
                repr.m,
                repr.values.len()
            ));
        }
        RadialProfile::new(repr.values).map_err(|e| e.to_string())
    }
}

impl From<RadialProfile> for RadialProfileRepr {
    fn from(p: RadialProfile) -> Self {
        RadialProfileRepr {
            m: p.values.len(),
            values: p.values,
        }
    }
}

impl RadialProfile {
    pub fn new(values: Vec<f64>) -> Result<Self, FamilyError> {
        if values.is_empty() {
            return Err(FamilyError::InvalidMeasure("empty radial profile".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FamilyError::InvalidMeasure(
                "radial profile contains non-finite values".into(),
            ));
        }
        if values[0] < 0.0 {
            return Err(FamilyError::InvalidMeasure(
                "radial profile must be nonnegative".into(),
            ));
        }
        for w in values.windows(2) {
            // NaN fails this comparison too, which is exactly what we want.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(w[0] <= w[1]) {
                return Err(FamilyError::InvalidMeasure(format!(
                    "radial profile not monotone: {} > {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A spherically equivalent measure: generator tag plus radial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalMeasure {
    pub generator: String,
    pub profile: RadialProfile,
}

impl SphericalMeasure {
    pub fn new(generator: impl Into<String>, profile: RadialProfile) -> Self {
        Self {
            generator: generator.into(),
            profile,
        }
    }
}

fn check_pair(a: &SphericalMeasure, b: &SphericalMeasure) -> Result<(), FamilyError> {
    if a.generator != b.generator {
        return Err(FamilyError::GeneratorMismatch {
            left: a.generator.clone(),
            right: b.generator.clone(),
        });
    }
    if a.profile.len() != b.profile.len() {
        return Err(FamilyError::GridMismatch {
            left: a.profile.len(),
            right: b.profile.len(),
        });
    }
    Ok(())
}

/// Radial map of the transport from the measure with profile `alpha1` to the
/// measure with profile `alpha2`, sampled at the source's norm quantiles.
///
/// In norm-quantile coordinates the composition `alpha_2 . alpha_1^{-1}`
/// evaluated at `alpha_1`'s quantiles is exactly `alpha_2`'s grid, which is
/// what makes the class closed under composition.
pub fn transport_profile(
    alpha1: &RadialProfile,
    alpha2: &RadialProfile,
) -> Result<RadialProfile, FamilyError> {
    if alpha1.len() != alpha2.len() {
        return Err(FamilyError::GridMismatch {
            left: alpha1.len(),
            right: alpha2.len(),
        });
    }
    Ok(alpha2.clone())
}

/// 2-Wasserstein distance: transport moves points along rays, so the cost is
/// the level-wise mean square gap of the profiles.
pub fn w2(a: &SphericalMeasure, b: &SphericalMeasure) -> Result<f64, FamilyError> {
    check_pair(a, b)?;
    let sum: f64 = a
        .profile
        .values
        .iter()
        .zip(&b.profile.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / a.profile.len() as f64).sqrt())
}

/// Batch SGD step: profile convex combination.
pub fn sgd_step(
    mu: &SphericalMeasure,
    batch: &[SphericalMeasure],
    gamma: f64,
) -> Result<SphericalMeasure, FamilyError> {
    check_step(gamma)?;
    if batch.is_empty() {
        return Err(FamilyError::EmptyBatch);
    }
    for m in batch {
        check_pair(mu, m)?;
    }
    let scale = gamma / batch.len() as f64;
    let values = mu
        .profile
        .values
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let target: f64 = batch.iter().map(|m| m.profile.values[j]).sum();
            (1.0 - gamma) * a + scale * target
        })
        .collect();
    Ok(SphericalMeasure {
        generator: mu.generator.clone(),
        profile: RadialProfile::new(values)?,
    })
}

/// Exact barycenter: the weighted average profile.
pub fn exact_barycenter(
    pi: &FiniteSupport<SphericalMeasure>,
) -> Result<SphericalMeasure, FamilyError> {
    let first = pi.measure(0);
    for (_, m) in pi.iter() {
        check_pair(first, m)?;
    }
    let m = first.profile.len();
    let mut values = vec![0.0f64; m];
    for (w, measure) in pi.iter() {
        for (acc, a) in values.iter_mut().zip(&measure.profile.values) {
            *acc += w * a;
        }
    }
    Ok(SphericalMeasure {
        generator: first.generator.clone(),
        profile: RadialProfile::new(values)?,
    })
}

/// Squared gradient norm: mean square gap to the average profile.
pub fn grad_norm_sq(
    mu: &SphericalMeasure,
    pi: &FiniteSupport<SphericalMeasure>,
) -> Result<f64, FamilyError> {
    let bary = exact_barycenter(pi)?;
    check_pair(mu, &bary)?;
    let sum: f64 = mu
        .profile
        .values
        .iter()
        .zip(&bary.profile.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / mu.profile.len() as f64)
}

/// The spherically equivalent family as a [`BarycenterFamily`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SphericalFamily;

impl BarycenterFamily for SphericalFamily {
    type Measure = SphericalMeasure;

    fn name(&self) -> &'static str {
        "spherical"
    }

    fn sgd_step(
        &self,
        mu: &SphericalMeasure,
        batch: &[SphericalMeasure],
        gamma: f64,
    ) -> Result<SphericalMeasure, FamilyError> {
        sgd_step(mu, batch, gamma)
    }

    fn w2(&self, a: &SphericalMeasure, b: &SphericalMeasure) -> Result<f64, FamilyError> {
        w2(a, b)
    }

    fn grad_norm_sq(
        &self,
        mu: &SphericalMeasure,
        pi: &FiniteSupport<SphericalMeasure>,
    ) -> Result<f64, FamilyError> {
        grad_norm_sq(mu, pi)
    }

    fn exact_barycenter(
        &self,
        pi: &FiniteSupport<SphericalMeasure>,
    ) -> Result<SphericalMeasure, FamilyError> {
        exact_barycenter(pi)
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn profile(m: usize) -> impl Strategy<Value = RadialProfile> {
        proptest::collection::vec(0.0f64..0.5, m)
            .prop_map(|increments| {
                let mut acc = 0.0;
                let values = increments
                    .into_iter()
                    .map(|inc| {
                        acc += inc;
                        acc
                    })
                    .collect();
                RadialProfile::new(values).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        /// The transport class contains the identity, composes, and is
        /// closed under convex combination.
        #[test]
        fn transport_class_closure(
            a in profile(16),
            b in profile(16),
            c in profile(16),
            t in 0.0001f64..=1.0,
        ) {
            // identity
            prop_assert_eq!(transport_profile(&a, &a).unwrap(), a.clone());
            // composition
            let ab = transport_profile(&a, &b).unwrap();
            let abc = transport_profile(&ab, &c).unwrap();
            prop_assert_eq!(abc, transport_profile(&a, &c).unwrap());
            // convex combination stays a valid (monotone nonnegative) profile
            let ma = SphericalMeasure::new("g", a);
            let mb = SphericalMeasure::new("g", b);
            let mix = sgd_step(&ma, &[mb], t).unwrap();
            prop_assert!(mix.profile.values().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(mix.profile.values()[0] >= 0.0);
        }
    }
}
