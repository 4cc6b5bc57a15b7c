//! Populations of measures and the randomness contract.
//!
//! A population is a distribution over measures: either a finite weighted
//! support or a seeded generative sampler. All randomness flows through an
//! explicit [`RngState`] owned by the caller; there is no global RNG, so a
//! run is fully reproducible from its seed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::FamilyError;

/// Explicit random state threaded through every sampling operation.
///
/// ChaCha8 has a stable, portable stream: identical seeds produce identical
/// draws on every platform, which the reproducibility contract relies on.
pub type RngState = ChaCha8Rng;

/// Creates the random state for a given seed.
pub fn rng_from_seed(seed: u64) -> RngState {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A finitely supported population: positive weights summing to one.
#[derive(Debug, Clone)]
pub struct FiniteSupport<M> {
    entries: Vec<(f64, M)>,
    cumulative: Vec<f64>,
}

impl<M> FiniteSupport<M> {
    /// Builds a finite support from `(weight, measure)` pairs.
    ///
    /// Weights must be strictly positive and sum to 1 within 1e-12. The sum
    /// is compensated so that uniform weights `1/n` pass for large `n`.
    pub fn new(entries: Vec<(f64, M)>) -> Result<Self, FamilyError> {
        if entries.is_empty() {
            return Err(FamilyError::InvalidWeights("empty support".into()));
        }
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (w, _) in &entries {
            if !(w.is_finite() && *w > 0.0) {
                return Err(FamilyError::InvalidWeights(format!(
                    "weights must be strictly positive, got {w}"
                )));
            }
            // Neumaier-compensated accumulation.
            let t = sum + w;
            if sum.abs() >= w.abs() {
                comp += (sum - t) + w;
            } else {
                comp += (w - t) + sum;
            }
            sum = t;
        }
        let total = sum + comp;
        if (total - 1.0).abs() > 1e-12 {
            return Err(FamilyError::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for (w, _) in &entries {
            acc += w;
            cumulative.push(acc);
        }
        // Guard the last bucket against rounding so a draw of u ~ 1 - eps
        // cannot fall off the end.
        if let Some(last) = cumulative.last_mut() {
            *last = f64::INFINITY;
        }
        Ok(Self { entries, cumulative })
    }

    /// Uniform weights over the given measures.
    pub fn uniform(measures: Vec<M>) -> Result<Self, FamilyError> {
        let n = measures.len();
        if n == 0 {
            return Err(FamilyError::InvalidWeights("empty support".into()));
        }
        let w = 1.0 / n as f64;
        Self::new(measures.into_iter().map(|m| (w, m)).collect())
    }

    /// A single atom.
    pub fn dirac(measure: M) -> Self {
        Self::new(vec![(1.0, measure)]).expect("unit weight is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates over `(weight, measure)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &M)> {
        self.entries.iter().map(|(w, m)| (*w, m))
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(w, _)| *w)
    }

    pub fn measures(&self) -> impl Iterator<Item = &M> {
        self.entries.iter().map(|(_, m)| m)
    }

    pub fn measure(&self, i: usize) -> &M {
        &self.entries[i].1
    }

    /// Index of the atom selected by the uniform draw `u` in `[0, 1)`.
    pub(crate) fn index_for(&self, u: f64) -> usize {
        self.cumulative.partition_point(|c| *c <= u)
    }
}

/// A generative population: a seeded sampler producing measures.
#[derive(Clone)]
pub struct GenerativeModel<M> {
    sampler: Arc<dyn Fn(&mut RngState) -> M + Send + Sync>,
}

impl<M> GenerativeModel<M> {
    pub fn new(sampler: impl Fn(&mut RngState) -> M + Send + Sync + 'static) -> Self {
        Self {
            sampler: Arc::new(sampler),
        }
    }

    pub fn draw(&self, rng: &mut RngState) -> M {
        (self.sampler)(rng)
    }
}

impl<M> std::fmt::Debug for GenerativeModel<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("GenerativeModel")
    }
}

/// A distribution over measures.
#[derive(Debug, Clone)]
pub enum PopulationModel<M> {
    Finite(FiniteSupport<M>),
    Generative(GenerativeModel<M>),
}

impl<M> PopulationModel<M> {
    pub fn as_finite(&self) -> Option<&FiniteSupport<M>> {
        match self {
            PopulationModel::Finite(fs) => Some(fs),
            PopulationModel::Generative(_) => None,
        }
    }
}

/// Draws `s` independent measures from the population.
///
/// Finite supports select atom `i` with probability `weight_i`, consuming
/// exactly one uniform from `rng` per draw. Populations over different
/// measure types but identical weight vectors therefore produce identical
/// index sequences from identical seeds, which the marginal-decomposition
/// and cross-family consistency checks exploit.
pub fn sample_batch<M: Clone>(
    pi: &PopulationModel<M>,
    s: usize,
    rng: &mut RngState,
) -> Result<Vec<M>, FamilyError> {
    if s == 0 {
        return Err(FamilyError::EmptyBatch);
    }
    let mut out = Vec::with_capacity(s);
    match pi {
        PopulationModel::Finite(fs) => {
            for _ in 0..s {
                let u: f64 = rng.gen();
                out.push(fs.measure(fs.index_for(u)).clone());
            }
        }
        PopulationModel::Generative(g) => {
            for _ in 0..s {
                out.push(g.draw(rng));
            }
        }
    }
    Ok(out)
}
