//! Generic SGD/BSGD driver and statistical verifiers.
//!
//! [`run`] executes the batch SGD recursion over any [`BarycenterFamily`],
//! recording per-step scalars and thinned snapshots. The estimators below
//! quantify a population by Monte Carlo where it has no finite support: the
//! barycenter functional and gradient norm ([`estimate_f_and_gradnorm`]), the
//! integrated variance of the mini-batch gradient estimator
//! ([`integrated_variance`]), and the expected one-step descent inequality
//! ([`verify_descent_inequality`]).
//!
//! Estimator standard errors come from independent sample groups, so they
//! stay honest even for the quadratic gradient-norm statistic, which is
//! debiased with the pair identity
//! `|mean D|^2 -> (n^2 |mean D|^2 - sum |D_i|^2) / (n (n - 1))`
//! (an unbiased estimate of the squared norm of the expected displacement;
//! without debiasing the plug-in estimate sits `O(1/n)` above zero at the
//! barycenter, which would fail any zero check at tight standard errors).

use std::time::Instant;

use thiserror::Error;

use crate::error::FamilyError;
use crate::family::BarycenterFamily;
use crate::population::{rng_from_seed, sample_batch, FiniteSupport, PopulationModel, RngState};
use crate::record::{RunRecord, Snapshot, StepScalars};
use crate::schedule::{ScheduleMode, StepSchedule};

/// Batch size: fixed, or one entry per step (the last entry repeats when the
/// run outlives the list).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BatchSize {
    Constant(usize),
    PerStep(Vec<usize>),
}

impl BatchSize {
    pub fn at(&self, k: usize) -> usize {
        match self {
            BatchSize::Constant(s) => *s,
            BatchSize::PerStep(sizes) => *sizes.get(k).or(sizes.last()).unwrap_or(&1),
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        let ok = match self {
            BatchSize::Constant(s) => *s >= 1,
            BatchSize::PerStep(sizes) => !sizes.is_empty() && sizes.iter().all(|s| *s >= 1),
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(
                "batch sizes must be >= 1".into(),
            ))
        }
    }
}

/// When a run stops before `max_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Run the full step budget.
    MaxSteps,
    /// Stop once the squared gradient norm falls below the threshold
    /// (exact for finite supports, Monte Carlo estimate otherwise).
    GradNormBelow(f64),
    /// Stop once the distance to the reference barycenter falls below the
    /// threshold.
    W2ToReferenceBelow(f64),
}

/// Configuration of a solver run.
#[derive(Debug, Clone)]
pub struct SolverConfig<M> {
    pub schedule: StepSchedule,
    pub schedule_mode: ScheduleMode,
    pub batch_size: BatchSize,
    pub max_steps: usize,
    pub seed: u64,
    /// Record a measure snapshot every `stride` steps (plus the final
    /// iterate); `None` keeps only the final measure.
    pub snapshot_stride: Option<usize>,
    pub reference: Option<M>,
    pub stopping: StoppingRule,
    /// Sample count for Monte Carlo scalar evaluation on generative
    /// populations (used by the gradient-norm stopping rule).
    pub eval_samples: usize,
}

impl<M> SolverConfig<M> {
    pub fn new(schedule: StepSchedule, max_steps: usize, seed: u64) -> Self {
        Self {
            schedule,
            schedule_mode: ScheduleMode::Any,
            batch_size: BatchSize::Constant(1),
            max_steps,
            seed,
            snapshot_stride: None,
            reference: None,
            stopping: StoppingRule::MaxSteps,
            eval_samples: 128,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_steps == 0 {
            return Err(SolverError::InvalidConfig("max_steps must be >= 1".into()));
        }
        self.batch_size.validate()?;
        self.schedule
            .validate(self.schedule_mode)
            .map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
        if matches!(self.stopping, StoppingRule::W2ToReferenceBelow(_)) && self.reference.is_none()
        {
            return Err(SolverError::InvalidConfig(
                "w2-to-reference stopping needs a reference barycenter".into(),
            ));
        }
        if matches!(self.stopping, StoppingRule::GradNormBelow(_)) && self.eval_samples < 2 {
            return Err(SolverError::InvalidConfig(
                "gradient stopping on generative populations needs eval_samples >= 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Runs the batch SGD recursion
/// `mu_{k+1} = step(mu_k, batch_k, gamma_k)` and records the trajectory.
///
/// The initial iterate must be a member of the same parametric family as
/// the population support (matching grid size, dimension, copula or
/// generator); the closed-form steps keep every later iterate inside it.
///
/// Scalars are recorded at every iterate including the initial point, so the
/// series has `steps_executed + 1` rows. The record is a deterministic
/// function of `(seed, config, population, mu0)` except for the wall time.
pub fn run<F: BarycenterFamily>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu0: &F::Measure,
    cfg: &SolverConfig<F::Measure>,
) -> Result<RunRecord<F::Measure>, SolverError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut rng = rng_from_seed(cfg.seed);
    let finite = pi.as_finite();
    let mut mu = mu0.clone();
    let mut scalars: Vec<StepScalars> = Vec::new();
    let mut snapshots: Vec<Snapshot<F::Measure>> = Vec::new();

    let mut k = 0usize;
    loop {
        let f = match finite {
            Some(fs) => Some(family.functional_f(&mu, fs)?),
            None => None,
        };
        let grad = match finite {
            Some(fs) => Some(family.grad_norm_sq(&mu, fs)?),
            None => None,
        };
        let w2_ref = match cfg.reference.as_ref() {
            Some(r) => Some(family.w2(&mu, r)?),
            None => None,
        };
        scalars.push(StepScalars {
            k,
            gamma: cfg.schedule.gamma(k),
            batch_size: cfg.batch_size.at(k),
            f,
            grad_norm_sq: grad,
            w2_ref,
        });
        if let Some(stride) = cfg.snapshot_stride {
            if stride > 0 && k.is_multiple_of(stride) {
                snapshots.push(Snapshot {
                    k,
                    measure: mu.clone(),
                });
            }
        }

        let stop = if k >= cfg.max_steps {
            true
        } else {
            match cfg.stopping {
                StoppingRule::MaxSteps => false,
                StoppingRule::GradNormBelow(tau) => {
                    let g = match grad {
                        Some(g) => g,
                        None => {
                            // Generative population: estimate on a stream
                            // disjoint from the sampling stream so the
                            // trajectory itself is unaffected.
                            let mut eval_rng = rng_from_seed(cfg.seed);
                            eval_rng.set_stream(k as u64 + 1);
                            mc_grad_norm(family, pi, &mu, cfg.eval_samples, &mut eval_rng)?
                        }
                    };
                    g < tau
                }
                StoppingRule::W2ToReferenceBelow(tau) => {
                    w2_ref.expect("validated: reference present") < tau
                }
            }
        };
        if stop {
            break;
        }

        let batch = sample_batch(pi, cfg.batch_size.at(k), &mut rng)?;
        mu = family.sgd_step(&mu, &batch, cfg.schedule.gamma(k))?;
        k += 1;
    }

    if let Some(stride) = cfg.snapshot_stride {
        if stride > 0 && !k.is_multiple_of(stride) {
            snapshots.push(Snapshot {
                k,
                measure: mu.clone(),
            });
        }
    }
    Ok(RunRecord {
        family: family.name().to_string(),
        schedule: cfg.schedule.describe(),
        seed: cfg.seed,
        steps_executed: k,
        scalars,
        snapshots,
        final_measure: mu,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Plug-in Monte Carlo estimate of the squared gradient norm (biased up by
/// the `O(1/n)` variance term; good enough for stopping decisions).
fn mc_grad_norm<F: BarycenterFamily>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu: &F::Measure,
    n: usize,
    rng: &mut RngState,
) -> Result<f64, SolverError> {
    let sample = sample_batch(pi, n.max(2), rng)?;
    let empirical = FiniteSupport::uniform(sample)?;
    Ok(family.grad_norm_sq(mu, &empirical)?)
}

/// Monte Carlo estimates of `F(mu)` and the squared gradient norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub f: f64,
    pub f_se: f64,
    pub grad_norm_sq: f64,
    pub grad_se: f64,
    pub n_mc: usize,
}

/// Splits `n` into at most 16 groups of at least 2 samples each.
fn group_sizes(n: usize) -> Vec<usize> {
    let groups = (n / 2).clamp(1, 16);
    let base = n / groups;
    let extra = n % groups;
    (0..groups)
        .map(|b| base + usize::from(b < extra))
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimation of the barycenter functional and the squared
/// gradient norm at `mu`, with standard errors.
///
/// `F` is the per-sample mean of `W2^2(mu, m)/2`. The squared gradient norm
/// uses the debiased pair statistic per sample group, so its expectation is
/// exactly the population value and the group spread yields the standard
/// error; at an exact barycenter the estimate fluctuates around zero instead
/// of sitting at the `O(1/n)` plug-in bias.
pub fn estimate_f_and_gradnorm<F: BarycenterFamily>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu: &F::Measure,
    n_mc: usize,
    seed: u64,
) -> Result<Estimates, SolverError> {
    if n_mc < 2 {
        return Err(SolverError::InvalidConfig("n_mc must be >= 2".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut f_values = Vec::with_capacity(n_mc);
    let mut group_grads = Vec::new();
    for size in group_sizes(n_mc) {
        let group = sample_batch(pi, size, &mut rng)?;
        let mut sum_norm_sq = 0.0;
        for m in &group {
            let d = family.w2(mu, m)?;
            f_values.push(0.5 * d * d);
            sum_norm_sq += d * d;
        }
        let n_g = size as f64;
        let plug_in = family.grad_norm_sq(mu, &FiniteSupport::uniform(group)?)?;
        group_grads.push((n_g * n_g * plug_in - sum_norm_sq) / (n_g * (n_g - 1.0)));
    }
    let (f, f_se) = mean_and_se(&f_values);
    let (grad, grad_se) = mean_and_se(&group_grads);
    Ok(Estimates {
        f,
        f_se,
        grad_norm_sq: grad,
        grad_se,
        n_mc,
    })
}

/// Monte Carlo estimate of the integrated variance of the batch gradient
/// estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub se: f64,
    pub batch_size: usize,
    pub n_mc: usize,
}

/// Estimates the integrated variance of the `S`-sample gradient estimator
/// `-(1/S) sum_i (T_mu^{m_i} - I)` at `mu` from `n_mc` independent batches.
///
/// Within each sample group the estimator is the L2-valued sample variance
/// `(T/(T-1)) * (mean_t |D_t|^2 - |pooled mean|^2)` over the per-batch mean
/// displacements `D_t`, each norm evaluated in family coordinates through
/// [`BarycenterFamily::grad_norm_sq`] against the empirical population of
/// the batch (resp. the pooled group).
pub fn integrated_variance<F: BarycenterFamily>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu: &F::Measure,
    s: usize,
    n_mc: usize,
    seed: u64,
) -> Result<VarianceEstimate, SolverError> {
    if s == 0 {
        return Err(SolverError::InvalidConfig("batch size must be >= 1".into()));
    }
    if n_mc < 2 {
        return Err(SolverError::InvalidConfig("n_mc must be >= 2".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut group_estimates = Vec::new();
    for t_b in group_sizes(n_mc) {
        let mut per_batch = Vec::with_capacity(t_b);
        let mut pooled: Vec<F::Measure> = Vec::with_capacity(t_b * s);
        for _ in 0..t_b {
            let batch = sample_batch(pi, s, &mut rng)?;
            per_batch
                .push(family.grad_norm_sq(mu, &FiniteSupport::uniform(batch.clone())?)?);
            pooled.extend(batch);
        }
        let pooled_norm = family.grad_norm_sq(mu, &FiniteSupport::uniform(pooled)?)?;
        let t = t_b as f64;
        let mean_norm = per_batch.iter().sum::<f64>() / t;
        group_estimates.push((t / (t - 1.0)) * (mean_norm - pooled_norm));
    }
    let (variance, se) = mean_and_se(&group_estimates);
    Ok(VarianceEstimate {
        variance,
        se,
        batch_size: s,
        n_mc,
    })
}

/// Outcome of the one-step descent check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentReport {
    /// Monte Carlo estimate of `E[F(mu_{k+1}) - F(mu_k) | mu_k]`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `gamma^2 F(mu_k) - gamma |F'(mu_k)|^2`.
    pub rhs: f64,
    /// `lhs <= rhs + 3 lhs_se`.
    pub pass: bool,
}

/// Verifies the expected one-step descent bound at `mu` by resampling a
/// single step `n_mc` times.
///
/// The bound conditions on the current iterate, so each trial restarts from
/// `mu` with one fresh sample; nothing is averaged along a trajectory. The
/// population must be finitely supported: the right-hand side uses the exact
/// functional and gradient norm. A single-sample step only takes one of
/// finitely many values, so trials reduce to multinomial index counts.
pub fn verify_descent_inequality<F: BarycenterFamily>(
    family: &F,
    pi: &FiniteSupport<F::Measure>,
    mu: &F::Measure,
    gamma: f64,
    n_mc: usize,
    seed: u64,
) -> Result<DescentReport, SolverError> {
    if n_mc < 100 {
        return Err(SolverError::InvalidConfig(
            "descent verification needs n_mc >= 100".into(),
        ));
    }
    let f0 = family.functional_f(mu, pi)?;
    let g0 = family.grad_norm_sq(mu, pi)?;
    let rhs = gamma * gamma * f0 - gamma * g0;

    let deltas: Vec<f64> = pi
        .measures()
        .map(|m| {
            let next = family.sgd_step(mu, std::slice::from_ref(m), gamma)?;
            Ok(family.functional_f(&next, pi)? - f0)
        })
        .collect::<Result<_, SolverError>>()?;

    let mut counts = vec![0usize; pi.len()];
    let mut rng = rng_from_seed(seed);
    for _ in 0..n_mc {
        use rand::Rng;
        let u: f64 = rng.gen();
        counts[pi.index_for(u)] += 1;
    }
    let n = n_mc as f64;
    let lhs: f64 = counts
        .iter()
        .zip(&deltas)
        .map(|(c, d)| *c as f64 / n * d)
        .sum();
    let second_moment: f64 = counts
        .iter()
        .zip(&deltas)
        .map(|(c, d)| *c as f64 / n * d * d)
        .sum();
    let var = (second_moment - lhs * lhs).max(0.0) * n / (n - 1.0);
    let lhs_se = (var / n).sqrt();
    Ok(DescentReport {
        lhs,
        lhs_se,
        rhs,
        pass: lhs <= rhs + 3.0 * lhs_se,
    })
}
