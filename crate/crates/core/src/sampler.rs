//! Single-site random-walk Metropolis-Hastings on the positive half-line.
//!
//! Each sweep visits the free coordinates in order and proposes
//! `theta_k' = theta_k * exp(s_k z)` with `z ~ N(0, 1)`. The log-normal
//! proposal is asymmetric, so the acceptance ratio carries the Jacobian term
//! `ln theta_k' - ln theta_k = s_k z`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::integrator::IntegrationError;
use crate::model::{ParameterLayout, ParameterSet};
use crate::posterior::{LogDensity, Posterior, PosteriorError};

/// Per-coordinate acceptance rate the tuner steers towards.
pub const TARGET_ACCEPTANCE: f64 = 0.30;
pub const MIN_SCALE: f64 = 1e-6;
pub const MAX_SCALE: f64 = 10.0;

/// A log-density over a real vector, some of whose coordinates may be frozen.
pub trait LogTarget {
    type Error;

    fn dim(&self) -> usize;

    fn log_density(&self, theta: &[f64]) -> Result<LogDensity, Self::Error>;

    /// Frozen coordinates are never proposed.
    fn is_free(&self, _k: usize) -> bool {
        true
    }

    fn parameter_names(&self) -> Vec<String> {
        (0..self.dim()).map(|k| format!("theta{k}")).collect()
    }
}

impl LogTarget for Posterior {
    type Error = PosteriorError;

    fn dim(&self) -> usize {
        ParameterLayout::for_schedule(self.schedule()).dim()
    }

    /// A proposal whose trajectory blows up or goes negative has zero density.
    fn log_density(&self, theta: &[f64]) -> Result<LogDensity, PosteriorError> {
        let layout = ParameterLayout::for_schedule(self.schedule());
        let params = ParameterSet::from_flat(layout, theta)?;
        match self.log_posterior(&params) {
            Err(PosteriorError::Integration(
                IntegrationError::NonFinite { .. } | IntegrationError::Negative { .. },
            )) => Ok(LogDensity::NEG_INFINITY),
            other => other,
        }
    }

    fn is_free(&self, k: usize) -> bool {
        let layout = ParameterLayout::for_schedule(self.schedule());
        k != layout.rho_index() || self.vaccine_active()
    }

    fn parameter_names(&self) -> Vec<String> {
        ParameterLayout::for_schedule(self.schedule()).names()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Retained draws.
    pub n_samples: usize,
    /// Sweeps discarded after tuning.
    pub n_burnin: usize,
    pub tune_rounds: usize,
    /// Sweeps per tuning round.
    pub tune_length: usize,
    /// Initial log-scale step size per coordinate.
    pub proposal_scales: Vec<f64>,
    pub seed: u64,
    /// ChaCha stream, so chains sharing a seed stay independent.
    pub stream: u64,
}

impl SamplerConfig {
    /// 30,000 retained draws, 5,000 burn-in, 20 tuning rounds of 250 sweeps,
    /// initial scales of 0.1.
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            n_samples: 30_000,
            n_burnin: 5_000,
            tune_rounds: 20,
            tune_length: 250,
            proposal_scales: vec![0.1; dim],
            seed,
            stream: 0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), ConfigError> {
        if self.n_samples == 0 {
            return Err(ConfigError::EmptyChain);
        }
        if self.tune_rounds > 0 && self.tune_length == 0 {
            return Err(ConfigError::EmptyTuningRound);
        }
        if self.proposal_scales.len() != dim {
            return Err(ConfigError::ScaleCount {
                expected: dim,
                found: self.proposal_scales.len(),
            });
        }
        if !self
            .proposal_scales
            .iter()
            .all(|s| *s > 0.0 && s.is_finite())
        {
            return Err(ConfigError::NonPositiveScale);
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigError {
    EmptyChain,
    EmptyTuningRound,
    ScaleCount { expected: usize, found: usize },
    StartLength { expected: usize, found: usize },
    NonPositiveScale,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::EmptyChain => write!(f, "empty chain requested"),
            ConfigError::EmptyTuningRound => write!(f, "tune_length must be positive"),
            ConfigError::ScaleCount { expected, found } => {
                write!(f, "{found} proposal scales given for {expected} parameters")
            }
            ConfigError::StartLength { expected, found } => {
                write!(
                    f,
                    "starting point has {found} values for {expected} parameters"
                )
            }
            ConfigError::NonPositiveScale => write!(f, "proposal scales must be positive"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplerError<E> {
    Config(ConfigError),
    /// A free coordinate of the starting point is not strictly positive.
    InvalidStart {
        index: usize,
        value: f64,
    },
    /// The starting point has zero posterior density.
    StartOutsideSupport,
    Target(E),
}

impl<E: fmt::Display> fmt::Display for SamplerError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerError::Config(e) => write!(f, "{e}"),
            SamplerError::InvalidStart { index, value } => write!(
                f,
                "starting value {value} of parameter {index} must be positive and finite"
            ),
            SamplerError::StartOutsideSupport => {
                write!(f, "starting point has -infinite log-posterior")
            }
            SamplerError::Target(e) => write!(f, "{e}"),
        }
    }
}

impl<E> From<ConfigError> for SamplerError<E> {
    fn from(e: ConfigError) -> Self {
        SamplerError::Config(e)
    }
}

/// Retained draws of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub log_posteriors: Vec<f64>,
    /// Accepted moves per coordinate over the retained sweeps.
    pub accept_counts: Vec<u64>,
    /// State immediately before the first retained sweep.
    pub start: Vec<f64>,
    /// Proposal scales used for the retained sweeps.
    pub scales: Vec<f64>,
}

impl Chain {
    /// Wraps externally produced draws. Acceptance counts are reconstructed
    /// from changes between consecutive draws.
    pub fn from_draws(names: Vec<String>, draws: Vec<Vec<f64>>, log_posteriors: Vec<f64>) -> Self {
        let dim = names.len();
        let start = draws
            .first()
            .cloned()
            .unwrap_or_else(|| vec![f64::NAN; dim]);
        let mut accept_counts = vec![0; dim];
        for w in draws.windows(2) {
            for k in 0..dim {
                if w[0][k] != w[1][k] {
                    accept_counts[k] += 1;
                }
            }
        }
        Self {
            names,
            draws,
            log_posteriors,
            accept_counts,
            start,
            scales: vec![f64::NAN; dim],
        }
    }

    /// Concatenates chains over the same parameters.
    pub fn pooled(chains: &[Chain]) -> Option<Chain> {
        let first = chains.first()?;
        if chains.iter().any(|c| c.names != first.names) {
            return None;
        }
        let mut out = first.clone();
        for c in &chains[1..] {
            out.draws.extend(c.draws.iter().cloned());
            out.log_posteriors.extend_from_slice(&c.log_posteriors);
            for (a, b) in out.accept_counts.iter_mut().zip(&c.accept_counts) {
                *a += b;
            }
        }
        Some(out)
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.draws.iter().map(|d| d[k]).collect())
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        self.accept_counts.iter().map(|c| *c as f64 / n).collect()
    }

    /// Every `every`-th draw as a parameter set, starting with the first.
    pub fn parameter_sets(
        &self,
        every: usize,
    ) -> Result<Vec<ParameterSet>, crate::model::ModelError> {
        let layout = ParameterLayout::from_names(&self.names)?;
        self.draws
            .iter()
            .step_by(every.max(1))
            .map(|d| ParameterSet::from_flat(layout, d))
            .collect()
    }
}

/// Result of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub theta: Vec<f64>,
    pub log_density: LogDensity,
    pub accepted: Vec<bool>,
}

/// Metropolis acceptance test with uniform draw `u` in `[0, 1)`.
#[inline]
pub fn accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || libm::log(u) < log_ratio
}

/// One single-site sweep over all free coordinates of `target`.
pub fn mh_step<T, R>(
    target: &T,
    current: &[f64],
    current_lp: LogDensity,
    scales: &[f64],
    rng: &mut R,
) -> Result<Step, T::Error>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    let mut theta = current.to_vec();
    let mut lp = current_lp;
    let mut accepted = vec![false; theta.len()];
    sweep(target, &mut theta, &mut lp, scales, rng, &mut accepted)?;
    Ok(Step {
        theta,
        log_density: lp,
        accepted,
    })
}

fn sweep<T, R>(
    target: &T,
    theta: &mut [f64],
    lp: &mut LogDensity,
    scales: &[f64],
    rng: &mut R,
    accepted: &mut [bool],
) -> Result<(), T::Error>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    for k in 0..theta.len() {
        accepted[k] = false;
        if !target.is_free(k) {
            continue;
        }
        let z: f64 = rng.sample(StandardNormal);
        let step = scales[k] * z;
        let old = theta[k];
        theta[k] = old * libm::exp(step);
        let proposed = target.log_density(theta)?;
        let log_ratio = proposed.value() - lp.value() + step;
        let u: f64 = rng.random();
        if proposed.is_finite() && accept(log_ratio, u) {
            *lp = proposed;
            accepted[k] = true;
        } else {
            theta[k] = old;
        }
    }
    Ok(())
}

struct State {
    theta: Vec<f64>,
    lp: LogDensity,
    scales: Vec<f64>,
}

fn start_state<T: LogTarget + ?Sized>(
    config: &SamplerConfig,
    target: &T,
    init: &[f64],
) -> Result<State, SamplerError<T::Error>> {
    config.validate(target.dim())?;
    if init.len() != target.dim() {
        return Err(ConfigError::StartLength {
            expected: target.dim(),
            found: init.len(),
        }
        .into());
    }
    for (k, v) in init.iter().enumerate() {
        if target.is_free(k) && !(*v > 0.0 && v.is_finite()) {
            return Err(SamplerError::InvalidStart {
                index: k,
                value: *v,
            });
        }
    }
    let lp = target.log_density(init).map_err(SamplerError::Target)?;
    if !lp.is_finite() {
        return Err(SamplerError::StartOutsideSupport);
    }
    Ok(State {
        theta: init.to_vec(),
        lp,
        scales: config.proposal_scales.clone(),
    })
}

/// Multiplies each free scale by `exp(rate - TARGET_ACCEPTANCE)` and clamps.
pub fn adapt_scales<T: LogTarget + ?Sized>(target: &T, scales: &mut [f64], rates: &[f64]) {
    for (k, (s, a)) in scales.iter_mut().zip(rates).enumerate() {
        if target.is_free(k) {
            *s = (*s * libm::exp(a - TARGET_ACCEPTANCE)).clamp(MIN_SCALE, MAX_SCALE);
        }
    }
}

fn tune_state<T, R>(
    config: &SamplerConfig,
    target: &T,
    state: &mut State,
    rng: &mut R,
) -> Result<(), T::Error>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    let dim = state.theta.len();
    let mut accepted = vec![false; dim];
    for _ in 0..config.tune_rounds {
        let mut counts = vec![0u64; dim];
        for _ in 0..config.tune_length {
            sweep(
                target,
                &mut state.theta,
                &mut state.lp,
                &state.scales,
                rng,
                &mut accepted,
            )?;
            for (c, a) in counts.iter_mut().zip(&accepted) {
                *c += u64::from(*a);
            }
        }
        let rates: Vec<f64> = counts
            .iter()
            .map(|c| *c as f64 / config.tune_length as f64)
            .collect();
        adapt_scales(target, &mut state.scales, &rates);
    }
    Ok(())
}

/// Runs the tuning rounds from `init` and returns the adapted scales. All
/// tuning draws are discarded.
pub fn tune<T: LogTarget + ?Sized>(
    config: &SamplerConfig,
    target: &T,
    init: &[f64],
) -> Result<Vec<f64>, SamplerError<T::Error>> {
    let mut state = start_state(config, target, init)?;
    let mut rng = config.rng();
    tune_state(config, target, &mut state, &mut rng).map_err(SamplerError::Target)?;
    Ok(state.scales)
}

/// Tuning, burn-in, then `n_samples` retained sweeps. The seed, stream,
/// config and target fully determine the output.
pub fn run_chain<T: LogTarget + ?Sized>(
    config: &SamplerConfig,
    target: &T,
    init: &[f64],
) -> Result<Chain, SamplerError<T::Error>> {
    let mut state = start_state(config, target, init)?;
    let mut rng = config.rng();
    tune_state(config, target, &mut state, &mut rng).map_err(SamplerError::Target)?;

    let dim = state.theta.len();
    let mut accepted = vec![false; dim];
    for _ in 0..config.n_burnin {
        sweep(
            target,
            &mut state.theta,
            &mut state.lp,
            &state.scales,
            &mut rng,
            &mut accepted,
        )
        .map_err(SamplerError::Target)?;
    }

    let start = state.theta.clone();
    let mut draws = Vec::with_capacity(config.n_samples);
    let mut log_posteriors = Vec::with_capacity(config.n_samples);
    let mut accept_counts = vec![0u64; dim];
    for _ in 0..config.n_samples {
        sweep(
            target,
            &mut state.theta,
            &mut state.lp,
            &state.scales,
            &mut rng,
            &mut accepted,
        )
        .map_err(SamplerError::Target)?;
        for (c, a) in accept_counts.iter_mut().zip(&accepted) {
            *c += u64::from(*a);
        }
        draws.push(state.theta.clone());
        log_posteriors.push(state.lp.value());
    }

    Ok(Chain {
        names: target.parameter_names(),
        draws,
        log_posteriors,
        accept_counts,
        start,
        scales: state.scales,
    })
}
