//! Rayon versions of the per-chain and per-draw loops. Results are collected
//! in index order, so output does not depend on thread scheduling.

use rayon::prelude::*;

use seirdv_core::projection::{
    death_paths, draw_rng, predictive_sample, reproduction_path, AnalysisError, CounterfactualBands,
};
use seirdv_core::{
    BandSeries, Chain, LogTarget, ParameterSet, PredictiveBands, Projection, SamplerConfig,
    SamplerError,
};

/// Runs `chains` chains from `init`; chain `c` uses `base` with stream `c`.
pub fn run_chains<T>(
    base: &SamplerConfig,
    target: &T,
    init: &[f64],
    chains: usize,
) -> Result<Vec<Chain>, SamplerError<T::Error>>
where
    T: LogTarget + Sync,
    T::Error: Send,
{
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let cfg = SamplerConfig {
                stream: c as u64,
                ..base.clone()
            };
            seirdv_core::run_chain(&cfg, target, init)
        })
        .collect()
}

pub fn effective_reproduction(
    draws: &[ParameterSet],
    proj: &Projection<'_>,
) -> Result<BandSeries, AnalysisError> {
    let paths = draws
        .par_iter()
        .map(|p| Ok(reproduction_path(p, proj.sched, &proj.trajectory(p)?)))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    BandSeries::from_paths(&paths)
}

pub fn posterior_predictive(
    draws: &[ParameterSet],
    proj: &Projection<'_>,
    seed: u64,
) -> Result<PredictiveBands, AnalysisError> {
    let samples = draws
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let traj = proj.trajectory(p)?;
            Ok(predictive_sample(&traj, &mut draw_rng(seed, i as u64)))
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    PredictiveBands::from_samples(&samples)
}

pub fn counterfactual_deaths(
    draws: &[ParameterSet],
    proj: &Projection<'_>,
) -> Result<CounterfactualBands, AnalysisError> {
    let paths = draws
        .par_iter()
        .map(|p| death_paths(p, proj))
        .collect::<Result<Vec<_>, _>>()?;
    CounterfactualBands::from_paths(&paths)
}
