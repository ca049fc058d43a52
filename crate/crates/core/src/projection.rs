//! Trajectory-valued posterior analyses: effective reproduction number,
//! posterior predictive bands, the no-vaccine counterfactual and pseudo-R².
//!
//! Every analysis is a per-draw computation followed by pointwise quantile
//! bands across draws. The per-draw pieces are public so callers can spread
//! draws over threads and still reduce in draw order.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::integrator::{integrate, IntegrationError, Trajectory};
use crate::model::{
    alpha_at, gamma_at, regime_index, rho_at, CompartmentState, InterventionSchedule, ModelError,
    ParameterSet,
};
use crate::observed::ObservedSeries;
use crate::posterior::Series;
use crate::summary::{quantile, sorted};

/// Draws kept per trajectory-valued analysis: every 10th.
pub const DEFAULT_THIN: usize = 10;

/// Pointwise 2.5% / 50% / 97.5% envelope over the day grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BandSeries {
    pub t: Vec<u32>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BandSeries {
    /// Builds bands from one path per draw; all paths share the grid `0..len`.
    pub fn from_paths(paths: &[Vec<f64>]) -> Result<Self, AnalysisError> {
        let first = paths.first().ok_or(AnalysisError::NoDraws)?;
        let n = first.len();
        if paths.iter().any(|p| p.len() != n) {
            return Err(AnalysisError::LengthMismatch);
        }
        let mut band = BandSeries {
            t: (0..n as u32).collect(),
            lower: Vec::with_capacity(n),
            median: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
        };
        let mut column = Vec::with_capacity(paths.len());
        for day in 0..n {
            column.clear();
            column.extend(paths.iter().map(|p| p[day]));
            let s = sorted(&column);
            band.lower.push(quantile(&s, 0.025));
            band.median.push(quantile(&s, 0.5));
            band.upper.push(quantile(&s, 0.975));
        }
        Ok(band)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn is_ordered(&self) -> bool {
        (0..self.len()).all(|i| self.lower[i] <= self.median[i] && self.median[i] <= self.upper[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisError {
    NoDraws,
    LengthMismatch,
    ZeroVariance(usize),
    Model(ModelError),
    Integration(IntegrationError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::NoDraws => write!(f, "no posterior draws to analyse"),
            AnalysisError::LengthMismatch => write!(f, "series lengths differ"),
            AnalysisError::ZeroVariance(i) => {
                write!(f, "observed series {i} has zero variance")
            }
            AnalysisError::Model(e) => write!(f, "{e}"),
            AnalysisError::Integration(e) => write!(f, "integration failed: {e}"),
        }
    }
}

impl From<IntegrationError> for AnalysisError {
    fn from(e: IntegrationError) -> Self {
        AnalysisError::Integration(e)
    }
}

impl From<ModelError> for AnalysisError {
    fn from(e: ModelError) -> Self {
        AnalysisError::Model(e)
    }
}

/// Simulation settings shared by the trajectory analyses.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection<'a> {
    pub sched: &'a InterventionSchedule,
    pub init: &'a CompartmentState,
    pub t_end: u32,
    pub substeps: u32,
}

impl Projection<'_> {
    pub fn trajectory(&self, params: &ParameterSet) -> Result<Trajectory, AnalysisError> {
        params.check_schedule(self.sched)?;
        Ok(integrate(
            self.init,
            params,
            self.sched,
            self.t_end,
            self.substeps,
        )?)
    }
}

/// `alpha(t) S / (beta + gamma(t) + rho(t))` for susceptibles `s` at day `t`.
pub fn reproduction_number(
    t: f64,
    s: f64,
    params: &ParameterSet,
    sched: &InterventionSchedule,
) -> f64 {
    alpha_at(t, params, sched) * s
        / (params.beta + gamma_at(t, params, sched) + rho_at(t, params, sched))
}

/// Effective reproduction number along an integrated trajectory.
pub fn reproduction_path(
    params: &ParameterSet,
    sched: &InterventionSchedule,
    traj: &Trajectory,
) -> Vec<f64> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| reproduction_number(f64::from(*t), x.s, params, sched))
        .collect()
}

pub fn effective_reproduction(
    draws: &[ParameterSet],
    proj: &Projection<'_>,
) -> Result<BandSeries, AnalysisError> {
    let paths = draws
        .iter()
        .map(|p| Ok(reproduction_path(p, proj.sched, &proj.trajectory(p)?)))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    BandSeries::from_paths(&paths)
}

/// Generator for draw `index` of an analysis seeded with `seed`; independent
/// of the order in which draws are processed.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Poisson variate with mean `mean`; a non-positive mean gives 0.
pub fn poisson_variate<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    match Poisson::new(mean) {
        Ok(dist) => dist.sample(rng),
        Err(_) => 0.0,
    }
}

/// Poisson observations of I, R_I, D and V (in [`Series::ALL`] order) drawn
/// around the means of one trajectory.
pub fn predictive_sample<R: Rng + ?Sized>(traj: &Trajectory, rng: &mut R) -> [Vec<f64>; 4] {
    let mut out: [Vec<f64>; 4] = Default::default();
    for x in &traj.states {
        let a = x.to_array();
        for (series, path) in Series::ALL.iter().zip(out.iter_mut()) {
            path.push(poisson_variate(a[series.compartment()], rng));
        }
    }
    out
}

/// Predictive bands for I, R_I, D and V.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveBands {
    pub series: [BandSeries; 4],
}

impl PredictiveBands {
    pub fn get(&self, s: Series) -> &BandSeries {
        &self.series[s as usize]
    }

    pub fn from_samples(samples: &[[Vec<f64>; 4]]) -> Result<Self, AnalysisError> {
        let band = |k: usize| {
            let paths: Vec<Vec<f64>> = samples.iter().map(|s| s[k].clone()).collect();
            BandSeries::from_paths(&paths)
        };
        Ok(Self {
            series: [band(0)?, band(1)?, band(2)?, band(3)?],
        })
    }
}

pub fn posterior_predictive(
    draws: &[ParameterSet],
    proj: &Projection<'_>,
    seed: u64,
) -> Result<PredictiveBands, AnalysisError> {
    let samples = draws
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let traj = proj.trajectory(p)?;
            Ok(predictive_sample(&traj, &mut draw_rng(seed, i as u64)))
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    PredictiveBands::from_samples(&samples)
}

/// Parameters of the no-vaccine scenario: `rho = 0`, and every alpha and
/// gamma regime starting at or after the activation day replaced by the
/// regime in force just before it.
pub fn counterfactual_parameters(
    params: &ParameterSet,
    sched: &InterventionSchedule,
) -> ParameterSet {
    let before = f64::from(sched.vaccine_day) - 0.5;
    let freeze = |values: &[f64], days: &[u32]| -> Vec<f64> {
        let k = regime_index(before, days).min(values.len() - 1);
        values
            .iter()
            .enumerate()
            .map(|(j, v)| if j > k { values[k] } else { *v })
            .collect()
    };
    ParameterSet {
        alpha: freeze(&params.alpha, &sched.alpha_days),
        gamma: freeze(&params.gamma, &sched.gamma_days),
        rho: 0.0,
        ..params.clone()
    }
}

pub fn counterfactual_trajectory(
    params: &ParameterSet,
    proj: &Projection<'_>,
) -> Result<Trajectory, AnalysisError> {
    proj.trajectory(&counterfactual_parameters(params, proj.sched))
}

/// Cumulative deaths without vaccination, and the excess over the factual
/// run (counterfactual minus factual).
#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualBands {
    pub deaths: BandSeries,
    pub averted: BandSeries,
}

/// Factual and counterfactual cumulative-death paths for one draw.
pub fn death_paths(
    params: &ParameterSet,
    proj: &Projection<'_>,
) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let factual = proj.trajectory(params)?.component(5);
    let counterfactual = counterfactual_trajectory(params, proj)?.component(5);
    Ok((factual, counterfactual))
}

impl CounterfactualBands {
    pub fn from_paths(paths: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, AnalysisError> {
        let deaths: Vec<Vec<f64>> = paths.iter().map(|(_, cf)| cf.clone()).collect();
        let averted: Vec<Vec<f64>> = paths
            .iter()
            .map(|(f, cf)| cf.iter().zip(f).map(|(c, f)| c - f).collect())
            .collect();
        Ok(Self {
            deaths: BandSeries::from_paths(&deaths)?,
            averted: BandSeries::from_paths(&averted)?,
        })
    }
}

pub fn counterfactual_deaths(
    draws: &[ParameterSet],
    proj: &Projection<'_>,
) -> Result<CounterfactualBands, AnalysisError> {
    let paths = draws
        .iter()
        .map(|p| death_paths(p, proj))
        .collect::<Result<Vec<_>, _>>()?;
    CounterfactualBands::from_paths(&paths)
}

/// `1 - SSE / SST` pooled over `(observed, predicted)` series, where SST
/// measures each series against its own mean.
pub fn pseudo_r2(series: &[(&[f64], &[f64])]) -> Result<f64, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::NoDraws);
    }
    let (mut sse, mut sst) = (0.0, 0.0);
    for (i, (obs, pred)) in series.iter().enumerate() {
        if obs.len() != pred.len() || obs.is_empty() {
            return Err(AnalysisError::LengthMismatch);
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let ss: f64 = obs.iter().map(|y| (y - mean) * (y - mean)).sum();
        if ss == 0.0 {
            return Err(AnalysisError::ZeroVariance(i));
        }
        sst += ss;
        sse += obs
            .iter()
            .zip(*pred)
            .map(|(y, p)| (y - p) * (y - p))
            .sum::<f64>();
    }
    Ok(1.0 - sse / sst)
}

/// Observed and predicted values of one series.
pub type SeriesPair = (Vec<f64>, Vec<f64>);

/// Observed/predicted pairs for every series, V restricted to its observed
/// days. Predictions are indexed by day.
pub fn observed_pairs(
    data: &ObservedSeries,
    predicted: [&[f64]; 4],
) -> Result<[SeriesPair; 4], AnalysisError> {
    let n = data.len();
    if predicted.iter().any(|p| p.len() < n) {
        return Err(AnalysisError::LengthMismatch);
    }
    let full = |obs: &[u64], pred: &[f64]| -> (Vec<f64>, Vec<f64>) {
        (obs.iter().map(|y| *y as f64).collect(), pred[..n].to_vec())
    };
    let (v_obs, v_pred) = data
        .vaccinated()
        .iter()
        .enumerate()
        .filter_map(|(t, v)| v.map(|v| (v as f64, predicted[3][t])))
        .unzip();
    Ok([
        full(data.infected(), predicted[0]),
        full(data.recovered(), predicted[1]),
        full(data.deaths(), predicted[2]),
        (v_obs, v_pred),
    ])
}

/// Pseudo-R² of the predictive medians against `data`; V is skipped when it
/// has no observations.
pub fn pseudo_r2_observed(
    data: &ObservedSeries,
    bands: &PredictiveBands,
) -> Result<f64, AnalysisError> {
    let medians = [0, 1, 2, 3].map(|k| bands.series[k].median.as_slice());
    let pairs = observed_pairs(data, medians)?;
    let refs: Vec<(&[f64], &[f64])> = pairs
        .iter()
        .filter(|(o, _)| !o.is_empty())
        .map(|(o, p)| (o.as_slice(), p.as_slice()))
        .collect();
    pseudo_r2(&refs)
}

/// Simulated observations from the model: one Poisson draw per day around
/// each mean, with V observed from `v_start` on.
pub fn simulate_observed<R: Rng + ?Sized>(
    params: &ParameterSet,
    proj: &Projection<'_>,
    v_start: Option<usize>,
    rng: &mut R,
) -> Result<ObservedSeries, AnalysisError> {
    let traj = proj.trajectory(params)?;
    let [i, r, d, v] = predictive_sample(&traj, rng);
    let to_counts = |x: Vec<f64>| x.into_iter().map(|c| c as u64).collect::<Vec<u64>>();
    let vaccinated = v
        .into_iter()
        .enumerate()
        .map(|(t, c)| v_start.filter(|s| t >= *s).map(|_| c as u64))
        .collect();
    ObservedSeries::new(to_counts(i), to_counts(r), to_counts(d), vaccinated)
        .map_err(|_| AnalysisError::LengthMismatch)
}
