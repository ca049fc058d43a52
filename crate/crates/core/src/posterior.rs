//! Unnormalised log-posterior: independent Poisson observations of the
//! integrated means of I, R_I, D and V, with Exp(1) priors on every rate and
//! a point mass at zero on `rho` while the vaccine is inactive.
//!
//! S, E and R_E are latent. V contributes only from its first observed day.

use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::integrator::{integrate, IntegrationError};
use crate::model::{CompartmentState, InterventionSchedule, ModelError, ParameterSet};
use crate::observed::ObservedSeries;

/// Lower bound applied to a Poisson mean before taking its logarithm.
pub const MEAN_FLOOR: f64 = 1e-10;

/// A natural-log density value; finite or `-inf`, never NaN.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogDensity(f64);

impl LogDensity {
    pub const NEG_INFINITY: LogDensity = LogDensity(f64::NEG_INFINITY);

    /// NaN and `+inf` both map to `-inf`.
    pub fn new(value: f64) -> Self {
        if value.is_nan() || value == f64::INFINITY {
            Self::NEG_INFINITY
        } else {
            Self(value)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl core::ops::Add for LogDensity {
    type Output = LogDensity;

    fn add(self, rhs: LogDensity) -> LogDensity {
        LogDensity::new(self.0 + rhs.0)
    }
}

/// Which observed compartment a count belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Series {
    Infected,
    Recovered,
    Deaths,
    Vaccinated,
}

impl Series {
    pub const ALL: [Series; 4] = [
        Series::Infected,
        Series::Recovered,
        Series::Deaths,
        Series::Vaccinated,
    ];

    /// Index into [`CompartmentState::to_array`].
    pub fn compartment(self) -> usize {
        match self {
            Series::Infected => 2,
            Series::Recovered => 4,
            Series::Deaths => 5,
            Series::Vaccinated => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Series::Infected => "I",
            Series::Recovered => "R_I",
            Series::Deaths => "D",
            Series::Vaccinated => "V",
        }
    }
}

/// One Poisson observation with its cached `ln(y!)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub day: u32,
    pub series: Series,
    pub count: u64,
    ln_factorial: f64,
}

impl Observation {
    pub fn new(day: u32, series: Series, count: u64) -> Self {
        Self {
            day,
            series,
            count,
            ln_factorial: libm::lgamma(count as f64 + 1.0),
        }
    }
}

/// `y ln(phi) - phi - ln(y!)` with `phi` floored at [`MEAN_FLOOR`].
pub fn poisson_log_pmf(count: u64, mean: f64) -> f64 {
    poisson_term(count, mean, libm::lgamma(count as f64 + 1.0))
}

#[inline]
fn poisson_term(count: u64, mean: f64, ln_factorial: f64) -> f64 {
    let phi = mean.max(MEAN_FLOOR);
    let y = count as f64;
    let main = if count == 0 { 0.0 } else { y * libm::log(phi) };
    main - phi - ln_factorial
}

/// Exp(1) log-density summed over every rate. `rho` has an Exp(1) prior
/// when `vaccine_active`, otherwise a point mass at 0.
pub fn log_prior(params: &ParameterSet, vaccine_active: bool) -> LogDensity {
    fn exp1(x: f64) -> f64 {
        if x >= 0.0 && x.is_finite() {
            -x
        } else {
            f64::NEG_INFINITY
        }
    }
    let mut lp: f64 = params.alpha.iter().map(|a| exp1(*a)).sum::<f64>()
        + params.gamma.iter().map(|g| exp1(*g)).sum::<f64>()
        + exp1(params.beta)
        + exp1(params.beta_star)
        + exp1(params.zeta);
    lp += if vaccine_active {
        exp1(params.rho)
    } else if params.rho == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    LogDensity::new(lp)
}

#[derive(Clone, Debug, PartialEq)]
pub enum PosteriorError {
    Model(ModelError),
    Integration(IntegrationError),
    InvalidInit,
    ObservationBeyondHorizon { day: u32, t_end: u32 },
}

impl fmt::Display for PosteriorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PosteriorError::Model(e) => write!(f, "{e}"),
            PosteriorError::Integration(e) => write!(f, "integration failed: {e}"),
            PosteriorError::InvalidInit => {
                write!(f, "initial state must be finite and non-negative")
            }
            PosteriorError::ObservationBeyondHorizon { day, t_end } => {
                write!(
                    f,
                    "observation on day {day} lies beyond the integration horizon {t_end}"
                )
            }
        }
    }
}

impl From<ModelError> for PosteriorError {
    fn from(e: ModelError) -> Self {
        PosteriorError::Model(e)
    }
}

impl From<IntegrationError> for PosteriorError {
    fn from(e: IntegrationError) -> Self {
        PosteriorError::Integration(e)
    }
}

/// Posterior over [`ParameterSet`]s for fixed data, initial state and schedule.
#[derive(Debug)]
pub struct Posterior {
    observations: Vec<Observation>,
    init: CompartmentState,
    sched: InterventionSchedule,
    t_end: u32,
    substeps: u32,
    integrations: AtomicU64,
}

impl Posterior {
    /// Builds the observation list from `data`: I, R_I and D for `t >= 1`,
    /// V for `t >= max(1, v_start)` wherever it is present.
    pub fn new(
        data: &ObservedSeries,
        init: CompartmentState,
        sched: InterventionSchedule,
        substeps: u32,
    ) -> Result<Self, PosteriorError> {
        let mut observations = Vec::with_capacity(4 * data.len());
        for t in 1..data.len() {
            let day = t as u32;
            observations.push(Observation::new(day, Series::Infected, data.infected()[t]));
            observations.push(Observation::new(
                day,
                Series::Recovered,
                data.recovered()[t],
            ));
            observations.push(Observation::new(day, Series::Deaths, data.deaths()[t]));
            if let Some(v) = data.vaccinated()[t] {
                observations.push(Observation::new(day, Series::Vaccinated, v));
            }
        }
        Self::from_observations(observations, data.t_end(), init, sched, substeps)
    }

    /// Builds a posterior from an arbitrary observation list; repeated
    /// observations of the same day are allowed.
    pub fn from_observations(
        observations: Vec<Observation>,
        t_end: u32,
        init: CompartmentState,
        sched: InterventionSchedule,
        substeps: u32,
    ) -> Result<Self, PosteriorError> {
        sched.validate()?;
        if !init.to_array().iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(PosteriorError::InvalidInit);
        }
        if let Some(o) = observations.iter().find(|o| o.day > t_end) {
            return Err(PosteriorError::ObservationBeyondHorizon { day: o.day, t_end });
        }
        Ok(Self {
            observations,
            init,
            sched,
            t_end,
            substeps,
            integrations: AtomicU64::new(0),
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn schedule(&self) -> &InterventionSchedule {
        &self.sched
    }

    pub fn init(&self) -> &CompartmentState {
        &self.init
    }

    pub fn t_end(&self) -> u32 {
        self.t_end
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    /// True when the activation day falls inside the data window, which
    /// gives `rho` a free Exp(1) prior.
    pub fn vaccine_active(&self) -> bool {
        self.sched.vaccine_active_by(self.t_end)
    }

    /// Number of ODE solves performed so far.
    pub fn integration_count(&self) -> u64 {
        self.integrations.load(Ordering::Relaxed)
    }

    pub fn log_prior(&self, params: &ParameterSet) -> LogDensity {
        log_prior(params, self.vaccine_active())
    }

    pub fn log_likelihood(&self, params: &ParameterSet) -> Result<LogDensity, PosteriorError> {
        params.check_schedule(&self.sched)?;
        self.integrations.fetch_add(1, Ordering::Relaxed);
        let traj = integrate(&self.init, params, &self.sched, self.t_end, self.substeps)?;
        let ll = self
            .observations
            .iter()
            .map(|o| {
                let mean = traj.states[o.day as usize].to_array()[o.series.compartment()];
                poisson_term(o.count, mean, o.ln_factorial)
            })
            .sum();
        Ok(LogDensity::new(ll))
    }

    /// Prior plus likelihood; returns `-inf` without integrating when the
    /// prior already rules the parameters out.
    pub fn log_posterior(&self, params: &ParameterSet) -> Result<LogDensity, PosteriorError> {
        params.check_schedule(&self.sched)?;
        let lp = self.log_prior(params);
        if !lp.is_finite() {
            return Ok(LogDensity::NEG_INFINITY);
        }
        Ok(lp + self.log_likelihood(params)?)
    }
}
