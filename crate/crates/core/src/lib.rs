//! Intervention-switched SEIRDV epidemic model with Bayesian fitting.
//!
//! The crate covers the numerical side only and needs `alloc` but not `std`:
//!
//! - [`model`]: compartments, switched rates, the mean-abundance vector field
//!   and the E to I impulse.
//! - [`integrator`]: fixed-step RK4 on the day grid, split at every switch.
//! - [`observed`]: the observation vectors the likelihood consumes.
//! - [`posterior`]: Poisson likelihood, Exp(1) priors and the log-posterior.
//! - [`sampler`]: single-site log-normal Metropolis-Hastings with tuning.
//! - [`summary`] and [`projection`]: posterior tables, reproduction number,
//!   predictive bands, the no-vaccine counterfactual and pseudo-R².

#![no_std]

extern crate alloc;

pub mod integrator;
pub mod model;
pub mod observed;
pub mod posterior;
pub mod projection;
pub mod sampler;
pub mod summary;

pub use integrator::{integrate, IntegrationError, Trajectory};
pub use model::{
    alpha_at, apply_impulse, gamma_at, rho_at, rhs, CompartmentState, InterventionSchedule,
    ParameterLayout, ParameterSet,
};
pub use observed::ObservedSeries;
pub use posterior::{log_prior, LogDensity, Posterior, PosteriorError, Series};
pub use projection::{BandSeries, PredictiveBands, Projection};
pub use sampler::{mh_step, run_chain, tune, Chain, LogTarget, SamplerConfig, SamplerError};
pub use summary::{contrasts, summarize, ContrastRow, SummaryRow};
