//! Fixed-step RK4 over the day grid.
//!
//! The time axis is cut into segments at every integer day and every rate
//! switch, so no step straddles a discontinuity. Rates are frozen over each
//! segment. The impulse is applied once, right after the step that lands on
//! `tau`, and the stored state for day `tau` already includes it.

use alloc::vec::Vec;
use core::fmt;

use crate::model::{
    apply_impulse, derivative, CompartmentState, InterventionSchedule, ParameterSet, Rates,
    N_COMPARTMENTS,
};

/// Undershoot below zero that is treated as roundoff and clamped away.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Default RK4 steps per day.
pub const DEFAULT_SUBSTEPS: u32 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<u32>,
    pub states: Vec<CompartmentState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> Option<&CompartmentState> {
        self.states.last()
    }

    /// One compartment as a series over the grid.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.to_array()[index]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IntegrationError {
    InvalidInit,
    ZeroSubsteps,
    NonFinite {
        day: f64,
        params: ParameterSet,
    },
    Negative {
        day: f64,
        compartment: usize,
        value: f64,
        params: ParameterSet,
    },
}

impl fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrationError::InvalidInit => {
                write!(f, "initial state must be finite and non-negative")
            }
            IntegrationError::ZeroSubsteps => write!(f, "substeps must be at least 1"),
            IntegrationError::NonFinite { day, params } => {
                write!(
                    f,
                    "non-finite state at day {day} with parameters {params:?}"
                )
            }
            IntegrationError::Negative {
                day,
                compartment,
                value,
                params,
            } => write!(
                f,
                "compartment {} fell to {value} at day {day} with parameters {params:?}",
                crate::model::COMPARTMENT_NAMES[*compartment]
            ),
        }
    }
}

/// Integrates from day 0 to `t_end` with `substeps` RK4 steps per day and
/// returns the state at every integer day.
pub fn integrate(
    init: &CompartmentState,
    params: &ParameterSet,
    sched: &InterventionSchedule,
    t_end: u32,
    substeps: u32,
) -> Result<Trajectory, IntegrationError> {
    integrate_with_splits(init, params, sched, t_end, substeps, &[])
}

/// As [`integrate`], with additional segment boundaries. Extra boundaries only
/// change the step lengths of the segments they cut.
pub fn integrate_with_splits(
    init: &CompartmentState,
    params: &ParameterSet,
    sched: &InterventionSchedule,
    t_end: u32,
    substeps: u32,
    extra_splits: &[f64],
) -> Result<Trajectory, IntegrationError> {
    if substeps == 0 {
        return Err(IntegrationError::ZeroSubsteps);
    }
    if !init.to_array().iter().all(|x| x.is_finite() && *x >= 0.0) {
        return Err(IntegrationError::InvalidInit);
    }

    let boundaries = segment_boundaries(sched, t_end, extra_splits);
    let mut times = Vec::with_capacity(t_end as usize + 1);
    let mut states = Vec::with_capacity(t_end as usize + 1);

    let mut x = init.to_array();
    if sched.tau == 0 {
        x = apply_impulse(&CompartmentState::from_array(x), params.beta_star).to_array();
    }
    times.push(0);
    states.push(CompartmentState::from_array(x));

    for w in boundaries.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rates = Rates::at(0.5 * (a + b), params, sched);
        let n = libm::ceil((b - a) * f64::from(substeps) - 1e-9).max(1.0);
        let h = (b - a) / n;
        for k in 0..n as u32 {
            rk4_step(&mut x, &rates, h);
            let t = a + h * f64::from(k + 1);
            project(&mut x, t, params)?;
        }
        if b == f64::from(sched.tau) {
            x = apply_impulse(&CompartmentState::from_array(x), params.beta_star).to_array();
        }
        if b == libm::floor(b) {
            times.push(b as u32);
            states.push(CompartmentState::from_array(x));
        }
    }
    Ok(Trajectory { times, states })
}

fn segment_boundaries(sched: &InterventionSchedule, t_end: u32, extra: &[f64]) -> Vec<f64> {
    let end = f64::from(t_end);
    let mut cuts: Vec<f64> = (0..=t_end).map(f64::from).collect();
    cuts.extend(
        sched
            .switch_days()
            .into_iter()
            .map(f64::from)
            .chain(extra.iter().copied())
            .filter(|t| *t > 0.0 && *t < end),
    );
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

#[inline]
fn rk4_step(x: &mut [f64; N_COMPARTMENTS], rates: &Rates, h: f64) {
    let k1 = derivative(x, rates);
    let k2 = derivative(&axpy(x, 0.5 * h, &k1), rates);
    let k3 = derivative(&axpy(x, 0.5 * h, &k2), rates);
    let k4 = derivative(&axpy(x, h, &k3), rates);
    for i in 0..N_COMPARTMENTS {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

#[inline]
fn axpy(x: &[f64; N_COMPARTMENTS], a: f64, y: &[f64; N_COMPARTMENTS]) -> [f64; N_COMPARTMENTS] {
    core::array::from_fn(|i| x[i] + a * y[i])
}

fn project(
    x: &mut [f64; N_COMPARTMENTS],
    day: f64,
    params: &ParameterSet,
) -> Result<(), IntegrationError> {
    for (compartment, v) in x.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(IntegrationError::NonFinite {
                day,
                params: params.clone(),
            });
        }
        if *v < 0.0 {
            if *v < -NEGATIVE_TOLERANCE {
                return Err(IntegrationError::Negative {
                    day,
                    compartment,
                    value: *v,
                    params: params.clone(),
                });
            }
            *v = 0.0;
        }
    }
    Ok(())
}
