//! Daily observation vectors the likelihood is evaluated against.

use alloc::vec::Vec;
use core::fmt;

/// Observed series on a contiguous day grid starting at day 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedSeries {
    infected: Vec<u64>,
    recovered: Vec<u64>,
    deaths: Vec<u64>,
    vaccinated: Vec<Option<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObservedError {
    Empty,
    LengthMismatch {
        infected: usize,
        recovered: usize,
        deaths: usize,
        vaccinated: usize,
    },
}

impl fmt::Display for ObservedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservedError::Empty => write!(f, "observed series is empty"),
            ObservedError::LengthMismatch {
                infected,
                recovered,
                deaths,
                vaccinated,
            } => write!(
                f,
                "series lengths differ: I={infected} R_I={recovered} D={deaths} V={vaccinated}"
            ),
        }
    }
}

impl ObservedSeries {
    /// `vaccinated[t]` is `None` for days without a vaccination observation.
    pub fn new(
        infected: Vec<u64>,
        recovered: Vec<u64>,
        deaths: Vec<u64>,
        vaccinated: Vec<Option<u64>>,
    ) -> Result<Self, ObservedError> {
        let n = infected.len();
        if n == 0 {
            return Err(ObservedError::Empty);
        }
        if recovered.len() != n || deaths.len() != n || vaccinated.len() != n {
            return Err(ObservedError::LengthMismatch {
                infected: n,
                recovered: recovered.len(),
                deaths: deaths.len(),
                vaccinated: vaccinated.len(),
            });
        }
        Ok(Self {
            infected,
            recovered,
            deaths,
            vaccinated,
        })
    }

    pub fn len(&self) -> usize {
        self.infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infected.is_empty()
    }

    /// Last day index of the grid.
    pub fn t_end(&self) -> u32 {
        (self.len() - 1) as u32
    }

    pub fn infected(&self) -> &[u64] {
        &self.infected
    }

    pub fn recovered(&self) -> &[u64] {
        &self.recovered
    }

    pub fn deaths(&self) -> &[u64] {
        &self.deaths
    }

    pub fn vaccinated(&self) -> &[Option<u64>] {
        &self.vaccinated
    }

    /// First day with a vaccination observation.
    pub fn v_start(&self) -> Option<usize> {
        self.vaccinated.iter().position(Option::is_some)
    }

    /// Drops vaccination observations before `v_start`.
    pub fn with_v_start(mut self, v_start: usize) -> Self {
        for v in self.vaccinated.iter_mut().take(v_start) {
            *v = None;
        }
        self
    }

    /// Keeps days `0..=t_end`.
    pub fn truncated(&self, t_end: u32) -> Self {
        let n = (t_end as usize + 1).min(self.len());
        Self {
            infected: self.infected[..n].to_vec(),
            recovered: self.recovered[..n].to_vec(),
            deaths: self.deaths[..n].to_vec(),
            vaccinated: self.vaccinated[..n].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn v_start_is_first_present_value() {
        let obs = ObservedSeries::new(
            vec![1, 2, 3, 4],
            vec![0, 0, 1, 1],
            vec![0, 0, 0, 1],
            vec![None, None, Some(5), Some(9)],
        )
        .unwrap();
        assert_eq!(obs.v_start(), Some(2));
        assert_eq!(obs.t_end(), 3);
        assert_eq!(obs.clone().with_v_start(3).v_start(), Some(3));
        assert_eq!(obs.truncated(1).len(), 2);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let err = ObservedSeries::new(vec![1, 2], vec![0], vec![0, 0], vec![None, None]);
        assert!(matches!(err, Err(ObservedError::LengthMismatch { .. })));
        assert_eq!(
            ObservedSeries::new(vec![], vec![], vec![], vec![]),
            Err(ObservedError::Empty)
        );
    }
}
