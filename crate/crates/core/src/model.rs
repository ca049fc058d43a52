//! SEIRDV compartments, the switched parameter set and the mean-abundance
//! vector field.
//!
//! Transmission (`alpha`) and recovery (`gamma`) rates are piecewise constant
//! in time. Regime `k` is active once `k` change days lie strictly before `t`,
//! so a change scheduled for day `t_m` takes effect on `(t_m, t_{m+1}]`.
//! Vaccination is off before the activation day `T_V` and on from it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Number of compartments in the model.
pub const N_COMPARTMENTS: usize = 7;

/// Compartment names in storage order.
pub const COMPARTMENT_NAMES: [&str; N_COMPARTMENTS] = ["S", "E", "I", "R_E", "R_I", "D", "V"];

/// Mean abundance of every compartment at one instant.
///
/// The same struct carries time derivatives when returned from [`rhs`];
/// non-negativity only applies to states.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompartmentState {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r_e: f64,
    pub r_i: f64,
    pub d: f64,
    pub v: f64,
}

impl CompartmentState {
    pub fn from_array(a: [f64; N_COMPARTMENTS]) -> Self {
        Self {
            s: a[0],
            e: a[1],
            i: a[2],
            r_e: a[3],
            r_i: a[4],
            d: a[5],
            v: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; N_COMPARTMENTS] {
        [self.s, self.e, self.i, self.r_e, self.r_i, self.d, self.v]
    }

    /// Total population `S + E + I + R_E + R_I + D + V`.
    pub fn total(&self) -> f64 {
        self.to_array().iter().sum()
    }

    pub fn is_non_negative(&self) -> bool {
        self.to_array().iter().all(|x| *x >= 0.0)
    }
}

/// Model rates for one posterior draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    /// Transmission rate per regime, `alpha[0]` before the first change day.
    pub alpha: Vec<f64>,
    /// Exposed to infected rate (per day).
    pub beta: f64,
    /// Impulse magnitude at `tau`; the fraction `1 - exp(-beta_star)` of E moves to I.
    pub beta_star: f64,
    /// Recovery rate per regime, shared by the E and I compartments.
    pub gamma: Vec<f64>,
    /// Mortality rate of the infected (per day).
    pub zeta: f64,
    /// Vaccination rate once the vaccine is active (per day).
    pub rho: f64,
}

/// Sizes of the switched parameter vectors, which fix the flat layout
/// `alpha0..alpha_m, beta_star, beta, gamma0..gamma_n, zeta, rho`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParameterLayout {
    pub n_alpha: usize,
    pub n_gamma: usize,
}

impl ParameterLayout {
    pub fn new(n_alpha: usize, n_gamma: usize) -> Self {
        Self { n_alpha, n_gamma }
    }

    pub fn for_schedule(sched: &InterventionSchedule) -> Self {
        Self::new(sched.alpha_days.len() + 1, sched.gamma_days.len() + 1)
    }

    /// Recovers the layout from column names such as `alpha0 .. rho`.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, ModelError> {
        let n_alpha = names
            .iter()
            .filter(|n| indexed(n.as_ref(), "alpha").is_some())
            .count();
        let n_gamma = names
            .iter()
            .filter(|n| indexed(n.as_ref(), "gamma").is_some())
            .count();
        let layout = Self::new(n_alpha, n_gamma);
        let expected = layout.names();
        if names.len() != expected.len()
            || names.iter().zip(&expected).any(|(a, b)| a.as_ref() != b)
        {
            return Err(ModelError::UnknownLayout);
        }
        Ok(layout)
    }

    pub fn dim(&self) -> usize {
        self.n_alpha + self.n_gamma + 4
    }

    pub fn beta_star_index(&self) -> usize {
        self.n_alpha
    }

    pub fn beta_index(&self) -> usize {
        self.n_alpha + 1
    }

    pub fn gamma_index(&self, j: usize) -> usize {
        self.n_alpha + 2 + j
    }

    pub fn zeta_index(&self) -> usize {
        self.n_alpha + self.n_gamma + 2
    }

    pub fn rho_index(&self) -> usize {
        self.n_alpha + self.n_gamma + 3
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        names.extend((0..self.n_alpha).map(|i| format!("alpha{i}")));
        names.push("beta_star".into());
        names.push("beta".into());
        names.extend((0..self.n_gamma).map(|j| format!("gamma{j}")));
        names.push("zeta".into());
        names.push("rho".into());
        names
    }
}

fn indexed(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

impl ParameterSet {
    pub fn layout(&self) -> ParameterLayout {
        ParameterLayout::new(self.alpha.len(), self.gamma.len())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().dim());
        v.extend_from_slice(&self.alpha);
        v.push(self.beta_star);
        v.push(self.beta);
        v.extend_from_slice(&self.gamma);
        v.push(self.zeta);
        v.push(self.rho);
        v
    }

    pub fn from_flat(layout: ParameterLayout, flat: &[f64]) -> Result<Self, ModelError> {
        if flat.len() != layout.dim() {
            return Err(ModelError::FlatLength {
                expected: layout.dim(),
                found: flat.len(),
            });
        }
        let ParameterLayout { n_alpha, n_gamma } = layout;
        Ok(Self {
            alpha: flat[..n_alpha].to_vec(),
            beta_star: flat[n_alpha],
            beta: flat[n_alpha + 1],
            gamma: flat[n_alpha + 2..n_alpha + 2 + n_gamma].to_vec(),
            zeta: flat[layout.zeta_index()],
            rho: flat[layout.rho_index()],
        })
    }

    /// Positivity constraints: `alpha, beta, gamma, zeta > 0`, `beta_star, rho >= 0`.
    pub fn satisfies_constraints(&self) -> bool {
        self.alpha.iter().all(|a| *a > 0.0)
            && self.gamma.iter().all(|g| *g > 0.0)
            && self.beta > 0.0
            && self.zeta > 0.0
            && self.beta_star >= 0.0
            && self.rho >= 0.0
            && self.to_flat().iter().all(|x| x.is_finite())
    }

    /// Checks that the regime vectors match the schedule's change days.
    pub fn check_schedule(&self, sched: &InterventionSchedule) -> Result<(), ModelError> {
        if self.alpha.len() != sched.alpha_days.len() + 1 {
            return Err(ModelError::RegimeCount {
                what: "alpha",
                values: self.alpha.len(),
                change_days: sched.alpha_days.len(),
            });
        }
        if self.gamma.len() != sched.gamma_days.len() + 1 {
            return Err(ModelError::RegimeCount {
                what: "gamma",
                values: self.gamma.len(),
                change_days: sched.gamma_days.len(),
            });
        }
        Ok(())
    }
}

/// Change days for the switched rates plus impulse and vaccine timing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterventionSchedule {
    pub alpha_days: Vec<u32>,
    pub gamma_days: Vec<u32>,
    /// Day of the E to I impulse.
    pub tau: u32,
    /// Vaccine activation day.
    pub vaccine_day: u32,
}

impl InterventionSchedule {
    pub fn new(
        alpha_days: Vec<u32>,
        gamma_days: Vec<u32>,
        tau: u32,
        vaccine_day: u32,
    ) -> Result<Self, ModelError> {
        let sched = Self {
            alpha_days,
            gamma_days,
            tau,
            vaccine_day,
        };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !strictly_increasing(&self.alpha_days) {
            return Err(ModelError::Schedule(
                "alpha_days must be strictly increasing",
            ));
        }
        if !strictly_increasing(&self.gamma_days) {
            return Err(ModelError::Schedule(
                "gamma_days must be strictly increasing",
            ));
        }
        if self.gamma_days.len() > self.alpha_days.len() {
            return Err(ModelError::Schedule(
                "there cannot be more gamma change days than alpha change days",
            ));
        }
        Ok(())
    }

    /// Whether the vaccine switches on within `0..=t_end`.
    pub fn vaccine_active_by(&self, t_end: u32) -> bool {
        self.vaccine_day <= t_end
    }

    /// Every day on which some rate changes value.
    pub fn switch_days(&self) -> Vec<u32> {
        let mut days: Vec<u32> = self
            .alpha_days
            .iter()
            .chain(&self.gamma_days)
            .copied()
            .chain(core::iter::once(self.vaccine_day))
            .collect();
        days.sort_unstable();
        days.dedup();
        days
    }
}

fn strictly_increasing(days: &[u32]) -> bool {
    days.windows(2).all(|w| w[0] < w[1])
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Schedule(&'static str),
    RegimeCount {
        what: &'static str,
        values: usize,
        change_days: usize,
    },
    FlatLength {
        expected: usize,
        found: usize,
    },
    UnknownLayout,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Schedule(msg) => write!(f, "invalid intervention schedule: {msg}"),
            ModelError::RegimeCount {
                what,
                values,
                change_days,
            } => write!(
                f,
                "{what} has {values} regime values but the schedule has {change_days} change days (expected {})",
                change_days + 1
            ),
            ModelError::FlatLength { expected, found } => {
                write!(f, "parameter vector has {found} entries, expected {expected}")
            }
            ModelError::UnknownLayout => write!(
                f,
                "parameter columns must be alpha0..alphaM, beta_star, beta, gamma0..gammaN, zeta, rho"
            ),
        }
    }
}

/// Index of the active regime: the number of change days strictly before `t`.
pub fn regime_index(t: f64, change_days: &[u32]) -> usize {
    change_days
        .iter()
        .take_while(|d| t > f64::from(**d))
        .count()
}

pub fn alpha_at(t: f64, params: &ParameterSet, sched: &InterventionSchedule) -> f64 {
    params.alpha[regime_index(t, &sched.alpha_days)]
}

pub fn gamma_at(t: f64, params: &ParameterSet, sched: &InterventionSchedule) -> f64 {
    params.gamma[regime_index(t, &sched.gamma_days)]
}

pub fn rho_at(t: f64, params: &ParameterSet, sched: &InterventionSchedule) -> f64 {
    if t >= f64::from(sched.vaccine_day) {
        params.rho
    } else {
        0.0
    }
}

/// Rates in force over an interval on which nothing switches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub rho: f64,
}

impl Rates {
    pub fn at(t: f64, params: &ParameterSet, sched: &InterventionSchedule) -> Self {
        Self {
            alpha: alpha_at(t, params, sched),
            beta: params.beta,
            gamma: gamma_at(t, params, sched),
            zeta: params.zeta,
            rho: rho_at(t, params, sched),
        }
    }
}

/// Vector field of the mean-abundance system for fixed rates.
#[inline]
pub fn derivative(x: &[f64; N_COMPARTMENTS], r: &Rates) -> [f64; N_COMPARTMENTS] {
    let [s, e, i, r_e, _r_i, _d, _v] = *x;
    let infection = r.alpha * s * e;
    [
        -infection - r.rho * s,
        infection - (r.beta + r.gamma + r.rho) * e,
        r.beta * e - (r.gamma + r.zeta) * i,
        r.gamma * e - r.rho * r_e,
        r.gamma * i,
        r.zeta * i,
        r.rho * (s + e + r_e),
    ]
}

/// Time derivative of every compartment at day `t`, with the switched rates
/// resolved at `t`. The impulse at `tau` is not part of the flow; see
/// [`apply_impulse`].
pub fn rhs(
    t: f64,
    state: &CompartmentState,
    params: &ParameterSet,
    sched: &InterventionSchedule,
) -> CompartmentState {
    CompartmentState::from_array(derivative(&state.to_array(), &Rates::at(t, params, sched)))
}

/// Instantaneous E to I transfer: `E <- E exp(-beta_star)`, the mass removed
/// from E is added to I.
pub fn apply_impulse(state: &CompartmentState, beta_star: f64) -> CompartmentState {
    let moved = state.e * -libm::expm1(-beta_star);
    CompartmentState {
        e: state.e - moved,
        i: state.i + moved,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn qatar_schedule() -> InterventionSchedule {
        InterventionSchedule::new(
            vec![12, 35, 48, 60, 71, 78, 87, 93, 104, 115, 136, 350, 355, 420],
            vec![35, 60, 93, 136, 355, 420],
            35,
            420,
        )
        .unwrap()
    }

    fn ladder_params() -> ParameterSet {
        ParameterSet {
            alpha: (0..15).map(|i| i as f64).collect(),
            beta: 0.05386,
            beta_star: 0.7888,
            gamma: (0..7).map(|j| 100.0 + j as f64).collect(),
            zeta: 1.21e-4,
            rho: 0.00922,
        }
    }

    #[test]
    fn alpha_before_first_change_is_regime_zero() {
        assert_eq!(alpha_at(5.0, &ladder_params(), &qatar_schedule()), 0.0);
    }

    #[test]
    fn alpha_after_day_48_is_regime_three() {
        assert_eq!(alpha_at(50.0, &ladder_params(), &qatar_schedule()), 3.0);
    }

    #[test]
    fn alpha_on_change_day_keeps_previous_regime() {
        let (p, s) = (ladder_params(), qatar_schedule());
        assert_eq!(alpha_at(12.0, &p, &s), 0.0);
        assert_eq!(alpha_at(12.0001, &p, &s), 1.0);
        assert_eq!(alpha_at(48.0, &p, &s), 2.0);
        assert_eq!(alpha_at(421.0, &p, &s), 14.0);
    }

    #[test]
    fn gamma_regimes() {
        let (p, s) = (ladder_params(), qatar_schedule());
        assert_eq!(gamma_at(0.0, &p, &s), 100.0);
        assert_eq!(gamma_at(35.0, &p, &s), 100.0);
        assert_eq!(gamma_at(36.0, &p, &s), 101.0);
        assert_eq!(gamma_at(1000.0, &p, &s), 106.0);
    }

    #[test]
    fn rho_switches_on_at_activation_day() {
        let (p, s) = (ladder_params(), qatar_schedule());
        assert_eq!(rho_at(419.0, &p, &s), 0.0);
        assert_eq!(rho_at(420.0, &p, &s), 0.00922);
        let mut s0 = s.clone();
        s0.vaccine_day = 0;
        assert_eq!(rho_at(0.0, &p, &s0), 0.00922);
        assert_eq!(rho_at(3.5, &p, &s0), 0.00922);
    }

    #[test]
    fn schedule_validation() {
        assert!(InterventionSchedule::new(vec![5, 5], vec![], 0, 0).is_err());
        assert!(InterventionSchedule::new(vec![5], vec![1, 2], 0, 0).is_err());
        assert!(InterventionSchedule::new(vec![5, 9], vec![7], 3, 8).is_ok());
    }

    #[test]
    fn disease_free_state_only_vaccinates() {
        let sched = InterventionSchedule::new(vec![], vec![], 0, 0).unwrap();
        let p = ParameterSet {
            alpha: vec![1e-6],
            beta: 0.3,
            beta_star: 0.0,
            gamma: vec![0.1],
            zeta: 0.01,
            rho: 0.02,
        };
        let x = CompartmentState {
            s: 1000.0,
            r_i: 4.0,
            d: 2.0,
            ..Default::default()
        };
        let dx = rhs(1.0, &x, &p, &sched);
        assert_eq!(dx.s, -20.0);
        assert_eq!(dx.v, 20.0);
        assert_eq!(
            (dx.e, dx.i, dx.r_e, dx.r_i, dx.d),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn exposed_derivative_matches_hand_calculation() {
        // 1.42e-7 * 2.782e6 * 5 - (0.05386 + 0.00846) * 5
        //   = 1.97522 - 0.3116 = 1.66362
        let sched = InterventionSchedule::new(vec![12], vec![35], 35, 420).unwrap();
        let p = ParameterSet {
            alpha: vec![1.42e-7, 4.62e-8],
            beta: 0.05386,
            beta_star: 0.7888,
            gamma: vec![0.00846, 0.01323],
            zeta: 1.21e-4,
            rho: 0.0,
        };
        let x = CompartmentState {
            s: 2_782_000.0,
            e: 5.0,
            ..Default::default()
        };
        let dx = rhs(0.0, &x, &p, &sched);
        assert!((dx.e - 1.66362).abs() < 1e-12, "{}", dx.e);
    }

    #[test]
    fn impulse_edge_cases() {
        let x = CompartmentState {
            s: 10.0,
            e: 100.0,
            i: 3.0,
            ..Default::default()
        };
        assert_eq!(apply_impulse(&x, 0.0), x);
        let empty = CompartmentState { e: 0.0, ..x };
        assert_eq!(apply_impulse(&empty, 4.65), empty);
        let y = apply_impulse(&x, 0.7888);
        let moved = 100.0 * (1.0 - (-0.7888f64).exp());
        assert!((y.i - 3.0 - moved).abs() < 1e-12);
        assert!((y.e - 100.0 * (-0.7888f64).exp()).abs() < 1e-12);
        assert_eq!(y.s, 10.0);
    }

    #[test]
    fn layout_round_trip_and_names() {
        let p = ladder_params();
        let layout = p.layout();
        assert_eq!(layout.dim(), 26);
        let names = layout.names();
        assert_eq!(names[0], "alpha0");
        assert_eq!(names[15], "beta_star");
        assert_eq!(names[16], "beta");
        assert_eq!(names[17], "gamma0");
        assert_eq!(names[24], "zeta");
        assert_eq!(names[25], "rho");
        assert_eq!(ParameterLayout::from_names(&names).unwrap(), layout);
        assert_eq!(ParameterSet::from_flat(layout, &p.to_flat()).unwrap(), p);
        assert!(ParameterLayout::from_names(&["alpha0", "beta"]).is_err());
    }

    #[test]
    fn regime_counts_must_match_schedule() {
        let mut p = ladder_params();
        assert!(p.check_schedule(&qatar_schedule()).is_ok());
        p.gamma.pop();
        assert!(p.check_schedule(&qatar_schedule()).is_err());
    }

    fn arb_state() -> impl Strategy<Value = CompartmentState> {
        prop::array::uniform7(0.0f64..1e7).prop_map(CompartmentState::from_array)
    }

    fn arb_rates() -> impl Strategy<Value = Rates> {
        (
            0.0f64..1e-6,
            0.0f64..1.0,
            0.0f64..1.0,
            0.0f64..0.1,
            0.0f64..0.1,
        )
            .prop_map(|(alpha, beta, gamma, zeta, rho)| Rates {
                alpha,
                beta,
                gamma,
                zeta,
                rho,
            })
    }

    proptest! {
        #[test]
        fn flow_conserves_population(x in arb_state(), r in arb_rates()) {
            let dx = derivative(&x.to_array(), &r);
            let scale: f64 = dx.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            prop_assert!(dx.iter().sum::<f64>().abs() <= 1e-12 * scale);
        }

        #[test]
        fn cumulative_compartments_never_decrease(x in arb_state(), r in arb_rates()) {
            let dx = derivative(&x.to_array(), &r);
            prop_assert!(dx[4] >= 0.0 && dx[5] >= 0.0 && dx[6] >= 0.0);
        }

        #[test]
        fn impulse_conserves_and_keeps_exposed_non_negative(x in arb_state(), b in 0.0f64..20.0) {
            let y = apply_impulse(&x, b);
            prop_assert!(y.e >= 0.0 && y.e <= x.e);
            prop_assert!((y.total() - x.total()).abs() <= 1e-9 * x.total().max(1.0));
        }

        #[test]
        fn rates_are_constant_between_change_days(k in 0usize..14, frac in 0.001f64..0.999) {
            let (p, s) = (ladder_params(), qatar_schedule());
            let days = &s.alpha_days;
            let lo = f64::from(days[k]);
            let hi = days.get(k + 1).map_or(lo + 100.0, |d| f64::from(*d));
            let t = lo + frac * (hi - lo);
            prop_assert_eq!(alpha_at(t, &p, &s), alpha_at(hi, &p, &s));
            prop_assert_eq!(alpha_at(t, &p, &s), p.alpha[k + 1]);
        }
    }
}
