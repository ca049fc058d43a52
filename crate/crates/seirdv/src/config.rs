//! Run configuration (JSON).
//!
//! Relative paths are resolved against the directory holding the config
//! file. Command-line flags override individual keys after loading.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use seirdv_core::integrator::DEFAULT_SUBSTEPS;
use seirdv_core::projection::DEFAULT_THIN;
use seirdv_core::{CompartmentState, InterventionSchedule, ParameterLayout, ParameterSet};

use crate::error::Error;
use crate::ingest::{parse_date, Window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub data: DataConfig,
    pub init: InitConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub analysis: AnalysisSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub region: String,
    pub confirmed: PathBuf,
    pub recovered: PathBuf,
    pub deaths: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vaccinated: Option<PathBuf>,
    /// Day 0; defaults to the first date with a positive confirmed count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_date: Option<String>,
    /// Canonical series read by `fit` and `analyze`; defaults to
    /// `<out_dir>/observed.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<PathBuf>,
    /// First day whose V observation enters the likelihood.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_start: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "RE0")]
    pub re0: f64,
    #[serde(rename = "RI0")]
    pub ri0: f64,
    #[serde(rename = "D0")]
    pub d0: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
}

impl InitConfig {
    pub fn state(&self) -> CompartmentState {
        CompartmentState {
            s: self.s0,
            e: self.e0,
            i: self.i0,
            r_e: self.re0,
            r_i: self.ri0,
            d: self.d0,
            v: self.v0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub alpha_days: Vec<u32>,
    pub gamma_days: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_days_note: Option<String>,
    pub tau: u32,
    #[serde(rename = "T_V")]
    pub t_v: u32,
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Result<InterventionSchedule, Error> {
        InterventionSchedule::new(
            self.alpha_days.clone(),
            self.gamma_days.clone(),
            self.tau,
            self.t_v,
        )
        .map_err(|e| Error::Config(format!("schedule: {e}")))
    }
}

/// Starting point of the chains, in natural units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialParameters {
    pub alpha: Vec<f64>,
    pub beta_star: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub zeta: f64,
    pub rho: f64,
}

impl From<&InitialParameters> for ParameterSet {
    fn from(p: &InitialParameters) -> Self {
        ParameterSet {
            alpha: p.alpha.clone(),
            beta: p.beta,
            beta_star: p.beta_star,
            gamma: p.gamma.clone(),
            zeta: p.zeta,
            rho: p.rho,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub n_samples: usize,
    pub n_burnin: usize,
    pub tune_rounds: usize,
    pub tune_length: usize,
    pub seed: u64,
    pub chains: usize,
    /// RK4 steps per day.
    pub substeps: u32,
    /// Initial log-scale proposal width, shared by every coordinate.
    pub initial_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialParameters>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            n_samples: 30_000,
            n_burnin: 5_000,
            tune_rounds: 20,
            tune_length: 250,
            seed: 1,
            chains: 1,
            substeps: DEFAULT_SUBSTEPS,
            initial_scale: 0.1,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// Keep every `thin`-th retained draw for trajectory analyses.
    pub thin: usize,
    pub out_dir: PathBuf,
    /// Seed of the predictive draws; defaults to the sampler seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            thin: DEFAULT_THIN,
            out_dir: PathBuf::from("out"),
            seed: None,
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub out: Option<PathBuf>,
    pub n_samples: Option<usize>,
    pub thin: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, resolves relative paths against its directory and
    /// checks the invariants.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.confirmed);
        fix(&mut self.data.recovered);
        fix(&mut self.data.deaths);
        self.data.vaccinated.as_mut().map(fix);
        self.data.observed.as_mut().map(fix);
        fix(&mut self.analysis.out_dir);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sampler.seed = seed;
        }
        if let Some(chains) = o.chains {
            self.sampler.chains = chains;
        }
        if let Some(out) = &o.out {
            self.analysis.out_dir = out.clone();
        }
        if let Some(n) = o.n_samples {
            self.sampler.n_samples = n;
        }
        if let Some(thin) = o.thin {
            self.analysis.thin = thin;
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(msg));
        let init = self.init.state().to_array();
        if !init.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return bad("init values must be finite and non-negative".into());
        }
        let sched = self.schedule.schedule()?;
        if self.sampler.chains == 0 {
            return bad("sampler.chains must be at least 1".into());
        }
        if self.sampler.n_samples == 0 {
            return bad("empty chain requested".into());
        }
        if self.sampler.tune_rounds > 0 && self.sampler.tune_length == 0 {
            return bad("sampler.tune_length must be positive".into());
        }
        if self.sampler.substeps == 0 {
            return bad("sampler.substeps must be positive".into());
        }
        if !(self.sampler.initial_scale.is_finite() && self.sampler.initial_scale > 0.0) {
            return bad("sampler.initial_scale must be positive".into());
        }
        if self.analysis.thin == 0 {
            return bad("analysis.thin must be positive".into());
        }
        if let Some(p) = &self.sampler.initial {
            ParameterSet::from(p)
                .check_schedule(&sched)
                .map_err(|e| Error::Config(format!("sampler.initial: {e}")))?;
        }
        self.window()?;
        Ok(())
    }

    pub fn window(&self) -> Result<Window, Error> {
        let date = |key: &str, s: &Option<String>| -> Result<Option<NaiveDate>, Error> {
            s.as_deref()
                .map(|v| {
                    parse_date(v)
                        .ok_or_else(|| Error::Config(format!("data.{key}: bad date '{v}'")))
                })
                .transpose()
        };
        Ok(Window {
            start: date("start_date", &self.data.start_date)?,
            end: date("end_date", &self.data.end_date)?,
        })
    }

    pub fn observed_path(&self) -> PathBuf {
        self.data
            .observed
            .clone()
            .unwrap_or_else(|| self.analysis.out_dir.join("observed.csv"))
    }

    pub fn analysis_seed(&self) -> u64 {
        self.analysis.seed.unwrap_or(self.sampler.seed)
    }

    /// Starting parameters: the configured point, or a generic default.
    pub fn initial_parameters(
        &self,
        sched: &InterventionSchedule,
        vaccine_active: bool,
    ) -> ParameterSet {
        let mut p = match &self.sampler.initial {
            Some(p) => ParameterSet::from(p),
            None => default_start(ParameterLayout::for_schedule(sched), self.init.state()),
        };
        if !vaccine_active {
            p.rho = 0.0;
        } else if p.rho <= 0.0 {
            p.rho = 0.01;
        }
        p
    }

    /// Canonical JSON text of the effective configuration.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A start with reproduction number near 2 at the initial susceptible count.
fn default_start(layout: ParameterLayout, init: CompartmentState) -> ParameterSet {
    let (beta, gamma, zeta) = (0.1, 0.05, 1e-3);
    let s = init.s.max(1.0);
    ParameterSet {
        alpha: vec![2.0 * (beta + gamma) / s; layout.n_alpha],
        beta,
        beta_star: 0.5,
        gamma: vec![gamma; layout.n_gamma],
        zeta,
        rho: 0.01,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": {"region": "X", "confirmed": "c.csv", "recovered": "r.csv", "deaths": "d.csv"},
        "init": {"S0": 1000, "E0": 5, "I0": 1, "RE0": 0, "RI0": 0, "D0": 0, "V0": 0},
        "schedule": {"alpha_days": [10, 20], "gamma_days": [15], "tau": 5, "T_V": 30}
    }"#;

    #[test]
    fn defaults_fill_sampler_and_analysis() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.sampler.n_samples, 30_000);
        assert_eq!(cfg.sampler.n_burnin, 5_000);
        assert_eq!(
            (cfg.sampler.tune_rounds, cfg.sampler.tune_length),
            (20, 250)
        );
        assert_eq!(cfg.analysis.thin, 10);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"tau\"", "\"tua\"");
        assert!(matches!(RunConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn bad_schedule_is_a_config_error() {
        let text = MINIMAL.replace("[10, 20]", "[20, 10]");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn negative_init_is_a_config_error() {
        let text = MINIMAL.replace("\"E0\": 5", "\"E0\": -5");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_and_paths() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.data.confirmed, PathBuf::from("/base/c.csv"));
        assert_eq!(cfg.observed_path(), PathBuf::from("/base/out/observed.csv"));
        cfg.apply(&Overrides {
            seed: Some(9),
            chains: Some(3),
            out: Some("/tmp/o".into()),
            ..Default::default()
        });
        assert_eq!((cfg.sampler.seed, cfg.sampler.chains), (9, 3));
        assert_eq!(cfg.analysis_seed(), 9);
        assert_eq!(cfg.observed_path(), PathBuf::from("/tmp/o/observed.csv"));
    }

    #[test]
    fn canonical_json_round_trips() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&cfg.to_canonical_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn bundled_reference_config_is_valid() {
        let cfg = RunConfig::from_json(include_str!("../configs/qatar.json")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.schedule.alpha_days.len(), 14);
        assert_eq!(cfg.schedule.gamma_days.len(), 6);
        assert_eq!((cfg.schedule.tau, cfg.schedule.t_v), (35, 420));
        assert_eq!(cfg.data.v_start, Some(426));
        assert_eq!(cfg.init.s0, 2_782_000.0);
        let sched = cfg.schedule.schedule().unwrap();
        let start = cfg.initial_parameters(&sched, true);
        assert_eq!(start.alpha.len(), 15);
        assert_eq!(start.gamma.len(), 7);
        assert_eq!(start.rho, 0.00922);
    }
}
