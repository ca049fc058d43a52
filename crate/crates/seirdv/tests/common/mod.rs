#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Days, NaiveDate};
use seirdv::core::projection::{draw_rng, simulate_observed};
use seirdv::core::{
    CompartmentState, InterventionSchedule, ObservedSeries, ParameterSet, Projection,
};
use seirdv::ingest::write_jhu_csv;

pub const REGION: &str = "Testland";

pub fn seirdv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seirdv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn toy_schedule(t_v: u32) -> InterventionSchedule {
    InterventionSchedule::new(vec![20], vec![30], 10, t_v).unwrap()
}

pub fn toy_init() -> CompartmentState {
    CompartmentState {
        s: 2.0e4,
        e: 20.0,
        i: 5.0,
        ..Default::default()
    }
}

pub fn toy_truth() -> ParameterSet {
    ParameterSet {
        alpha: vec![1.6e-5, 8.0e-6],
        beta: 0.25,
        beta_star: 0.4,
        gamma: vec![0.06, 0.1],
        zeta: 0.004,
        rho: 0.02,
    }
}

/// Poisson data from the toy model with V observed from `v_start`.
pub fn toy_data(t_end: u32, t_v: u32, v_start: usize, seed: u64) -> ObservedSeries {
    let sched = toy_schedule(t_v);
    let init = toy_init();
    let proj = Projection {
        sched: &sched,
        init: &init,
        t_end,
        substeps: 10,
    };
    simulate_observed(&toy_truth(), &proj, Some(v_start), &mut draw_rng(seed, 0)).unwrap()
}

/// Writes JHU-style confirmed/recovered/deaths files and a vaccination file
/// whose derived series equal `data`, preceded by `lead` days without cases.
pub fn write_jhu_fixture(dir: &Path, data: &ObservedSeries, start: NaiveDate, lead: u64) {
    let first = start - Days::new(lead);
    let n = data.len() + lead as usize;
    let dates: Vec<NaiveDate> = (0..n as u64).map(|k| first + Days::new(k)).collect();
    let pad = |v: Vec<u64>| -> Vec<u64> {
        let mut out = vec![0; lead as usize];
        out.extend(v);
        out
    };
    // cumulative counts must not decrease; use running maxima of the draws
    let cummax = |v: &[u64]| -> Vec<u64> {
        let mut m = 0;
        v.iter()
            .map(|x| {
                m = m.max(*x);
                m
            })
            .collect()
    };
    let r = cummax(data.recovered());
    let d = cummax(data.deaths());
    let c: Vec<u64> = (0..data.len())
        .map(|t| data.infected()[t] + r[t] + d[t])
        .collect();
    let write = |name: &str, counts: Vec<u64>| {
        let f = fs::File::create(dir.join(name)).unwrap();
        write_jhu_csv(f, REGION, &dates, &counts).unwrap();
    };
    write("confirmed.csv", pad(c));
    write("recovered.csv", pad(r));
    write("deaths.csv", pad(d));
    let mut vacc = String::from("date,cumulative_vaccinated\n");
    let mut m = 0;
    for (t, v) in data.vaccinated().iter().enumerate() {
        if let Some(v) = v {
            m = m.max(*v);
            vacc.push_str(&format!("{},{}\n", start + Days::new(t as u64), m));
        }
    }
    fs::write(dir.join("vaccinated.csv"), vacc).unwrap();
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
    pub data: ObservedSeries,
}

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

/// A config next to JHU files built from toy data.
pub fn fixture(t_end: u32, t_v: u32, sampler: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let v_start = (t_v + 1) as usize;
    let data = toy_data(t_end, t_v, v_start.min(t_end as usize), 4);
    write_jhu_fixture(dir.path(), &data, start_date(), 3);
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{
  "data": {{"region": "{REGION}", "confirmed": "confirmed.csv", "recovered": "recovered.csv",
           "deaths": "deaths.csv", "vaccinated": "vaccinated.csv", "v_start": {v_start},
           "start_date": "2020-03-01"}},
  "init": {{"S0": 20000, "E0": 20, "I0": 5, "RE0": 0, "RI0": 0, "D0": 0, "V0": 0}},
  "schedule": {{"alpha_days": [20], "gamma_days": [30], "tau": 10, "T_V": {t_v}}},
  "sampler": {sampler},
  "analysis": {{"thin": 5, "out_dir": "out"}}
}}"#
        ),
    )
    .unwrap();
    Fixture { dir, config, data }
}

pub fn small_sampler(chains: usize) -> String {
    let t = toy_truth();
    format!(
        r#"{{"n_samples": 120, "n_burnin": 40, "tune_rounds": 2, "tune_length": 40, "seed": 17,
            "chains": {chains}, "initial": {{"alpha": [{}, {}], "beta_star": {}, "beta": {},
            "gamma": [{}, {}], "zeta": {}, "rho": {}}}}}"#,
        t.alpha[0], t.alpha[1], t.beta_star, t.beta, t.gamma[0], t.gamma[1], t.zeta, t.rho
    )
}
