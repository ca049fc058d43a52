mod common;

use std::fs;

use common::*;
use seirdv::core::Chain;
use seirdv::formats::{chain_csv, parse_chain_csv, parse_observed_csv};

fn ok(out: &std::process::Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run(fx: &Fixture, args: &[&str]) -> std::process::Output {
    let mut all = args.to_vec();
    all.extend(["--config", fx.config.to_str().unwrap()]);
    seirdv(&all)
}

#[test]
fn ingest_writes_the_canonical_series() {
    let fx = fixture(50, 30, &small_sampler(1));
    let out = run(&fx, &["ingest"]);
    ok(&out);
    let path = fx.dir.path().join("out/observed.csv");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,I,R_I,D,V\n0,"));
    let back = parse_observed_csv(&text).unwrap();
    assert_eq!(back.len(), 51);
    // confirmed = I + R + D is raised to its running maximum before I is derived
    let mut max = 0;
    let expected: Vec<u64> = (0..51)
        .map(|t| {
            let c = back.recovered()[t] + back.deaths()[t] + fx.data.infected()[t];
            max = max.max(c);
            max - back.recovered()[t] - back.deaths()[t]
        })
        .collect();
    assert_eq!(back.infected(), expected.as_slice());
    assert_eq!(back.v_start(), Some(31));
    assert!(fx.dir.path().join("out/ingest_metadata.json").exists());
}

#[test]
fn missing_input_file_names_the_path() {
    let fx = fixture(30, 20, &small_sampler(1));
    fs::remove_file(fx.dir.path().join("deaths.csv")).unwrap();
    let out = run(&fx, &["ingest"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("deaths.csv"));
}

#[test]
fn absent_region_fails() {
    let fx = fixture(30, 20, &small_sampler(1));
    let cfg = fs::read_to_string(&fx.config)
        .unwrap()
        .replace(REGION, "Atlantis");
    fs::write(&fx.config, cfg).unwrap();
    let out = run(&fx, &["ingest"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("region not found: Atlantis"));
}

#[test]
fn bad_config_exits_with_two() {
    let fx = fixture(30, 20, &small_sampler(1));
    let cfg = fs::read_to_string(&fx.config)
        .unwrap()
        .replace("[20]", "[20, 5]");
    fs::write(&fx.config, cfg).unwrap();
    assert_eq!(run(&fx, &["ingest"]).status.code(), Some(2));
    assert_eq!(
        seirdv(&["ingest", "--config", "/nonexistent/run.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_subcommand_fails() {
    let fx = fixture(30, 20, &small_sampler(1));
    assert!(!run(&fx, &["analyze", "tables"]).status.success());
    assert!(!run(&fx, &["plot"]).status.success());
}

#[test]
fn fit_without_ingest_is_a_data_error() {
    let fx = fixture(30, 20, &small_sampler(1));
    let out = run(&fx, &["fit"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("observed.csv"));
}

#[test]
fn fit_is_reproducible_and_analyses_run() {
    let fx = fixture(50, 30, &small_sampler(2));
    ok(&run(&fx, &["ingest"]));
    ok(&run(&fx, &["fit"]));
    let out_dir = fx.dir.path().join("out");
    let first: Vec<Vec<u8>> = [
        "chain_0.csv",
        "chain_1.csv",
        "summary.csv",
        "fit_metadata.json",
    ]
    .iter()
    .map(|f| fs::read(out_dir.join(f)).unwrap())
    .collect();
    assert_ne!(first[0], first[1], "chains use different streams");

    let again = fx.dir.path().join("again");
    fs::create_dir_all(&again).unwrap();
    fs::copy(out_dir.join("observed.csv"), again.join("observed.csv")).unwrap();
    ok(&run(&fx, &["fit", "--out", again.to_str().unwrap()]));
    for (k, f) in ["chain_0.csv", "chain_1.csv", "summary.csv"]
        .iter()
        .enumerate()
    {
        assert_eq!(fs::read(again.join(f)).unwrap(), first[k], "{f} differs");
    }

    let other = fx.dir.path().join("other");
    fs::create_dir_all(&other).unwrap();
    fs::copy(out_dir.join("observed.csv"), other.join("observed.csv")).unwrap();
    ok(&run(
        &fx,
        &[
            "fit",
            "--seed",
            "99",
            "--chains",
            "1",
            "--out",
            other.to_str().unwrap(),
        ],
    ));
    assert_ne!(fs::read(other.join("chain_0.csv")).unwrap(), first[0]);
    assert!(!other.join("chain_1.csv").exists());

    let chain = parse_chain_csv(&fs::read_to_string(out_dir.join("chain_0.csv")).unwrap()).unwrap();
    assert_eq!(chain.len(), 120);
    assert_eq!(chain.names.len(), 8);

    for which in [
        "summary",
        "contrasts",
        "reproduction",
        "predictive",
        "pseudo-r2",
        "counterfactual",
    ] {
        ok(&run(&fx, &["analyze", which]));
    }
    let contrasts = fs::read_to_string(out_dir.join("contrasts.csv")).unwrap();
    assert_eq!(contrasts.lines().count(), 1 + 2);
    assert!(contrasts.starts_with("param,mean,median,sd,q025,q50,q975,p_gt_zero\n"));
    for f in [
        "reproduction.csv",
        "predictive_I.csv",
        "predictive_R_I.csv",
        "predictive_D.csv",
        "predictive_V.csv",
        "counterfactual_deaths.csv",
        "deaths_averted.csv",
    ] {
        let text = fs::read_to_string(out_dir.join(f)).unwrap();
        assert!(text.starts_with("t,lower,median,upper\n"), "{f}");
        assert_eq!(text.lines().count(), 52, "{f}");
    }
    let meta = fs::read_to_string(out_dir.join("analysis_counterfactual.json")).unwrap();
    assert!(meta.contains("counterfactual_reading"));

    // analyses are byte-reproducible too
    let before = fs::read(out_dir.join("predictive_I.csv")).unwrap();
    ok(&run(&fx, &["analyze", "predictive"]));
    assert_eq!(fs::read(out_dir.join("predictive_I.csv")).unwrap(), before);
}

#[test]
fn contrasts_follow_the_regime_ladders() {
    let fx = fixture(30, 20, &small_sampler(1));
    let names = seirdv::core::ParameterLayout::new(15, 7).names();
    let draws = (0..10)
        .map(|k| {
            (0..names.len())
                .map(|j| 1.0 + (j * k) as f64 * 1e-3)
                .collect()
        })
        .collect();
    let chain = Chain::from_draws(names, draws, vec![0.0; 10]);
    let path = fx.dir.path().join("big_chain.csv");
    fs::write(&path, chain_csv(&chain)).unwrap();
    ok(&run(
        &fx,
        &["analyze", "contrasts", "--chain", path.to_str().unwrap()],
    ));
    let text = fs::read_to_string(fx.dir.path().join("out/contrasts.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows.iter().filter(|r| r.starts_with("alpha")).count(), 14);
    assert_eq!(rows.iter().filter(|r| r.starts_with("gamma")).count(), 6);
    assert!(rows[0].starts_with("alpha1-alpha0,"));
}

#[test]
fn malformed_chain_file_is_a_data_error() {
    let fx = fixture(30, 20, &small_sampler(1));
    let path = fx.dir.path().join("bad.csv");
    fs::write(&path, "alpha0,beta\n1,zz\n").unwrap();
    let out = run(
        &fx,
        &["analyze", "summary", "--chain", path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed chain file"));
}

#[test]
fn pseudo_r2_of_the_data_itself_is_one() {
    let fx = fixture(40, 30, &small_sampler(1));
    ok(&run(&fx, &["ingest"]));
    let observed = fx.dir.path().join("out/observed.csv");
    let out = run(
        &fx,
        &[
            "analyze",
            "pseudo-r2",
            "--predictions",
            observed.to_str().unwrap(),
        ],
    );
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("pseudo-R2 1.0\n"));
}

#[test]
fn counterfactual_past_the_data_warns_and_matches_factual() {
    let fx = fixture(30, 60, &small_sampler(1));
    ok(&run(&fx, &["ingest"]));
    ok(&run(&fx, &["fit"]));
    let out = run(&fx, &["analyze", "counterfactual"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beyond the last data day"));
    let averted = fs::read_to_string(fx.dir.path().join("out/deaths_averted.csv")).unwrap();
    for line in averted.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(&f[1..], &[0.0, 0.0, 0.0], "{line}");
    }
}
