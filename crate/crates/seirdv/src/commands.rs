//! The `ingest`, `fit` and `analyze` commands. Each is a function of the
//! configuration, its input files and the seed; outputs are rendered in
//! memory and written once the computation has finished.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use seirdv_core::projection::{pseudo_r2_observed, AnalysisError};
use seirdv_core::sampler::ConfigError;
use seirdv_core::summary::sequential_pairs;
use seirdv_core::{
    contrasts, summarize, Chain, CompartmentState, InterventionSchedule, LogTarget, ObservedSeries,
    ParameterSet, Posterior, PosteriorError, Projection, SamplerConfig, SamplerError, Series,
};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{self, file_checksum, read_file, write_file};
use crate::ingest::{derive_observed, load_raw_series, CleaningWarning, DataFiles};
use crate::parallel;

/// Reading of the no-vaccine scenario, recorded with its outputs.
pub const COUNTERFACTUAL_READING: &str = "rho = 0 from T_V on; alpha and gamma regimes \
    starting at or after T_V are replaced by the regime in force just before T_V";

#[derive(Clone, Debug)]
pub struct IngestReport {
    pub output: PathBuf,
    pub rows: usize,
    pub warnings: Vec<CleaningWarning>,
}

#[derive(Serialize)]
struct IngestMetadata<'a> {
    command: &'static str,
    config: &'a RunConfig,
    config_sha256: String,
    start_date: String,
    rows: usize,
    input_checksums: Vec<(String, String)>,
    output_checksum: String,
    warnings: Vec<String>,
}

fn config_hash(cfg: &RunConfig) -> String {
    formats::git_blob_sha256(cfg.to_canonical_json().as_bytes())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestReport> {
    let files = DataFiles {
        confirmed: &cfg.data.confirmed,
        recovered: &cfg.data.recovered,
        deaths: &cfg.data.deaths,
        vaccinated: cfg.data.vaccinated.as_deref(),
    };
    let raw = load_raw_series(&files, &cfg.data.region)?;
    let derived = derive_observed(&raw, cfg.window()?)?;
    for w in &derived.warnings {
        warn!("{w}");
    }

    let csv = formats::observed_csv(&derived.observed);
    let mut inputs = vec![&cfg.data.confirmed, &cfg.data.recovered, &cfg.data.deaths];
    inputs.extend(cfg.data.vaccinated.as_ref());
    let input_checksums = inputs
        .into_iter()
        .map(|p| Ok((display(p), file_checksum(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let meta = IngestMetadata {
        command: "ingest",
        config: cfg,
        config_sha256: config_hash(cfg),
        start_date: derived.start_date.to_string(),
        rows: derived.observed.len(),
        input_checksums,
        output_checksum: formats::git_blob_sha256(csv.as_bytes()),
        warnings: derived.warnings.iter().map(ToString::to_string).collect(),
    };

    let output = cfg.observed_path();
    write_file(&output, &csv)?;
    write_file(
        &cfg.analysis.out_dir.join("ingest_metadata.json"),
        &formats::json(&meta),
    )?;
    Ok(IngestReport {
        output,
        rows: derived.observed.len(),
        warnings: derived.warnings,
    })
}

/// The canonical series with the configured vaccination start applied.
pub fn load_observed(cfg: &RunConfig) -> Result<(ObservedSeries, String)> {
    let path = cfg.observed_path();
    let text = read_file(&path).map_err(|e| match e {
        Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
            Error::Data(format!(
                "{}: canonical series not found; run `seirdv ingest` first",
                path.display()
            ))
        }
        other => other,
    })?;
    let mut data = formats::parse_observed_csv(&text)?;
    if let Some(v) = cfg.data.v_start {
        data = data.with_v_start(v);
    }
    Ok((data, formats::git_blob_sha256(text.as_bytes())))
}

fn posterior_error(e: PosteriorError) -> Error {
    match e {
        PosteriorError::Integration(e) => Error::Numerical(e.to_string()),
        PosteriorError::ObservationBeyondHorizon { .. } => Error::Data(e.to_string()),
        other => Error::Config(other.to_string()),
    }
}

fn sampler_error(e: SamplerError<PosteriorError>) -> Error {
    match e {
        SamplerError::Config(c) => Error::Config(c.to_string()),
        SamplerError::InvalidStart { .. } => Error::Config(format!("sampler.initial: {e}")),
        SamplerError::StartOutsideSupport => Error::Numerical(format!(
            "{e}; the initial parameters give zero posterior density"
        )),
        SamplerError::Target(t) => posterior_error(t),
    }
}

pub fn chain_path(out_dir: &Path, chain: usize) -> PathBuf {
    out_dir.join(format!("chain_{chain}.csv"))
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub chain_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub acceptance: Vec<Vec<f64>>,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct ChainMetadata {
    file: String,
    stream: u64,
    checksum: String,
    start: Vec<f64>,
    proposal_scales: Vec<f64>,
    acceptance_rates: Vec<f64>,
}

#[derive(Serialize)]
struct FitMetadata<'a> {
    command: &'static str,
    config: &'a RunConfig,
    config_sha256: String,
    data_checksum: String,
    seed: u64,
    parameters: Vec<String>,
    initial: Vec<f64>,
    chains: Vec<ChainMetadata>,
}

/// Shared fit inputs derived from the configuration.
struct Problem {
    data: ObservedSeries,
    data_checksum: String,
    sched: InterventionSchedule,
    init: CompartmentState,
}

impl Problem {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let (data, data_checksum) = load_observed(cfg)?;
        Ok(Self {
            data,
            data_checksum,
            sched: cfg.schedule.schedule()?,
            init: cfg.init.state(),
        })
    }

    fn projection(&self, cfg: &RunConfig) -> Projection<'_> {
        Projection {
            sched: &self.sched,
            init: &self.init,
            t_end: self.data.t_end(),
            substeps: cfg.sampler.substeps,
        }
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<FitReport> {
    let clock = Instant::now();
    let problem = Problem::load(cfg)?;
    let posterior = Posterior::new(
        &problem.data,
        problem.init,
        problem.sched.clone(),
        cfg.sampler.substeps,
    )
    .map_err(posterior_error)?;
    let start = cfg.initial_parameters(&problem.sched, posterior.vaccine_active());
    start
        .check_schedule(&problem.sched)
        .map_err(|e| Error::Config(format!("sampler.initial: {e}")))?;
    let init = start.to_flat();

    let s = &cfg.sampler;
    let base = SamplerConfig {
        n_samples: s.n_samples,
        n_burnin: s.n_burnin,
        tune_rounds: s.tune_rounds,
        tune_length: s.tune_length,
        proposal_scales: vec![s.initial_scale; init.len()],
        seed: s.seed,
        stream: 0,
    };
    base.validate(init.len())
        .map_err(|e: ConfigError| Error::Config(e.to_string()))?;
    info!(
        "fitting {} parameters to {} days, {} chain(s)",
        init.len(),
        problem.data.len(),
        s.chains
    );
    let chains = parallel::run_chains(&base, &posterior, &init, s.chains).map_err(sampler_error)?;

    let out = &cfg.analysis.out_dir;
    let rendered: Vec<(PathBuf, String)> = chains
        .iter()
        .enumerate()
        .map(|(c, chain)| (chain_path(out, c), formats::chain_csv(chain)))
        .collect();
    let pooled = Chain::pooled(&chains).expect("at least one chain");
    let summary = summarize(&pooled).map_err(|e| Error::Numerical(e.to_string()))?;
    let summary_csv = formats::summary_csv(&summary);

    let meta = FitMetadata {
        command: "fit",
        config: cfg,
        config_sha256: config_hash(cfg),
        data_checksum: problem.data_checksum.clone(),
        seed: s.seed,
        parameters: posterior.parameter_names(),
        initial: init.clone(),
        chains: chains
            .iter()
            .zip(&rendered)
            .enumerate()
            .map(|(c, (chain, (path, text)))| ChainMetadata {
                file: path
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                stream: c as u64,
                checksum: formats::git_blob_sha256(text.as_bytes()),
                start: chain.start.clone(),
                proposal_scales: chain.scales.clone(),
                acceptance_rates: chain.acceptance_rates(),
            })
            .collect(),
    };

    for (path, text) in &rendered {
        write_file(path, text)?;
    }
    let summary_path = out.join("summary.csv");
    write_file(&summary_path, &summary_csv)?;
    write_file(&out.join("fit_metadata.json"), &formats::json(&meta))?;
    let wall_seconds = clock.elapsed().as_secs_f64();
    write_file(
        &out.join("fit_timing.json"),
        &formats::json(&serde_json::json!({ "wall_seconds": wall_seconds })),
    )?;

    Ok(FitReport {
        chain_paths: rendered.into_iter().map(|(p, _)| p).collect(),
        summary_path,
        acceptance: chains.iter().map(Chain::acceptance_rates).collect(),
        wall_seconds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Summary,
    Contrasts,
    Reproduction,
    Predictive,
    #[value(name = "pseudo-r2")]
    PseudoR2,
    Counterfactual,
}

impl Analysis {
    fn name(self) -> &'static str {
        match self {
            Analysis::Summary => "summary",
            Analysis::Contrasts => "contrasts",
            Analysis::Reproduction => "reproduction",
            Analysis::Predictive => "predictive",
            Analysis::PseudoR2 => "pseudo-r2",
            Analysis::Counterfactual => "counterfactual",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    /// Chain files; defaults to `chain_<c>.csv` in the output directory for
    /// every configured chain.
    pub chains: Vec<PathBuf>,
    /// Predicted `t,I,R_I,D,V` table for `pseudo-r2`; defaults to the
    /// posterior-predictive medians.
    pub predictions: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct AnalyzeReport {
    pub outputs: Vec<PathBuf>,
    pub pseudo_r2: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct AnalysisMetadata {
    command: &'static str,
    analysis: Analysis,
    config_sha256: String,
    config: serde_json::Value,
    seed: u64,
    thin: usize,
    draws_used: usize,
    chain_checksums: Vec<(String, String)>,
    data_checksum: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pseudo_r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterfactual_reading: Option<&'static str>,
    warnings: Vec<String>,
}

fn analysis_error(e: AnalysisError) -> Error {
    match e {
        AnalysisError::Model(m) => Error::Data(format!("malformed chain file: {m}")),
        AnalysisError::LengthMismatch | AnalysisError::ZeroVariance(_) => {
            Error::Data(e.to_string())
        }
        other => Error::Numerical(other.to_string()),
    }
}

fn load_chains(cfg: &RunConfig, opts: &AnalyzeOptions) -> Result<(Chain, Vec<(String, String)>)> {
    let paths: Vec<PathBuf> = if opts.chains.is_empty() {
        (0..cfg.sampler.chains)
            .map(|c| chain_path(&cfg.analysis.out_dir, c))
            .collect()
    } else {
        opts.chains.clone()
    };
    let mut chains = Vec::with_capacity(paths.len());
    let mut checksums = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = read_file(p)?;
        let chain = formats::parse_chain_csv(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
        if chain.is_empty() {
            return Err(Error::Data(format!("{}: chain has no draws", p.display())));
        }
        checksums.push((display(p), formats::git_blob_sha256(text.as_bytes())));
        chains.push(chain);
    }
    if chains.iter().any(|c| c.names != chains[0].names) {
        return Err(Error::Data("chain files have different columns".into()));
    }
    let pooled = Chain::pooled(&chains).ok_or_else(|| Error::Data("no chain files".into()))?;
    Ok((pooled, checksums))
}

fn parse_predictions(text: &str, n: usize) -> Result<[Vec<f64>; 4]> {
    let bad = |m: String| Error::Data(format!("predictions: {m}"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != formats::OBSERVED_HEADER {
        return Err(bad("header must be t,I,R_I,D,V".into()));
    }
    let mut out: [Vec<f64>; 4] = Default::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (k, col) in out.iter_mut().enumerate() {
            let cell = rec[k + 1].trim();
            col.push(if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse()
                    .map_err(|_| bad(format!("row {}: '{cell}' is not a number", row + 2)))?
            });
        }
    }
    if out[0].len() < n {
        return Err(bad(format!("{} rows, data has {n}", out[0].len())));
    }
    Ok(out)
}

pub fn cmd_analyze(
    cfg: &RunConfig,
    which: Analysis,
    opts: &AnalyzeOptions,
) -> Result<AnalyzeReport> {
    let out = &cfg.analysis.out_dir;
    let seed = cfg.analysis_seed();
    let thin = cfg.analysis.thin;
    let mut warnings = Vec::new();
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut r2 = None;
    let mut data_checksum = None;
    let mut draws_used = 0;
    let mut chain_checksums = Vec::new();

    let draws = |chain: &Chain| -> Result<Vec<ParameterSet>> {
        chain
            .parameter_sets(thin)
            .map_err(|e| Error::Data(format!("malformed chain file: {e}")))
    };

    match which {
        Analysis::Summary | Analysis::Contrasts => {
            let (chain, sums) = load_chains(cfg, opts)?;
            chain_checksums = sums;
            draws_used = chain.len();
            let text = if which == Analysis::Summary {
                formats::summary_csv(&summarize(&chain).map_err(|e| Error::Data(e.to_string()))?)
            } else {
                let rows = contrasts(&chain, &sequential_pairs(&chain.names))
                    .map_err(|e| Error::Data(e.to_string()))?;
                formats::contrasts_csv(&rows)
            };
            files.push((out.join(format!("{}.csv", which.name())), text));
        }
        Analysis::PseudoR2 if opts.predictions.is_some() => {
            let problem = Problem::load(cfg)?;
            data_checksum = Some(problem.data_checksum.clone());
            let path = opts.predictions.as_ref().expect("checked above");
            let pred = parse_predictions(&read_file(path)?, problem.data.len())?;
            let pairs = seirdv_core::projection::observed_pairs(
                &problem.data,
                [&pred[0], &pred[1], &pred[2], &pred[3]],
            )
            .map_err(analysis_error)?;
            if pairs.iter().any(|(_, p)| p.iter().any(|x| x.is_nan())) {
                return Err(Error::Data(
                    "predictions: missing value on an observed day".into(),
                ));
            }
            let refs: Vec<(&[f64], &[f64])> = pairs
                .iter()
                .filter(|(o, _)| !o.is_empty())
                .map(|(o, p)| (o.as_slice(), p.as_slice()))
                .collect();
            r2 = Some(seirdv_core::projection::pseudo_r2(&refs).map_err(analysis_error)?);
        }
        Analysis::Reproduction
        | Analysis::Predictive
        | Analysis::PseudoR2
        | Analysis::Counterfactual => {
            let problem = Problem::load(cfg)?;
            data_checksum = Some(problem.data_checksum.clone());
            let (chain, sums) = load_chains(cfg, opts)?;
            chain_checksums = sums;
            let draws = draws(&chain)?;
            draws_used = draws.len();
            let proj = problem.projection(cfg);
            match which {
                Analysis::Reproduction => {
                    let band =
                        parallel::effective_reproduction(&draws, &proj).map_err(analysis_error)?;
                    files.push((out.join("reproduction.csv"), formats::band_csv(&band)));
                }
                Analysis::Predictive | Analysis::PseudoR2 => {
                    let bands = parallel::posterior_predictive(&draws, &proj, seed)
                        .map_err(analysis_error)?;
                    if which == Analysis::Predictive {
                        for s in Series::ALL {
                            files.push((
                                out.join(format!("predictive_{}.csv", s.label())),
                                formats::band_csv(bands.get(s)),
                            ));
                        }
                    } else {
                        r2 = Some(
                            pseudo_r2_observed(&problem.data, &bands).map_err(analysis_error)?,
                        );
                    }
                }
                _ => {
                    if problem.sched.vaccine_day > problem.data.t_end() {
                        let msg = format!(
                            "T_V = {} is beyond the last data day {}; the counterfactual equals the factual run",
                            problem.sched.vaccine_day,
                            problem.data.t_end()
                        );
                        warn!("{msg}");
                        warnings.push(msg);
                    }
                    let bands =
                        parallel::counterfactual_deaths(&draws, &proj).map_err(analysis_error)?;
                    files.push((
                        out.join("counterfactual_deaths.csv"),
                        formats::band_csv(&bands.deaths),
                    ));
                    files.push((
                        out.join("deaths_averted.csv"),
                        formats::band_csv(&bands.averted),
                    ));
                }
            }
        }
    }

    let meta = AnalysisMetadata {
        command: "analyze",
        analysis: which,
        config_sha256: config_hash(cfg),
        config: serde_json::to_value(cfg).expect("config serializes"),
        seed,
        thin,
        draws_used,
        chain_checksums,
        data_checksum,
        pseudo_r2: r2,
        counterfactual_reading: (which == Analysis::Counterfactual)
            .then_some(COUNTERFACTUAL_READING),
        warnings: warnings.clone(),
    };
    let name = which.name().replace('-', "_");
    files.push((
        out.join(format!("analysis_{name}.json")),
        formats::json(&meta),
    ));
    for (path, text) in &files {
        write_file(path, text)?;
    }
    Ok(AnalyzeReport {
        outputs: files.into_iter().map(|(p, _)| p).collect(),
        pseudo_r2: r2,
        warnings,
    })
}
