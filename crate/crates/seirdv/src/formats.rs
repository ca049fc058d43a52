//! CSV and JSON output formats. Writers render into memory; files are
//! written in one piece by [`write_file`].

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use seirdv_core::model::COMPARTMENT_NAMES;
use seirdv_core::{BandSeries, Chain, ContrastRow, ObservedSeries, SummaryRow, Trajectory};

use crate::error::{Error, Result};

pub const OBSERVED_HEADER: [&str; 5] = ["t", "I", "R_I", "D", "V"];
pub const SUMMARY_HEADER: [&str; 7] = ["param", "mean", "median", "sd", "q025", "q50", "q975"];
pub const BAND_HEADER: [&str; 4] = ["t", "lower", "median", "upper"];
pub const LOG_POSTERIOR_COLUMN: &str = "log_posterior";

fn render<F>(fill: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 csv")
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn observed_csv(data: &ObservedSeries) -> String {
    render(|w| {
        w.write_record(OBSERVED_HEADER)?;
        for t in 0..data.len() {
            w.write_record([
                t.to_string(),
                data.infected()[t].to_string(),
                data.recovered()[t].to_string(),
                data.deaths()[t].to_string(),
                data.vaccinated()[t]
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

pub fn parse_observed_csv(text: &str) -> Result<ObservedSeries> {
    let bad = |msg: String| Error::Data(format!("observed series: {msg}"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != OBSERVED_HEADER {
        return Err(bad("header must be t,I,R_I,D,V".into()));
    }
    let (mut i, mut r, mut d, mut v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let count = |k: usize| -> Result<u64> {
            rec[k].trim().parse().map_err(|_| {
                bad(format!(
                    "row {}: bad {} value '{}'",
                    row + 2,
                    OBSERVED_HEADER[k],
                    &rec[k]
                ))
            })
        };
        if count(0)? != row as u64 {
            return Err(bad(format!("row {}: day index is not contiguous", row + 2)));
        }
        i.push(count(1)?);
        r.push(count(2)?);
        d.push(count(3)?);
        v.push(if rec[4].trim().is_empty() {
            None
        } else {
            Some(count(4)?)
        });
    }
    ObservedSeries::new(i, r, d, v).map_err(|e| bad(e.to_string()))
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    render(|w| {
        let mut header = vec!["t"];
        header.extend(COMPARTMENT_NAMES);
        w.write_record(&header)?;
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let mut row = vec![t.to_string()];
            row.extend(x.to_array().map(num));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

pub fn chain_csv(chain: &Chain) -> String {
    render(|w| {
        let mut header: Vec<&str> = chain.names.iter().map(String::as_str).collect();
        header.push(LOG_POSTERIOR_COLUMN);
        w.write_record(&header)?;
        for (k, draw) in chain.draws.iter().enumerate() {
            let mut row: Vec<String> = draw.iter().copied().map(num).collect();
            row.push(
                chain
                    .log_posteriors
                    .get(k)
                    .copied()
                    .map(num)
                    .unwrap_or_default(),
            );
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Parses a chain file; the `log_posterior` column is optional.
pub fn parse_chain_csv(text: &str) -> Result<Chain> {
    let bad = |msg: String| Error::Data(format!("malformed chain file: {msg}"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let lp_col = header.iter().position(|h| h == LOG_POSTERIOR_COLUMN);
    let names: Vec<String> = header
        .iter()
        .filter(|h| *h != LOG_POSTERIOR_COLUMN)
        .map(String::from)
        .collect();
    if names.is_empty() {
        return Err(bad("no parameter columns".into()));
    }
    let (mut draws, mut lps) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let mut draw = Vec::with_capacity(names.len());
        for (k, cell) in rec.iter().enumerate() {
            let x: f64 = cell.trim().parse().map_err(|_| {
                bad(format!(
                    "row {}, column {}: '{cell}' is not a number",
                    row + 2,
                    &header[k]
                ))
            })?;
            if Some(k) == lp_col {
                lps.push(x);
            } else {
                draw.push(x);
            }
        }
        draws.push(draw);
    }
    Ok(Chain::from_draws(names, draws, lps))
}

fn summary_fields(s: &SummaryRow) -> Vec<String> {
    vec![
        s.name.clone(),
        num(s.mean),
        num(s.median),
        num(s.sd),
        num(s.q025),
        num(s.q50),
        num(s.q975),
    ]
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    render(|w| {
        w.write_record(SUMMARY_HEADER)?;
        rows.iter()
            .try_for_each(|r| w.write_record(summary_fields(r)))
    })
}

pub fn contrasts_csv(rows: &[ContrastRow]) -> String {
    render(|w| {
        let mut header = SUMMARY_HEADER.to_vec();
        header.push("p_gt_zero");
        w.write_record(&header)?;
        rows.iter().try_for_each(|r| {
            let mut f = summary_fields(&r.summary);
            f.push(num(r.p_gt_zero));
            w.write_record(f)
        })
    })
}

pub fn band_csv(band: &BandSeries) -> String {
    render(|w| {
        w.write_record(BAND_HEADER)?;
        for k in 0..band.len() {
            w.write_record([
                band.t[k].to_string(),
                num(band.lower[k]),
                num(band.median[k]),
                num(band.upper[k]),
            ])?;
        }
        Ok(())
    })
}

/// SHA-256 of the git object `blob <len>\0<content>`, as lowercase hex.
pub fn git_blob_sha256(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(git_blob_sha256(&bytes))
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("metadata serializes");
    s.push('\n');
    s
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
