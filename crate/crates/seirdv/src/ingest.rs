//! JHU CSSE wide-format time series to model observation vectors.
//!
//! Cleaning rules, each reported as a [`CleaningWarning`]:
//! - a cumulative count that drops below an earlier value is raised to the
//!   running maximum;
//! - a negative derived active count `confirmed - recovered - deaths` is
//!   clamped to zero.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use seirdv_core::ObservedSeries;

/// Columns before the first date in a JHU global time-series file.
const JHU_FIXED_COLUMNS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("region not found: {0}")]
    RegionNotFound(String),
    #[error("malformed date header '{value}' in column {column}")]
    BadDate { column: usize, value: String },
    #[error(
        "parse error at row {row}, column {column}: '{value}' is not a non-negative integer count"
    )]
    BadCount {
        row: usize,
        column: String,
        value: String,
    },
    #[error("header must start with Province/State,Country/Region,Lat,Long")]
    BadHeader,
    #[error("date columns differ between the {0} file and the confirmed file")]
    DateMismatch(&'static str),
    #[error("no date with a positive confirmed count")]
    NoCases,
    #[error("date {0} is outside the data range")]
    DateOutOfRange(NaiveDate),
    #[error("canonical series: {0}")]
    Canonical(String),
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `M/D/YY`, `M/D/YYYY` or ISO `YYYY-MM-DD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    ["%m/%d/%y", "%m/%d/%Y", "%Y-%m-%d"]
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(s, fmt).ok())
}

/// One cumulative series on a daily date index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CumulativeSeries {
    pub dates: Vec<NaiveDate>,
    pub counts: Vec<u64>,
}

/// Reads one region's row from a JHU wide file.
///
/// The country-level row (empty Province/State) is preferred; otherwise a
/// province named `region` is used; otherwise all provinces of the country
/// are summed.
pub fn parse_jhu_csv<R: Read>(reader: R, region: &str) -> Result<CumulativeSeries, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < JHU_FIXED_COLUMNS
        || !headers[1].trim().eq_ignore_ascii_case("Country/Region")
    {
        return Err(IngestError::BadHeader);
    }
    let dates = headers
        .iter()
        .enumerate()
        .skip(JHU_FIXED_COLUMNS)
        .map(|(column, value)| {
            parse_date(value).ok_or_else(|| IngestError::BadDate {
                column: column + 1,
                value: value.into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut country_total: Option<Vec<u64>> = None;
    let mut province: Option<Vec<u64>> = None;
    let mut summed: Option<Vec<u64>> = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let (prov, country) = (record[0].trim(), record[1].trim());
        let is_country = country == region;
        if !is_country && prov != region {
            continue;
        }
        // header is line 1
        let row = i + 2;
        let counts = record
            .iter()
            .enumerate()
            .skip(JHU_FIXED_COLUMNS)
            .map(|(c, cell)| parse_count(cell, row, &headers[c]))
            .collect::<Result<Vec<_>, _>>()?;
        if is_country && prov.is_empty() {
            country_total = Some(counts);
        } else if prov == region {
            province.get_or_insert(counts);
        } else if let Some(acc) = summed.as_mut() {
            acc.iter_mut().zip(&counts).for_each(|(a, c)| *a += c);
        } else {
            summed = Some(counts);
        }
    }
    let counts = country_total
        .or(province)
        .or(summed)
        .ok_or_else(|| IngestError::RegionNotFound(region.into()))?;
    Ok(CumulativeSeries { dates, counts })
}

fn parse_count(cell: &str, row: usize, column: &str) -> Result<u64, IngestError> {
    let cell = cell.trim();
    let bad = || IngestError::BadCount {
        row,
        column: column.into(),
        value: cell.into(),
    };
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    // some exports write whole numbers as "12.0"
    match cell.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 => Ok(v as u64),
        _ => Err(bad()),
    }
}

/// Reads a two-column `date,cumulative_vaccinated` file. Rows with an empty
/// count are skipped.
pub fn parse_vaccination_csv<R: Read>(reader: R) -> Result<Vec<(NaiveDate, u64)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let count_column = headers
        .get(1)
        .unwrap_or("cumulative_vaccinated")
        .to_string();
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let date = parse_date(&record[0]).ok_or_else(|| IngestError::BadDate {
            column: 1,
            value: record[0].into(),
        })?;
        let cell = record.get(1).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        out.push((date, parse_count(cell, row, &count_column)?));
    }
    out.sort_by_key(|(d, _)| *d);
    Ok(out)
}

/// Aligned cumulative series of one region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSeries {
    pub dates: Vec<NaiveDate>,
    pub confirmed: Vec<u64>,
    pub recovered: Vec<u64>,
    pub deaths: Vec<u64>,
    /// `None` on dates without a vaccination report.
    pub vaccinated: Vec<Option<u64>>,
}

impl RawSeries {
    pub fn assemble(
        confirmed: CumulativeSeries,
        recovered: CumulativeSeries,
        deaths: CumulativeSeries,
        vaccinated: Option<Vec<(NaiveDate, u64)>>,
    ) -> Result<Self, IngestError> {
        if recovered.dates != confirmed.dates {
            return Err(IngestError::DateMismatch("recovered"));
        }
        if deaths.dates != confirmed.dates {
            return Err(IngestError::DateMismatch("deaths"));
        }
        let mut v = vec![None; confirmed.dates.len()];
        for (date, count) in vaccinated.unwrap_or_default() {
            if let Ok(i) = confirmed.dates.binary_search(&date) {
                v[i] = Some(count);
            }
        }
        Ok(Self {
            dates: confirmed.dates,
            confirmed: confirmed.counts,
            recovered: recovered.counts,
            deaths: deaths.counts,
            vaccinated: v,
        })
    }
}

/// Input files of one region.
#[derive(Clone, Debug)]
pub struct DataFiles<'a> {
    pub confirmed: &'a Path,
    pub recovered: &'a Path,
    pub deaths: &'a Path,
    pub vaccinated: Option<&'a Path>,
}

pub fn load_raw_series(files: &DataFiles<'_>, region: &str) -> Result<RawSeries, IngestError> {
    let read = |p: &Path| parse_jhu_csv(open(p)?, region);
    let vaccinated = files
        .vaccinated
        .map(|p| parse_vaccination_csv(open(p)?))
        .transpose()?;
    RawSeries::assemble(
        read(files.confirmed)?,
        read(files.recovered)?,
        read(files.deaths)?,
        vaccinated,
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CleaningWarning {
    /// A cumulative count fell below its running maximum and was raised.
    Decreasing {
        date: NaiveDate,
        series: &'static str,
        reported: u64,
        replaced_by: u64,
    },
    /// `confirmed - recovered - deaths` was negative and was set to zero.
    NegativeActive { date: NaiveDate, derived: i64 },
}

impl fmt::Display for CleaningWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CleaningWarning::Decreasing {
                date,
                series,
                reported,
                replaced_by,
            } => write!(
                f,
                "{date}: cumulative {series} dropped to {reported}; replaced by {replaced_by}"
            ),
            CleaningWarning::NegativeActive { date, derived } => write!(
                f,
                "{date}: derived active infections {derived} < 0; clamped to 0"
            ),
        }
    }
}

/// Date window of the observation grid; day 0 is `start`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Window {
    /// Defaults to the first date with a positive confirmed count.
    pub start: Option<NaiveDate>,
    /// Defaults to the last date in the files.
    pub end: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derived {
    pub observed: ObservedSeries,
    pub start_date: NaiveDate,
    pub warnings: Vec<CleaningWarning>,
}

fn running_max(
    dates: &[NaiveDate],
    values: &mut [u64],
    series: &'static str,
    warnings: &mut Vec<CleaningWarning>,
) {
    let mut max = 0;
    for (date, v) in dates.iter().zip(values.iter_mut()) {
        if *v < max {
            warnings.push(CleaningWarning::Decreasing {
                date: *date,
                series,
                reported: *v,
                replaced_by: max,
            });
            *v = max;
        }
        max = *v;
    }
}

/// Cleans the cumulative series and derives `I = confirmed - recovered - deaths`.
pub fn derive_observed(raw: &RawSeries, window: Window) -> Result<Derived, IngestError> {
    let mut warnings = Vec::new();
    let dates = &raw.dates;
    let (mut c, mut r, mut d) = (
        raw.confirmed.clone(),
        raw.recovered.clone(),
        raw.deaths.clone(),
    );
    running_max(dates, &mut c, "confirmed", &mut warnings);
    running_max(dates, &mut r, "recovered", &mut warnings);
    running_max(dates, &mut d, "deaths", &mut warnings);

    let mut v = raw.vaccinated.clone();
    let mut vmax = 0;
    for (date, slot) in dates.iter().zip(v.iter_mut()) {
        if let Some(x) = slot {
            if *x < vmax {
                warnings.push(CleaningWarning::Decreasing {
                    date: *date,
                    series: "vaccinated",
                    reported: *x,
                    replaced_by: vmax,
                });
                *x = vmax;
            }
            vmax = *x;
        }
    }

    let first = match window.start {
        Some(s) => dates
            .binary_search(&s)
            .map_err(|_| IngestError::DateOutOfRange(s))?,
        None => c.iter().position(|x| *x > 0).ok_or(IngestError::NoCases)?,
    };
    let last = match window.end {
        Some(e) => dates
            .binary_search(&e)
            .map_err(|_| IngestError::DateOutOfRange(e))?,
        None => dates.len() - 1,
    };
    if last < first {
        return Err(IngestError::DateOutOfRange(dates[last]));
    }

    let mut infected = Vec::with_capacity(last - first + 1);
    for t in first..=last {
        let derived = c[t] as i64 - r[t] as i64 - d[t] as i64;
        if derived < 0 {
            warnings.push(CleaningWarning::NegativeActive {
                date: dates[t],
                derived,
            });
        }
        infected.push(derived.max(0) as u64);
    }
    let observed = ObservedSeries::new(
        infected,
        r[first..=last].to_vec(),
        d[first..=last].to_vec(),
        v[first..=last].to_vec(),
    )
    .map_err(|e| IngestError::Canonical(e.to_string()))?;
    Ok(Derived {
        observed,
        start_date: dates[first],
        warnings,
    })
}

/// Writes a JHU-style wide file with a single country row; dates as `M/D/YY`.
pub fn write_jhu_csv<W: Write>(
    writer: W,
    region: &str,
    dates: &[NaiveDate],
    counts: &[u64],
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "Province/State".to_string(),
        "Country/Region".into(),
        "Lat".into(),
        "Long".into(),
    ];
    header.extend(dates.iter().map(|d| d.format("%-m/%-d/%y").to_string()));
    w.write_record(&header)?;
    let mut row = vec![String::new(), region.to_string(), "0".into(), "0".into()];
    row.extend(counts.iter().map(u64::to_string));
    w.write_record(&row)?;
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    const HEADER: &str = "Province/State,Country/Region,Lat,Long,2/27/20,2/28/20,2/29/20,3/1/20";

    #[test]
    fn extracts_country_row() {
        let csv = format!("{HEADER}\n,Qatar,25.35,51.18,0,0,1,3\n,Oman,21.5,55.9,0,2,2,4\n");
        let s = parse_jhu_csv(csv.as_bytes(), "Qatar").unwrap();
        assert_eq!(s.counts, vec![0, 0, 1, 3]);
        assert_eq!(s.dates[2], day(2020, 2, 29));
    }

    #[test]
    fn sums_provinces_without_a_country_row() {
        let csv = format!("{HEADER}\nA,Land,0,0,1,1,1,1\nB,Land,0,0,0,2,3,4\n");
        let s = parse_jhu_csv(csv.as_bytes(), "Land").unwrap();
        assert_eq!(s.counts, vec![1, 3, 4, 5]);
    }

    #[test]
    fn unknown_region() {
        let csv = format!("{HEADER}\n,Qatar,25.35,51.18,0,0,1,3\n");
        let err = parse_jhu_csv(csv.as_bytes(), "Atlantis").unwrap_err();
        assert_eq!(err.to_string(), "region not found: Atlantis");
    }

    #[test]
    fn non_numeric_cell_names_location() {
        let csv = format!("{HEADER}\n,Qatar,25.35,51.18,0,abc,1,3\n");
        let err = parse_jhu_csv(csv.as_bytes(), "Qatar").unwrap_err();
        match &err {
            IngestError::BadCount { row, column, value } => {
                assert_eq!(
                    (*row, column.as_str(), value.as_str()),
                    (2, "2/28/20", "abc")
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn malformed_date_header() {
        let csv = "Province/State,Country/Region,Lat,Long,2/27/20,notadate\n,Qatar,0,0,1,2\n";
        assert!(matches!(
            parse_jhu_csv(csv.as_bytes(), "Qatar"),
            Err(IngestError::BadDate { column: 6, .. })
        ));
    }

    fn raw(c: Vec<u64>, r: Vec<u64>, d: Vec<u64>) -> RawSeries {
        let dates = (0..c.len() as u64)
            .map(|i| day(2020, 3, 1) + chrono::Days::new(i))
            .collect::<Vec<_>>();
        let n = dates.len();
        RawSeries {
            dates,
            confirmed: c,
            recovered: r,
            deaths: d,
            vaccinated: vec![None; n],
        }
    }

    #[test]
    fn active_infections_are_derived() {
        let out = derive_observed(
            &raw(vec![10, 12], vec![3, 5], vec![1, 2]),
            Window::default(),
        )
        .unwrap();
        assert_eq!(out.observed.infected(), &[6, 5]);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn negative_active_count_is_clamped_with_warning() {
        let mk = |counts: &str| {
            format!(
                "Province/State,Country/Region,Lat,Long,3/1/20,3/2/20,3/3/20\n,X,0,0,{counts}\n"
            )
        };
        let c = parse_jhu_csv(mk("2,3,4").as_bytes(), "X").unwrap();
        let r = parse_jhu_csv(mk("0,1,5").as_bytes(), "X").unwrap();
        let d = parse_jhu_csv(mk("0,0,0").as_bytes(), "X").unwrap();
        let out = derive_observed(
            &RawSeries::assemble(c, r, d, None).unwrap(),
            Window::default(),
        )
        .unwrap();
        assert_eq!(out.observed.infected(), &[2, 2, 0]);
        assert_eq!(
            out.warnings,
            vec![CleaningWarning::NegativeActive {
                date: day(2020, 3, 3),
                derived: -1
            }]
        );
        assert!(out.warnings[0].to_string().contains("2020-03-03"));
    }

    #[test]
    fn decreasing_cumulative_counts_use_running_max() {
        let out = derive_observed(
            &raw(vec![5, 9, 7, 12], vec![0, 2, 2, 1], vec![0, 0, 0, 0]),
            Window::default(),
        )
        .unwrap();
        assert_eq!(out.observed.recovered(), &[0, 2, 2, 2]);
        assert_eq!(out.observed.infected(), &[5, 7, 7, 10]);
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn window_defaults_to_first_case() {
        let out = derive_observed(
            &raw(vec![0, 0, 1, 4], vec![0, 0, 0, 1], vec![0, 0, 0, 0]),
            Window::default(),
        )
        .unwrap();
        assert_eq!(out.start_date, day(2020, 3, 3));
        assert_eq!(out.observed.infected(), &[1, 3]);
        let fixed = Window {
            start: Some(day(2020, 3, 2)),
            end: Some(day(2020, 3, 3)),
        };
        let out = derive_observed(&raw(vec![0, 0, 1, 4], vec![0; 4], vec![0; 4]), fixed).unwrap();
        assert_eq!(out.observed.infected(), &[0, 1]);
        assert!(
            derive_observed(&raw(vec![0, 0], vec![0; 2], vec![0; 2]), Window::default()).is_err()
        );
    }

    #[test]
    fn vaccination_is_absent_before_first_report() {
        let c = CumulativeSeries {
            dates: (1..=4).map(|d| day(2021, 4, d)).collect(),
            counts: vec![10, 11, 12, 13],
        };
        let zeros = CumulativeSeries {
            dates: c.dates.clone(),
            counts: vec![0; 4],
        };
        let vacc = parse_vaccination_csv(
            "date,cumulative_vaccinated\n2021-04-03,100\n2021-04-04,150\n".as_bytes(),
        )
        .unwrap();
        let raw = RawSeries::assemble(c, zeros.clone(), zeros, Some(vacc)).unwrap();
        let out = derive_observed(&raw, Window::default()).unwrap();
        assert_eq!(
            out.observed.vaccinated(),
            &[None, None, Some(100), Some(150)]
        );
        assert_eq!(out.observed.v_start(), Some(2));
    }

    #[test]
    fn written_jhu_file_parses_back() {
        let dates: Vec<_> = (1..=3).map(|d| day(2020, 2, 27 + d - 1)).collect();
        let mut buf = Vec::new();
        write_jhu_csv(&mut buf, "Qatar", &dates, &[0, 4, 9]).unwrap();
        let s = parse_jhu_csv(buf.as_slice(), "Qatar").unwrap();
        assert_eq!(s.dates, dates);
        assert_eq!(s.counts, vec![0, 4, 9]);
    }
}
