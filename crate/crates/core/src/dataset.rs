//! Prediction data model, CSV I/O and reconstruction of the shown crowd.
//!
//! A [`Dataset`] holds rounds; each [`Round`] has a realised truth and its
//! prediction records in `(timestamp, record_id)` order. Every record pairs
//! a pre-social and a post-social price with the crowd sample the
//! predictor saw in between. When the data does not carry that sample,
//! [`reconstruct_shown_crowd`] rebuilds it from the pre-social predictions
//! of other users that were submitted earlier in the same round. That rule
//! assumes the displayed histogram held pre-social predictions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MIN_PRIOR: usize = 3;
/// Relative tolerance between a supplied geometric mean and the one
/// recomputed from the supplied sample.
pub const GEOMEAN_TOLERANCE: f64 = 1e-9;
/// Significant digits used when writing prices.
pub const PRICE_DIGITS: usize = 12;

pub const RECORDS_HEADER: [&str; 8] = [
    "record_id",
    "round_id",
    "user_id",
    "timestamp",
    "pre_social",
    "post_social",
    "confidence",
    "shown_sample",
];
pub const TRUTHS_HEADER: [&str; 2] = ["round_id", "truth"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Records,
    Truths,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Records => "records",
            Source::Truths => "truths",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{file} line {line}: {reason}")]
    MalformedRow {
        file: Source,
        line: u64,
        reason: String,
    },
    #[error("round `{round_id}` is referenced by records but has no truth")]
    UnknownRound { round_id: String },
    #[error("{file} line {line}: price must be positive")]
    NonPositivePrice { file: Source, line: u64 },
    #[error("duplicate {kind} `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    /// Integer epoch, stored as written.
    #[default]
    Epoch,
    /// ISO-8601 / RFC 3339, stored as UTC nanoseconds since the epoch.
    Iso8601,
}

/// One pre/post-social prediction pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub record_id: String,
    pub round_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub pre_social: f64,
    pub post_social: f64,
    /// Collected alongside the prediction; no analysis reads it.
    pub confidence: Option<f64>,
    pub shown_sample: Option<Vec<f64>>,
    pub shown_geomean: Option<f64>,
}

impl PredictionRecord {
    /// Checks positivity of all prices, the confidence range and
    /// agreement of `shown_geomean` with `shown_sample`.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.pre_social) || !positive(self.post_social) {
            return Err(DatasetError::InvalidRecord(format!(
                "{}: prices must be positive",
                self.record_id
            )));
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(DatasetError::InvalidRecord(format!(
                    "{}: confidence {c} outside [0, 1]",
                    self.record_id
                )));
            }
        }
        if let Some(sample) = &self.shown_sample {
            if sample.is_empty() || !sample.iter().all(|&x| positive(x)) {
                return Err(DatasetError::InvalidRecord(format!(
                    "{}: shown sample must be non-empty and positive",
                    self.record_id
                )));
            }
            if let Some(g) = self.shown_geomean {
                let expected = geometric_mean(sample);
                if ((g - expected) / expected).abs() > GEOMEAN_TOLERANCE {
                    return Err(DatasetError::InvalidRecord(format!(
                        "{}: shown geomean {g} disagrees with sample ({expected})",
                        self.record_id
                    )));
                }
            }
        }
        if let Some(g) = self.shown_geomean {
            if !positive(g) {
                return Err(DatasetError::InvalidRecord(format!(
                    "{}: shown geomean must be positive",
                    self.record_id
                )));
            }
        }
        Ok(())
    }

    fn order_key(&self) -> (i64, &str) {
        (self.timestamp, &self.record_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub round_id: String,
    pub truth: f64,
    pub records: Vec<PredictionRecord>,
}

impl Round {
    /// Sorts records by `(timestamp, record_id)`.
    pub fn new(
        round_id: impl Into<String>,
        truth: f64,
        mut records: Vec<PredictionRecord>,
    ) -> Result<Self, DatasetError> {
        let round_id = round_id.into();
        if !(truth.is_finite() && truth > 0.0) {
            return Err(DatasetError::InvalidRecord(format!(
                "round {round_id}: truth must be positive"
            )));
        }
        for r in &records {
            r.validate()?;
            if r.round_id != round_id {
                return Err(DatasetError::InvalidRecord(format!(
                    "record {} belongs to round {}, not {round_id}",
                    r.record_id, r.round_id
                )));
            }
        }
        records.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        Ok(Self {
            round_id,
            truth,
            records,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rounds: Vec<Round>,
    pub meta: Vec<String>,
    pub timestamp_format: TimestampFormat,
}

impl Dataset {
    pub fn new(rounds: Vec<Round>, meta: Vec<String>) -> Result<Self, DatasetError> {
        let mut round_ids = BTreeSet::new();
        let mut record_ids = BTreeSet::new();
        for round in &rounds {
            if !round_ids.insert(round.round_id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    kind: "round",
                    id: round.round_id.clone(),
                });
            }
            for r in &round.records {
                if !record_ids.insert(r.record_id.as_str()) {
                    return Err(DatasetError::DuplicateId {
                        kind: "record",
                        id: r.record_id.clone(),
                    });
                }
            }
        }
        Ok(Self {
            rounds,
            meta,
            timestamp_format: TimestampFormat::Epoch,
        })
    }

    pub fn with_timestamp_format(mut self, format: TimestampFormat) -> Self {
        self.timestamp_format = format;
        self
    }

    pub fn n_records(&self) -> usize {
        self.rounds.iter().map(|r| r.records.len()).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = (&Round, &PredictionRecord)> {
        self.rounds
            .iter()
            .flat_map(|round| round.records.iter().map(move |r| (round, r)))
    }

    /// Writes the records and truths CSV files.
    pub fn write_csv(&self, records: impl Write, truths: impl Write) -> Result<(), DatasetError> {
        write_records(self, records)?;
        write_truths(self, truths)
    }
}

/// `exp(mean(ln x))`. Callers guarantee a non-empty positive sample.
pub fn geometric_mean(sample: &[f64]) -> f64 {
    debug_assert!(!sample.is_empty());
    let log_sum: f64 = sample.iter().map(|x| x.ln()).sum();
    (log_sum / sample.len() as f64).exp()
}

/// The crowd a predictor saw: sample and geometric mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ShownCrowd {
    pub sample: Vec<f64>,
    pub geomean: f64,
}

impl ShownCrowd {
    pub fn from_sample(sample: Vec<f64>) -> Self {
        let geomean = geometric_mean(&sample);
        Self { sample, geomean }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Shown(ShownCrowd),
    /// Fewer than `min_prior` predictions were available.
    Insufficient { available: usize },
}

impl Snapshot {
    pub fn shown(&self) -> Option<&ShownCrowd> {
        match self {
            Snapshot::Shown(c) => Some(c),
            Snapshot::Insufficient { .. } => None,
        }
    }
}

/// Pre-social predictions by other users submitted strictly before
/// `round.records[index]`, with their geometric mean.
pub fn reconstruct_shown_crowd(round: &Round, index: usize, min_prior: usize) -> Snapshot {
    let target = &round.records[index];
    // Records are sorted and record ids are unique, so every earlier
    // position has a strictly smaller (timestamp, record_id) key.
    let sample: Vec<f64> = round.records[..index]
        .iter()
        .filter(|r| r.user_id != target.user_id)
        .map(|r| r.pre_social)
        .collect();
    if sample.len() < min_prior.max(1) {
        return Snapshot::Insufficient {
            available: sample.len(),
        };
    }
    Snapshot::Shown(ShownCrowd::from_sample(sample))
}

/// The supplied snapshot when the record carries one, else the
/// reconstructed crowd. `min_prior` applies to both.
pub fn shown_crowd(round: &Round, index: usize, min_prior: usize) -> Snapshot {
    match &round.records[index].shown_sample {
        Some(sample) if sample.len() >= min_prior.max(1) => {
            let geomean = round.records[index]
                .shown_geomean
                .unwrap_or_else(|| geometric_mean(sample));
            Snapshot::Shown(ShownCrowd {
                sample: sample.clone(),
                geomean,
            })
        }
        Some(sample) => Snapshot::Insufficient {
            available: sample.len(),
        },
        None => reconstruct_shown_crowd(round, index, min_prior),
    }
}

/// Formats a value with [`PRICE_DIGITS`] significant digits, using the
/// shortest decimal that reads back to the same rounded value.
pub fn format_price(x: f64) -> String {
    let rounded: f64 = format!("{:.*e}", PRICE_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    format!("{rounded}")
}

/// Rounds to [`PRICE_DIGITS`] significant digits, i.e. the value a
/// CSV round trip produces.
pub fn round_price(x: f64) -> f64 {
    format_price(x).parse().expect("formatted float parses")
}

fn malformed(source: Source, line: u64, reason: impl Into<String>) -> DatasetError {
    DatasetError::MalformedRow {
        file: source,
        line,
        reason: reason.into(),
    }
}

fn parse_price(raw: &str, source: Source, line: u64, column: &str) -> Result<f64, DatasetError> {
    let value: f64 = raw
        .parse()
        .map_err(|_| malformed(source, line, format!("{column}: `{raw}` is not a number")))?;
    if !value.is_finite() {
        return Err(malformed(source, line, format!("{column}: `{raw}` is not finite")));
    }
    if value <= 0.0 {
        return Err(DatasetError::NonPositivePrice { file: source, line });
    }
    Ok(value)
}

fn parse_iso(raw: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return dt.timestamp_nanos_opt();
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return dt.and_utc().timestamp_nanos_opt();
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .and_then(|dt| dt.and_utc().timestamp_nanos_opt())
}

fn format_timestamp(ts: i64, format: TimestampFormat) -> String {
    match format {
        TimestampFormat::Epoch => ts.to_string(),
        TimestampFormat::Iso8601 => {
            DateTime::<Utc>::from_timestamp_nanos(ts).to_rfc3339_opts(SecondsFormat::AutoSi, true)
        }
    }
}

fn column_index(
    headers: &csv::StringRecord,
    name: &str,
    source: Source,
    required: bool,
) -> Result<Option<usize>, DatasetError> {
    match headers.iter().position(|h| h == name) {
        Some(i) => Ok(Some(i)),
        None if required => Err(malformed(source, 1, format!("missing column `{name}`"))),
        None => Ok(None),
    }
}

fn csv_reader(reader: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader)
}

fn map_csv_error(err: csv::Error, source: Source) -> DatasetError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::Io(e) => DatasetError::Io(e.to_string()),
        _ => malformed(source, line, err.to_string()),
    }
}

/// Parses a records CSV and a truths CSV into a [`Dataset`].
///
/// Rounds appear in truths-file order; records are sorted within rounds.
/// Rounds listed in the truths file without any records are kept.
pub fn parse_dataset(records: impl Read, truths: impl Read) -> Result<Dataset, DatasetError> {
    let truths = parse_truths(truths)?;
    let mut by_round: HashMap<String, Vec<PredictionRecord>> = HashMap::new();

    let mut reader = csv_reader(records);
    let headers = reader
        .headers()
        .map_err(|e| map_csv_error(e, Source::Records))?
        .clone();
    let src = Source::Records;
    let col = |name| column_index(&headers, name, src, true).map(|c| c.unwrap());
    let (c_id, c_round, c_user, c_ts, c_pre, c_post) = (
        col("record_id")?,
        col("round_id")?,
        col("user_id")?,
        col("timestamp")?,
        col("pre_social")?,
        col("post_social")?,
    );
    let c_conf = column_index(&headers, "confidence", src, false)?;
    let c_shown = column_index(&headers, "shown_sample", src, false)?;

    let mut format: Option<TimestampFormat> = None;
    let mut seen_ids = BTreeSet::new();
    let mut row = csv::StringRecord::new();
    while reader
        .read_record(&mut row)
        .map_err(|e| map_csv_error(e, src))?
    {
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");

        let record_id = field(c_id).to_string();
        if record_id.is_empty() {
            return Err(malformed(src, line, "empty record_id"));
        }
        if !seen_ids.insert(record_id.clone()) {
            return Err(DatasetError::DuplicateId {
                kind: "record",
                id: record_id,
            });
        }
        let round_id = field(c_round).to_string();
        let user_id = field(c_user).to_string();
        if round_id.is_empty() || user_id.is_empty() {
            return Err(malformed(src, line, "empty round_id or user_id"));
        }

        let raw_ts = field(c_ts);
        let fmt = *format.get_or_insert(if raw_ts.parse::<i64>().is_ok() {
            TimestampFormat::Epoch
        } else {
            TimestampFormat::Iso8601
        });
        let timestamp = match fmt {
            TimestampFormat::Epoch => raw_ts.parse::<i64>().ok(),
            TimestampFormat::Iso8601 => parse_iso(raw_ts),
        }
        .ok_or_else(|| malformed(src, line, format!("timestamp `{raw_ts}` does not match the column's format")))?;

        let pre_social = parse_price(field(c_pre), src, line, "pre_social")?;
        let post_social = parse_price(field(c_post), src, line, "post_social")?;

        let confidence = match c_conf.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(raw) => {
                let c: f64 = raw
                    .parse()
                    .map_err(|_| malformed(src, line, format!("confidence `{raw}` is not a number")))?;
                if !(0.0..=1.0).contains(&c) {
                    return Err(malformed(src, line, format!("confidence {c} outside [0, 1]")));
                }
                Some(c)
            }
        };

        let shown_sample = match c_shown.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(raw) => Some(
                raw.split(';')
                    .map(|p| parse_price(p.trim(), src, line, "shown_sample"))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };

        if !truths.contains_key(&round_id) {
            return Err(DatasetError::UnknownRound { round_id });
        }
        by_round.entry(round_id.clone()).or_default().push(PredictionRecord {
            record_id,
            round_id,
            user_id,
            timestamp,
            pre_social,
            post_social,
            confidence,
            shown_sample,
            shown_geomean: None,
        });
    }

    let mut order: Vec<(&String, &(usize, f64))> = truths.iter().collect();
    order.sort_by_key(|(_, (pos, _))| *pos);
    let rounds = order
        .into_iter()
        .map(|(id, &(_, truth))| Round::new(id.clone(), truth, by_round.remove(id).unwrap_or_default()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(rounds, Vec::new())?.with_timestamp_format(format.unwrap_or_default()))
}

/// round_id -> (file position, truth)
fn parse_truths(reader: impl Read) -> Result<BTreeMap<String, (usize, f64)>, DatasetError> {
    let src = Source::Truths;
    let mut reader = csv_reader(reader);
    let headers = reader.headers().map_err(|e| map_csv_error(e, src))?.clone();
    let c_round = column_index(&headers, "round_id", src, true)?.unwrap();
    let c_truth = column_index(&headers, "truth", src, true)?.unwrap();
    let mut out = BTreeMap::new();
    for (pos, row) in reader.records().enumerate() {
        let row = row.map_err(|e| map_csv_error(e, src))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let round_id = row.get(c_round).unwrap_or("").to_string();
        if round_id.is_empty() {
            return Err(malformed(src, line, "empty round_id"));
        }
        let truth = parse_price(row.get(c_truth).unwrap_or(""), src, line, "truth")?;
        if out.insert(round_id.clone(), (pos, truth)).is_some() {
            return Err(DatasetError::DuplicateId {
                kind: "round",
                id: round_id,
            });
        }
    }
    Ok(out)
}

fn io_err(e: impl fmt::Display) -> DatasetError {
    DatasetError::Io(e.to_string())
}

pub fn write_records(dataset: &Dataset, writer: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORDS_HEADER).map_err(io_err)?;
    for (_, r) in dataset.records() {
        let shown = r
            .shown_sample
            .as_ref()
            .map(|s| s.iter().map(|&x| format_price(x)).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            r.record_id.as_str(),
            r.round_id.as_str(),
            r.user_id.as_str(),
            &format_timestamp(r.timestamp, dataset.timestamp_format),
            &format_price(r.pre_social),
            &format_price(r.post_social),
            &r.confidence.map(format_price).unwrap_or_default(),
            &shown,
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_truths(dataset: &Dataset, writer: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTHS_HEADER).map_err(io_err)?;
    for round in &dataset.rounds {
        w.write_record([round.round_id.as_str(), &format_price(round.truth)])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
