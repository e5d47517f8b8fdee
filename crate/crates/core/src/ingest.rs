//! Transfer-log parsing, filtering and aggregation into weighted links.
//!
//! A log is comma-delimited text with one transfer per line:
//!
//! ```text
//! timestamp,source_id,destination_id,amount_yen,source_kind,destination_kind,source_lat,source_lon,dest_lat,dest_lon
//! ```
//!
//! Coordinates may be empty. A header row whose first field is `timestamp`
//! is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_COLUMNS: [&str; 10] = [
    "timestamp",
    "source_id",
    "destination_id",
    "amount_yen",
    "source_kind",
    "destination_kind",
    "source_lat",
    "source_lon",
    "dest_lat",
    "dest_lon",
];

pub const LINK_COLUMNS: [&str; 4] = ["source_id", "destination_id", "flow_yen", "frequency"];

const TIMESTAMP_FORMATS: [&str; 3] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S%.f",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartyKind {
    Firm,
    Household,
    External,
}

impl PartyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PartyKind::Firm => "firm",
            PartyKind::Household => "household",
            PartyKind::External => "external",
        }
    }
}

impl fmt::Display for PartyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PartyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "firm" => Ok(PartyKind::Firm),
            "household" => Ok(PartyKind::Household),
            "external" => Ok(PartyKind::External),
            other => Err(format!("unknown party kind {other:?}")),
        }
    }
}

/// Latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

impl Coord {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// One raw remittance event.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub timestamp: NaiveDateTime,
    pub source: String,
    pub destination: String,
    /// Yen, always at least 1.
    pub amount: u64,
    pub source_kind: PartyKind,
    pub destination_kind: PartyKind,
    pub source_coord: Option<Coord>,
    pub destination_coord: Option<Coord>,
}

impl TransferRecord {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.destination
    }

    /// Both endpoints hold accounts at the reporting bank.
    pub fn is_intra_bank(&self) -> bool {
        self.source_kind != PartyKind::External && self.destination_kind != PartyKind::External
    }

    pub fn is_firm_to_firm(&self) -> bool {
        self.source_kind == PartyKind::Firm && self.destination_kind == PartyKind::Firm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub require_intra_bank: bool,
    pub require_firm_both_ends: bool,
    pub drop_self_loops: bool,
}

impl FilterPolicy {
    /// Keep everything.
    pub fn permissive() -> Self {
        Self {
            require_intra_bank: false,
            require_firm_both_ends: false,
            drop_self_loops: false,
        }
    }

    pub fn accepts(&self, r: &TransferRecord) -> bool {
        (!self.require_intra_bank || r.is_intra_bank())
            && (!self.require_firm_both_ends || r.is_firm_to_firm())
            && (!self.drop_self_loops || !r.is_self_loop())
    }
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            require_intra_bank: true,
            require_firm_both_ends: true,
            drop_self_loops: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Collect diagnostics for bad lines and keep going.
    #[default]
    Lenient,
    /// Abort on the first bad line.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineDiagnostic {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedLog {
    pub records: Vec<TransferRecord>,
    pub rejected: Vec<LineDiagnostic>,
}

fn parse_timestamp(s: &str) -> Result<NaiveDateTime, String> {
    let s = s.trim();
    for fmt in TIMESTAMP_FORMATS {
        if let Ok(ts) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(ts);
        }
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight is valid"));
    }
    Err(format!("bad timestamp {s:?}"))
}

fn parse_coord(lat: &str, lon: &str, which: &str) -> Result<Option<Coord>, String> {
    let (lat, lon) = (lat.trim(), lon.trim());
    match (lat.is_empty(), lon.is_empty()) {
        (true, true) => Ok(None),
        (false, false) => {
            let la: f64 = lat
                .parse()
                .map_err(|_| format!("bad {which} latitude {lat:?}"))?;
            let lo: f64 = lon
                .parse()
                .map_err(|_| format!("bad {which} longitude {lon:?}"))?;
            if !(-90.0..=90.0).contains(&la) || !(-180.0..=180.0).contains(&lo) {
                return Err(format!("{which} coordinate out of range ({la}, {lo})"));
            }
            Ok(Some(Coord::new(la, lo)))
        }
        _ => Err(format!("{which} coordinate half-specified")),
    }
}

/// Parses the fields of one log line into a record. Trailing coordinate
/// fields may be omitted; they read as empty.
pub fn parse_fields<S: AsRef<str>>(fields: &[S]) -> Result<TransferRecord, String> {
    if !(6..=LOG_COLUMNS.len()).contains(&fields.len()) {
        return Err(format!("expected 10 fields, found {}", fields.len()));
    }
    let f = |i: usize| fields.get(i).map_or("", |s| s.as_ref());
    let timestamp = parse_timestamp(f(0))?;
    let source = f(1).trim();
    let destination = f(2).trim();
    if source.is_empty() {
        return Err("missing source_id".into());
    }
    if destination.is_empty() {
        return Err("missing destination_id".into());
    }
    let amount: u64 = f(3)
        .trim()
        .parse()
        .map_err(|_| format!("non-numeric amount {:?}", f(3)))?;
    if amount == 0 {
        return Err("amount must be at least 1 yen".into());
    }
    let source_kind = f(4).parse()?;
    let destination_kind = f(5).parse()?;
    let source_coord = parse_coord(f(6), f(7), "source")?;
    let destination_coord = parse_coord(f(8), f(9), "destination")?;
    Ok(TransferRecord {
        timestamp,
        source: source.to_string(),
        destination: destination.to_string(),
        amount,
        source_kind,
        destination_kind,
        source_coord,
        destination_coord,
    })
}

/// Reads a transfer log. Rejected lines are reported with their 1-based
/// line number; in strict mode the first one aborts the parse.
pub fn parse_log<R: Read>(reader: R, mode: ParseMode) -> Result<ParsedLog, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let mut out = ParsedLog::default();
    let mut row = csv::StringRecord::new();
    let mut first = true;
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let reason = e.to_string();
                if mode == ParseMode::Strict {
                    return Err(IngestError::Malformed { line, reason });
                }
                out.rejected.push(LineDiagnostic { line, reason });
                continue;
            }
        }
        if std::mem::take(&mut first) && row.get(0).map(str::trim) == Some("timestamp") {
            continue;
        }
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.iter().collect();
        match parse_fields(&fields) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                if mode == ParseMode::Strict {
                    return Err(IngestError::Malformed { line, reason });
                }
                out.rejected.push(LineDiagnostic { line, reason });
            }
        }
    }
    Ok(out)
}

fn fmt_coord(c: Option<Coord>) -> (String, String) {
    match c {
        Some(c) => (format!("{:.6}", c.lat), format!("{:.6}", c.lon)),
        None => (String::new(), String::new()),
    }
}

/// Writes records in the log format (with header).
pub fn write_log<W: Write>(writer: W, records: &[TransferRecord]) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(LOG_COLUMNS)?;
    for r in records {
        let (sla, slo) = fmt_coord(r.source_coord);
        let (dla, dlo) = fmt_coord(r.destination_coord);
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.source.clone(),
            r.destination.clone(),
            r.amount.to_string(),
            r.source_kind.to_string(),
            r.destination_kind.to_string(),
            sla,
            slo,
            dla,
            dlo,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn filter_records(records: Vec<TransferRecord>, policy: &FilterPolicy) -> Vec<TransferRecord> {
    records.into_iter().filter(|r| policy.accepts(r)).collect()
}

/// Aggregated transfers over one ordered account pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AggregatedLink {
    pub source: String,
    pub destination: String,
    /// Total yen transferred.
    pub flow: u64,
    /// Number of transfers.
    pub frequency: u64,
}

/// Sums amounts and counts transfers per ordered pair. The result is sorted
/// by (source, destination), so it does not depend on record order.
pub fn aggregate(records: &[TransferRecord]) -> Vec<AggregatedLink> {
    let mut acc: BTreeMap<(&str, &str), (u64, u64)> = BTreeMap::new();
    for r in records {
        let e = acc
            .entry((r.source.as_str(), r.destination.as_str()))
            .or_default();
        e.0 += r.amount;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((s, d), (flow, frequency))| AggregatedLink {
            source: s.to_string(),
            destination: d.to_string(),
            flow,
            frequency,
        })
        .collect()
}

/// Account coordinates collected from records; the first coordinate seen for
/// an account wins.
pub fn account_coordinates(records: &[TransferRecord]) -> BTreeMap<String, Coord> {
    let mut out = BTreeMap::new();
    for r in records {
        if let Some(c) = r.source_coord {
            out.entry(r.source.clone()).or_insert(c);
        }
        if let Some(c) = r.destination_coord {
            out.entry(r.destination.clone()).or_insert(c);
        }
    }
    out
}

pub fn write_links<W: Write>(writer: W, links: &[AggregatedLink]) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(LINK_COLUMNS)?;
    for l in links {
        w.write_record([
            l.source.as_str(),
            l.destination.as_str(),
            &l.flow.to_string(),
            &l.frequency.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_links<R: Read>(reader: R) -> Result<Vec<AggregatedLink>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let bad = |reason: String| IngestError::Malformed { line, reason };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", row.len())));
        }
        let flow = row[2]
            .parse()
            .map_err(|_| bad(format!("bad flow {:?}", &row[2])))?;
        let frequency = row[3]
            .parse()
            .map_err(|_| bad(format!("bad frequency {:?}", &row[3])))?;
        out.push(AggregatedLink {
            source: row[0].to_string(),
            destination: row[1].to_string(),
            flow,
            frequency,
        });
    }
    Ok(out)
}
