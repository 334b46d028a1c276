//! Tick-data ingestion: delimited trade rows, exclusion rules, and per-session tapes.
//!
//! Parsing and filtering are separate stages. A row that parses is always
//! counted; it then either lands in the tape or in the drop log under exactly
//! one [`DropReason`], so `kept + dropped == parsed` holds for every file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opening bell, 09:30:00.
pub const SESSION_OPEN: u32 = 34_200;
/// Closing bell, 16:00:00.
pub const SESSION_CLOSE: u32 = 57_600;
/// Seconds removed from the end of NASDAQ-style sessions.
pub const NASDAQ_TAIL_TRIM: u32 = 30;

const MICROS_PER_SECOND: u64 = 1_000_000;

/// Time of day in microseconds since midnight (exchange local time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(u64);

impl Timestamp {
    pub fn from_micros(micros: u64) -> Self {
        Timestamp(micros)
    }

    pub fn from_seconds(seconds: u32) -> Self {
        Timestamp(seconds as u64 * MICROS_PER_SECOND)
    }

    pub fn micros(self) -> u64 {
        self.0
    }

    pub fn as_seconds(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }
}

impl FromStr for Timestamp {
    type Err = ();

    /// Accepts `HH:MM:SS` with an optional fraction of up to six digits.
    fn from_str(s: &str) -> Result<Self, ()> {
        let (hms, frac) = match s.split_once('.') {
            Some((hms, frac)) => (hms, Some(frac)),
            None => (s, None),
        };
        let mut parts = hms.split(':');
        let mut next = |max: u64| -> Result<u64, ()> {
            let p = parts.next().ok_or(())?;
            if p.is_empty() || p.len() > 2 || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(());
            }
            let v: u64 = p.parse().map_err(|_| ())?;
            if v > max {
                return Err(());
            }
            Ok(v)
        };
        let (h, m, sec) = (next(23)?, next(59)?, next(59)?);
        if parts.next().is_some() {
            return Err(());
        }
        let mut micros = (h * 3600 + m * 60 + sec) * MICROS_PER_SECOND;
        if let Some(frac) = frac {
            if frac.is_empty() || frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(());
            }
            let scale = 10u64.pow(6 - frac.len() as u32);
            micros += frac.parse::<u64>().map_err(|_| ())? * scale;
        }
        Ok(Timestamp(micros))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0 / MICROS_PER_SECOND;
        let frac = self.0 % MICROS_PER_SECOND;
        write!(f, "{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60)?;
        if frac != 0 {
            let digits = format!("{frac:06}");
            write!(f, ".{}", digits.trim_end_matches('0'))?;
        }
        Ok(())
    }
}

/// Listing venue class. Drives the NASDAQ-only condition codes and the tail trim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Venue {
    NyseStyle,
    NasdaqStyle,
}

impl Venue {
    /// `T`, `Q` and `NASDAQ` (any case) are NASDAQ-style; everything else is NYSE-style.
    pub fn classify(tag: &str) -> Venue {
        match tag.to_ascii_uppercase().as_str() {
            "T" | "Q" | "NASDAQ" => Venue::NasdaqStyle,
            _ => Venue::NyseStyle,
        }
    }
}

/// One tick as read from the tape. Values are not validated here; see [`filter_trade`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeRecord {
    pub timestamp: Timestamp,
    pub price: Decimal,
    pub size: i64,
    pub sale_condition: String,
    pub correction_indicator: u32,
    pub exchange_tag: String,
}

impl TradeRecord {
    pub fn venue(&self) -> Venue {
        Venue::classify(&self.exchange_tag)
    }
}

/// A named input column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    Time,
    Price,
    Size,
    Condition,
    Correction,
    Exchange,
    /// Present in the file but ignored.
    Skip,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Column::Time => "time",
            Column::Price => "price",
            Column::Size => "size",
            Column::Condition => "sale_condition",
            Column::Correction => "correction_indicator",
            Column::Exchange => "exchange_tag",
            Column::Skip => "skip",
        })
    }
}

impl FromStr for Column {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, SchemaError> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "time" => Column::Time,
            "price" => Column::Price,
            "size" => Column::Size,
            "cond" | "condition" | "sale_condition" => Column::Condition,
            "corr" | "correction" | "correction_indicator" => Column::Correction,
            "ex" | "exchange" | "exchange_tag" => Column::Exchange,
            "_" | "skip" => Column::Skip,
            other => return Err(SchemaError::UnknownColumn(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown column name `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is declared more than once")]
    Duplicate(Column),
    #[error("required column `{0}` is not declared")]
    Missing(Column),
}

/// Column-order descriptor for a delimited trade file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<Column>,
    delimiter: char,
}

impl Default for Schema {
    /// `time,price,size,sale_condition,correction_indicator,exchange_tag`, comma separated.
    fn default() -> Self {
        Schema {
            columns: vec![
                Column::Time,
                Column::Price,
                Column::Size,
                Column::Condition,
                Column::Correction,
                Column::Exchange,
            ],
            delimiter: ',',
        }
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>, delimiter: char) -> Result<Self, SchemaError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if *c != Column::Skip && !seen.insert(*c as u8) {
                return Err(SchemaError::Duplicate(*c));
            }
        }
        for required in [
            Column::Time,
            Column::Price,
            Column::Size,
            Column::Condition,
            Column::Correction,
            Column::Exchange,
        ] {
            if !columns.contains(&required) {
                return Err(SchemaError::Missing(required));
            }
        }
        Ok(Schema { columns, delimiter })
    }

    /// Parses a comma-separated list of column names, e.g. `time,price,size,cond,corr,ex`.
    pub fn parse(spec: &str, delimiter: char) -> Result<Self, SchemaError> {
        let columns = spec
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Column>, _>>()?;
        Schema::new(columns, delimiter)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn delimiter(&self) -> char {
        self.delimiter
    }

    fn position(&self, col: Column) -> usize {
        self.columns
            .iter()
            .position(|c| *c == col)
            .expect("schema validated at construction")
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing column `{0}`")]
    MissingColumn(Column),
    #[error("unparseable {field}: {value:?}")]
    Invalid { field: Column, value: String },
}

impl ParseError {
    /// The field the error is about.
    pub fn field(&self) -> Column {
        match self {
            ParseError::MissingColumn(c) => *c,
            ParseError::Invalid { field, .. } => *field,
        }
    }
}

/// Decodes one delimited row. The price is kept as an exact decimal.
pub fn parse_trade_line(line: &str, schema: &Schema) -> Result<TradeRecord, ParseError> {
    let fields: Vec<&str> = line.split(schema.delimiter).map(str::trim).collect();
    let get = |col: Column| -> Result<&str, ParseError> {
        fields
            .get(schema.position(col))
            .copied()
            .ok_or(ParseError::MissingColumn(col))
    };
    let invalid = |field: Column, value: &str| ParseError::Invalid {
        field,
        value: value.to_string(),
    };

    let raw = get(Column::Time)?;
    let timestamp = raw.parse::<Timestamp>().map_err(|_| invalid(Column::Time, raw))?;
    let raw = get(Column::Price)?;
    let price = parse_price(raw).ok_or_else(|| invalid(Column::Price, raw))?;
    let raw = get(Column::Size)?;
    let size = raw.parse::<i64>().map_err(|_| invalid(Column::Size, raw))?;
    let sale_condition = get(Column::Condition)?.to_ascii_uppercase();
    let raw = get(Column::Correction)?;
    let correction_indicator = raw
        .parse::<u32>()
        .map_err(|_| invalid(Column::Correction, raw))?;
    let exchange_tag = get(Column::Exchange)?.to_string();

    Ok(TradeRecord {
        timestamp,
        price,
        size,
        sale_condition,
        correction_indicator,
        exchange_tag,
    })
}

fn parse_price(raw: &str) -> Option<Decimal> {
    // Decimal::from_str also accepts things like "1_0"; restrict to plain decimals.
    let body = raw.strip_prefix(['-', '+']).unwrap_or(raw);
    let ok = !body.is_empty()
        && body.bytes().all(|b| b.is_ascii_digit() || b == b'.')
        && body.bytes().filter(|&b| b == b'.').count() <= 1
        && body.bytes().any(|b| b.is_ascii_digit());
    if !ok {
        return None;
    }
    Decimal::from_str(raw).ok()
}

/// Why a parsed trade was excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DropReason {
    ExcludedCondition,
    BadCorrection,
    NonPositivePrice,
    NonPositiveSize,
    OutsideSession,
    TailTrim,
}

impl DropReason {
    pub const ALL: [DropReason; 6] = [
        DropReason::ExcludedCondition,
        DropReason::BadCorrection,
        DropReason::NonPositivePrice,
        DropReason::NonPositiveSize,
        DropReason::OutsideSession,
        DropReason::TailTrim,
    ];
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Keep,
    Drop(DropReason),
}

/// Exclusion rules applied to each parsed trade.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub excluded_conditions: BTreeSet<String>,
    /// Subset of `excluded_conditions` that only applies to NASDAQ-style trades.
    pub nasdaq_only_conditions: BTreeSet<String>,
    pub allowed_corrections: BTreeSet<u32>,
    pub session_start: u32,
    pub session_end: u32,
    /// `None` means 30 s for NASDAQ-style venues and 0 otherwise.
    pub trim_tail_seconds: Option<u32>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        let codes = [
            "B", "D", "G", "J", "K", "L", "M", "N", "O", "P", "Q", "R", "T", "U", "W", "Z", "4",
            "6",
        ];
        FilterPolicy {
            excluded_conditions: codes.iter().map(|s| s.to_string()).collect(),
            nasdaq_only_conditions: ["4", "6"].iter().map(|s| s.to_string()).collect(),
            allowed_corrections: [0, 1, 2].into_iter().collect(),
            session_start: SESSION_OPEN,
            session_end: SESSION_CLOSE,
            trim_tail_seconds: None,
        }
    }
}

impl FilterPolicy {
    pub fn trim_for(&self, venue: Venue) -> u32 {
        self.trim_tail_seconds.unwrap_or(match venue {
            Venue::NasdaqStyle => NASDAQ_TAIL_TRIM,
            Venue::NyseStyle => 0,
        })
    }

    fn condition_excluded(&self, rec: &TradeRecord) -> bool {
        let code = rec.sale_condition.as_str();
        self.excluded_conditions.contains(code)
            && (!self.nasdaq_only_conditions.contains(code)
                || rec.venue() == Venue::NasdaqStyle)
    }
}

/// Classifies one record. Checks run in the order of [`DropReason::ALL`]; the first
/// failing rule names the reason.
pub fn filter_trade(rec: &TradeRecord, policy: &FilterPolicy) -> Disposition {
    use DropReason::*;

    if policy.condition_excluded(rec) {
        return Disposition::Drop(ExcludedCondition);
    }
    if !policy.allowed_corrections.contains(&rec.correction_indicator) {
        return Disposition::Drop(BadCorrection);
    }
    if rec.price <= Decimal::ZERO {
        return Disposition::Drop(NonPositivePrice);
    }
    if rec.size <= 0 {
        return Disposition::Drop(NonPositiveSize);
    }
    let start = Timestamp::from_seconds(policy.session_start);
    let end = Timestamp::from_seconds(policy.session_end);
    if rec.timestamp < start || rec.timestamp > end {
        return Disposition::Drop(OutsideSession);
    }
    let trim = policy.trim_for(rec.venue());
    if trim > 0 && rec.timestamp >= Timestamp::from_seconds(policy.session_end.saturating_sub(trim)) {
        return Disposition::Drop(TailTrim);
    }
    Disposition::Keep
}

/// Per-reason drop counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropLog(BTreeMap<DropReason, u64>);

impl DropLog {
    pub fn record(&mut self, reason: DropReason) {
        *self.0.entry(reason).or_default() += 1;
    }

    pub fn count(&self, reason: DropReason) -> u64 {
        self.0.get(&reason).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DropReason, u64)> + '_ {
        self.0.iter().map(|(r, n)| (*r, *n))
    }
}

/// Filtered, time-ordered trades of one symbol on one session date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeTape {
    pub symbol: String,
    pub session_date: NaiveDate,
    pub venue: Venue,
    pub session_start: u32,
    pub session_end: u32,
    /// Seconds cut from the end of the session for this tape's venue.
    pub trim_tail_seconds: u32,
    pub records: Vec<TradeRecord>,
    pub drop_log: DropLog,
    pub parsed_rows: u64,
}

impl TradeTape {
    /// An empty tape carrying the session geometry of `policy` for `venue`.
    pub fn empty(symbol: &str, session_date: NaiveDate, venue: Venue, policy: &FilterPolicy) -> Self {
        TradeTape {
            symbol: symbol.to_string(),
            session_date,
            venue,
            session_start: policy.session_start,
            session_end: policy.session_end,
            trim_tail_seconds: policy.trim_for(venue),
            records: Vec::new(),
            drop_log: DropLog::default(),
            parsed_rows: 0,
        }
    }

    /// Builds a tape from already-parsed records: filters, logs drops, and sorts
    /// stably by timestamp.
    pub fn from_records(
        symbol: &str,
        session_date: NaiveDate,
        records: impl IntoIterator<Item = TradeRecord>,
        policy: &FilterPolicy,
    ) -> Self {
        let records: Vec<TradeRecord> = records.into_iter().collect();
        let venue = majority_venue(&records);
        let mut tape = TradeTape::empty(symbol, session_date, venue, policy);
        tape.parsed_rows = records.len() as u64;
        for rec in records {
            match filter_trade(&rec, policy) {
                Disposition::Keep => tape.records.push(rec),
                Disposition::Drop(reason) => tape.drop_log.record(reason),
            }
        }
        tape.records.sort_by_key(|r| r.timestamp);
        tape
    }

    /// A tape sharing this tape's identity and session geometry but holding `records`.
    pub fn with_records(&self, records: Vec<TradeRecord>) -> Self {
        TradeTape {
            symbol: self.symbol.clone(),
            session_date: self.session_date,
            venue: self.venue,
            session_start: self.session_start,
            session_end: self.session_end,
            trim_tail_seconds: self.trim_tail_seconds,
            parsed_rows: records.len() as u64,
            records,
            drop_log: DropLog::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the kept records in `schema` column order, without a header.
    pub fn write_delimited<W: Write>(&self, schema: &Schema, mut out: W) -> io::Result<()> {
        let delim = schema.delimiter().to_string();
        for rec in &self.records {
            let fields: Vec<String> = schema
                .columns()
                .iter()
                .map(|c| match c {
                    Column::Time => rec.timestamp.to_string(),
                    Column::Price => rec.price.to_string(),
                    Column::Size => rec.size.to_string(),
                    Column::Condition => rec.sale_condition.clone(),
                    Column::Correction => rec.correction_indicator.to_string(),
                    Column::Exchange => rec.exchange_tag.clone(),
                    Column::Skip => String::new(),
                })
                .collect();
            writeln!(out, "{}", fields.join(&delim))?;
        }
        Ok(())
    }
}

/// Most common venue class among `records`; ties and empty input go to NYSE-style.
fn majority_venue(records: &[TradeRecord]) -> Venue {
    let nasdaq = records
        .iter()
        .filter(|r| r.venue() == Venue::NasdaqStyle)
        .count();
    if nasdaq * 2 > records.len() {
        Venue::NasdaqStyle
    } else {
        Venue::NyseStyle
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
}

/// Parses the text of a whole session file. Blank lines are skipped; a first row
/// whose price field is not numeric is treated as a header.
pub fn parse_session(
    text: &str,
    symbol: &str,
    date: NaiveDate,
    policy: &FilterPolicy,
    schema: &Schema,
) -> Result<TradeTape, IngestError> {
    let mut records = Vec::new();
    let mut first = true;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) && is_header(line, schema) {
            continue;
        }
        let rec = parse_trade_line(line, schema).map_err(|source| IngestError::Parse {
            line: idx + 1,
            source,
        })?;
        records.push(rec);
    }
    Ok(TradeTape::from_records(symbol, date, records, policy))
}

fn is_header(line: &str, schema: &Schema) -> bool {
    line.split(schema.delimiter())
        .nth(schema.position(Column::Price))
        .is_some_and(|p| parse_price(p.trim()).is_none())
}

/// Reads and parses one session file. An empty file yields an empty tape.
pub fn load_session(
    path: &Path,
    symbol: &str,
    date: NaiveDate,
    policy: &FilterPolicy,
    schema: &Schema,
) -> Result<TradeTape, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_session(&text, symbol, date, policy, schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    fn dec(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    fn rec(t: f64, price: &str, size: i64, cond: &str, corr: u32, tag: &str) -> TradeRecord {
        TradeRecord {
            timestamp: Timestamp::from_micros((t * 1e6).round() as u64),
            price: dec(price),
            size,
            sale_condition: cond.into(),
            correction_indicator: corr,
            exchange_tag: tag.into(),
        }
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2005, 3, 1).unwrap()
    }

    #[test]
    fn parses_reference_row() {
        let r = parse_trade_line("09:30:01.000,27.15,300,@,0,N", &Schema::default()).unwrap();
        assert_eq!(r.timestamp, Timestamp::from_seconds(34_201));
        assert_eq!(r.price, dec("27.15"));
        assert_eq!(r.size, 300);
        assert_eq!(r.sale_condition, "@");
        assert_eq!(r.correction_indicator, 0);
        assert_eq!(r.venue(), Venue::NyseStyle);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let s = Schema::default();
        let err = parse_trade_line("09:30:01,abc,300,@,0,N", &s).unwrap_err();
        assert_eq!(err.field(), Column::Price);
        assert_eq!(
            parse_trade_line("9:3x:01,1,300,@,0,N", &s).unwrap_err().field(),
            Column::Time
        );
        assert_eq!(
            parse_trade_line("09:30:01,1,3.5,@,0,N", &s).unwrap_err().field(),
            Column::Size
        );
        assert_eq!(
            parse_trade_line("09:30:01,1,3,@", &s).unwrap_err(),
            ParseError::MissingColumn(Column::Correction)
        );
    }

    #[test]
    fn after_hours_row_parses() {
        let r = parse_trade_line("16:30:00,10.00,100,@,0,N", &Schema::default()).unwrap();
        assert_eq!(r.timestamp.as_seconds(), 59_400.0);
        assert_eq!(
            filter_trade(&r, &FilterPolicy::default()),
            Disposition::Drop(DropReason::OutsideSession)
        );
    }

    #[test]
    fn sub_second_timestamps_are_preserved() {
        let t: Timestamp = "09:30:00.25".parse().unwrap();
        assert_eq!(t.micros(), 34_200_250_000);
        assert_eq!(t.to_string(), "09:30:00.25");
        assert!("09:30:00.1234567".parse::<Timestamp>().is_err());
        assert!("24:00:00".parse::<Timestamp>().is_err());
    }

    #[test]
    fn filter_examples() {
        let p = FilterPolicy::default();
        assert_eq!(
            filter_trade(&rec(40_000.0, "10", 100, "Z", 0, "N"), &p),
            Disposition::Drop(DropReason::ExcludedCondition)
        );
        assert_eq!(filter_trade(&rec(40_000.0, "10", 100, "@", 1, "N"), &p), Disposition::Keep);
        assert_eq!(
            filter_trade(&rec(40_000.0, "10", -100, "@", 0, "N"), &p),
            Disposition::Drop(DropReason::NonPositiveSize)
        );
        assert_eq!(
            filter_trade(&rec(57_585.0, "10", 100, "@", 0, "T"), &p),
            Disposition::Drop(DropReason::TailTrim)
        );
        assert_eq!(filter_trade(&rec(57_585.0, "10", 100, "@", 0, "N"), &p), Disposition::Keep);
    }

    #[test]
    fn zero_price_and_size_are_dropped() {
        let p = FilterPolicy::default();
        assert_eq!(
            filter_trade(&rec(40_000.0, "0", 100, "", 0, "N"), &p),
            Disposition::Drop(DropReason::NonPositivePrice)
        );
        assert_eq!(
            filter_trade(&rec(40_000.0, "1", 0, "", 0, "N"), &p),
            Disposition::Drop(DropReason::NonPositiveSize)
        );
    }

    #[test]
    fn nasdaq_only_codes_apply_to_nasdaq_tags() {
        let p = FilterPolicy::default();
        for code in ["4", "6"] {
            assert_eq!(filter_trade(&rec(40_000.0, "1", 1, code, 0, "N"), &p), Disposition::Keep);
            assert_eq!(
                filter_trade(&rec(40_000.0, "1", 1, code, 0, "Q"), &p),
                Disposition::Drop(DropReason::ExcludedCondition)
            );
        }
        // Whole-token match: "ZB" is not "Z".
        assert_eq!(filter_trade(&rec(40_000.0, "1", 1, "ZB", 0, "N"), &p), Disposition::Keep);
    }

    #[test]
    fn load_counts_and_sorts() {
        let text = "\
time,price,size,cond,corr,ex
09:30:05,10.00,100,@,0,N
09:30:01,10.00,100,T,0,N
09:30:03,10.00,100,@,0,N
09:30:02,10.00,100,,0,N
09:30:04,10.00,100,T,0,N
09:30:00,10.00,100,@,0,N
09:30:06,10.00,100,@,0,N
09:30:07,10.00,100,@,0,N
09:30:08,10.00,100,@,0,N
09:30:09,10.00,100,@,0,N
";
        let tape = parse_session(text, "X", date(), &FilterPolicy::default(), &Schema::default())
            .unwrap();
        assert_eq!(tape.len(), 8);
        assert_eq!(tape.drop_log.count(DropReason::ExcludedCondition), 2);
        assert_eq!(tape.drop_log.total(), 2);
        assert_eq!(tape.parsed_rows, 10);
        assert!(tape.records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn empty_file_is_empty_tape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        fs::write(&path, "").unwrap();
        let tape =
            load_session(&path, "X", date(), &FilterPolicy::default(), &Schema::default()).unwrap();
        assert!(tape.is_empty());
        assert!(tape.drop_log.is_empty());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_session(
            Path::new("/nonexistent/tape.csv"),
            "X",
            date(),
            &FilterPolicy::default(),
            &Schema::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "09:30:00,1,1,@,0,N\n09:30:01,x,1,@,0,N\n";
        let err = parse_session(text, "X", date(), &FilterPolicy::default(), &Schema::default())
            .unwrap_err();
        match err {
            IngestError::Parse { line, source } => {
                assert_eq!(line, 2);
                assert_eq!(source.field(), Column::Price);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_schema_order() {
        let s = Schema::parse("ex,skip,size,price,time,corr,cond", ',').unwrap();
        let r = parse_trade_line("Q,whatever,200,5.5,10:00:00,2,F", &s).unwrap();
        assert_eq!(r.size, 200);
        assert_eq!(r.price, dec("5.5"));
        assert_eq!(r.venue(), Venue::NasdaqStyle);
        assert_eq!(r.sale_condition, "F");
        assert!(matches!(
            Schema::parse("time,price,size,cond,corr", ','),
            Err(SchemaError::Missing(Column::Exchange))
        ));
        assert!(matches!(
            Schema::parse("time,time,price,size,cond,corr,ex", ','),
            Err(SchemaError::Duplicate(Column::Time))
        ));
    }

    #[test]
    fn stable_sort_keeps_input_order_on_ties() {
        let recs = vec![
            rec(34_300.0, "1", 1, "@", 0, "N"),
            rec(34_200.0, "2", 1, "@", 0, "N"),
            rec(34_300.0, "3", 1, "@", 0, "N"),
        ];
        let tape = TradeTape::from_records("X", date(), recs, &FilterPolicy::default());
        let prices: Vec<String> = tape.records.iter().map(|r| r.price.to_string()).collect();
        assert_eq!(prices, ["2", "1", "3"]);
    }

    fn arb_record() -> impl Strategy<Value = TradeRecord> {
        (
            0u64..86_400_000_000,
            -500i64..100_000,
            -10i64..5_000,
            prop::sample::select(vec!["", "@", "F", "Z", "T", "4", "6", "B"]),
            0u32..5,
            prop::sample::select(vec!["N", "Q", "T", "P"]),
        )
            .prop_map(|(t, cents, size, cond, corr, tag)| TradeRecord {
                timestamp: Timestamp::from_micros(t),
                price: Decimal::new(cents, 2),
                size,
                sale_condition: cond.to_string(),
                correction_indicator: corr,
                exchange_tag: tag.to_string(),
            })
    }

    proptest! {
        #[test]
        fn kept_plus_dropped_equals_parsed(recs in prop::collection::vec(arb_record(), 0..200)) {
            let n = recs.len() as u64;
            let tape = TradeTape::from_records("X", date(), recs, &FilterPolicy::default());
            prop_assert_eq!(tape.len() as u64 + tape.drop_log.total(), n);
            prop_assert!(tape.records.iter().all(|r| r.price > Decimal::ZERO && r.size > 0));
        }

        #[test]
        fn filter_is_idempotent(recs in prop::collection::vec(arb_record(), 0..200)) {
            let p = FilterPolicy::default();
            let once = TradeTape::from_records("X", date(), recs, &p);
            let twice = TradeTape::from_records("X", date(), once.records.clone(), &p);
            prop_assert_eq!(&once.records, &twice.records);
            prop_assert!(twice.drop_log.is_empty());
        }

        #[test]
        fn delimited_round_trip(recs in prop::collection::vec(arb_record(), 0..100)) {
            let p = FilterPolicy::default();
            let s = Schema::default();
            let tape = TradeTape::from_records("X", date(), recs, &p);
            let mut buf = Vec::new();
            tape.write_delimited(&s, &mut buf).unwrap();
            let again = parse_session(std::str::from_utf8(&buf).unwrap(), "X", date(), &p, &s).unwrap();
            prop_assert_eq!(&again.records, &tape.records);
        }
    }
}
