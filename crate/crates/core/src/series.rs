//! Traded-value series: per-trade value, fixed-width bucketing, trade-size
//! partitions, and monthly roll-ups of daily Hurst estimates.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tape::{TradeRecord, TradeTape};

const MICROS_PER_SECOND: u64 = 1_000_000;

/// Traded value of one trade: price times share count, exact.
pub fn traded_value(rec: &TradeRecord) -> Decimal {
    rec.price * Decimal::from(rec.size)
}

/// Bucket width, stored in whole microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BucketWidth(u64);

impl BucketWidth {
    pub const ONE_SECOND: BucketWidth = BucketWidth(MICROS_PER_SECOND);

    pub fn from_micros(micros: u64) -> Option<Self> {
        (micros > 0).then_some(BucketWidth(micros))
    }

    pub fn from_seconds(seconds: f64) -> Option<Self> {
        if !seconds.is_finite() || seconds <= 0.0 {
            return None;
        }
        let micros = seconds * MICROS_PER_SECOND as f64;
        let rounded = micros.round();
        if (micros - rounded).abs() > 1e-6 || rounded < 1.0 {
            return None;
        }
        Some(BucketWidth(rounded as u64))
    }

    pub fn micros(self) -> u64 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }
}

/// Bucketed traded value for one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueSeries {
    pub symbol: String,
    pub session_date: NaiveDate,
    pub delta_t: BucketWidth,
    /// Session start, seconds since midnight.
    pub origin: u32,
    pub values: Vec<Decimal>,
}

impl ValueSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> Decimal {
        self.values.iter().copied().sum()
    }

    /// Values as binary floats, the form consumed by the wavelet transform.
    pub fn to_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Start of bucket `index`, seconds since midnight.
    pub fn bucket_start(&self, index: usize) -> f64 {
        self.origin as f64 + index as f64 * self.delta_t.seconds()
    }

    /// CSV with columns `bucket_index,t_start_seconds,traded_value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bucket_index,t_start_seconds,traded_value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", i, self.bucket_start(i), v)?;
        }
        Ok(())
    }
}

/// Sums traded value into half-open buckets `[origin + b·Δt, origin + (b+1)·Δt)`.
///
/// The series covers `session_end − origin − trim` seconds; trades past the last
/// full bucket are not counted.
pub fn bucketize(tape: &TradeTape, delta_t: BucketWidth) -> ValueSeries {
    let origin_us = tape.session_start as u64 * MICROS_PER_SECOND;
    let span_us = (tape.session_end as u64)
        .saturating_sub(tape.session_start as u64)
        .saturating_sub(tape.trim_tail_seconds as u64)
        * MICROS_PER_SECOND;
    let len = (span_us / delta_t.micros()) as usize;
    let mut values = vec![Decimal::ZERO; len];
    for rec in &tape.records {
        let Some(offset) = rec.timestamp.micros().checked_sub(origin_us) else {
            continue;
        };
        let idx = (offset / delta_t.micros()) as usize;
        if let Some(slot) = values.get_mut(idx) {
            *slot += traded_value(rec);
        }
    }
    ValueSeries {
        symbol: tape.symbol.clone(),
        session_date: tape.session_date,
        delta_t,
        origin: tape.session_start,
        values,
    }
}

/// One trade-size range; `max == None` is open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange {
    pub label: String,
    pub min: u64,
    pub max: Option<u64>,
}

impl SizeRange {
    pub fn contains(&self, size: u64) -> bool {
        size >= self.min && self.max.is_none_or(|m| size <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SizeConfigError {
    #[error("size range `{0}` is empty (min > max)")]
    EmptyRange(String),
    #[error("size ranges `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("size bucket label `{0}` is used twice")]
    DuplicateLabel(String),
    #[error("cannot parse size bucket `{0}`; expected label=min..max or label=min..")]
    Syntax(String),
    #[error("no size buckets configured")]
    NoBuckets,
}

/// Ordered, non-overlapping trade-size ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBucketConfig {
    ranges: Vec<SizeRange>,
}

impl Default for SizeBucketConfig {
    /// `<250`, `250-500`, `750-1000`, `1500+`. Sizes 501–749 and 1001–1499 are unassigned.
    fn default() -> Self {
        let r = |label: &str, min, max| SizeRange {
            label: label.to_string(),
            min,
            max,
        };
        SizeBucketConfig {
            ranges: vec![
                r("<250", 1, Some(249)),
                r("250-500", 250, Some(500)),
                r("750-1000", 750, Some(1000)),
                r("1500+", 1500, None),
            ],
        }
    }
}

impl SizeBucketConfig {
    pub fn new(ranges: Vec<SizeRange>) -> Result<Self, SizeConfigError> {
        if ranges.is_empty() {
            return Err(SizeConfigError::NoBuckets);
        }
        for r in &ranges {
            if r.max.is_some_and(|m| m < r.min) {
                return Err(SizeConfigError::EmptyRange(r.label.clone()));
            }
        }
        for (i, a) in ranges.iter().enumerate() {
            for b in &ranges[i + 1..] {
                if a.label == b.label {
                    return Err(SizeConfigError::DuplicateLabel(a.label.clone()));
                }
                let a_hi = a.max.unwrap_or(u64::MAX);
                let b_hi = b.max.unwrap_or(u64::MAX);
                if a.min <= b_hi && b.min <= a_hi {
                    return Err(SizeConfigError::Overlap(a.label.clone(), b.label.clone()));
                }
            }
        }
        Ok(SizeBucketConfig { ranges })
    }

    pub fn ranges(&self) -> &[SizeRange] {
        &self.ranges
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.ranges.iter().map(|r| r.label.as_str())
    }

    pub fn classify(&self, size: u64) -> Option<&str> {
        self.ranges
            .iter()
            .find(|r| r.contains(size))
            .map(|r| r.label.as_str())
    }
}

impl FromStr for SizeBucketConfig {
    type Err = SizeConfigError;

    /// `;`-separated `label=min..max` or `label=min..` entries.
    fn from_str(s: &str) -> Result<Self, SizeConfigError> {
        let mut ranges = Vec::new();
        for item in s.split(';').map(str::trim).filter(|i| !i.is_empty()) {
            let syntax = || SizeConfigError::Syntax(item.to_string());
            let (label, range) = item.rsplit_once('=').ok_or_else(syntax)?;
            let (lo, hi) = range.split_once("..").ok_or_else(syntax)?;
            let min = lo.trim().parse().map_err(|_| syntax())?;
            let max = match hi.trim() {
                "" => None,
                h => Some(h.parse().map_err(|_| syntax())?),
            };
            ranges.push(SizeRange {
                label: label.trim().to_string(),
                min,
                max,
            });
        }
        SizeBucketConfig::new(ranges)
    }
}

impl fmt::Display for SizeBucketConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .ranges
            .iter()
            .map(|r| match r.max {
                Some(m) => format!("{}={}..{}", r.label, r.min, m),
                None => format!("{}={}..", r.label, r.min),
            })
            .collect();
        f.write_str(&items.join(";"))
    }
}

/// Trades split by size range, in configuration order.
#[derive(Debug, Clone)]
pub struct SizePartition {
    pub parts: Vec<(String, TradeTape)>,
    /// Trades whose size matches no configured range.
    pub unassigned: TradeTape,
}

impl SizePartition {
    pub fn get(&self, label: &str) -> Option<&TradeTape> {
        self.parts.iter().find(|(l, _)| l == label).map(|(_, t)| t)
    }

    pub fn unassigned_count(&self) -> usize {
        self.unassigned.len()
    }
}

pub fn partition_by_size(tape: &TradeTape, config: &SizeBucketConfig) -> SizePartition {
    let mut buckets: BTreeMap<&str, Vec<TradeRecord>> = BTreeMap::new();
    let mut unassigned = Vec::new();
    for rec in &tape.records {
        match config.classify(rec.size.max(0) as u64) {
            Some(label) => buckets.entry(label).or_default().push(rec.clone()),
            None => unassigned.push(rec.clone()),
        }
    }
    let parts = config
        .labels()
        .map(|l| {
            let recs = buckets.remove(l).unwrap_or_default();
            (l.to_string(), tape.with_records(recs))
        })
        .collect();
    SizePartition {
        parts,
        unassigned: tape.with_records(unassigned),
    }
}

/// Share of trade count per size range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeProportions {
    pub by_label: Vec<(String, f64)>,
    pub unassigned: f64,
}

impl SizeProportions {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.by_label.iter().find(|(l, _)| l == label).map(|(_, p)| *p)
    }
}

pub fn size_bucket_proportions(tape: &TradeTape, config: &SizeBucketConfig) -> SizeProportions {
    let mut counts = vec![0usize; config.ranges().len()];
    let mut unassigned = 0usize;
    for rec in &tape.records {
        let size = rec.size.max(0) as u64;
        match config.ranges().iter().position(|r| r.contains(size)) {
            Some(i) => counts[i] += 1,
            None => unassigned += 1,
        }
    }
    let total = tape.len();
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    SizeProportions {
        by_label: config
            .labels()
            .zip(&counts)
            .map(|(l, &n)| (l.to_string(), frac(n)))
            .collect(),
        unassigned: frac(unassigned),
    }
}

/// Mean shares per trade (trade-count mean); `None` for an empty tape.
pub fn mean_trade_size(tape: &TradeTape) -> Option<f64> {
    if tape.is_empty() {
        return None;
    }
    let shares: i64 = tape.records.iter().map(|r| r.size).sum();
    Some(shares as f64 / tape.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl From<NaiveDate> for YearMonth {
    fn from(d: NaiveDate) -> Self {
        YearMonth {
            year: d.year(),
            month: d.month(),
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// How the monthly band around the mean is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonthlyBand {
    /// 2.5th and 97.5th empirical percentiles of the daily values.
    #[default]
    Percentile,
    /// Mean plus or minus two sample standard deviations.
    MeanTwoSd,
}

impl FromStr for MonthlyBand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "percentile" => Ok(MonthlyBand::Percentile),
            "mean2sd" | "mean-2sd" => Ok(MonthlyBand::MeanTwoSd),
            other => Err(format!("unknown monthly band mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySummary {
    pub month: YearMonth,
    pub mean_h: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub day_count: usize,
    pub daily: Vec<(NaiveDate, f64)>,
}

/// Groups daily estimates by calendar month, in month order.
pub fn monthly_summary(daily: &[(NaiveDate, f64)], band: MonthlyBand) -> Vec<MonthlySummary> {
    let mut months: BTreeMap<YearMonth, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for &(d, h) in daily {
        months.entry(d.into()).or_default().push((d, h));
    }
    months
        .into_iter()
        .map(|(month, mut days)| {
            days.sort_by_key(|(d, _)| *d);
            let hs: Vec<f64> = days.iter().map(|(_, h)| *h).collect();
            let n = hs.len() as f64;
            let mean = hs.iter().sum::<f64>() / n;
            let (lo, hi) = match band {
                MonthlyBand::Percentile => {
                    let mut sorted = hs.clone();
                    sorted.sort_by(f64::total_cmp);
                    (quantile(&sorted, 0.025), quantile(&sorted, 0.975))
                }
                MonthlyBand::MeanTwoSd => {
                    let sd = if hs.len() > 1 {
                        (hs.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    (mean - 2.0 * sd, mean + 2.0 * sd)
                }
            };
            MonthlySummary {
                month,
                mean_h: mean,
                // A skewed month can put the mean outside the percentile band.
                ci_low: lo.min(mean),
                ci_high: hi.max(mean),
                day_count: hs.len(),
                daily: days,
            }
        })
        .collect()
}

/// Linear interpolation between order statistics at `(n − 1)·q`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// CSV with columns `month,mean_H,ci_low,ci_high,day_count`.
pub fn write_monthly_csv<W: Write>(rows: &[MonthlySummary], mut out: W) -> io::Result<()> {
    writeln!(out, "month,mean_H,ci_low,ci_high,day_count")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.month, r.mean_h, r.ci_low, r.ci_high, r.day_count
        )?;
    }
    Ok(())
}
