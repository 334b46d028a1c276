//! Subcommand bodies. Each session is processed end-to-end by one worker; all
//! writes happen afterwards on the calling thread, in input order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use tickhurst_core::hurst::{
    build_logscale, estimate_session, weighted_slope, HurstEstimate, HurstRecord, LogscaleDiagram,
};
use tickhurst_core::series::{
    bucketize, monthly_summary, partition_by_size, size_bucket_proportions, write_monthly_csv,
    ValueSeries,
};
use tickhurst_core::synth::{shuffle, SynthSpec};
use tickhurst_core::tape::{load_session, DropReason, TradeTape};
use tickhurst_core::wavelet::haar_dwt;

use crate::config::{Format, RunConfig};
use crate::inputs::{expand_inputs, sanitize_label, session_identity};
use crate::report::{FileRecord, OutputDir, Status};

/// Bad invocation or configuration; maps to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Per-file tally of a batch run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub ok: usize,
    pub failed: usize,
}

impl Outcome {
    pub fn total_failure(&self) -> bool {
        self.ok == 0 && self.failed > 0
    }
}

fn load(cfg: &RunConfig, path: &Path) -> Result<TradeTape> {
    let (symbol, date) = session_identity(path)?;
    Ok(load_session(path, &symbol, date, &cfg.policy, &cfg.schema)?)
}

fn session_paths(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let paths = expand_inputs(&cfg.inputs)?;
    if paths.is_empty() {
        return Err(UsageError("no input sessions given".into()).into());
    }
    Ok(paths)
}

/// Runs `job` over every path on a pool of `cfg.workers` threads, keeping input order.
fn run_pool<T, F>(cfg: &RunConfig, paths: &[PathBuf], job: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(usize, &Path) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("starting worker pool")?;
    Ok(pool.install(|| {
        paths
            .par_iter()
            .enumerate()
            .map(|(i, p)| job(i, p))
            .collect()
    }))
}

/// Splits results into successes and manifest records, logging failures.
fn settle<T>(paths: &[PathBuf], results: Vec<Result<T>>) -> (Vec<(usize, T)>, Vec<FileRecord>, Outcome) {
    let mut good = Vec::new();
    let mut records = Vec::new();
    let mut outcome = Outcome::default();
    for (i, (path, r)) in paths.iter().zip(results).enumerate() {
        match r {
            Ok(v) => {
                outcome.ok += 1;
                records.push(FileRecord::new(path, Status::Ok, None));
                good.push((i, v));
            }
            Err(e) => {
                outcome.failed += 1;
                log::warn!("skipping {}: {e:#}", path.display());
                records.push(FileRecord::new(path, Status::Failed, Some(format!("{e:#}"))));
            }
        }
    }
    (good, records, outcome)
}

fn session_stem(symbol: &str, date: NaiveDate) -> String {
    format!("{symbol}_{}", date.format("%Y%m%d"))
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Serialize)]
struct IngestRow {
    symbol: String,
    date: NaiveDate,
    parsed: u64,
    kept: usize,
    excluded_condition: u64,
    bad_correction: u64,
    non_positive_price: u64,
    non_positive_size: u64,
    outside_session: u64,
    tail_trim: u64,
    buckets: usize,
    total_value: String,
}

#[derive(Debug, Serialize)]
struct SeriesRow {
    bucket_index: usize,
    t_start_seconds: f64,
    traded_value: String,
}

pub fn ingest(cfg: &RunConfig) -> Result<Outcome> {
    let paths = session_paths(cfg)?;
    let results = run_pool(cfg, &paths, |_, p| {
        let tape = load(cfg, p)?;
        let series = bucketize(&tape, cfg.delta_t);
        Ok((tape, series))
    })?;
    let (good, files, outcome) = settle(&paths, results);

    let mut out = OutputDir::create(cfg)?;
    let mut summary = Vec::new();
    for (_, (tape, series)) in &good {
        let log = &tape.drop_log;
        summary.push(IngestRow {
            symbol: tape.symbol.clone(),
            date: tape.session_date,
            parsed: tape.parsed_rows,
            kept: tape.len(),
            excluded_condition: log.count(DropReason::ExcludedCondition),
            bad_correction: log.count(DropReason::BadCorrection),
            non_positive_price: log.count(DropReason::NonPositivePrice),
            non_positive_size: log.count(DropReason::NonPositiveSize),
            outside_session: log.count(DropReason::OutsideSession),
            tail_trim: log.count(DropReason::TailTrim),
            buckets: series.len(),
            total_value: series.total().to_string(),
        });
        write_series(&mut out, series)?;
    }
    out.rows("ingest_summary", &summary)?;
    out.finish(cfg, "ingest", files)?;
    Ok(outcome)
}

fn write_series(out: &mut OutputDir, series: &ValueSeries) -> Result<()> {
    let stem = format!("series/{}", session_stem(&series.symbol, series.session_date));
    match out.format() {
        Format::Csv => out.with(&format!("{stem}.csv"), |w| series.write_csv(w)),
        Format::Json => {
            let rows: Vec<SeriesRow> = series
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| SeriesRow {
                    bucket_index: i,
                    t_start_seconds: series.bucket_start(i),
                    traded_value: v.to_string(),
                })
                .collect();
            out.json(&format!("{stem}.json"), &rows)
        }
    }
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Serialize)]
struct MonthlyRow {
    symbol: String,
    month: String,
    #[serde(rename = "mean_H")]
    mean_h: f64,
    ci_low: f64,
    ci_high: f64,
    day_count: usize,
}

/// Full daily pipeline keeping the diagram for export.
fn estimate_with_diagram(series: &[f64], cfg: &RunConfig) -> Result<(HurstEstimate, LogscaleDiagram)> {
    let s = &cfg.octaves;
    let depth = s.depth_for(series.len())?;
    let decomp = haar_dwt(series, depth)?;
    let diagram = build_logscale(&decomp, s.j1, s.j2, s.mode)?;
    let est = HurstEstimate::from_slope(weighted_slope(&diagram)?);
    Ok((est, diagram))
}

pub fn analyze(cfg: &RunConfig) -> Result<Outcome> {
    let paths = session_paths(cfg)?;
    let results = run_pool(cfg, &paths, |_, p| {
        let tape = load(cfg, p)?;
        let series = bucketize(&tape, cfg.delta_t).to_f64();
        let (est, mut diagram) = estimate_with_diagram(&series, cfg)?;
        diagram.symbol = Some(tape.symbol.clone());
        diagram.session_date = Some(tape.session_date);
        Ok((HurstRecord::new(&tape.symbol, tape.session_date, &est), est, diagram))
    })?;
    let (good, mut files, outcome) = settle(&paths, results);

    let mut out = OutputDir::create(cfg)?;
    let mut rows = Vec::new();
    let mut by_symbol: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (i, (rec, est, diagram)) in good {
        if est.out_of_range() {
            let msg = format!("H = {:.4} lies outside (0, 1)", est.h);
            log::warn!("{}: {msg}", paths[i].display());
            files[i].warnings.push(msg);
        }
        let stem = format!("logscale/{}", session_stem(&rec.symbol, rec.date));
        match out.format() {
            Format::Csv => out.with(&format!("{stem}.csv"), |w| diagram.write_csv(w))?,
            Format::Json => out.json(&format!("{stem}.json"), &diagram.points)?,
        }
        by_symbol.entry(rec.symbol.clone()).or_default().push((rec.date, rec.h));
        rows.push(rec);
    }
    out.rows("sessions", &rows)?;

    for (symbol, daily) in &by_symbol {
        let months = monthly_summary(daily, cfg.band);
        let stem = format!("monthly_{}", sanitize_label(symbol));
        match out.format() {
            Format::Csv => out.with(&format!("{stem}.csv"), |w| write_monthly_csv(&months, w))?,
            Format::Json => {
                let rows: Vec<MonthlyRow> = months
                    .iter()
                    .map(|m| MonthlyRow {
                        symbol: symbol.clone(),
                        month: m.month.to_string(),
                        mean_h: m.mean_h,
                        ci_low: m.ci_low,
                        ci_high: m.ci_high,
                        day_count: m.day_count,
                    })
                    .collect();
                out.json(&format!("{stem}.json"), &rows)?
            }
        }
    }
    out.finish(cfg, "analyze", files)?;
    Ok(outcome)
}

// ---------------------------------------------------------------- buckets

#[derive(Debug, Serialize)]
struct BucketRow {
    symbol: String,
    date: NaiveDate,
    label: String,
    trades: usize,
    #[serde(rename = "H")]
    h: f64,
    ci_low: f64,
    ci_high: f64,
    alpha_hat: f64,
    var_alpha: f64,
}

#[derive(Debug, Serialize)]
struct SkipRow {
    symbol: String,
    date: NaiveDate,
    label: String,
    trades: usize,
    reason: String,
}

#[derive(Debug, Serialize)]
struct ProportionRow {
    symbol: String,
    date: NaiveDate,
    label: String,
    fraction: f64,
}

struct BucketResult {
    estimates: Vec<BucketRow>,
    skipped: Vec<SkipRow>,
    proportions: Vec<ProportionRow>,
}

pub fn buckets(cfg: &RunConfig) -> Result<Outcome> {
    let paths = session_paths(cfg)?;
    let results = run_pool(cfg, &paths, |_, p| {
        let tape = load(cfg, p)?;
        let parts = partition_by_size(&tape, &cfg.size_buckets);
        let mut res = BucketResult {
            estimates: Vec::new(),
            skipped: Vec::new(),
            proportions: Vec::new(),
        };
        for (label, part) in &parts.parts {
            let attempt = if part.is_empty() {
                Err(anyhow!("no trades in range"))
            } else {
                let series = bucketize(part, cfg.delta_t).to_f64();
                estimate_session(&series, &cfg.octaves).map_err(anyhow::Error::from)
            };
            match attempt {
                Ok(est) => res.estimates.push(BucketRow {
                    symbol: tape.symbol.clone(),
                    date: tape.session_date,
                    label: label.clone(),
                    trades: part.len(),
                    h: est.h,
                    ci_low: est.ci_low,
                    ci_high: est.ci_high,
                    alpha_hat: est.slope.alpha_hat,
                    var_alpha: est.slope.variance,
                }),
                Err(e) => res.skipped.push(SkipRow {
                    symbol: tape.symbol.clone(),
                    date: tape.session_date,
                    label: label.clone(),
                    trades: part.len(),
                    reason: e.to_string(),
                }),
            }
        }
        let props = size_bucket_proportions(&tape, &cfg.size_buckets);
        let row = |label: &str, fraction| ProportionRow {
            symbol: tape.symbol.clone(),
            date: tape.session_date,
            label: label.to_string(),
            fraction,
        };
        res.proportions = props.by_label.iter().map(|(l, f)| row(l, *f)).collect();
        res.proportions.push(row("unassigned", props.unassigned));
        Ok(res)
    })?;
    let (good, files, outcome) = settle(&paths, results);

    let mut out = OutputDir::create(cfg)?;
    let mut per_label: BTreeMap<&str, Vec<BucketRow>> =
        cfg.size_buckets.labels().map(|l| (l, Vec::new())).collect();
    let mut skipped = Vec::new();
    let mut proportions = Vec::new();
    for (_, res) in good {
        for row in res.estimates {
            let label = cfg.size_buckets.labels().find(|l| *l == row.label).expect("configured label");
            per_label.entry(label).or_default().push(row);
        }
        for s in &res.skipped {
            log::info!("{} {} bucket {} skipped: {}", s.symbol, s.date, s.label, s.reason);
        }
        skipped.extend(res.skipped);
        proportions.extend(res.proportions);
    }
    for label in cfg.size_buckets.labels() {
        let rows = per_label.remove(label).unwrap_or_default();
        out.rows(&format!("bucket_{}", sanitize_label(label)), &rows)?;
    }
    out.rows("buckets_skipped", &skipped)?;
    out.rows("proportions", &proportions)?;
    out.finish(cfg, "buckets", files)?;
    Ok(outcome)
}

// ---------------------------------------------------------------- shuffle-check

#[derive(Debug, Serialize)]
struct ShuffleRow {
    symbol: String,
    date: NaiveDate,
    shuffle_seed: u64,
    #[serde(rename = "H_original")]
    h_original: f64,
    #[serde(rename = "H_shuffled")]
    h_shuffled: f64,
    difference: f64,
}

/// Per-session shuffle seed: the run seed mixed with the session's position in
/// the sorted input list.
pub fn shuffle_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn shuffle_check(cfg: &RunConfig) -> Result<Outcome> {
    let paths = session_paths(cfg)?;
    let results = run_pool(cfg, &paths, |i, p| {
        let tape = load(cfg, p)?;
        let series = bucketize(&tape, cfg.delta_t).to_f64();
        let original = estimate_session(&series, &cfg.octaves)?;
        let seed = shuffle_seed(cfg.seed, i);
        let shuffled = estimate_session(&shuffle(&series, seed), &cfg.octaves)?;
        Ok(ShuffleRow {
            symbol: tape.symbol,
            date: tape.session_date,
            shuffle_seed: seed,
            h_original: original.h,
            h_shuffled: shuffled.h,
            difference: original.h - shuffled.h,
        })
    })?;
    let (good, files, outcome) = settle(&paths, results);
    let rows: Vec<ShuffleRow> = good.into_iter().map(|(_, r)| r).collect();

    let mut out = OutputDir::create(cfg)?;
    out.rows("shuffle_check", &rows)?;
    out.finish(cfg, "shuffle-check", files)?;
    Ok(outcome)
}

// ---------------------------------------------------------------- synth

/// Writes `synth_<kind>_<seed>.csv` (one `value` column) and a JSON sidecar with the spec.
pub fn synth(cfg: &RunConfig, spec: &SynthSpec) -> Result<Outcome> {
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    let values = spec.generate()?;
    let stem = format!("synth_{}_{}", spec.kind, spec.seed);

    let mut out = OutputDir::create(cfg)?;
    out.with(&format!("{stem}.csv"), |w| {
        use std::io::Write;
        writeln!(w, "value")?;
        for v in &values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    })?;
    out.json(&format!("{stem}.json"), spec)?;
    out.finish(cfg, "synth", Vec::new())?;
    Ok(Outcome { ok: 1, failed: 0 })
}
