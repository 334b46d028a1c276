//! Logscale diagrams and the weighted minimum-variance slope estimator.
//!
//! For octaves `j ∈ [j1, j2]` with `y_j = log2 S_2(j)` and octave variance
//! `σ_j² = ζ(2, n_j/2) / ln²2`, the slope estimate is `α̂ = Σ w_j y_j` with
//!
//! ```text
//! w_j = (S·j − S_j) / σ_j² / (S·S_jj − S_j²)
//! S = Σ 1/σ_j²,  S_j = Σ j/σ_j²,  S_jj = Σ j²/σ_j²
//! ```
//!
//! and `Var(α̂) = Σ σ_j² w_j²`. The Hurst exponent is `H = (α̂ + 1)/2`, with a
//! 95% band of two standard deviations on `α̂`, i.e. `±sqrt(Var(α̂))` on `H`.

use std::io::{self, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{digamma, hurwitz_zeta2};
use crate::wavelet::{haar_dwt, moment, WaveletDecomposition, WaveletError};

/// Fewest octaves that define a scaling trend.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HurstError {
    #[error("octave range [{j1}, {j2}] is empty")]
    EmptyRange { j1: u32, j2: u32 },
    #[error("octave {j2} exceeds the decomposition depth {max_octave}")]
    OctaveOutOfRange { j2: u32, max_octave: u32 },
    #[error("every octave in the range has a zero second moment")]
    AllOctavesDegenerate,
    #[error("need at least {needed} usable octaves, found {found}")]
    TooFewOctaves { found: usize, needed: usize },
    #[error("series of length {len} is too short for octave {j2}")]
    SeriesTooShort { len: usize, j2: u32 },
    #[error("tail exponent {0} is outside (0, 2]")]
    TailAlphaOutOfRange(f64),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Variance of `y_j` for an octave with `count` detail coefficients.
pub fn octave_variance(count: usize) -> f64 {
    assert!(count >= 1, "an octave needs at least one coefficient");
    let ln2 = std::f64::consts::LN_2;
    hurwitz_zeta2(count as f64 / 2.0) / (ln2 * ln2)
}

/// Expected offset `E[log2 S_2] − log2 E[S_2]` for Gaussian coefficients.
fn log_bias(count: usize) -> f64 {
    let half = count as f64 / 2.0;
    digamma(half) / std::f64::consts::LN_2 - half.log2()
}

/// How `y_j` is formed from the second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogscaleMode {
    /// `y_j = log2 S_2(j)`.
    #[default]
    Raw,
    /// `y_j = log2 S_2(j) − (ψ(n_j/2)/ln 2 − log2(n_j/2))`, removing the
    /// small-sample bias of the logarithm. Off by default.
    BiasCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogscalePoint {
    pub octave: u32,
    /// `NEG_INFINITY` when the octave's second moment is zero.
    pub y: f64,
    pub count: usize,
    pub variance: f64,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogscaleDiagram {
    pub points: Vec<LogscalePoint>,
    pub symbol: Option<String>,
    pub session_date: Option<NaiveDate>,
}

impl LogscaleDiagram {
    /// Builds a diagram directly from `(octave, y, count)` triples.
    pub fn from_points(points: impl IntoIterator<Item = (u32, f64, usize)>) -> Self {
        LogscaleDiagram {
            points: points
                .into_iter()
                .map(|(octave, y, count)| LogscalePoint {
                    octave,
                    y,
                    count,
                    variance: octave_variance(count),
                    included: y.is_finite(),
                })
                .collect(),
            symbol: None,
            session_date: None,
        }
    }

    pub fn included(&self) -> impl Iterator<Item = &LogscalePoint> {
        self.points.iter().filter(|p| p.included)
    }

    /// Octaves dropped because their second moment was zero.
    pub fn excluded_octaves(&self) -> Vec<u32> {
        self.points
            .iter()
            .filter(|p| !p.included)
            .map(|p| p.octave)
            .collect()
    }

    /// Restricts the diagram to octaves in `[j1, j2]`.
    pub fn range(&self, j1: u32, j2: u32) -> LogscaleDiagram {
        LogscaleDiagram {
            points: self
                .points
                .iter()
                .filter(|p| (j1..=j2).contains(&p.octave))
                .cloned()
                .collect(),
            symbol: self.symbol.clone(),
            session_date: self.session_date,
        }
    }

    /// CSV with columns `octave,y_j,n_j,sigma_sq,included_flag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "octave,y_j,n_j,sigma_sq,included_flag")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.octave, p.y, p.count, p.variance, p.included as u8
            )?;
        }
        Ok(())
    }
}

/// One logscale point per octave in `[j1, j2]`. Octaves with a zero second
/// moment are kept but marked not included.
pub fn build_logscale(
    decomp: &WaveletDecomposition,
    j1: u32,
    j2: u32,
    mode: LogscaleMode,
) -> Result<LogscaleDiagram, HurstError> {
    if j1 == 0 || j1 > j2 {
        return Err(HurstError::EmptyRange { j1, j2 });
    }
    if j2 > decomp.max_octave() {
        return Err(HurstError::OctaveOutOfRange {
            j2,
            max_octave: decomp.max_octave(),
        });
    }
    let moments = moment(decomp, 2);
    let points: Vec<LogscalePoint> = (j1..=j2)
        .map(|j| {
            let s2 = moments.get(j);
            let count = moments.count(j);
            let included = s2 > 0.0;
            let mut y = if included { s2.log2() } else { f64::NEG_INFINITY };
            if included && mode == LogscaleMode::BiasCorrected {
                y -= log_bias(count);
            }
            LogscalePoint {
                octave: j,
                y,
                count,
                variance: octave_variance(count),
                included,
            }
        })
        .collect();
    if points.iter().all(|p| !p.included) {
        return Err(HurstError::AllOctavesDegenerate);
    }
    Ok(LogscaleDiagram {
        points,
        symbol: None,
        session_date: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub alpha_hat: f64,
    pub variance: f64,
    pub intercept: f64,
    pub octave_range: (u32, u32),
    /// `(octave, w_j)` for every point used in the fit.
    pub weights: Vec<(u32, f64)>,
}

impl SlopeEstimate {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Weighted fit over the included points of `diagram`; needs at least three.
pub fn weighted_slope(diagram: &LogscaleDiagram) -> Result<SlopeEstimate, HurstError> {
    fit_points(diagram, MIN_FIT_POINTS)
}

fn fit_points(diagram: &LogscaleDiagram, needed: usize) -> Result<SlopeEstimate, HurstError> {
    let pts: Vec<&LogscalePoint> = diagram.included().collect();
    if pts.len() < needed.max(2) {
        return Err(HurstError::TooFewOctaves {
            found: pts.len(),
            needed: needed.max(2),
        });
    }
    let (mut s, mut s_j, mut s_jj) = (0.0, 0.0, 0.0);
    for p in &pts {
        let j = p.octave as f64;
        s += 1.0 / p.variance;
        s_j += j / p.variance;
        s_jj += j * j / p.variance;
    }
    let det = s * s_jj - s_j * s_j;
    let weights: Vec<(u32, f64)> = pts
        .iter()
        .map(|p| (p.octave, (s * p.octave as f64 - s_j) / p.variance / det))
        .collect();
    // Σ w_j = 0, so measuring y from the first point leaves α̂ unchanged and
    // makes a flat diagram give exactly zero.
    let y0 = pts[0].y;
    let alpha_hat = pts
        .iter()
        .zip(&weights)
        .map(|(p, (_, w))| w * (p.y - y0))
        .sum();
    let variance = pts
        .iter()
        .zip(&weights)
        .map(|(p, (_, w))| p.variance * w * w)
        .sum();
    let s_y: f64 = pts.iter().map(|p| p.y / p.variance).sum();
    let intercept = (s_y - alpha_hat * s_j) / s;
    Ok(SlopeEstimate {
        alpha_hat,
        variance,
        intercept,
        octave_range: (pts[0].octave, pts[pts.len() - 1].octave),
        weights,
    })
}

/// `H = (α + 1) / 2`.
pub fn alpha_to_hurst(alpha: f64) -> f64 {
    (alpha + 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub h: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub slope: SlopeEstimate,
}

impl HurstEstimate {
    pub fn from_slope(slope: SlopeEstimate) -> Self {
        let h = alpha_to_hurst(slope.alpha_hat);
        let half = slope.std_error();
        HurstEstimate {
            h,
            ci_low: h - half,
            ci_high: h + half,
            slope,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// Set when `H` falls outside (0, 1). The value is reported as is.
    pub fn out_of_range(&self) -> bool {
        !(self.h > 0.0 && self.h < 1.0)
    }

    pub fn contains(&self, h: f64) -> bool {
        self.ci_low <= h && h <= self.ci_high
    }
}

/// Octave settings for a daily estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OctaveSettings {
    pub j1: u32,
    pub j2: u32,
    pub max_octave: u32,
    pub mode: LogscaleMode,
}

impl Default for OctaveSettings {
    fn default() -> Self {
        OctaveSettings {
            j1: 1,
            j2: 10,
            max_octave: 14,
            mode: LogscaleMode::Raw,
        }
    }
}

impl OctaveSettings {
    /// Decomposition depth actually used for a series of `len` samples: `max_octave`,
    /// or fewer when the series cannot support it, but never less than `j2`.
    pub fn depth_for(&self, len: usize) -> Result<u32, HurstError> {
        if self.j1 == 0 || self.j1 > self.j2 {
            return Err(HurstError::EmptyRange {
                j1: self.j1,
                j2: self.j2,
            });
        }
        let available = if len == 0 { 0 } else { len.ilog2() };
        if available < self.j2 {
            return Err(HurstError::SeriesTooShort { len, j2: self.j2 });
        }
        Ok(self.max_octave.max(self.j2).min(available))
    }
}

/// Daily pipeline: Haar DWT, second moments, logscale diagram, weighted fit.
pub fn estimate_session(series: &[f64], settings: &OctaveSettings) -> Result<HurstEstimate, HurstError> {
    let depth = settings.depth_for(series.len())?;
    let decomp = haar_dwt(series, depth)?;
    let diagram = build_logscale(&decomp, settings.j1, settings.j2, settings.mode)?;
    Ok(HurstEstimate::from_slope(weighted_slope(&diagram)?))
}

/// Fit over one scaling region of a logscale diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFit {
    pub range: (u32, u32),
    pub points: usize,
    /// `None` when fewer than two usable points remain.
    pub fit: Option<SlopeEstimate>,
    /// Set when fewer than three points back the fit; no Hurst value is claimed.
    pub indicative_only: bool,
    pub hurst: Option<HurstEstimate>,
}

impl RegionFit {
    fn new(diagram: &LogscaleDiagram, j1: u32, j2: u32) -> Self {
        let sub = diagram.range(j1, j2);
        let points = sub.included().count();
        let fit = fit_points(&sub, 2).ok();
        let indicative_only = points < MIN_FIT_POINTS;
        let hurst = match (&fit, indicative_only) {
            (Some(f), false) => Some(HurstEstimate::from_slope(f.clone())),
            _ => None,
        };
        RegionFit {
            range: (j1, j2),
            points,
            fit,
            indicative_only,
            hurst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiscalingReport {
    /// Fine scales, `[1, split]`.
    pub high_frequency: RegionFit,
    /// Coarse scales, `[split + 1, max_octave]`.
    pub low_frequency: RegionFit,
}

impl BiscalingReport {
    /// Slope difference in units of the combined standard error, when both fits exist.
    pub fn separation(&self) -> Option<f64> {
        let hi = self.high_frequency.fit.as_ref()?;
        let lo = self.low_frequency.fit.as_ref()?;
        Some((lo.alpha_hat - hi.alpha_hat).abs() / (hi.variance + lo.variance).sqrt())
    }
}

/// Independent fits over `[1, split]` and `[split + 1, max_octave]`.
pub fn biscaling_report(
    decomp: &WaveletDecomposition,
    split: u32,
    mode: LogscaleMode,
) -> Result<BiscalingReport, HurstError> {
    let max = decomp.max_octave();
    if split == 0 || split >= max {
        return Err(HurstError::EmptyRange {
            j1: split + 1,
            j2: max,
        });
    }
    let full = build_logscale(decomp, 1, max, mode)?;
    let high_frequency = RegionFit::new(&full, 1, split);
    if high_frequency.fit.is_none() || high_frequency.indicative_only {
        return Err(HurstError::TooFewOctaves {
            found: high_frequency.points,
            needed: MIN_FIT_POINTS,
        });
    }
    Ok(BiscalingReport {
        high_frequency,
        low_frequency: RegionFit::new(&full, split + 1, max),
    })
}

/// Hurst exponent implied by a heavy-tail exponent: `H = (3 − α_tail) / 2`.
///
/// This `α_tail` describes `P[v ≥ V] ~ V^(−α_tail)` and is unrelated to the
/// logscale slope `α̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailHurst {
    pub h: f64,
    /// `α_tail = 2` sits on the edge of the admissible range.
    pub boundary: bool,
}

pub fn tail_alpha_to_hurst(tail_alpha: f64) -> Result<TailHurst, HurstError> {
    if !(tail_alpha > 0.0 && tail_alpha <= 2.0) {
        return Err(HurstError::TailAlphaOutOfRange(tail_alpha));
    }
    Ok(TailHurst {
        h: (3.0 - tail_alpha) / 2.0,
        boundary: tail_alpha == 2.0,
    })
}

/// Flat export row shared by the CSV and JSON writers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstRecord {
    pub symbol: String,
    pub date: NaiveDate,
    #[serde(rename = "H")]
    pub h: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha_hat: f64,
    pub var_alpha: f64,
    pub j1: u32,
    pub j2: u32,
}

impl HurstRecord {
    pub fn new(symbol: &str, date: NaiveDate, est: &HurstEstimate) -> Self {
        HurstRecord {
            symbol: symbol.to_string(),
            date,
            h: est.h,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            alpha_hat: est.slope.alpha_hat,
            var_alpha: est.slope.variance,
            j1: est.slope.octave_range.0,
            j2: est.slope.octave_range.1,
        }
    }
}
