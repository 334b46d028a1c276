//! Synthetic series with known scaling: white noise, fractional Gaussian noise,
//! shuffles, and two-noise superpositions.
//!
//! Random streams come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`. Stream 0 feeds white noise and shuffles, stream 1 feeds the
//! fGn component of a superposition, so the two components are independent.
//! Normals are drawn with `rand_distr::StandardNormal`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative size of a negative circulant eigenvalue tolerated as round-off.
const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    White,
    Fgn,
    Superposition,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::White => "white",
            SynthKind::Fgn => "fgn",
            SynthKind::Superposition => "superposition",
        })
    }
}

impl FromStr for SynthKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, SynthError> {
        match s {
            "white" => Ok(SynthKind::White),
            "fgn" => Ok(SynthKind::Fgn),
            "superposition" => Ok(SynthKind::Superposition),
            _ => Err(SynthError::Invalid {
                field: "kind",
                reason: format!("unknown kind `{s}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub target_h: f64,
    pub length: usize,
    pub seed: u64,
    /// Share of variance carried by the fGn component (superposition only).
    pub mix_weight: f64,
}

impl SynthSpec {
    pub fn white(length: usize, seed: u64) -> Self {
        SynthSpec {
            kind: SynthKind::White,
            target_h: 0.5,
            length,
            seed,
            mix_weight: 0.0,
        }
    }

    pub fn fgn(target_h: f64, length: usize, seed: u64) -> Self {
        SynthSpec {
            kind: SynthKind::Fgn,
            target_h,
            length,
            seed,
            mix_weight: 1.0,
        }
    }

    pub fn superposition(target_h: f64, mix_weight: f64, length: usize, seed: u64) -> Self {
        SynthSpec {
            kind: SynthKind::Superposition,
            target_h,
            length,
            seed,
            mix_weight,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.length < 2 {
            return Err(SynthError::Invalid {
                field: "length",
                reason: format!("must be at least 2, got {}", self.length),
            });
        }
        if !(self.target_h > 0.0 && self.target_h < 1.0) {
            return Err(SynthError::Invalid {
                field: "target_H",
                reason: format!("must lie in (0, 1), got {}", self.target_h),
            });
        }
        if !(0.0..=1.0).contains(&self.mix_weight) {
            return Err(SynthError::Invalid {
                field: "mix_weight",
                reason: format!("must lie in [0, 1], got {}", self.mix_weight),
            });
        }
        Ok(())
    }

    /// Draws the series this spec describes.
    pub fn generate(&self) -> Result<Vec<f64>, SynthError> {
        match self.kind {
            SynthKind::White | SynthKind::Fgn => fgn_generate(self),
            SynthKind::Superposition => superpose(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("circulant embedding failed for H = {h}, N = {n}: eigenvalue {eigenvalue:e}")]
    Embedding { h: f64, n: usize, eigenvalue: f64 },
    #[error("{0} is not a generator for this operation")]
    WrongKind(SynthKind),
}

/// Autocovariance of unit-variance fGn at lag `k`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn white(length: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..length).map(|_| StandardNormal.sample(rng)).collect()
}

/// Unit-variance fGn by circulant embedding of the exact covariance.
/// `kind = white` draws i.i.d. normals, the `H = 0.5` case.
pub fn fgn_generate(spec: &SynthSpec) -> Result<Vec<f64>, SynthError> {
    spec.validate()?;
    match spec.kind {
        SynthKind::White => Ok(white(spec.length, &mut stream(spec.seed, 0))),
        SynthKind::Fgn => circulant_fgn(spec.target_h, spec.length, &mut stream(spec.seed, 0)),
        other => Err(SynthError::WrongKind(other)),
    }
}

fn circulant_fgn(h: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SynthError> {
    // Embed the n×n Toeplitz covariance in a circulant of size m = 2·half ≥ 2(n − 1).
    let half = (n - 1).max(1).next_power_of_two();
    let m = 2 * half;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|i| Complex::new(fgn_autocovariance(h, i.min(m - i)), 0.0))
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let largest = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut scale = Vec::with_capacity(m);
    for c in &row {
        let mut lambda = c.re;
        if lambda < 0.0 {
            if lambda < -EIGEN_TOLERANCE * largest {
                return Err(SynthError::Embedding { h, n, eigenvalue: lambda });
            }
            lambda = 0.0;
        }
        scale.push((lambda / m as f64).sqrt());
    }

    let mut buf: Vec<Complex<f64>> = scale
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(s * re, s * im)
        })
        .collect();
    fft.process(&mut buf);
    // Real and imaginary parts each carry the target covariance; keep the real part.
    Ok(buf.iter().take(n).map(|c| c.re).collect())
}

/// Uniform random permutation (Fisher–Yates), deterministic per seed.
pub fn shuffle(series: &[f64], seed: u64) -> Vec<f64> {
    let mut out = series.to_vec();
    out.shuffle(&mut stream(seed, 0));
    out
}

/// `sqrt(1 − w)·white + sqrt(w)·fGn(H)` with independent components.
pub fn superpose(spec: &SynthSpec) -> Result<Vec<f64>, SynthError> {
    spec.validate()?;
    if spec.kind != SynthKind::Superposition {
        return Err(SynthError::WrongKind(spec.kind));
    }
    let w = spec.mix_weight;
    let noise = white(spec.length, &mut stream(spec.seed, 0));
    let fractal = circulant_fgn(spec.target_h, spec.length, &mut stream(spec.seed, 1))?;
    Ok(noise
        .iter()
        .zip(&fractal)
        .map(|(a, b)| (1.0 - w).sqrt() * a + w.sqrt() * b)
        .collect())
}
