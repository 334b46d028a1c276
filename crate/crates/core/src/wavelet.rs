//! Orthonormal Haar pyramid and per-octave coefficient moments.
//!
//! Level `j` is computed from the approximation of level `j − 1`:
//!
//! ```text
//! d(j,k) = (a[2k] − a[2k+1]) / √2
//! a'(k)  = (a[2k] + a[2k+1]) / √2
//! ```
//!
//! When a level has an odd number of approximation samples, the last one is
//! set aside as a tail sample. It belongs to no detail coefficient, so
//! `n_j = floor(N / 2^j)` and the energy identity still closes once the tail
//! samples are counted on the approximation side.

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WaveletError {
    #[error("series of length {len} is too short for {max_octave} octaves")]
    SeriesTooShort { max_octave: u32, len: usize },
    #[error("at least one octave is required")]
    NoOctaves,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    /// `details[j − 1]` holds the coefficients of octave `j`.
    details: Vec<Vec<f64>>,
    approximation: Vec<f64>,
    /// Odd samples removed from the approximation path, as `(octave, value)`.
    tails: Vec<(u32, f64)>,
    /// Sampling interval of the input, in seconds.
    pub sample_interval: f64,
    pub wavelet_id: &'static str,
}

impl WaveletDecomposition {
    pub fn max_octave(&self) -> u32 {
        self.details.len() as u32
    }

    /// Detail coefficients of `octave` (1-based).
    pub fn details(&self, octave: u32) -> &[f64] {
        &self.details[octave as usize - 1]
    }

    pub fn count(&self, octave: u32) -> usize {
        self.details(octave).len()
    }

    pub fn details_mut(&mut self, octave: u32) -> &mut [f64] {
        &mut self.details[octave as usize - 1]
    }

    pub fn approximation(&self) -> &[f64] {
        &self.approximation
    }

    pub fn tails(&self) -> &[(u32, f64)] {
        &self.tails
    }

    pub fn detail_energy(&self) -> f64 {
        self.details.iter().flatten().map(|d| d * d).sum()
    }

    /// Energy of the final approximation plus all carried tail samples.
    pub fn approximation_energy(&self) -> f64 {
        self.approximation.iter().map(|a| a * a).sum::<f64>()
            + self.tails.iter().map(|(_, t)| t * t).sum::<f64>()
    }

    /// Debug dump as `octave,k,coefficient`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "octave,k,coefficient")?;
        for (j, level) in self.details.iter().enumerate() {
            for (k, d) in level.iter().enumerate() {
                writeln!(out, "{},{},{}", j + 1, k, d)?;
            }
        }
        Ok(())
    }
}

/// Haar DWT of `series` down to `max_octave`. Requires `floor(N / 2^max_octave) ≥ 1`.
pub fn haar_dwt(series: &[f64], max_octave: u32) -> Result<WaveletDecomposition, WaveletError> {
    haar_dwt_with_interval(series, max_octave, 1.0)
}

pub fn haar_dwt_with_interval(
    series: &[f64],
    max_octave: u32,
    sample_interval: f64,
) -> Result<WaveletDecomposition, WaveletError> {
    if max_octave == 0 {
        return Err(WaveletError::NoOctaves);
    }
    if max_octave >= usize::BITS || series.len() >> max_octave == 0 {
        return Err(WaveletError::SeriesTooShort {
            max_octave,
            len: series.len(),
        });
    }

    let mut approx = series.to_vec();
    let mut details = Vec::with_capacity(max_octave as usize);
    let mut tails = Vec::new();
    for octave in 1..=max_octave {
        if approx.len() % 2 == 1 {
            tails.push((octave, approx.pop().expect("odd length is non-empty")));
        }
        let (d, a): (Vec<f64>, Vec<f64>) = approx
            .chunks_exact(2)
            .map(|p| {
                (
                    (p[0] - p[1]) * std::f64::consts::FRAC_1_SQRT_2,
                    (p[0] + p[1]) * std::f64::consts::FRAC_1_SQRT_2,
                )
            })
            .unzip();
        details.push(d);
        approx = a;
    }

    Ok(WaveletDecomposition {
        details,
        approximation: approx,
        tails,
        sample_interval,
        wavelet_id: "haar",
    })
}

/// Per-octave `S_n(j) = (1/n_j) Σ_k |d(j,k)|^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub order: u32,
    /// Indexed by octave − 1.
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl MomentTable {
    pub fn get(&self, octave: u32) -> f64 {
        self.values[octave as usize - 1]
    }

    pub fn count(&self, octave: u32) -> usize {
        self.counts[octave as usize - 1]
    }
}

/// Moment of order `order` (≥ 1) of each octave's details.
pub fn moment(decomp: &WaveletDecomposition, order: u32) -> MomentTable {
    assert!(order >= 1, "moment order must be at least 1");
    let power = |d: f64| match order {
        2 => d * d,
        n => d.abs().powi(n as i32),
    };
    let (values, counts) = decomp
        .details
        .iter()
        .map(|level| {
            let n = level.len();
            (level.iter().map(|&d| power(d)).sum::<f64>() / n as f64, n)
        })
        .unzip();
    MomentTable {
        order,
        values,
        counts,
    }
}
