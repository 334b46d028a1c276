//! Self-similarity analysis of traded-value time series built from tick data.
//!
//! The pipeline runs trade tape → filtered [`tape::TradeTape`] → bucketed
//! [`series::ValueSeries`] → Haar [`wavelet::WaveletDecomposition`] →
//! [`hurst::LogscaleDiagram`] → weighted slope → [`hurst::HurstEstimate`].
//! [`synth`] provides fractional Gaussian noise and related series with known
//! Hurst exponent for validating the estimator.

pub mod hurst;
pub mod series;
pub mod special;
pub mod synth;
pub mod tape;
pub mod wavelet;

pub use hurst::{estimate_session, HurstEstimate, OctaveSettings};
pub use series::{bucketize, BucketWidth, ValueSeries};
pub use tape::{load_session, FilterPolicy, Schema, TradeTape};
pub use wavelet::haar_dwt;
