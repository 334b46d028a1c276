//! Flat `key = value` run configuration. File values are read first, command
//! line overrides are applied on top, then the merged map is validated once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use tickhurst_core::hurst::{LogscaleMode, OctaveSettings};
use tickhurst_core::series::{BucketWidth, MonthlyBand, SizeBucketConfig};
use tickhurst_core::tape::{FilterPolicy, Schema};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Every recognised key with its default, in output order.
const KEYS: &[(&str, &str)] = &[
    ("inputs", ""),
    ("schema", "time,price,size,cond,corr,ex"),
    ("delimiter", ","),
    ("excluded_conditions", "B,D,G,J,K,L,M,N,O,P,Q,R,T,U,W,Z,4,6"),
    ("nasdaq_only_conditions", "4,6"),
    ("allowed_corrections", "0,1,2"),
    ("session_start", "34200"),
    ("session_end", "57600"),
    ("trim_tail_seconds", "auto"),
    ("delta_t", "1"),
    ("j1", "1"),
    ("j2", "10"),
    ("max_octave", "14"),
    ("logscale_mode", "raw"),
    ("size_buckets", ""),
    ("monthly_band", "percentile"),
    ("output_dir", "out"),
    ("format", "csv"),
    ("seed", "0"),
    ("workers", "0"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<String>,
    pub schema: Schema,
    pub policy: FilterPolicy,
    pub delta_t: BucketWidth,
    pub octaves: OctaveSettings,
    pub size_buckets: SizeBucketConfig,
    pub band: MonthlyBand,
    pub output_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    /// 0 lets the pool pick one worker per core.
    pub workers: usize,
    /// The fully merged key/value map, defaults included.
    pub settings: BTreeMap<String, String>,
}

/// Parses the flat config text. `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: idx + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: idx + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

fn invalid(key: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.to_string(),
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn number<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &'static str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    map[key].parse().map_err(|e: T::Err| invalid(key, e))
}

impl RunConfig {
    /// Merges `layers` in order (later wins) over the defaults and validates.
    pub fn resolve(layers: &[Vec<(String, String)>]) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in layers.iter().flatten() {
            if !map.contains_key(k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
            map.insert(k.clone(), v.clone());
        }

        let delimiter = match map["delimiter"].as_str() {
            "tab" | "\\t" => '\t',
            d if d.chars().count() == 1 => d.chars().next().unwrap(),
            d => return Err(invalid("delimiter", format!("expected one character, got `{d}`"))),
        };
        let schema = Schema::parse(&map["schema"], delimiter).map_err(|e| invalid("schema", e))?;

        let corrections = list(&map["allowed_corrections"])
            .map(|c| c.parse::<u32>().map_err(|e| invalid("allowed_corrections", e)))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let policy = FilterPolicy {
            excluded_conditions: list(&map["excluded_conditions"]).map(str::to_uppercase).collect(),
            nasdaq_only_conditions: list(&map["nasdaq_only_conditions"]).map(str::to_uppercase).collect(),
            allowed_corrections: corrections,
            session_start: number(&map, "session_start")?,
            session_end: number(&map, "session_end")?,
            trim_tail_seconds: match map["trim_tail_seconds"].as_str() {
                "auto" | "" => None,
                _ => Some(number(&map, "trim_tail_seconds")?),
            },
        };
        if policy.session_start >= policy.session_end {
            return Err(invalid("session_end", "must be after session_start"));
        }

        let dt: f64 = number(&map, "delta_t")?;
        let delta_t = BucketWidth::from_seconds(dt)
            .ok_or_else(|| invalid("delta_t", "must be a positive whole number of microseconds"))?;

        let octaves = OctaveSettings {
            j1: number(&map, "j1")?,
            j2: number(&map, "j2")?,
            max_octave: number(&map, "max_octave")?,
            mode: match map["logscale_mode"].as_str() {
                "raw" => LogscaleMode::Raw,
                "bias_corrected" => LogscaleMode::BiasCorrected,
                m => return Err(invalid("logscale_mode", format!("expected raw|bias_corrected, got `{m}`"))),
            },
        };
        if octaves.j1 == 0 || octaves.j1 > octaves.j2 {
            return Err(invalid("j1", "need 1 <= j1 <= j2"));
        }
        if octaves.j2 - octaves.j1 + 1 < 2 {
            return Err(invalid("j2", "the fit needs at least two octaves"));
        }
        if octaves.max_octave < octaves.j2 || octaves.max_octave >= 64 {
            return Err(invalid("max_octave", "need j2 <= max_octave < 64"));
        }

        let size_buckets = match map["size_buckets"].as_str() {
            "" => SizeBucketConfig::default(),
            s => s.parse().map_err(|e| invalid("size_buckets", e))?,
        };
        let band = map["monthly_band"].parse().map_err(|e| invalid("monthly_band", e))?;
        let format = match map["format"].as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            f => return Err(invalid("format", format!("expected csv|json, got `{f}`"))),
        };
        if map["output_dir"].is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }

        Ok(RunConfig {
            inputs: list(&map["inputs"]).map(String::from).collect(),
            schema,
            policy,
            delta_t,
            octaves,
            size_buckets,
            band,
            output_dir: PathBuf::from(&map["output_dir"]),
            format,
            seed: number(&map, "seed")?,
            workers: number(&map, "workers")?,
            settings: map,
        })
    }

    /// Canonical `key = value` listing of the merged configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.settings {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&[]).unwrap();
        assert_eq!(c.policy, FilterPolicy::default());
        assert_eq!(c.octaves, OctaveSettings::default());
        assert_eq!(c.delta_t, BucketWidth::ONE_SECOND);
        assert_eq!(c.size_buckets, SizeBucketConfig::default());
        assert_eq!(c.format, Format::Csv);
    }

    #[test]
    fn later_layer_wins() {
        let file = parse_config_text("# study\nj2 = 9\nseed=4\n\nformat = json # inline\n").unwrap();
        let c = RunConfig::resolve(&[file, kv(&[("seed", "11")])]).unwrap();
        assert_eq!(c.octaves.j2, 9);
        assert_eq!(c.seed, 11);
        assert_eq!(c.format, Format::Json);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::resolve(&[kv(&[("delta_t", "-1")])]).unwrap_err();
        assert!(e.to_string().contains("delta_t"), "{e}");
        let e = RunConfig::resolve(&[kv(&[("size_buckets", "a=1..5;b=3..9")])]).unwrap_err();
        assert!(e.to_string().contains("size_buckets"), "{e}");
        let e = RunConfig::resolve(&[kv(&[("colour", "red")])]).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey(_)));
        assert!(matches!(parse_config_text("j1 1"), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::resolve(&[]).unwrap();
        let b = RunConfig::resolve(&[kv(&[("seed", "0")])]).unwrap();
        let c = RunConfig::resolve(&[kv(&[("seed", "1")])]).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        assert_ne!(a.sha256(), c.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
