//! Experiment configuration: flat, line-oriented `key = value` files with
//! section headers, a versioned schema id, and strict unknown-key
//! rejection. Command-line flags overlay file values.

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_SCHEMA: &str = "salemlab-config/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Convolution,
    Cantor,
    Brownian,
    Kaufman,
    Arc,
    OneLine,
}

impl std::str::FromStr for Construction {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "convolution" => Ok(Construction::Convolution),
            "cantor" => Ok(Construction::Cantor),
            "brownian" => Ok(Construction::Brownian),
            "kaufman" => Ok(Construction::Kaufman),
            "arc" => Ok(Construction::Arc),
            "one_line" | "oneline" => Ok(Construction::OneLine),
            other => Err(CliError::Config(format!("unknown construction {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: String,
    pub construction: Construction,
    /// Dimension parameter in (0, 1].
    pub s: f64,
    pub levels: u32,
    pub paths: u32,
    pub q1: f64,
    pub q2: Option<f64>,
    pub cs: Option<f64>,
    /// Positivity witness range for the periodized construction.
    pub kmax: i64,
    pub rmax: f64,
    pub gram_k: u32,
    pub seed: u64,
    pub retry_cap: u64,
    /// Contraction dials override for the convolution construction.
    pub t_vector: Option<Vec<f64>>,
    /// Taper vanishing point override for the translate-plus-taper build.
    pub x0: Option<f64>,
    pub band_min: i32,
    pub band_max: i32,
    pub samples_per_band: u32,
    /// Divergence threshold for the weight-ratio verdict.
    pub ratio_threshold: f64,
}

impl ExperimentConfig {
    pub fn defaults(construction: Construction) -> Self {
        let (band_min, band_max) = match construction {
            Construction::Convolution => (4, 16),
            Construction::Cantor => (4, 11),
            Construction::Kaufman => (4, 16),
            _ => (2, 10),
        };
        let samples_per_band = match construction {
            // the 6-level truncation is almost periodic; a denser band max
            // rides its near-recurrences and masks the decay
            Construction::Convolution => 128,
            _ => 256,
        };
        ExperimentConfig {
            schema: CONFIG_SCHEMA.to_string(),
            construction,
            s: 0.5,
            levels: match construction {
                Construction::Convolution => 6,
                Construction::Cantor => 12,
                // deep enough that the atom floor 2^{-sJ} stays below the
                // second-moment target over the audited frequency window
                Construction::Brownian => 24,
                Construction::Kaufman => 2,
                _ => 6,
            },
            paths: 400,
            q1: 1e4,
            q2: Some(1e7),
            cs: None,
            kmax: 1 << 14,
            rmax: 1e4,
            gram_k: 128,
            seed: 0,
            retry_cap: 64,
            t_vector: None,
            x0: None,
            band_min,
            band_max,
            samples_per_band,
            ratio_threshold: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != CONFIG_SCHEMA {
            return Err(CliError::Config(format!(
                "schema {} not supported (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(CliError::Config(format!(
                "s = {} outside the valid interval (0, 1]",
                self.s
            )));
        }
        if self.band_min > self.band_max {
            return Err(CliError::Config("band_min exceeds band_max".into()));
        }
        Ok(())
    }
}

/// Parses the flat config format. Section headers group keys for humans;
/// keys themselves are globally unique and rejected when unknown.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut construction: Option<Construction> = None;
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut schema_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            continue; // section header, informational only
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key == "schema" {
            if value != CONFIG_SCHEMA {
                return Err(CliError::Config(format!(
                    "unsupported schema {value} (expected {CONFIG_SCHEMA})"
                )));
            }
            schema_seen = true;
            continue;
        }
        if key == "construction" {
            construction = Some(value.parse()?);
            continue;
        }
        pairs.push((key, value));
    }
    if !schema_seen {
        return Err(CliError::Config(format!(
            "missing schema id line `schema = {CONFIG_SCHEMA}`"
        )));
    }
    let construction =
        construction.ok_or_else(|| CliError::Config("missing construction key".into()))?;
    let mut cfg = ExperimentConfig::defaults(construction);
    for (key, value) in pairs {
        apply_key(&mut cfg, &key, &value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), CliError> {
    let bad = |k: &str, v: &str| CliError::Config(format!("bad value {v} for key {k}"));
    match key {
        "s" => cfg.s = value.parse().map_err(|_| bad(key, value))?,
        "levels" => cfg.levels = value.parse().map_err(|_| bad(key, value))?,
        "paths" => cfg.paths = value.parse().map_err(|_| bad(key, value))?,
        "q1" => cfg.q1 = value.parse().map_err(|_| bad(key, value))?,
        "q2" => cfg.q2 = Some(value.parse().map_err(|_| bad(key, value))?),
        "cs" => cfg.cs = Some(value.parse().map_err(|_| bad(key, value))?),
        "kmax" => cfg.kmax = value.parse().map_err(|_| bad(key, value))?,
        "rmax" => cfg.rmax = value.parse().map_err(|_| bad(key, value))?,
        "gram_k" => cfg.gram_k = value.parse().map_err(|_| bad(key, value))?,
        "seed" => cfg.seed = value.parse().map_err(|_| bad(key, value))?,
        "retry_cap" => cfg.retry_cap = value.parse().map_err(|_| bad(key, value))?,
        "x0" => cfg.x0 = Some(value.parse().map_err(|_| bad(key, value))?),
        "band_min" => cfg.band_min = value.parse().map_err(|_| bad(key, value))?,
        "band_max" => cfg.band_max = value.parse().map_err(|_| bad(key, value))?,
        "samples_per_band" => {
            cfg.samples_per_band = value.parse().map_err(|_| bad(key, value))?
        }
        "ratio_threshold" => cfg.ratio_threshold = value.parse().map_err(|_| bad(key, value))?,
        "t_vector" => {
            let vs: Result<Vec<f64>, _> = value.split(',').map(|p| p.trim().parse()).collect();
            cfg.t_vector = Some(vs.map_err(|_| bad(key, value))?);
        }
        other => {
            return Err(CliError::Config(format!("unknown key {other}")));
        }
    }
    Ok(())
}
