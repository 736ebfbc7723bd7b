//! Canonical run reports: self-contained JSON (replayable from the embedded
//! config) plus CSV band/ball tables. The emitted artifact is byte-stable:
//! volatile fields (wall time) are logged to stderr, never serialized with
//! a value.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use std::path::Path;

use salem_core::brownian::DecayMcReport;
use salem_core::cantor::{IncrementReport, LevelRecord, SigmaReport};
use salem_core::convolution::{AhlforsReport, SalemLevelParams};
use salem_core::criteria::CriterionReport;
use salem_core::envelope::{BallProfile, FourierProfile};
use salem_core::kaufman::{
    AuxPhi, ComparisonAReport, ComparisonBReport, DivisorBoundReport, FrostmanReport,
    PositivityReport, StabilityReport,
};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const REPORT_SCHEMA: &str = "salemlab-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionDigest {
    /// Atom or node count of the main built object.
    pub size: u64,
    /// Hex SHA-256 of the canonical serialization of the built object.
    pub checksum: String,
}

pub fn digest_of<T: Serialize>(value: &T) -> ConstructionDigest {
    let json = serde_json::to_vec(value).expect("serializable");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    ConstructionDigest {
        size: 0,
        checksum: hex::encode(hasher.finalize()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum Details {
    Convolution {
        levels: Vec<SalemLevelParams>,
        ratio_sequence: Vec<f64>,
        ahlfors: AhlforsReport,
    },
    Cantor {
        t_sequence: Vec<u8>,
        node_counts: Vec<u64>,
        sigma_trajectory: Vec<f64>,
        sigma_report: SigmaReport,
        level_records: Vec<LevelRecord>,
        increment: IncrementReport,
        heavy_mass: f64,
    },
    Brownian {
        t_sequence: Vec<u8>,
        origin_ladder: Vec<f64>,
        window_constant: f64,
        decay: DecayMcReport,
        heavy_ball_alpha: f64,
    },
    Kaufman {
        prime_counts_mu: Vec<usize>,
        prime_counts_nu: Vec<usize>,
        c_s: f64,
        calibrated: bool,
        factor_product: f64,
        phi: AuxPhi,
        positivity: PositivityReport,
        stability: StabilityReport,
        frostman: FrostmanReport,
        comparison_pointwise: Vec<ComparisonAReport>,
        comparison_frequency: ComparisonBReport,
        divisor_bound: DivisorBoundReport,
    },
    Arc {
        sup_scaled: f64,
        refinement_change: f64,
        stabilized: bool,
        per_sector_sup: Vec<f64>,
        gram_max_offdiag: f64,
        gram_k: u32,
    },
    OneLine {
        x0: f64,
        taper_mass: f64,
        degenerate: bool,
        base_checksum: String,
    },
}

// PartialEq for the wrapped core types is structural over floats, which is
// exactly what byte-stability needs.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub digest: ConstructionDigest,
    pub fourier: Vec<FourierProfile>,
    pub balls: Vec<BallProfile>,
    pub criteria: Vec<CriterionReport>,
    pub details: Details,
    /// Failed verification steps; empty means every check passed.
    pub failures: Vec<String>,
    /// Measured wall time never enters the canonical artifact (kept None so
    /// byte-identical replays stay byte-identical); the runner logs it.
    pub wall_time_ms: Option<u64>,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, digest: ConstructionDigest, details: Details) -> Self {
        RunReport {
            schema: REPORT_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            digest,
            fourier: Vec::new(),
            balls: Vec::new(),
            criteria: Vec::new(),
            details,
            failures: Vec::new(),
            wall_time_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad report: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Writes the canonical JSON and, when requested, one CSV per profile:
/// `<out>.bands<i>.csv` with columns (m, envelope) and `<out>.balls<i>.csv`
/// with columns (x, r, mass).
pub fn emit_report(report: &RunReport, formats: &[Format], out: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        let path = out.with_extension("json");
        std::fs::write(&path, report.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
        written.push(path);
    }
    if formats.contains(&Format::Csv) {
        for (i, profile) in report.fourier.iter().enumerate() {
            let path = out.with_extension(format!("bands{i}.csv"));
            std::fs::write(&path, profile.to_csv()).map_err(|e| CliError::Io(e.to_string()))?;
            written.push(path);
        }
        for (i, profile) in report.balls.iter().enumerate() {
            let path = out.with_extension(format!("balls{i}.csv"));
            std::fs::write(&path, profile.to_csv()).map_err(|e| CliError::Io(e.to_string()))?;
            written.push(path);
        }
    }
    Ok(written)
}
