use thiserror::Error;

/// Errors shared by every construction and verification routine in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty measure")]
    EmptyMeasure,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("quadrature resolution {resolution} too low for |xi| = {xi} on interval of length {length} (need >= {needed})")]
    ResolutionTooLow {
        resolution: u64,
        xi: f64,
        length: f64,
        needed: u64,
    },

    #[error("too few usable bands: {have} after discarding, need at least {need}")]
    TooFewBands { have: usize, need: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("enumeration budget exceeded: {candidates} candidate vectors (cap {cap})")]
    EnumerationBudget { candidates: u128, cap: u128 },

    #[error("retry cap {cap} exceeded; best value found {best}")]
    RetryCapExceeded { cap: u64, best: f64 },

    #[error("x0 = {x0} is not in the support of the measure")]
    OutsideSupport { x0: f64 },

    #[error("band m = {m}: {source}")]
    Band {
        m: i32,
        #[source]
        source: Box<Error>,
    },

    #[error("oscillatory quadrature budget exceeded at |xi| = {xi} (panels {panels})")]
    QuadratureBudget { xi: f64, panels: usize },

    #[error("prime window empty at level {level}: q = {q} too small for h = {h}")]
    EmptyPrimeWindow { level: usize, q: f64, h: f64 },

    #[error("truncation budget infeasible for K_out = {k_out}: {why}")]
    TruncationBudget { k_out: i64, why: String },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("profile tag mismatch: {left:?} vs {right:?}")]
    TagMismatch {
        left: Option<String>,
        right: Option<String>,
    },

    #[error("path resolution {grid} is below 2^{level} required by the base measure")]
    PathResolution { grid: usize, level: u32 },

    #[error("parameter out of range: {0}")]
    BadParameter(String),

    #[error("pointwise comparison violated at x = {x}: {lhs} > {rhs}")]
    ComparisonViolation { x: f64, lhs: f64, rhs: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
