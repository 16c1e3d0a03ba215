use std::path::PathBuf;

/// Errors produced by the identification library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step response evaluated at t = {t} before the control starts at T2 = {t2}")]
    BeforeControl { t: f64, t2: f64 },

    #[error("quadrature did not reach tolerance {tol:e} within {max_panels} panels")]
    QuadratureDiverged { tol: f64, max_panels: usize },

    #[error("trace has {len} samples, at least {min} are required")]
    TraceTooShort { len: usize, min: usize },

    #[error("Y0 is rank deficient at the requested order {order} (sigma_M = 0)")]
    RankDeficient { order: usize },

    #[error("pole {0} is not in (0, 1] and cannot be mapped to a decay rate")]
    NonPhysicalPole(f64),

    #[error("amplitude design matrix is rank deficient; closest rates are {0} and {1}")]
    CollinearRates(f64, f64),

    #[error("no detectable modes in the free-response window")]
    NoModes,

    #[error("alpha unrecoverable from controlled window")]
    AlphaUnrecoverable,

    #[error("rates {0} and {1} both map to mode index {2}; change the window or threshold")]
    AmbiguousIndex(f64, f64, usize),

    #[error("trace starts at {found}, expected the control switch time {expected}")]
    WindowMismatch { expected: f64, found: f64 },

    #[error("certificate unavailable (rho = {0} >= 1)")]
    CertificateUnavailable(f64),

    #[error("eigenvector matrix is numerically singular (sigma_min/sigma_max = {0:e}); pencil is not diagonalizable")]
    Defective(f64),

    #[error("mode index 0 carries no information about alpha")]
    ZeroModeIndex,

    #[error("truncation rank {k} exceeds numerical rank {rank}")]
    RankExceeded { k: usize, rank: usize },

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("bound hypothesis violated: {0}")]
    Hypothesis(String),

    /// An error raised inside one stage of the identification pipeline.
    #[error("{stage}: {source}")]
    InStage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::InStage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
