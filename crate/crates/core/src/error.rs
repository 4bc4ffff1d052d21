use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unstable denominator: roots on or outside the unit circle: {}", fmt_roots(.roots))]
    UnstableDenominator { roots: Vec<Complex64> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance is not symmetric (max |S - S^T| = {asymmetry:e})")]
    AsymmetricCovariance { asymmetry: f64 },

    #[error("covariance is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("particle depletion at step {step}: no particle explains the observation")]
    ParticleDepletion { step: usize },

    #[error("dispersed phase posterior (resultant length {resultant:e})")]
    DispersedPhase { resultant: f64 },

    #[error("tracker failure at step {step}: {source}")]
    Tracker {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient samples: {available} after burn-in, need at least {required}")]
    InsufficientSamples { available: usize, required: usize },

    #[error("oracle self-inconsistency: quadrature {quadrature} bits vs Monte Carlo {monte_carlo} bits")]
    OracleDisagreement { quadrature: f64, monte_carlo: f64 },

    #[error("trellis forward recursion underflow at step {step}")]
    TrellisUnderflow { step: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Tracker { .. } => e,
            e => Error::Tracker {
                step,
                source: Box::new(e),
            },
        }
    }

    /// Short machine-readable tag, used in the CSV `status` column.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnstableDenominator { .. } => "unstable_model",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::AsymmetricCovariance { .. } => "asymmetric_covariance",
            Error::NotPositiveSemiDefinite { .. } => "not_psd",
            Error::ParticleDepletion { .. } => "particle_depletion",
            Error::DispersedPhase { .. } => "dispersed_phase",
            Error::Tracker { source, .. } => source.kind(),
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::OracleDisagreement { .. } => "oracle_disagreement",
            Error::TrellisUnderflow { .. } => "trellis_underflow",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

fn fmt_roots(roots: &[Complex64]) -> String {
    roots
        .iter()
        .map(|r| {
            if r.im == 0.0 {
                format!("{} (|r| = {})", r.re, r.norm())
            } else {
                format!("{}{:+}i (|r| = {})", r.re, r.im, r.norm())
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}
