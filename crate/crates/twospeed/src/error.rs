//! Error type shared by all solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TwoSpeedError {
    /// A region of the characteristic grid has too few interior nodes
    /// for second-order stencils.
    #[error("grid too coarse: region `{region}` has {found} interior nodes, need at least {need}")]
    DegenerateGrid {
        region: &'static str,
        found: usize,
        need: usize,
    },

    /// Characteristic data formulas require diag(A) = 0.
    #[error("gauge violation: diag(A) is not zero (max |a_ii| = {max_diag:.3e}); apply gauge_reduce first")]
    GaugeViolation { max_diag: f64 },

    /// Goursat data violates the corner compatibility p(0) - r(0) = q(0).
    #[error("incompatible Goursat data: |p(0) - r(0) - q(0)| = {defect:.3e} exceeds tolerance {tol:.3e}")]
    IncompatibleData { defect: f64, tol: f64 },

    /// Picard iteration failed to converge within the iteration budget.
    #[error("Picard iteration did not converge on window [{t0:.6}, {t1:.6}]: observed contraction ratio {ratio:.3}")]
    NonConvergence { t0: f64, t1: f64, ratio: f64 },

    /// A point or depth lies outside the domain where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Coefficient separation was requested without enough prior information.
    #[error("under-determined: separating off-diagonal dB and dA' needs a prior (two independent relations are required)")]
    UnderDetermined,

    /// Inputs do not satisfy the hypotheses of the stability estimate.
    #[error("stability hypothesis violated: {0}")]
    Hypothesis(String),

    /// Malformed run configuration.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TwoSpeedError>;
