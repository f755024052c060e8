use std::fmt;

use crate::transducer::PztCircuitParams;

pub type Result<T> = std::result::Result<T, Error>;

/// Best-so-far state of a least-squares fit that did not converge.
#[derive(Debug, Clone, PartialEq)]
pub struct FitFailure {
    pub best: PztCircuitParams,
    pub residual: f64,
    pub iterations: usize,
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "best R_E={:.6e} Ω, C_E={:.6e} F, Re'(Z_S)={:.6e} Ω, relative residual {:.3e} after {} iterations",
            self.best.r_e, self.best.c_e, self.best.re_zs_eff, self.residual, self.iterations
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("reflection coefficient is singular: load impedance equals -Z0")]
    Singular,

    #[error("fit did not converge: {0}")]
    Fit(Box<FitFailure>),

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("beam metrics undefined: {0}")]
    Metric(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
