use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndiffError {
    #[error("Lambert W is only defined above -1/e (got x = {0})")]
    LambertDomain(f64),

    #[error("Lambert W did not converge at x = {x} (relative residual {residual:e})")]
    LambertNonConvergence { x: f64, residual: f64 },

    #[error("non-finite value for {name}: {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("correlation {0} outside the supported range |rho| <= 1 - 1e-6")]
    CorrelationOutOfRange(f64),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("unknown preset {0:?} (expected table1, table2 or table3)")]
    UnknownPreset(String),

    #[error("{condition} violated: requires {lhs} >= {rhs}")]
    ConditionViolated {
        condition: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("degenerate estimator: {0}")]
    Degenerate(&'static str),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("scenario file line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl IndiffError {
    /// True for failures of the numerics themselves rather than of the inputs.
    pub fn is_numerical_failure(&self) -> bool {
        matches!(
            self,
            IndiffError::LambertNonConvergence { .. } | IndiffError::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, IndiffError>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(IndiffError::NonFinite { name, value })
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(IndiffError::InvalidParameter {
            name,
            value,
            reason: "must be strictly positive",
        })
    }
}
