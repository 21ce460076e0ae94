use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("singular matrix (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    #[error("window of {window} s is not commensurate with {freq} Hz")]
    NonCommensurate { freq: f64, window: f64 },

    #[error("degenerate excitation: I_d^2 + I_q^2 vanishes")]
    DegenerateExcitation,

    #[error("vanishing denominator at f_dq = {f_dq} Hz")]
    Degenerate { f_dq: f64 },

    #[error("injections are linearly dependent (condition {cond:.3e})")]
    LinearDependence { cond: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("simulation diverged at t = {t:.4} s")]
    Divergence { t: f64 },

    #[error("steady-state gate failed: last two fundamental periods differ by {mismatch:.3e} pu")]
    NotSteady { mismatch: f64 },

    #[error("no equilibrium found (residual {residual:.3e})")]
    NoEquilibrium { residual: f64 },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
