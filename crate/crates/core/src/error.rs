use thiserror::Error;

/// Errors raised by the tube toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A time argument fell outside the horizon of the object it was evaluated on.
    #[error("time {t} outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    /// Invalid construction parameters or configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A normalized error left its funnel during closed-loop evaluation.
    #[error("funnel violation at t = {t}: e_hat_d = {e_hat_d}, e_hat_theta = {e_hat_theta}")]
    FunnelViolation {
        t: f64,
        e_hat_d: f64,
        e_hat_theta: f64,
    },

    /// Non-finite values where the preconditions rule them out.
    #[error("internal numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
