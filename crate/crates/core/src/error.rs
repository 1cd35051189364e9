use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("node ({pair}, {node}) is unservable: direct gain |h^H u|^2 is zero")]
    Unservable { pair: usize, node: usize },

    #[error(
        "power control diverged after {iterations} iterations: |p| = {norm:e}, growth ratio {growth_ratio}"
    )]
    Divergent {
        iterations: usize,
        norm: f64,
        /// `|p(m+1) - p(m)| / |p(m) - p(m-1)|` at the last step; estimates the
        /// spectral radius of the active coupling.
        growth_ratio: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
