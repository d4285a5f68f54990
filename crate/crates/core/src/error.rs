use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("coincident points: diffraction distance is zero")]
    ZeroDistance,

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eig:e} (tolerance {tol:e}) in {context}")]
    NotPsd {
        context: &'static str,
        min_eig: f64,
        tol: f64,
    },

    #[error("matrix is numerically singular in {0}")]
    Singular(&'static str),

    #[error("pilot bookkeeping: {0}")]
    Pilots(String),

    #[error("negative SINR denominator {denominator:e} for UE {ue}: {terms}")]
    NegativeDenominator {
        ue: usize,
        denominator: f64,
        terms: String,
    },

    #[error("power control: {0}")]
    PowerControl(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
