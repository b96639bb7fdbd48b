use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability P({outcome}|{setting}) = {value} is outside [0, 1]")]
    NotAProbability {
        setting: &'static str,
        outcome: &'static str,
        value: f64,
    },

    #[error("row for setting {setting} sums to {sum}, expected 1")]
    NotNormalized { setting: &'static str, sum: f64 },

    #[error("input bit must be 0 or 1, got {0}")]
    InvalidBit(usize),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("vector {name} has norm {norm}, expected a unit vector")]
    NotUnitVector { name: &'static str, norm: f64 },

    #[error("measurement frame violates the planar dot-product contract: {0}")]
    FrameContract(String),

    #[error("no feasible point in the search region")]
    EmptyRegion,

    #[error("invalid search bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("shot count must be positive")]
    ZeroShots,

    #[error("setting {setting} has {total} counts, expected {expected}")]
    CountMismatch {
        setting: &'static str,
        total: u64,
        expected: u64,
    },

    #[error("at least {min} bootstrap resamples are required, got {got}")]
    TooFewResamples { min: usize, got: usize },

    #[error("csv export failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
